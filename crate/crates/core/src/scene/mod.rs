//! Scene and camera domain types plus file ingestion.
//!
//! Scenes are flat lists of [`Gaussian3D`] primitives loaded from the binary
//! point-cloud export format described in [`ply`]; cameras come from a plain
//! text key-value file described in [`camera_io`]. Both types are immutable
//! after load and safe to share read-only across workers.

mod camera_io;
mod ply;

pub use camera_io::{load_camera, save_camera, CameraError};
pub use ply::{load_scene, save_scene, SceneError};

use nalgebra::{Matrix4, Quaternion, UnitQuaternion, Vector2, Vector3};

/// Spherical-harmonic coefficients per color channel (degree 3).
pub const SH_COEFF_COUNT: usize = 16;

/// Per-primitive values exactly as stored on disk, before activations.
///
/// Kept alongside the activated values so that a loaded scene can be written
/// back bit-exactly; the activations (exp, sigmoid) are not invertible at the
/// bit level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawGaussian {
    pub log_scale: [f32; 3],
    pub opacity_logit: f32,
    /// Quaternion as stored, (w, x, y, z), not necessarily unit length.
    pub rotation: [f32; 4],
}

/// A trained scene primitive with activations applied.
#[derive(Debug, Clone)]
pub struct Gaussian3D {
    pub position: Vector3<f32>,
    /// Per-axis standard deviations; `exp` of the stored log-scale.
    pub scale: Vector3<f32>,
    pub rotation: UnitQuaternion<f32>,
    /// `sigmoid` of the stored logit, in (0, 1).
    pub opacity: f32,
    /// 16 coefficients per channel: the DC triple first, then the 15
    /// higher-order values per channel (channel-major on disk).
    pub sh: [[f32; 3]; SH_COEFF_COUNT],
    pub raw: RawGaussian,
}

/// Violation found while applying activations to raw primitive values.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ActivationError {
    #[error("non-finite value in property '{0}'")]
    NonFinite(&'static str),
    #[error("scale activation left the open range (0, inf): exp({0}) = {1}")]
    ScaleSaturated(f32, f32),
    #[error("opacity activation left the open interval (0, 1): sigmoid({0}) = {1}")]
    OpacitySaturated(f32, f32),
    #[error("rotation quaternion has zero norm")]
    ZeroRotation,
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

impl Gaussian3D {
    /// Builds a primitive from on-disk values, applying the activations:
    /// exp on scale, sigmoid on opacity, normalization of the rotation.
    ///
    /// Fails when a value is non-finite or an activation saturates out of its
    /// open range; invariant violations are never silently clamped.
    pub fn from_raw(
        position: [f32; 3],
        raw: RawGaussian,
        sh: [[f32; 3]; SH_COEFF_COUNT],
    ) -> Result<Self, ActivationError> {
        if position.iter().any(|v| !v.is_finite()) {
            return Err(ActivationError::NonFinite("position"));
        }
        if sh.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ActivationError::NonFinite("sh coefficients"));
        }

        let mut scale = [0.0f32; 3];
        for (out, &ls) in scale.iter_mut().zip(&raw.log_scale) {
            if !ls.is_finite() {
                return Err(ActivationError::NonFinite("scale"));
            }
            let s = ls.exp();
            if !(s > 0.0 && s.is_finite()) {
                return Err(ActivationError::ScaleSaturated(ls, s));
            }
            *out = s;
        }

        if !raw.opacity_logit.is_finite() {
            return Err(ActivationError::NonFinite("opacity"));
        }
        let opacity = sigmoid(raw.opacity_logit);
        if !(opacity > 0.0 && opacity < 1.0) {
            return Err(ActivationError::OpacitySaturated(raw.opacity_logit, opacity));
        }

        if raw.rotation.iter().any(|v| !v.is_finite()) {
            return Err(ActivationError::NonFinite("rotation"));
        }
        let [w, x, y, z] = raw.rotation;
        let q = Quaternion::new(w, x, y, z);
        if q.norm() == 0.0 {
            return Err(ActivationError::ZeroRotation);
        }
        let rotation = UnitQuaternion::from_quaternion(q);

        Ok(Gaussian3D {
            position: Vector3::new(position[0], position[1], position[2]),
            scale: Vector3::new(scale[0], scale[1], scale[2]),
            rotation,
            opacity,
            sh,
            raw,
        })
    }

    /// How far the stored quaternion was from unit length.
    pub fn rotation_norm_deviation(&self) -> f32 {
        let [w, x, y, z] = self.raw.rotation;
        (Quaternion::new(w, x, y, z).norm() - 1.0).abs()
    }
}

/// A pinhole camera with a rigid world-to-camera transform.
///
/// Pixel sample points sit at integer coordinates: pixel (i, j) is sampled at
/// image-plane coordinate (i, j), so a symmetric view has its principal point
/// at ((width - 1) / 2, (height - 1) / 2).
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub world_to_camera: Matrix4<f32>,
    pub focal_x: f32,
    pub focal_y: f32,
    pub cx: f32,
    pub cy: f32,
    pub width: u32,
    pub height: u32,
    /// Camera-space depth below which primitives are culled.
    pub near_plane: f32,
}

impl Camera {
    pub fn validate(&self) -> Result<(), CameraError> {
        if self.width < 1 || self.height < 1 {
            return Err(CameraError::NonPositiveResolution {
                width: self.width,
                height: self.height,
            });
        }
        if !(self.focal_x > 0.0) || !(self.focal_y > 0.0) {
            return Err(CameraError::NonPositiveFocal {
                fx: self.focal_x,
                fy: self.focal_y,
            });
        }
        if !(self.near_plane > 0.0) {
            return Err(CameraError::NonPositiveNear(self.near_plane));
        }
        Ok(())
    }

    /// Camera origin in world space, `-R^T t` of the rigid transform.
    pub fn position(&self) -> Vector3<f32> {
        let r = self.world_to_camera.fixed_view::<3, 3>(0, 0);
        let t = self.world_to_camera.fixed_view::<3, 1>(0, 3);
        -(r.transpose() * t)
    }

    pub fn tan_half_fov_x(&self) -> f32 {
        self.width as f32 / (2.0 * self.focal_x)
    }

    pub fn tan_half_fov_y(&self) -> f32 {
        self.height as f32 / (2.0 * self.focal_y)
    }

    /// Same view at `factor` times the resolution.
    ///
    /// Intrinsics scale so pixel areas map consistently: a sample coordinate u
    /// maps to `factor * u + (factor - 1) / 2`.
    pub fn scaled(&self, factor: u32) -> Camera {
        let f = factor as f32;
        let off = (f - 1.0) / 2.0;
        Camera {
            world_to_camera: self.world_to_camera,
            focal_x: self.focal_x * f,
            focal_y: self.focal_y * f,
            cx: self.cx * f + off,
            cy: self.cy * f + off,
            width: self.width * factor,
            height: self.height * factor,
            near_plane: self.near_plane,
        }
    }
}

/// The three unique entries (A, B, C) of an inverse 2D covariance matrix
/// [[A, B], [B, C]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic {
    pub a: f32,
    pub b: f32,
    pub c: f32,
}

impl Conic {
    pub fn det(&self) -> f32 {
        self.a * self.c - self.b * self.b
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0.0 && self.c > 0.0 && self.det() > 0.0
    }
}

/// A Gaussian after projection to the image plane.
#[derive(Debug, Clone, Copy)]
pub struct Splat2D {
    /// Projected center in pixel coordinates.
    pub center: Vector2<f32>,
    pub conic: Conic,
    /// Evaluated RGB, linear and unclamped above zero.
    pub color: [f32; 3],
    /// In (0, 1); the 0.99 clamp is applied at blend time.
    pub opacity: f32,
    /// Camera-space depth, greater than the near plane.
    pub depth: f32,
}
