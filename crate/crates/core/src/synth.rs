//! Seeded synthetic scenes and cameras for tests and demos.

use nalgebra::Matrix4;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scene::{Camera, Gaussian3D, RawGaussian, SH_COEFF_COUNT};

/// Identity-pose camera at the origin looking down +z.
pub fn camera(width: u32, height: u32) -> Camera {
    Camera {
        world_to_camera: Matrix4::identity(),
        focal_x: 0.8 * width as f32,
        focal_y: 0.8 * width as f32,
        cx: (width as f32 - 1.0) / 2.0,
        cy: (height as f32 - 1.0) / 2.0,
        width,
        height,
        near_plane: 0.2,
    }
}

/// A reproducible random scene inside the default camera's frustum: mixed
/// anisotropic shapes, opacities spanning the skip threshold up to nearly
/// opaque, and mild view-dependent color.
pub fn scene(seed: u64, count: usize) -> Vec<Gaussian3D> {
    scene_with(seed, count, -6.0..-2.3)
}

/// [`scene`] with an explicit log-scale range, to keep screen-space splat
/// sizes reasonable at other resolutions.
pub fn scene_with(seed: u64, count: usize, log_scale: std::ops::Range<f32>) -> Vec<Gaussian3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z: f32 = rng.random_range(2.0..12.0);
            let spread = 0.55 * z;
            let position = [
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
                z,
            ];
            let raw = RawGaussian {
                log_scale: [
                    rng.random_range(log_scale.clone()),
                    rng.random_range(log_scale.clone()),
                    rng.random_range(log_scale.clone()),
                ],
                opacity_logit: rng.random_range(-3.0..6.0),
                rotation: random_rotation(&mut rng),
            };
            // Display-referred colors: the DC range keeps evaluated channels
            // within [0, 1] so quantization-level comparisons stay meaningful.
            let mut sh = [[0.0f32; 3]; SH_COEFF_COUNT];
            for ch in 0..3 {
                sh[0][ch] = rng.random_range(-1.0..1.4);
            }
            for coeff in sh.iter_mut().skip(1) {
                for ch in 0..3 {
                    coeff[ch] = rng.random_range(-0.04..0.04);
                }
            }
            Gaussian3D::from_raw(position, raw, sh).expect("synthetic ranges cannot saturate")
        })
        .collect()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [f32; 4] {
    loop {
        let q: [f32; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let norm_sq: f32 = q.iter().map(|v| v * v).sum();
        if norm_sq > 1e-3 {
            return q;
        }
    }
}
