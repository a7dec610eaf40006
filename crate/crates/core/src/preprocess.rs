//! Pipeline stage 1: frustum culling, 3D-to-2D projection, conic
//! computation, color evaluation, and per-splat tile rectangles.
//!
//! All functions are pure over immutable scene data and are run in parallel
//! across Gaussians by the renderer; output order always equals input order.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector4};

use crate::scene::{Camera, Conic, Gaussian3D, Splat2D};
use crate::sh;

/// Added to both diagonal entries of the 2D covariance before inversion.
/// Keeps sub-pixel splats from aliasing and guarantees invertibility.
pub const LOW_PASS_DILATION: f32 = 0.3;

/// Splats are retained while their center stays within this multiple of the
/// view frustum, so tails reaching into the frame still render.
pub const FRUSTUM_GUARD: f32 = 1.3;

/// 2D covariances with a determinant at or below this are culled, never
/// clamped.
pub const MIN_COV2D_DET: f32 = 1e-12;

/// Bounding radius in units of the largest 2D standard deviation. Must stay
/// at or above sqrt(2 ln 255) ~ 3.32904: beyond that distance
/// opacity * exp(power) is below the 1/255 blending skip threshold for any
/// opacity under one, so the tile rectangle is conservative.
pub const RADIUS_SIGMA: f32 = 3.33;

/// Fixed-size square pixel tiles covering a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
}

impl TileGrid {
    pub fn new(width: u32, height: u32, tile_size: usize) -> TileGrid {
        assert!(tile_size >= 1);
        TileGrid {
            tile_size,
            tiles_x: (width as usize).div_ceil(tile_size),
            tiles_y: (height as usize).div_ceil(tile_size),
        }
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Pixel coordinates of the tile's top-left pixel.
    pub fn tile_origin(&self, tile: usize) -> [f32; 2] {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        [(tx * self.tile_size) as f32, (ty * self.tile_size) as f32]
    }
}

/// Inclusive rectangle of tiles a splat's bounding box overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TouchedTiles {
    pub tx_min: u32,
    pub tx_max: u32,
    pub ty_min: u32,
    pub ty_max: u32,
}

impl TouchedTiles {
    pub fn count(&self) -> usize {
        (self.tx_max - self.tx_min + 1) as usize * (self.ty_max - self.ty_min + 1) as usize
    }
}

/// Projects one Gaussian to the image plane.
///
/// Returns `None` when the center is behind the near plane, outside the
/// guard-banded frustum, or the dilated 2D covariance is numerically
/// non-positive-definite. Retained splats always carry a positive-definite
/// conic and a depth greater than the near plane.
pub fn project_gaussian(g: &Gaussian3D, cam: &Camera) -> Option<Splat2D> {
    let p = cam.world_to_camera * Vector4::new(g.position.x, g.position.y, g.position.z, 1.0);
    let z = p.z;
    if z <= cam.near_plane {
        return None;
    }
    let xz = p.x / z;
    let yz = p.y / z;
    if xz.abs() > FRUSTUM_GUARD * cam.tan_half_fov_x()
        || yz.abs() > FRUSTUM_GUARD * cam.tan_half_fov_y()
    {
        return None;
    }

    // 3D covariance R diag(s^2) R^T.
    let rot = g.rotation.to_rotation_matrix();
    let m = rot.matrix() * Matrix3::from_diagonal(&g.scale);
    let cov3 = m * m.transpose();

    // Perspective Jacobian at the center, composed with the view rotation.
    let jacobian = Matrix2x3::new(
        cam.focal_x / z,
        0.0,
        -cam.focal_x * p.x / (z * z),
        0.0,
        cam.focal_y / z,
        -cam.focal_y * p.y / (z * z),
    );
    let view_rot = cam.world_to_camera.fixed_view::<3, 3>(0, 0).into_owned();
    let t = jacobian * view_rot;
    let mut cov2: Matrix2<f32> = t * cov3 * t.transpose();
    cov2[(0, 0)] += LOW_PASS_DILATION;
    cov2[(1, 1)] += LOW_PASS_DILATION;

    let det = cov2[(0, 0)] * cov2[(1, 1)] - cov2[(0, 1)] * cov2[(1, 0)];
    if det <= MIN_COV2D_DET {
        return None;
    }
    let conic = Conic {
        a: cov2[(1, 1)] / det,
        b: -cov2[(0, 1)] / det,
        c: cov2[(0, 0)] / det,
    };
    if !conic.is_positive_definite() {
        return None;
    }

    let view_dir = (g.position - cam.position()).normalize();
    let color = sh::eval_color(&g.sh, view_dir);

    Some(Splat2D {
        center: Vector2::new(cam.focal_x * xz + cam.cx, cam.focal_y * yz + cam.cy),
        conic,
        color,
        opacity: g.opacity,
        depth: z,
    })
}

/// Tiles overlapping the splat's axis-aligned bounding box, center plus or
/// minus [`RADIUS_SIGMA`] times the largest 2D standard deviation. `None`
/// means the box misses the grid and the splat is dropped.
pub fn touched_tiles(s: &Splat2D, grid: &TileGrid) -> Option<TouchedTiles> {
    // Recover the covariance from the conic and take its largest eigenvalue.
    let det_conic = s.conic.det();
    let cov_xx = s.conic.c / det_conic;
    let cov_yy = s.conic.a / det_conic;
    let cov_xy = -s.conic.b / det_conic;
    let mid = 0.5 * (cov_xx + cov_yy);
    let det_cov = cov_xx * cov_yy - cov_xy * cov_xy;
    let lambda_max = mid + (mid * mid - det_cov).max(0.0).sqrt();
    let radius = RADIUS_SIGMA * lambda_max.sqrt();

    let ts = grid.tile_size as f32;
    let tx_min = ((s.center.x - radius) / ts).floor();
    let tx_max = ((s.center.x + radius) / ts).floor();
    let ty_min = ((s.center.y - radius) / ts).floor();
    let ty_max = ((s.center.y + radius) / ts).floor();

    let tx_min = (tx_min.max(0.0) as usize).min(grid.tiles_x);
    let ty_min = (ty_min.max(0.0) as usize).min(grid.tiles_y);
    if tx_max < 0.0 || ty_max < 0.0 {
        return None;
    }
    let tx_max = (tx_max as usize).min(grid.tiles_x - 1);
    let ty_max = (ty_max as usize).min(grid.tiles_y - 1);
    if tx_min > tx_max || ty_min > ty_max {
        return None;
    }
    Some(TouchedTiles {
        tx_min: tx_min as u32,
        tx_max: tx_max as u32,
        ty_min: ty_min as u32,
        ty_max: ty_max as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RawGaussian;
    use approx::assert_relative_eq;
    use nalgebra::Matrix4;

    fn test_camera() -> Camera {
        Camera {
            world_to_camera: Matrix4::identity(),
            focal_x: 100.0,
            focal_y: 100.0,
            cx: 63.5,
            cy: 63.5,
            width: 128,
            height: 128,
            near_plane: 0.2,
        }
    }

    fn isotropic(position: [f32; 3], log_scale: f32) -> Gaussian3D {
        Gaussian3D::from_raw(
            position,
            RawGaussian {
                log_scale: [log_scale; 3],
                opacity_logit: 0.0,
                rotation: [1.0, 0.0, 0.0, 0.0],
            },
            [[0.0; 3]; 16],
        )
        .unwrap()
    }

    #[test]
    fn radius_covers_the_alpha_skip_threshold() {
        assert!((RADIUS_SIGMA as f64).powi(2) >= 2.0 * (255.0f64).ln());
    }

    #[test]
    fn behind_near_plane_is_culled() {
        let cam = test_camera();
        assert!(project_gaussian(&isotropic([0.0, 0.0, 0.1], -2.0), &cam).is_none());
        assert!(project_gaussian(&isotropic([0.0, 0.0, -3.0], -2.0), &cam).is_none());
    }

    #[test]
    fn outside_guard_band_is_culled() {
        let cam = test_camera();
        // tan_half_fov = 0.64, guard band 1.3x -> cull beyond x/z = 0.832.
        assert!(project_gaussian(&isotropic([4.1, 0.0, 5.0], -2.0), &cam).is_some());
        assert!(project_gaussian(&isotropic([4.3, 0.0, 5.0], -2.0), &cam).is_none());
    }

    /// Symbolic Jacobian oracle for the on-axis isotropic case: with identity
    /// pose and the center on the optical axis at depth z, the Jacobian is
    /// diag(f/z, f/z) and the 2D covariance is (f s / z)^2 I plus dilation.
    #[test]
    fn on_axis_isotropic_matches_symbolic_jacobian() {
        let cam = test_camera();
        for (log_s, z) in [(-2.0f32, 4.0f32), (-3.5, 2.0), (-1.0, 9.0)] {
            let s = log_s.exp() as f64;
            let splat = project_gaussian(&isotropic([0.0, 0.0, z], log_s), &cam).unwrap();
            let expected = (100.0 * s / z as f64).powi(2) + LOW_PASS_DILATION as f64;
            let det = expected * expected; // diagonal covariance
            let expected_a = expected / det;
            assert_relative_eq!(splat.conic.a as f64, expected_a, max_relative = 1e-5);
            assert_relative_eq!(splat.conic.c as f64, expected_a, max_relative = 1e-5);
            assert_eq!(splat.conic.b, 0.0);
            assert_eq!(splat.depth, z);
            assert_relative_eq!(splat.center.x, 63.5);
        }
    }

    #[test]
    fn retained_splats_have_positive_definite_conics() {
        use rand::{Rng, RngExt, SeedableRng};
        let cam = test_camera();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut retained = 0;
        for _ in 0..500 {
            let g = Gaussian3D::from_raw(
                [
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(0.5..12.0),
                ],
                RawGaussian {
                    log_scale: [
                        rng.random_range(-6.0..0.0),
                        rng.random_range(-6.0..0.0),
                        rng.random_range(-6.0..0.0),
                    ],
                    opacity_logit: rng.random_range(-2.0..2.0),
                    rotation: [
                        rng.random_range(-1.0..1.0f32),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ],
                },
                [[0.1; 3]; 16],
            );
            let g = match g {
                Ok(g) => g,
                Err(_) => continue, // zero-norm rotation draw
            };
            if let Some(s) = project_gaussian(&g, &cam) {
                retained += 1;
                assert!(s.conic.is_positive_definite());
                assert!(s.depth > cam.near_plane);
            }
        }
        assert!(retained > 100);
    }

    #[test]
    fn projection_is_deterministic() {
        let cam = test_camera();
        let g = isotropic([0.5, -0.25, 3.0], -2.0);
        let a = project_gaussian(&g, &cam).unwrap();
        let b = project_gaussian(&g, &cam).unwrap();
        assert_eq!(a.center, b.center);
        assert_eq!(a.conic, b.conic);
        assert_eq!(a.color, b.color);
        assert_eq!(a.depth, b.depth);
    }

    #[test]
    fn small_splat_touches_one_tile() {
        let grid = TileGrid::new(128, 128, 16);
        let s = Splat2D {
            center: Vector2::new(24.0, 24.0),
            conic: Conic {
                a: 1.0,
                b: 0.0,
                c: 1.0,
            },
            color: [1.0; 3],
            opacity: 0.5,
            depth: 1.0,
        };
        // sigma_max = 1, radius ~ 3.33 < 8 pixels of margin.
        let t = touched_tiles(&s, &grid).unwrap();
        assert_eq!((t.tx_min, t.tx_max, t.ty_min, t.ty_max), (1, 1, 1, 1));
        assert_eq!(t.count(), 1);
    }

    #[test]
    fn corner_splat_touches_four_tiles() {
        let grid = TileGrid::new(128, 128, 16);
        let s = Splat2D {
            // Centered exactly on the corner shared by tiles (0,0)..(1,1).
            center: Vector2::new(16.0, 16.0),
            conic: Conic {
                a: 4.0,
                b: 0.0,
                c: 4.0,
            },
            color: [1.0; 3],
            opacity: 0.5,
            depth: 1.0,
        };
        let t = touched_tiles(&s, &grid).unwrap();
        assert_eq!((t.tx_min, t.tx_max, t.ty_min, t.ty_max), (0, 1, 0, 1));
        assert_eq!(t.count(), 4);
    }

    #[test]
    fn off_grid_splat_is_dropped() {
        let grid = TileGrid::new(128, 128, 16);
        let s = Splat2D {
            center: Vector2::new(-40.0, 64.0),
            conic: Conic {
                a: 1.0,
                b: 0.0,
                c: 1.0,
            },
            color: [1.0; 3],
            opacity: 0.5,
            depth: 1.0,
        };
        assert!(touched_tiles(&s, &grid).is_none());
    }

    /// Exhaustive scan oracle on a small frame: every pixel whose directly
    /// evaluated alpha exceeds 1/255 must land inside a touched tile.
    #[test]
    fn touched_tiles_is_conservative_for_alpha_skip() {
        use rand::{Rng, RngExt, SeedableRng};
        let grid = TileGrid::new(64, 64, 16);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            // Random positive-definite conic via a random covariance.
            let sx: f32 = rng.random_range(0.3..6.0);
            let sy: f32 = rng.random_range(0.3..6.0);
            let theta: f32 = rng.random_range(0.0..std::f32::consts::PI);
            let (sin, cos) = theta.sin_cos();
            let cov_xx = cos * cos * sx * sx + sin * sin * sy * sy;
            let cov_yy = sin * sin * sx * sx + cos * cos * sy * sy;
            let cov_xy = sin * cos * (sx * sx - sy * sy);
            let det = cov_xx * cov_yy - cov_xy * cov_xy;
            let s = Splat2D {
                center: Vector2::new(rng.random_range(-10.0..74.0), rng.random_range(-10.0..74.0)),
                conic: Conic {
                    a: cov_yy / det,
                    b: -cov_xy / det,
                    c: cov_xx / det,
                },
                color: [1.0; 3],
                opacity: rng.random_range(0.9..0.999),
                depth: 1.0,
            };
            let touched = touched_tiles(&s, &grid);
            for py in 0..64 {
                for px in 0..64 {
                    let dx = s.center.x - px as f32;
                    let dy = s.center.y - py as f32;
                    let power = -0.5 * s.conic.a * dx * dx
                        - s.conic.b * dx * dy
                        - 0.5 * s.conic.c * dy * dy;
                    let alpha = (s.opacity * power.exp()).min(0.99);
                    if alpha >= 1.0 / 255.0 {
                        let (tx, ty) = (px / 16, py / 16);
                        let t = touched.expect("contributing splat must touch tiles");
                        assert!(
                            tx >= t.tx_min as usize
                                && tx <= t.tx_max as usize
                                && ty >= t.ty_min as usize
                                && ty <= t.ty_max as usize,
                            "pixel ({px},{py}) alpha {alpha} outside touched rectangle"
                        );
                    }
                }
            }
        }
    }
}
