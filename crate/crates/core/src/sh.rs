//! View-dependent color from real spherical harmonics, degree <= 3.
//!
//! Coefficient ordering matches the scene layout: index 0 is the DC term,
//! then degree 1 (y, z, x), degree 2 and degree 3 bands.

use nalgebra::Vector3;

use crate::scene::SH_COEFF_COUNT;

const C0: f32 = 0.282_094_79;
const C1: f32 = 0.488_602_51;
const C2: [f32; 5] = [
    1.092_548_4,
    -1.092_548_4,
    0.315_391_57,
    -1.092_548_4,
    0.546_274_2,
];
const C3: [f32; 7] = [
    -0.590_043_6,
    2.890_611_4,
    -0.457_045_8,
    0.373_176_33,
    -0.457_045_8,
    1.445_305_7,
    -0.590_043_6,
];

/// Basis values for a unit direction, 16 entries.
pub fn sh_basis(dir: Vector3<f32>) -> [f32; SH_COEFF_COUNT] {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    [
        C0,
        -C1 * y,
        C1 * z,
        -C1 * x,
        C2[0] * xy,
        C2[1] * yz,
        C2[2] * (2.0 * zz - xx - yy),
        C2[3] * xz,
        C2[4] * (xx - yy),
        C3[0] * y * (3.0 * xx - yy),
        C3[1] * xy * z,
        C3[2] * y * (4.0 * zz - xx - yy),
        C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        C3[4] * x * (4.0 * zz - xx - yy),
        C3[5] * z * (xx - yy),
        C3[6] * x * (xx - 3.0 * yy),
    ]
}

/// Evaluates the color of a primitive seen from `view_dir` (unit length):
/// the SH expansion plus the 0.5 offset, clamped to non-negative per channel.
pub fn eval_color(sh: &[[f32; 3]; SH_COEFF_COUNT], view_dir: Vector3<f32>) -> [f32; 3] {
    debug_assert!((view_dir.norm() - 1.0).abs() < 1e-5);
    let basis = sh_basis(view_dir);
    let mut rgb = [0.0f32; 3];
    for (b, coeff) in basis.iter().zip(sh.iter()) {
        for ch in 0..3 {
            rgb[ch] += b * coeff[ch];
        }
    }
    rgb.map(|v| (v + 0.5).max(0.0))
}
