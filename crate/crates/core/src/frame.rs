//! Frame buffer, 8-bit export, and frame comparison metrics.

use std::io::{self, Write};

/// A rendered frame: linear RGB plus per-pixel final transmittance,
/// row-major. Values are clamped to [0, 1] only on export.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderFrame {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[f32; 3]>,
    pub transmittance: Vec<f32>,
}

impl RenderFrame {
    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        self.rgb[(y * self.width + x) as usize]
    }

    /// Clamped, quantized 8-bit RGB bytes.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.rgb.len() * 3);
        for px in &self.rgb {
            for &c in px {
                out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    /// Binary portable pixmap (P6). Dependency-free and bit-exact, the
    /// format used for golden images.
    pub fn write_ppm(&self, mut w: impl Write) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.to_rgb8())
    }
}

/// Peak signal-to-noise ratio between two frames over clamped linear values,
/// peak 1.0. `None` when the frames are identical (infinite PSNR).
pub fn psnr(a: &RenderFrame, b: &RenderFrame) -> Option<f64> {
    assert_eq!(a.rgb.len(), b.rgb.len());
    let mut sum_sq = 0.0f64;
    let mut n = 0usize;
    for (pa, pb) in a.rgb.iter().zip(&b.rgb) {
        for ch in 0..3 {
            let d = (pa[ch].clamp(0.0, 1.0) - pb[ch].clamp(0.0, 1.0)) as f64;
            sum_sq += d * d;
            n += 1;
        }
    }
    let mse = sum_sq / n as f64;
    if mse == 0.0 {
        None
    } else {
        Some(-10.0 * mse.log10())
    }
}

/// Largest per-channel absolute deviation over clamped values.
pub fn max_channel_deviation(a: &RenderFrame, b: &RenderFrame) -> f32 {
    assert_eq!(a.rgb.len(), b.rgb.len());
    let mut max = 0.0f32;
    for (pa, pb) in a.rgb.iter().zip(&b.rgb) {
        for ch in 0..3 {
            max = max.max((pa[ch].clamp(0.0, 1.0) - pb[ch].clamp(0.0, 1.0)).abs());
        }
    }
    max
}

/// Histogram of per-pixel maximum channel error in 1/255-wide buckets.
/// Bucket 0 holds exact matches; the last bucket collects everything at or
/// beyond (buckets - 1)/255.
pub fn deviation_histogram(a: &RenderFrame, b: &RenderFrame, buckets: usize) -> Vec<u64> {
    assert!(buckets >= 2);
    let mut hist = vec![0u64; buckets];
    for (pa, pb) in a.rgb.iter().zip(&b.rgb) {
        let mut err = 0.0f32;
        for ch in 0..3 {
            err = err.max((pa[ch].clamp(0.0, 1.0) - pb[ch].clamp(0.0, 1.0)).abs());
        }
        let slot = if err == 0.0 {
            0
        } else {
            ((err * 255.0).ceil() as usize).min(buckets - 1)
        };
        hist[slot] += 1;
    }
    hist
}
