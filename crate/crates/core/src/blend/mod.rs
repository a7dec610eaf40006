//! Front-to-back alpha compositing of sorted splats, one tile at a time.
//!
//! Two backends share the per-pixel compositing rules and differ only in how
//! the Gaussian falloff exponent ("power") is produced: [`reference`]
//! evaluates it scalar per (splat, pixel) pair, [`gemm`] batches it as a
//! matrix multiply. [`pipeline`] drives either backend through a staged,
//! double-buffered fetch/compute loop whose output is bit-identical to plain
//! sequential execution.

pub mod gemm;
pub mod pipeline;
pub mod reference;

use std::fmt;

use crate::scene::Conic;

/// Contributions with alpha below this are skipped.
pub const ALPHA_SKIP: f32 = 1.0 / 255.0;
/// Alpha is clamped here before compositing.
pub const ALPHA_CLAMP: f32 = 0.99;
/// Default transmittance floor for early termination.
pub const DEFAULT_TERMINATION: f32 = 1e-4;

/// Multiply-accumulates per (splat, pixel) pair on the scalar path: three
/// coordinate products and three coefficient terms.
pub const SCALAR_MACS_PER_PAIR: u64 = 6;
/// Multiply-accumulates per padded (splat, pixel) pair in the micro-kernel.
pub const GEMM_MACS_PER_PAIR: u64 = gemm::INNER_PADDED as u64;

/// Which blending implementation produces the powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Reference,
    Gemm,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Reference => "reference",
            Backend::Gemm => "gemm",
        })
    }
}

/// Arithmetic mode of the matrix backend. `Mixed` rounds matrix entries to
/// half precision before multiplying while accumulating in single precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Full,
    Mixed,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Full => "full",
            Precision::Mixed => "mixed",
        })
    }
}

/// Where the tile's reference pixel sits. Intra-tile pixel coordinates are
/// expressed relative to this point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefPixel {
    /// The tile's top-left pixel: relative coordinates are the exact
    /// integers 0..tile_size-1.
    TopLeft,
    /// The tile center: relative coordinates are symmetric around zero.
    Center,
}

impl RefPixel {
    /// Intra-tile coordinates of the reference pixel itself.
    pub fn local_coords(self, tile_size: usize) -> [f32; 2] {
        match self {
            RefPixel::TopLeft => [0.0, 0.0],
            RefPixel::Center => {
                let c = (tile_size as f32 - 1.0) / 2.0;
                [c, c]
            }
        }
    }
}

/// Pixel coordinate layout of one tile relative to its reference pixel.
#[derive(Debug, Clone)]
pub struct TileLayout {
    pub tile_size: usize,
    pub ref_pixel: RefPixel,
    /// Relative coordinates of pixel j (row-major over the tile).
    coords: Vec<[f32; 2]>,
}

impl TileLayout {
    pub fn new(tile_size: usize, ref_pixel: RefPixel) -> TileLayout {
        let pc = ref_pixel.local_coords(tile_size);
        let coords = (0..tile_size * tile_size)
            .map(|j| {
                [
                    (j % tile_size) as f32 - pc[0],
                    (j / tile_size) as f32 - pc[1],
                ]
            })
            .collect();
        TileLayout {
            tile_size,
            ref_pixel,
            coords,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.tile_size * self.tile_size
    }

    pub fn rel_coords(&self, pixel: usize) -> [f32; 2] {
        self.coords[pixel]
    }
}

/// Per-splat data staged into a tile's blend loop. The center is stored
/// relative to the tile's reference pixel so both backends and the pipeline
/// buffers consume the same record.
#[derive(Debug, Clone, Copy)]
pub struct FeatureRecord {
    pub conic: Conic,
    /// Splat center minus the tile's reference pixel.
    pub center: [f32; 2],
    pub opacity: f32,
    pub color: [f32; 3],
    /// Index into the retained splat array.
    pub splat: u32,
}

/// Blending parameters shared by every tile of a frame.
#[derive(Debug, Clone, Copy)]
pub struct BlendSettings {
    pub backend: Backend,
    pub precision: Precision,
    pub batch_size: usize,
    /// A pixel stops once its tentative transmittance would drop below this.
    pub termination_threshold: f32,
    pub background: [f32; 3],
}

/// Work counters for the latency/arithmetic report. All values are exact and
/// deterministic for a given scene and configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlendCounters {
    /// (splat, live pixel) pairs evaluated by the scalar path.
    pub scalar_pairs: u64,
    /// Scalar multiply-accumulates, 6 per pair.
    pub scalar_macs: u64,
    /// Padded (splat, pixel) pairs produced by the micro-kernel, including
    /// zero-padded rows and columns.
    pub gemm_pairs: u64,
    /// Micro-kernel multiply-accumulates, 8 per padded pair.
    pub gemm_macs: u64,
}

impl BlendCounters {
    pub fn merge(&mut self, other: &BlendCounters) {
        self.scalar_pairs += other.scalar_pairs;
        self.scalar_macs += other.scalar_macs;
        self.gemm_pairs += other.gemm_pairs;
        self.gemm_macs += other.gemm_macs;
    }
}

/// Colors and final transmittance of one fully blended tile, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TilePixels {
    pub rgb: Vec<[f32; 3]>,
    pub transmittance: Vec<f32>,
}

/// Front-to-back compositing state for one tile.
///
/// Transmittance starts at one and never increases; a terminated pixel's
/// color is frozen. The splat that would push transmittance below the
/// termination threshold is not composited.
pub struct TileBlender {
    transmittance: Vec<f32>,
    color: Vec<[f32; 3]>,
    done: Vec<bool>,
    live: usize,
    termination_threshold: f32,
}

impl TileBlender {
    pub fn new(pixel_count: usize, termination_threshold: f32) -> TileBlender {
        TileBlender {
            transmittance: vec![1.0; pixel_count],
            color: vec![[0.0; 3]; pixel_count],
            done: vec![false; pixel_count],
            live: pixel_count,
            termination_threshold,
        }
    }

    pub fn all_done(&self) -> bool {
        self.live == 0
    }

    /// Composites one batch with powers evaluated directly per pair.
    pub fn blend_scalar(
        &mut self,
        records: &[FeatureRecord],
        layout: &TileLayout,
        counters: &mut BlendCounters,
    ) {
        let pixels = layout.pixel_count();
        let mut pairs = 0u64;
        for rec in records {
            if self.live == 0 {
                break;
            }
            for j in 0..pixels {
                if self.done[j] {
                    continue;
                }
                let [px, py] = layout.rel_coords(j);
                let dx = px - rec.center[0];
                let dy = py - rec.center[1];
                let power = reference::power_ref(&rec.conic, [dx, dy]);
                pairs += 1;
                self.composite(j, power, rec);
            }
        }
        counters.scalar_pairs += pairs;
        counters.scalar_macs += pairs * SCALAR_MACS_PER_PAIR;
    }

    /// Composites one batch with powers read from a precomputed matrix,
    /// row i = records[i], column j = pixel j. Kernel work is counted by the
    /// caller at the matrix level.
    pub fn blend_powers(
        &mut self,
        records: &[FeatureRecord],
        powers: &gemm::PowerMatrix,
        pixel_count: usize,
    ) {
        for (i, rec) in records.iter().enumerate() {
            if self.live == 0 {
                break;
            }
            for j in 0..pixel_count {
                if self.done[j] {
                    continue;
                }
                // The exact exponent is non-positive for positive-definite
                // conics. The factored route carries an absolute rounding
                // floor from its large intermediate terms, which could land
                // just above zero at a splat's center and flip the skip
                // guard where alpha is largest; restore the sign invariant
                // before compositing.
                self.composite(j, powers.get(i, j).min(0.0), rec);
            }
        }
    }

    #[inline]
    fn composite(&mut self, j: usize, power: f32, rec: &FeatureRecord) {
        if power > 0.0 {
            return;
        }
        let alpha = (rec.opacity * power.exp()).min(ALPHA_CLAMP);
        if alpha < ALPHA_SKIP {
            return;
        }
        let t = self.transmittance[j];
        let test_t = t * (1.0 - alpha);
        if test_t < self.termination_threshold {
            self.done[j] = true;
            self.live -= 1;
            return;
        }
        for ch in 0..3 {
            self.color[j][ch] += rec.color[ch] * alpha * t;
        }
        self.transmittance[j] = test_t;
    }

    /// Applies the background and yields the finished tile.
    pub fn finish(self, background: [f32; 3]) -> TilePixels {
        let mut rgb = self.color;
        for (c, &t) in rgb.iter_mut().zip(&self.transmittance) {
            for ch in 0..3 {
                c[ch] += background[ch] * t;
            }
        }
        TilePixels {
            rgb,
            transmittance: self.transmittance,
        }
    }
}
