//! Matrix-multiply blending backend.
//!
//! With pixel coordinates expressed relative to a fixed reference pixel
//! inside the tile, the falloff exponent factors into a dot product of two
//! six-dimensional vectors: one per splat per tile ([`GaussianVector`]) and
//! one per pixel, identical across tiles ([`PixelMatrix`]). A whole batch of
//! splats against a whole tile of pixels is then one matrix multiply,
//! executed here by a cache-blocked 16x8 micro-kernel over an inner
//! dimension of 6 zero-padded to 8.

use half::f16;

use super::{
    BlendCounters, FeatureRecord, Precision, RefPixel, TileBlender, TileLayout, TilePixels,
    GEMM_MACS_PER_PAIR,
};
use crate::scene::Conic;

/// Rows of the output block handled per micro-kernel step.
pub const ROW_BLOCK: usize = 16;
/// Columns of the output block handled per micro-kernel step.
pub const COL_BLOCK: usize = 8;
/// Logical inner dimension of the factorization.
pub const INNER_DIM: usize = 6;
/// Inner dimension padded inside the kernel; the two extra lanes are zero.
pub const INNER_PADDED: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GemmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Rounds through half precision, emulating a 16-bit matrix operand.
#[inline]
pub fn round_to_half(x: f32) -> f32 {
    f16::from_f32(x).to_f32()
}

/// The per-splat six-vector of the factored falloff exponent.
///
/// Built from the conic (A, B, C) and the splat center's offset from the
/// tile's reference pixel. Dotting it with a pixel's coordinate vector
/// [x^2, y^2, xy, x, y, 1] yields exactly the scalar exponent for that
/// (splat, pixel) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianVector(pub [f32; 6]);

impl GaussianVector {
    /// `center` is the splat center minus the reference pixel. The pixel
    /// vectors carry positive intra-tile offsets, so the dot product
    /// evaluates the (even) quadratic form at pixel minus center.
    pub fn new(conic: &Conic, center: [f32; 2]) -> GaussianVector {
        let Conic { a, b, c } = *conic;
        let [x, y] = center;
        GaussianVector([
            -0.5 * a,
            -0.5 * c,
            -b,
            a * x + b * y,
            c * y + b * x,
            -0.5 * a * x * x - 0.5 * c * y * y - b * x * y,
        ])
    }
}

/// The tile-universal 6 x P pixel matrix, column j = [x^2, y^2, xy, x, y, 1]
/// for pixel j's intra-tile coordinates (row-major pixel order).
///
/// Built once per render and shared read-only by every tile; stored with the
/// inner dimension padded to 8 rows and the columns padded to a multiple of
/// the kernel's column block, all padding zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMatrix {
    pixels: usize,
    cols_padded: usize,
    /// INNER_PADDED rows x cols_padded, row-major.
    data: Vec<f32>,
}

/// Builds the pixel matrix for one tile shape. Identical for every tile of a
/// frame by construction.
pub fn build_pixel_matrix(tile_size: usize, ref_pixel: RefPixel) -> PixelMatrix {
    assert!(tile_size >= 1);
    let layout = TileLayout::new(tile_size, ref_pixel);
    let pixels = layout.pixel_count();
    let columns: Vec<[f32; INNER_DIM]> = (0..pixels)
        .map(|j| {
            let [x, y] = layout.rel_coords(j);
            [x * x, y * y, x * y, x, y, 1.0]
        })
        .collect();
    PixelMatrix::from_columns(&columns)
}

impl PixelMatrix {
    /// Packs explicit columns; rows 6..7 and any padding columns are zero.
    pub fn from_columns(columns: &[[f32; INNER_DIM]]) -> PixelMatrix {
        let pixels = columns.len();
        let cols_padded = pixels.div_ceil(COL_BLOCK).max(1) * COL_BLOCK;
        let mut data = vec![0.0f32; INNER_PADDED * cols_padded];
        for (j, col) in columns.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                data[r * cols_padded + j] = v;
            }
        }
        PixelMatrix {
            pixels,
            cols_padded,
            data,
        }
    }

    /// Logical column count (pixels per tile).
    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn cols_padded(&self) -> usize {
        self.cols_padded
    }

    /// One padded row, length [`cols_padded`](Self::cols_padded).
    pub fn row(&self, r: usize) -> &[f32] {
        debug_assert!(r < INNER_PADDED);
        &self.data[r * self.cols_padded..(r + 1) * self.cols_padded]
    }

    pub fn entry(&self, r: usize, j: usize) -> f32 {
        debug_assert!(r < INNER_DIM && j < self.pixels);
        self.data[r * self.cols_padded + j]
    }

    /// Copy with every entry rounded through half precision.
    pub fn rounded_to_half(&self) -> PixelMatrix {
        PixelMatrix {
            pixels: self.pixels,
            cols_padded: self.cols_padded,
            data: self.data.iter().map(|&v| round_to_half(v)).collect(),
        }
    }
}

/// A batch of splat vectors, rows padded to a multiple of the row block with
/// zero vectors so the kernel shape stays fixed.
#[derive(Debug, Clone)]
pub struct GaussianMatrix {
    rows_used: usize,
    rows_padded: usize,
    /// rows_padded x INNER_PADDED, row-major.
    data: Vec<f32>,
}

impl GaussianMatrix {
    pub fn new() -> GaussianMatrix {
        GaussianMatrix {
            rows_used: 0,
            rows_padded: 0,
            data: Vec::new(),
        }
    }

    pub fn from_records(records: &[FeatureRecord], precision: Precision) -> GaussianMatrix {
        let mut m = GaussianMatrix::new();
        m.fill(records, precision);
        m
    }

    pub fn from_vectors(vectors: &[GaussianVector]) -> GaussianMatrix {
        let mut m = GaussianMatrix::new();
        m.rows_used = vectors.len();
        m.rows_padded = vectors.len().div_ceil(ROW_BLOCK).max(1) * ROW_BLOCK;
        m.data = vec![0.0; m.rows_padded * INNER_PADDED];
        for (i, v) in vectors.iter().enumerate() {
            m.data[i * INNER_PADDED..i * INNER_PADDED + INNER_DIM].copy_from_slice(&v.0);
        }
        m
    }

    /// Rebuilds the batch in place. In mixed precision every entry is rounded
    /// through half precision after construction.
    pub fn fill(&mut self, records: &[FeatureRecord], precision: Precision) {
        self.rows_used = records.len();
        self.rows_padded = records.len().div_ceil(ROW_BLOCK).max(1) * ROW_BLOCK;
        self.data.clear();
        self.data.resize(self.rows_padded * INNER_PADDED, 0.0);
        for (i, rec) in records.iter().enumerate() {
            let v = GaussianVector::new(&rec.conic, rec.center);
            let row = &mut self.data[i * INNER_PADDED..i * INNER_PADDED + INNER_DIM];
            row.copy_from_slice(&v.0);
            if precision == Precision::Mixed {
                for x in row {
                    *x = round_to_half(*x);
                }
            }
        }
    }

    pub fn rows_used(&self) -> usize {
        self.rows_used
    }

    pub fn rows_padded(&self) -> usize {
        self.rows_padded
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * INNER_PADDED..(i + 1) * INNER_PADDED]
    }
}

impl Default for GaussianMatrix {
    fn default() -> Self {
        GaussianMatrix::new()
    }
}

/// Batch-by-pixels exponent matrix, output of the kernel.
#[derive(Debug, Clone)]
pub struct PowerMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl PowerMatrix {
    pub fn new() -> PowerMatrix {
        PowerMatrix {
            rows: 0,
            cols: 0,
            data: Vec::new(),
        }
    }

    fn reset(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.clear();
        self.data.resize(rows * cols, 0.0);
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }
}

impl Default for PowerMatrix {
    fn default() -> Self {
        PowerMatrix::new()
    }
}

/// Blocked matrix multiply: `out[i][j] = sum_k mg[i][k] * mp[k][j]`,
/// accumulated in single precision, k ascending.
///
/// Walks 16x8 output blocks over the 8-lane padded inner dimension; the
/// operand shapes must be multiples of the block sizes (guaranteed by the
/// padded constructors, checked here).
pub fn gemm_block(
    mg: &GaussianMatrix,
    mp: &PixelMatrix,
    out: &mut PowerMatrix,
) -> Result<(), GemmError> {
    let rows = mg.rows_padded();
    let cols = mp.cols_padded();
    if rows == 0 || rows % ROW_BLOCK != 0 {
        return Err(GemmError::DimensionMismatch(format!(
            "{rows} rows is not a positive multiple of the {ROW_BLOCK}-row block"
        )));
    }
    if cols == 0 || cols % COL_BLOCK != 0 {
        return Err(GemmError::DimensionMismatch(format!(
            "{cols} columns is not a positive multiple of the {COL_BLOCK}-column block"
        )));
    }
    out.reset(rows, cols);
    for rb in (0..rows).step_by(ROW_BLOCK) {
        for cb in (0..cols).step_by(COL_BLOCK) {
            for r in rb..rb + ROW_BLOCK {
                let arow = mg.row(r);
                let mut acc = [0.0f32; COL_BLOCK];
                for (k, &a) in arow.iter().enumerate() {
                    let brow = &mp.row(k)[cb..cb + COL_BLOCK];
                    for (sum, &b) in acc.iter_mut().zip(brow) {
                        *sum += a * b;
                    }
                }
                out.data[r * cols + cb..r * cols + cb + COL_BLOCK].copy_from_slice(&acc);
            }
        }
    }
    Ok(())
}

/// Number of padded (splat, pixel) pairs one kernel invocation produces.
pub fn padded_pairs(mg: &GaussianMatrix, mp: &PixelMatrix) -> u64 {
    mg.rows_padded() as u64 * mp.cols_padded() as u64
}

/// Blends one tile batch-by-batch through the matrix path. Identical
/// compositing rules to the scalar backend, with the exponent read from the
/// power matrix; once every pixel has terminated the remaining batches are
/// skipped.
pub fn blend_tile_gemm(
    records: &[FeatureRecord],
    layout: &TileLayout,
    pixel_matrix: &PixelMatrix,
    batch_size: usize,
    precision: Precision,
    termination_threshold: f32,
    background: [f32; 3],
    counters: &mut BlendCounters,
) -> TilePixels {
    assert!(batch_size >= 1);
    assert_eq!(pixel_matrix.pixels(), layout.pixel_count());
    let mut blender = TileBlender::new(layout.pixel_count(), termination_threshold);
    let mut mg = GaussianMatrix::new();
    let mut powers = PowerMatrix::new();
    for batch in records.chunks(batch_size) {
        mg.fill(batch, precision);
        gemm_block(&mg, pixel_matrix, &mut powers).expect("padded shapes are block multiples");
        counters.gemm_pairs += padded_pairs(&mg, pixel_matrix);
        counters.gemm_macs += padded_pairs(&mg, pixel_matrix) * GEMM_MACS_PER_PAIR;
        blender.blend_powers(batch, &powers, layout.pixel_count());
        if blender.all_done() {
            break;
        }
    }
    blender.finish(background)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blend::reference::{blend_tile_ref, power_ref};
    use crate::blend::DEFAULT_TERMINATION;
    use rand::{Rng, RngExt, SeedableRng};

    #[test]
    fn pixel_matrix_tile_size_one() {
        let mp = build_pixel_matrix(1, RefPixel::TopLeft);
        assert_eq!(mp.pixels(), 1);
        let col: Vec<f32> = (0..INNER_DIM).map(|r| mp.entry(r, 0)).collect();
        assert_eq!(col, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn pixel_matrix_column_at_3_4() {
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        let j = 4 * 16 + 3;
        let col: Vec<f32> = (0..INNER_DIM).map(|r| mp.entry(r, j)).collect();
        assert_eq!(col, vec![9.0, 16.0, 12.0, 3.0, 4.0, 1.0]);
    }

    /// Closed-form series oracle for the row sums at tile size 16:
    /// sum k = n(n-1)/2 and sum k^2 = n(n-1)(2n-1)/6 per axis.
    #[test]
    fn pixel_matrix_row_sums_match_series() {
        let n = 16u64;
        let sum_k = (n * (n - 1) / 2) as f64; // 120
        let sum_k2 = (n * (n - 1) * (2 * n - 1) / 6) as f64; // 1240
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        let row_sum = |r: usize| -> f64 {
            (0..mp.pixels()).map(|j| mp.entry(r, j) as f64).sum()
        };
        assert_eq!(row_sum(0), 16.0 * sum_k2);
        assert_eq!(row_sum(1), 16.0 * sum_k2);
        assert_eq!(row_sum(2), sum_k * sum_k);
        assert_eq!(row_sum(3), 16.0 * sum_k);
        assert_eq!(row_sum(4), 16.0 * sum_k);
        assert_eq!(row_sum(5), 256.0);
    }

    #[test]
    fn pixel_matrix_structure_invariants() {
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        for j in 0..mp.pixels() {
            assert_eq!(mp.entry(5, j), 1.0); // last logical row all ones
            assert_eq!(mp.entry(0, j), mp.entry(3, j) * mp.entry(3, j));
            assert_eq!(mp.entry(1, j), mp.entry(4, j) * mp.entry(4, j));
            assert_eq!(mp.entry(2, j), mp.entry(3, j) * mp.entry(4, j));
        }
        // Padded lanes are zero.
        for r in INNER_DIM..INNER_PADDED {
            assert!(mp.row(r).iter().all(|&v| v == 0.0));
        }
        // Rebuilding yields the identical matrix: tile-invariant by construction.
        assert_eq!(mp, build_pixel_matrix(16, RefPixel::TopLeft));
    }

    #[test]
    fn gaussian_vector_frozen_example() {
        let conic = Conic {
            a: 2.0,
            b: 1.0,
            c: 3.0,
        };
        // Splat center one pixel left, two up of the reference pixel.
        let v = GaussianVector::new(&conic, [-1.0, -2.0]);
        assert_eq!(v.0, [-1.0, -1.5, -1.0, -4.0, -7.0, -9.0]);

        // Dotted with pixel (3, 4), the exponent equals the direct expansion
        // at coordinate difference (4, 6).
        let vp = [9.0f32, 16.0, 12.0, 3.0, 4.0, 1.0];
        let dot: f32 = v.0.iter().zip(&vp).map(|(a, b)| a * b).sum();
        assert_eq!(dot, -94.0);
        assert_eq!(dot, power_ref(&conic, [4.0, 6.0]));
    }

    #[test]
    fn gaussian_vector_sign_invariants() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a: f32 = rng.random_range(0.05..5.0);
            let c: f32 = rng.random_range(0.05..5.0);
            let b = rng.random_range(-0.99..0.99) * (a * c).sqrt();
            let v = GaussianVector::new(
                &Conic { a, b, c },
                [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)],
            );
            assert!(v.0[0] < 0.0);
            assert!(v.0[1] < 0.0);
            assert!(v.0[5] <= 0.0);
        }
    }

    /// The central equivalence: the dot product agrees with the direct
    /// expansion for every tile pixel.
    #[test]
    fn dot_product_matches_power_ref() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let layout = TileLayout::new(16, RefPixel::TopLeft);
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        for _ in 0..500 {
            let a: f32 = rng.random_range(0.02..4.0);
            let c: f32 = rng.random_range(0.02..4.0);
            let b = rng.random_range(-0.95..0.95) * (a * c).sqrt();
            let conic = Conic { a, b, c };
            let center = [rng.random_range(-24.0..40.0), rng.random_range(-24.0..40.0)];
            let v = GaussianVector::new(&conic, center);
            for j in [0usize, 1, 17, 130, 255] {
                let dot: f32 = (0..INNER_DIM).map(|r| v.0[r] * mp.entry(r, j)).sum();
                let [px, py] = layout.rel_coords(j);
                let direct = power_ref(&conic, [px - center[0], py - center[1]]);
                let tol = 1e-4 * direct.abs().max(1.0);
                assert!(
                    (dot - direct).abs() <= tol,
                    "dot {dot} vs direct {direct} at pixel {j}"
                );
            }
        }
    }

    #[test]
    fn kernel_zero_matrix_gives_zero() {
        let mg = GaussianMatrix::from_vectors(&[GaussianVector([0.0; 6]); 16]);
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        let mut out = PowerMatrix::new();
        gemm_block(&mg, &mp, &mut out).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kernel_basis_rows_extract_pixel_rows() {
        let mut vectors = Vec::new();
        for k in 0..INNER_DIM {
            let mut v = [0.0f32; 6];
            v[k] = 1.0;
            vectors.push(GaussianVector(v));
        }
        let mg = GaussianMatrix::from_vectors(&vectors);
        let mp = build_pixel_matrix(8, RefPixel::TopLeft);
        let mut out = PowerMatrix::new();
        gemm_block(&mg, &mp, &mut out).unwrap();
        for k in 0..INNER_DIM {
            for j in 0..mp.pixels() {
                assert_eq!(out.get(k, j), mp.entry(k, j));
            }
        }
        // Zero-padded rows of the batch produce zero output rows.
        for i in vectors.len()..mg.rows_padded() {
            for j in 0..out.cols() {
                assert_eq!(out.get(i, j), 0.0);
            }
        }
    }

    /// Naive triple-loop oracle over random operands.
    #[test]
    fn kernel_matches_naive_triple_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rows = 256;
            let vectors: Vec<GaussianVector> = (0..rows)
                .map(|_| GaussianVector(std::array::from_fn(|_| rng.random_range(-4.0..4.0))))
                .collect();
            let columns: Vec<[f32; INNER_DIM]> = (0..256)
                .map(|_| std::array::from_fn(|_| rng.random_range(-4.0..4.0)))
                .collect();
            let mg = GaussianMatrix::from_vectors(&vectors);
            let mp = PixelMatrix::from_columns(&columns);
            let mut out = PowerMatrix::new();
            gemm_block(&mg, &mp, &mut out).unwrap();
            for (i, v) in vectors.iter().enumerate() {
                for (j, col) in columns.iter().enumerate() {
                    let mut naive = 0.0f32;
                    for k in 0..INNER_DIM {
                        naive += v.0[k] * col[k];
                    }
                    let got = out.get(i, j);
                    assert!(
                        (got - naive).abs() <= 1e-5 * naive.abs().max(1.0),
                        "({i},{j}): {got} vs {naive}"
                    );
                }
            }
        }
    }

    #[test]
    fn mixed_precision_rounds_through_half() {
        assert_eq!(round_to_half(1.0), 1.0);
        assert_eq!(round_to_half(0.0), 0.0);
        let x = 0.1f32;
        let r = round_to_half(x);
        assert_ne!(r, x);
        assert!((r - x).abs() < 1e-3);
    }

    fn random_records(rng: &mut impl Rng, n: usize, tile_size: usize) -> Vec<FeatureRecord> {
        (0..n)
            .map(|_| {
                let a: f32 = rng.random_range(0.02..2.0);
                let c: f32 = rng.random_range(0.02..2.0);
                let b = rng.random_range(-0.9..0.9) * (a * c).sqrt();
                FeatureRecord {
                    conic: Conic { a, b, c },
                    center: [
                        rng.random_range(-4.0..tile_size as f32 + 4.0),
                        rng.random_range(-4.0..tile_size as f32 + 4.0),
                    ],
                    opacity: rng.random_range(0.05..0.995),
                    color: [
                        rng.random_range(0.0..1.2),
                        rng.random_range(0.0..1.2),
                        rng.random_range(0.0..1.2),
                    ],
                    splat: 0,
                }
            })
            .collect()
    }

    #[test]
    fn zero_splats_yield_background() {
        let layout = TileLayout::new(16, RefPixel::TopLeft);
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        let mut counters = BlendCounters::default();
        let out = blend_tile_gemm(
            &[],
            &layout,
            &mp,
            256,
            Precision::Full,
            DEFAULT_TERMINATION,
            [0.3, 0.2, 0.1],
            &mut counters,
        );
        assert!(out.rgb.iter().all(|c| *c == [0.3, 0.2, 0.1]));
        assert!(out.transmittance.iter().all(|&t| t == 1.0));
        assert_eq!(counters.gemm_pairs, 0);
    }

    /// Full-precision parity against the scalar backend on random tiles.
    #[test]
    fn full_precision_stays_within_quantization_of_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let layout = TileLayout::new(16, RefPixel::TopLeft);
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        let mut total = 0usize;
        let mut within_one = 0usize;
        for round in 0..30 {
            let records = random_records(&mut rng, 40 + round * 10, 16);
            let mut c1 = BlendCounters::default();
            let mut c2 = BlendCounters::default();
            let reference =
                blend_tile_ref(&records, &layout, DEFAULT_TERMINATION, [0.0; 3], &mut c1);
            let gemm = blend_tile_gemm(
                &records,
                &layout,
                &mp,
                256,
                Precision::Full,
                DEFAULT_TERMINATION,
                [0.0; 3],
                &mut c2,
            );
            for (a, b) in reference.rgb.iter().zip(&gemm.rgb) {
                for ch in 0..3 {
                    let d = (a[ch].clamp(0.0, 1.0) - b[ch].clamp(0.0, 1.0)).abs();
                    assert!(d <= 2.0 / 255.0, "deviation {d}");
                    total += 1;
                    if d <= 1.0 / 255.0 {
                        within_one += 1;
                    }
                }
            }
        }
        assert!(within_one as f64 >= 0.999 * total as f64);
    }

    /// A partial final batch must blend identically to one giant batch.
    #[test]
    fn partial_batch_equals_unbatched() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let layout = TileLayout::new(16, RefPixel::TopLeft);
        let mp = build_pixel_matrix(16, RefPixel::TopLeft);
        let records = random_records(&mut rng, 300, 16);
        let mut c1 = BlendCounters::default();
        let mut c2 = BlendCounters::default();
        let batched = blend_tile_gemm(
            &records,
            &layout,
            &mp,
            256,
            Precision::Full,
            DEFAULT_TERMINATION,
            [0.1; 3],
            &mut c1,
        );
        let unbatched = blend_tile_gemm(
            &records,
            &layout,
            &mp,
            300,
            Precision::Full,
            DEFAULT_TERMINATION,
            [0.1; 3],
            &mut c2,
        );
        assert_eq!(batched, unbatched);
        // 256 splats pad to 256 rows, 44 pad to 48: (256 + 48) * 256 pairs.
        assert_eq!(c1.gemm_pairs, (256 + 48) * 256);
        assert_eq!(c1.gemm_macs, c1.gemm_pairs * 8);
    }

    /// Mixed mode is exactly "round both operands through half precision,
    /// then multiply-accumulate in single precision": the kernel output must
    /// be bit-identical to a naive loop over the rounded operands. Quality
    /// against full precision is reported, never asserted.
    #[test]
    fn mixed_precision_matches_rounded_operand_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let layout = TileLayout::new(16, RefPixel::TopLeft);
        let mp_half = build_pixel_matrix(16, RefPixel::TopLeft).rounded_to_half();
        let records = random_records(&mut rng, 40, 16);

        let mg = GaussianMatrix::from_records(&records, Precision::Mixed);
        let mut out = PowerMatrix::new();
        gemm_block(&mg, &mp_half, &mut out).unwrap();
        for (i, rec) in records.iter().enumerate() {
            let v = GaussianVector::new(&rec.conic, rec.center);
            let rounded: Vec<f32> = v.0.iter().map(|&x| round_to_half(x)).collect();
            for j in 0..mp_half.pixels() {
                let mut naive = 0.0f32;
                for (k, &a) in rounded.iter().enumerate() {
                    naive += a * mp_half.entry(k, j);
                }
                assert_eq!(out.get(i, j), naive);
            }
        }

        // The rounding must actually perturb something, and the composite
        // must stay valid.
        let mut c = BlendCounters::default();
        let mixed = blend_tile_gemm(
            &records,
            &layout,
            &mp_half,
            256,
            Precision::Mixed,
            DEFAULT_TERMINATION,
            [0.0; 3],
            &mut c,
        );
        let full_mg = GaussianMatrix::from_records(&records, Precision::Full);
        assert_ne!(full_mg.row(0), mg.row(0));
        for (&t, px) in mixed.transmittance.iter().zip(&mixed.rgb) {
            assert!((0.0..=1.0).contains(&t));
            assert!(px.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
