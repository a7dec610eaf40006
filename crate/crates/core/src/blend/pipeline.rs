//! Staged tile execution with double-buffered batch fetch.
//!
//! Each tile runs a three-stage loop over its sorted splat list:
//!
//! 1. fetch the next batch's indices and feature records from the global
//!    splat array into a buffer slot,
//! 2. construct the batch's Gaussian matrix (matrix backend only),
//! 3. multiply and volume-render the batch.
//!
//! Indices, features and the Gaussian matrix each have exactly two buffer
//! slots. With prefetch enabled, stage 1 of batch n+1 fills the inactive
//! slot concurrently with stages 2-3 of batch n on the active slot. The
//! stages read only through the slots, so the schedule is a pure
//! latency-hiding mechanism: output is bit-identical to sequential
//! execution, and a prefetched batch left unconsumed by early termination is
//! simply discarded.

use std::ops::Range;

use super::gemm::{gemm_block, padded_pairs, GaussianMatrix, PixelMatrix, PowerMatrix};
use super::{
    Backend, BlendCounters, BlendSettings, FeatureRecord, TileBlender, TileLayout, TilePixels,
    GEMM_MACS_PER_PAIR,
};
use crate::binning::SortKey;
use crate::scene::Splat2D;

/// One buffer slot of the double buffer.
struct Slot {
    indices: Vec<u32>,
    features: Vec<FeatureRecord>,
    gaussian_matrix: GaussianMatrix,
}

impl Slot {
    fn new() -> Slot {
        Slot {
            indices: Vec::new(),
            features: Vec::new(),
            gaussian_matrix: GaussianMatrix::new(),
        }
    }

    /// Stage 1: gather one batch's indices and features. The per-tile center
    /// offset is folded into the record here so later stages never touch the
    /// global arrays.
    fn fetch(&mut self, splats: &[Splat2D], keys: &[SortKey], reference_pixel: [f32; 2]) {
        self.indices.clear();
        self.features.clear();
        for key in keys {
            let idx = key.splat;
            let s = &splats[idx as usize];
            self.indices.push(idx);
            self.features.push(FeatureRecord {
                conic: s.conic,
                center: [
                    s.center.x - reference_pixel[0],
                    s.center.y - reference_pixel[1],
                ],
                opacity: s.opacity,
                color: s.color,
                splat: idx,
            });
        }
    }
}

/// Shared read-only inputs for blending one frame's tiles.
pub struct TileContext<'a> {
    pub splats: &'a [Splat2D],
    pub keys: &'a [SortKey],
    pub layout: &'a TileLayout,
    /// Pre-rounded when the settings ask for mixed precision.
    pub pixel_matrix: &'a PixelMatrix,
    pub settings: &'a BlendSettings,
}

/// Blends the tile whose sorted keys occupy `key_range`, with its top-left
/// pixel at `tile_origin`. `prefetch` selects the staged schedule; the frame
/// contents are identical either way.
pub fn run_tile(
    ctx: &TileContext<'_>,
    key_range: Range<usize>,
    tile_origin: [f32; 2],
    prefetch: bool,
) -> (TilePixels, BlendCounters) {
    let settings = ctx.settings;
    let pixel_count = ctx.layout.pixel_count();
    let mut blender = TileBlender::new(pixel_count, settings.termination_threshold);
    let mut counters = BlendCounters::default();
    let mut powers = PowerMatrix::new();

    let keys = &ctx.keys[key_range];
    let pc_local = ctx.layout.ref_pixel.local_coords(ctx.layout.tile_size);
    let reference_pixel = [tile_origin[0] + pc_local[0], tile_origin[1] + pc_local[1]];
    let batches: Vec<&[SortKey]> = keys.chunks(settings.batch_size.max(1)).collect();

    let compute = |slot: &mut Slot,
                       blender: &mut TileBlender,
                       powers: &mut PowerMatrix,
                       counters: &mut BlendCounters| {
        match settings.backend {
            Backend::Reference => {
                blender.blend_scalar(&slot.features, ctx.layout, counters);
            }
            Backend::Gemm => {
                // Stage 2: construct the batch matrix in the slot.
                slot.gaussian_matrix.fill(&slot.features, settings.precision);
                // Stage 3: multiply, then volume-render from the powers.
                gemm_block(&slot.gaussian_matrix, ctx.pixel_matrix, powers)
                    .expect("padded shapes are block multiples");
                let pairs = padded_pairs(&slot.gaussian_matrix, ctx.pixel_matrix);
                counters.gemm_pairs += pairs;
                counters.gemm_macs += pairs * GEMM_MACS_PER_PAIR;
                blender.blend_powers(&slot.features, powers, pixel_count);
            }
        }
    };

    if prefetch {
        let mut slots = [Slot::new(), Slot::new()];
        let mut active = 0usize;
        if let Some(first) = batches.first() {
            slots[active].fetch(ctx.splats, first, reference_pixel);
        }
        for n in 0..batches.len() {
            let (left, right) = slots.split_at_mut(1);
            let (active_slot, inactive_slot) = if active == 0 {
                (&mut left[0], &mut right[0])
            } else {
                (&mut right[0], &mut left[0])
            };
            if n + 1 < batches.len() {
                // Stage 1 of batch n+1 overlaps stages 2-3 of batch n.
                rayon::join(
                    || inactive_slot.fetch(ctx.splats, batches[n + 1], reference_pixel),
                    || compute(active_slot, &mut blender, &mut powers, &mut counters),
                );
            } else {
                compute(active_slot, &mut blender, &mut powers, &mut counters);
            }
            if blender.all_done() {
                // Remaining batches never run; any in-flight prefetch result
                // is dropped with the slots.
                break;
            }
            active ^= 1;
        }
    } else {
        let mut slot = Slot::new();
        for batch in &batches {
            slot.fetch(ctx.splats, batch, reference_pixel);
            compute(&mut slot, &mut blender, &mut powers, &mut counters);
            if blender.all_done() {
                break;
            }
        }
    }

    (blender.finish(settings.background), counters)
}
