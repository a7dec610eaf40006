//! Scalar per-pixel blending: the ground-truth backend.
//!
//! Every (splat, pixel) pair evaluates the falloff exponent directly from the
//! conic and the coordinate difference, then composites front to back.

use super::{BlendCounters, FeatureRecord, TileBlender, TileLayout, TilePixels};
use crate::scene::Conic;

/// Falloff exponent of a splat at coordinate offset `delta` from its center:
/// -A dx^2 / 2 - B dx dy - C dy^2 / 2.
///
/// Non-positive for positive-definite conics and any non-zero offset; the
/// quadratic form is even, so the sign of `delta` does not matter.
#[inline]
pub fn power_ref(conic: &Conic, delta: [f32; 2]) -> f32 {
    let [dx, dy] = delta;
    -0.5 * conic.a * dx * dx - conic.b * dx * dy - 0.5 * conic.c * dy * dy
}

/// Blends one tile's sorted records in a single pass and applies the
/// background. Counter totals accumulate into `counters`.
pub fn blend_tile_ref(
    records: &[FeatureRecord],
    layout: &TileLayout,
    termination_threshold: f32,
    background: [f32; 3],
    counters: &mut BlendCounters,
) -> TilePixels {
    let mut blender = TileBlender::new(layout.pixel_count(), termination_threshold);
    blender.blend_scalar(records, layout, counters);
    blender.finish(background)
}
