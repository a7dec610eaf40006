//! Pipeline stages 2-3: duplicate splats per touched tile, sort by
//! (tile, depth) keys, and derive contiguous per-tile ranges.

use std::ops::Range;

use crate::preprocess::{TileGrid, TouchedTiles};
use crate::scene::Splat2D;

/// One (splat, tile) pairing, sortable as a single unsigned 64-bit value.
///
/// The tile id occupies the high 32 bits; the low 32 bits are the raw binary
/// pattern of the (strictly positive) depth, whose unsigned order equals
/// ascending depth order. Sorting therefore gathers each tile's splats
/// front to back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortKey {
    pub key: u64,
    /// Index into the retained splat array.
    pub splat: u32,
}

impl SortKey {
    pub fn new(tile_id: u32, depth: f32, splat: u32) -> SortKey {
        debug_assert!(depth > 0.0, "depth bits only order positive depths");
        SortKey {
            key: (tile_id as u64) << 32 | depth.to_bits() as u64,
            splat,
        }
    }

    pub fn tile_id(&self) -> u32 {
        (self.key >> 32) as u32
    }

    pub fn depth(&self) -> f32 {
        f32::from_bits(self.key as u32)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BinningError {
    #[error("duplication count {required} exceeds the configured capacity {capacity}")]
    CapacityExceeded { required: usize, capacity: usize },
}

/// Emits one key per (splat, touched tile) pair, in splat order then tile
/// row-major order. Errors out before allocating when the total would exceed
/// `capacity`; the output is never truncated.
pub fn duplicate_and_key(
    splats: &[Splat2D],
    touched: &[TouchedTiles],
    grid: &TileGrid,
    capacity: usize,
) -> Result<Vec<SortKey>, BinningError> {
    assert_eq!(splats.len(), touched.len());
    let required: usize = touched.iter().map(|t| t.count()).sum();
    if required > capacity {
        return Err(BinningError::CapacityExceeded { required, capacity });
    }
    let mut keys = Vec::with_capacity(required);
    for (i, (s, t)) in splats.iter().zip(touched).enumerate() {
        for ty in t.ty_min..=t.ty_max {
            for tx in t.tx_min..=t.tx_max {
                let tile_id = ty * grid.tiles_x as u32 + tx;
                keys.push(SortKey::new(tile_id, s.depth, i as u32));
            }
        }
    }
    Ok(keys)
}

/// Least-significant-digit radix sort: 8-bit digits, 8 passes, stable.
pub fn sort_keys(keys: &mut [SortKey]) {
    let n = keys.len();
    if n <= 1 {
        return;
    }
    let mut scratch = vec![SortKey { key: 0, splat: 0 }; n];
    let mut src: &mut [SortKey] = keys;
    let mut dst: &mut [SortKey] = &mut scratch;
    for pass in 0..8 {
        let shift = pass * 8;
        let mut counts = [0usize; 256];
        for k in src.iter() {
            counts[((k.key >> shift) & 0xFF) as usize] += 1;
        }
        let mut sum = 0usize;
        for c in counts.iter_mut() {
            let here = *c;
            *c = sum;
            sum += here;
        }
        for k in src.iter() {
            let digit = ((k.key >> shift) & 0xFF) as usize;
            dst[counts[digit]] = *k;
            counts[digit] += 1;
        }
        std::mem::swap(&mut src, &mut dst);
    }
    // Eight passes leave the result back in `keys`; nothing to copy.
}

/// Half-open index ranges into the sorted key array, one per tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileRanges {
    ranges: Vec<(u32, u32)>,
}

impl TileRanges {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn get(&self, tile: usize) -> Range<usize> {
        let (start, end) = self.ranges[tile];
        start as usize..end as usize
    }
}

/// Single sequential pass over sorted keys. Tiles with no splats get an empty
/// range positioned so that all ranges stay ordered and cover the array.
pub fn tile_ranges(keys: &[SortKey], grid: &TileGrid) -> TileRanges {
    let tiles = grid.tile_count();
    let mut ranges = vec![(0u32, 0u32); tiles];
    let mut cursor = 0u32;
    let mut i = 0usize;
    for (tile, slot) in ranges.iter_mut().enumerate() {
        let start = cursor;
        while i < keys.len() && keys[i].tile_id() as usize == tile {
            i += 1;
            cursor += 1;
        }
        *slot = (start, cursor);
    }
    debug_assert_eq!(i, keys.len(), "keys must be sorted and tile ids in range");
    TileRanges { ranges }
}
