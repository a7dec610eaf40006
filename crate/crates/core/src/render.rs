//! End-to-end frame rendering: preprocess, bin, blend, assemble.
//!
//! Tiles are independent work items distributed over a worker pool. Each
//! tile is owned by exactly one worker and writes a disjoint frame region,
//! so frames are bit-identical across worker counts and repeated runs.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::binning::{duplicate_and_key, sort_keys, tile_ranges, BinningError};
use crate::blend::gemm::build_pixel_matrix;
use crate::blend::pipeline::{run_tile, TileContext};
use crate::blend::{
    Backend, BlendCounters, BlendSettings, Precision, RefPixel, TileLayout, DEFAULT_TERMINATION,
};
use crate::frame::RenderFrame;
use crate::preprocess::{project_gaussian, touched_tiles, TileGrid};
use crate::scene::{Camera, CameraError, Gaussian3D};

/// Default cap on the total number of (splat, tile) duplications.
pub const DEFAULT_MAX_DUPLICATIONS: usize = 1 << 26;

#[derive(Debug, Clone)]
pub struct RenderConfig {
    pub backend: Backend,
    pub precision: Precision,
    pub tile_size: usize,
    /// Splats blended per batch within a tile.
    pub batch_size: usize,
    /// A pixel stops once its tentative transmittance would drop below this.
    pub termination_threshold: f32,
    pub background: [f32; 3],
    /// Worker threads; 0 picks the machine default.
    pub workers: usize,
    /// Staged double-buffered batch fetch; output is identical either way.
    pub prefetch: bool,
    /// Reference pixel for intra-tile coordinates.
    pub ref_pixel: RefPixel,
    /// Capacity limit for the duplication stage.
    pub max_duplications: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            backend: Backend::Gemm,
            precision: Precision::Full,
            tile_size: 16,
            batch_size: 256,
            termination_threshold: DEFAULT_TERMINATION,
            background: [0.0; 3],
            workers: 0,
            prefetch: true,
            ref_pixel: RefPixel::TopLeft,
            max_duplications: DEFAULT_MAX_DUPLICATIONS,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error(transparent)]
    Binning(#[from] BinningError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("building worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Wall-clock spent per stage. The stages tile the whole render, so their
/// sum tracks `total` closely.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub preprocess: Duration,
    pub binning: Duration,
    pub blend: Duration,
    pub assemble: Duration,
    pub total: Duration,
}

impl StageTimings {
    pub fn stage_sum(&self) -> Duration {
        self.preprocess + self.binning + self.blend + self.assemble
    }
}

#[derive(Debug, Clone, Default)]
pub struct RenderStats {
    pub gaussians: usize,
    /// Splats surviving culling with at least one touched tile.
    pub retained_splats: usize,
    /// Total (splat, tile) pairs binned.
    pub duplications: usize,
    pub counters: BlendCounters,
    pub timings: StageTimings,
}

/// Renders one frame. Deterministic for a fixed config regardless of worker
/// count; errors never produce partial frames.
pub fn render(
    scene: &[Gaussian3D],
    camera: &Camera,
    config: &RenderConfig,
) -> Result<(RenderFrame, RenderStats), RenderError> {
    camera.validate()?;
    assert!(config.tile_size >= 1);
    assert!(config.batch_size >= 1);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()?;
    pool.install(|| render_in_pool(scene, camera, config))
}

fn render_in_pool(
    scene: &[Gaussian3D],
    camera: &Camera,
    config: &RenderConfig,
) -> Result<(RenderFrame, RenderStats), RenderError> {
    let t_start = Instant::now();
    let grid = TileGrid::new(camera.width, camera.height, config.tile_size);

    // Stage 1: project, color, and intersect. Parallel across Gaussians with
    // order preserved.
    let projected: Vec<_> = scene
        .par_iter()
        .map(|g| {
            project_gaussian(g, camera)
                .and_then(|s| touched_tiles(&s, &grid).map(|touched| (s, touched)))
        })
        .collect();
    let mut splats = Vec::with_capacity(scene.len());
    let mut touched = Vec::with_capacity(scene.len());
    for pair in projected.into_iter().flatten() {
        splats.push(pair.0);
        touched.push(pair.1);
    }
    let t_preprocess = Instant::now();

    // Stages 2-3: duplicate, key, sort, segment.
    let mut keys = duplicate_and_key(&splats, &touched, &grid, config.max_duplications)?;
    sort_keys(&mut keys);
    let ranges = tile_ranges(&keys, &grid);
    let t_binning = Instant::now();

    // Stage 4: blend tiles on the worker pool.
    let layout = TileLayout::new(config.tile_size, config.ref_pixel);
    let mut pixel_matrix = build_pixel_matrix(config.tile_size, config.ref_pixel);
    if config.precision == Precision::Mixed {
        pixel_matrix = pixel_matrix.rounded_to_half();
    }
    let settings = BlendSettings {
        backend: config.backend,
        precision: config.precision,
        batch_size: config.batch_size,
        termination_threshold: config.termination_threshold,
        background: config.background,
    };
    let ctx = TileContext {
        splats: &splats,
        keys: &keys,
        layout: &layout,
        pixel_matrix: &pixel_matrix,
        settings: &settings,
    };
    let tiles: Vec<_> = (0..grid.tile_count())
        .into_par_iter()
        .map(|tile| {
            run_tile(
                &ctx,
                ranges.get(tile),
                grid.tile_origin(tile),
                config.prefetch,
            )
        })
        .collect();
    let t_blend = Instant::now();

    // Assembly: copy tile pixels into the frame, dropping out-of-frame rows
    // and columns of edge tiles. Counters merge in tile order.
    let (width, height) = (camera.width as usize, camera.height as usize);
    let mut frame = RenderFrame {
        width: camera.width,
        height: camera.height,
        rgb: vec![[0.0; 3]; width * height],
        transmittance: vec![0.0; width * height],
    };
    let ts = config.tile_size;
    let mut counters = BlendCounters::default();
    for (tile, (pixels, tile_counters)) in tiles.iter().enumerate() {
        counters.merge(tile_counters);
        let ox = (tile % grid.tiles_x) * ts;
        let oy = (tile / grid.tiles_x) * ts;
        let cols = ts.min(width - ox);
        for ty in 0..ts.min(height - oy) {
            let src = ty * ts;
            let dst = (oy + ty) * width + ox;
            frame.rgb[dst..dst + cols].copy_from_slice(&pixels.rgb[src..src + cols]);
            frame.transmittance[dst..dst + cols]
                .copy_from_slice(&pixels.transmittance[src..src + cols]);
        }
    }
    let t_end = Instant::now();

    let stats = RenderStats {
        gaussians: scene.len(),
        retained_splats: splats.len(),
        duplications: keys.len(),
        counters,
        timings: StageTimings {
            preprocess: t_preprocess - t_start,
            binning: t_binning - t_preprocess,
            blend: t_blend - t_binning,
            assemble: t_end - t_blend,
            total: t_end - t_start,
        },
    };
    Ok((frame, stats))
}
