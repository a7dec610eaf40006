//! Benchmark harness: timed render sweeps over backend, batch size and
//! resolution scale, reported as CSV.
//!
//! Protocol: per combination, `warmup` untimed renders followed by `reps`
//! timed ones; the row reports the mean and sample standard deviation of the
//! total plus mean per-stage breakdowns. Work counters are exact and repeat
//! identically across runs.

use crate::blend::Backend;
use crate::render::{render, RenderConfig, RenderError};
use crate::scene::{Camera, Gaussian3D};

/// Documented, stable column set of the CSV report.
pub const CSV_HEADER: &str = "scene,backend,batch_size,resolution_scale,mean_ms,stddev_ms,\
preprocess_ms,binning_ms,blend_ms,assemble_ms,pairs,mac_count";

#[derive(Debug, Clone)]
pub struct BenchPlan<'a> {
    pub scenes: Vec<(String, &'a [Gaussian3D], &'a Camera)>,
    pub backends: Vec<Backend>,
    pub batch_sizes: Vec<usize>,
    pub res_scales: Vec<u32>,
    pub warmup: usize,
    pub reps: usize,
    pub base_config: RenderConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scene: String,
    pub backend: Backend,
    pub batch_size: usize,
    pub res_scale: u32,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub preprocess_ms: f64,
    pub binning_ms: f64,
    pub blend_ms: f64,
    pub assemble_ms: f64,
    /// Power evaluations: scalar pairs plus padded kernel pairs.
    pub pairs: u64,
    /// Multiply-accumulates behind those evaluations.
    pub mac_count: u64,
}

/// Runs the full sweep. Rows appear in scene, backend, batch, scale order.
pub fn run_plan(plan: &BenchPlan<'_>) -> Result<Vec<BenchRow>, RenderError> {
    assert!(plan.reps >= 1);
    let mut rows = Vec::new();
    for (name, scene, camera) in &plan.scenes {
        for &backend in &plan.backends {
            for &batch_size in &plan.batch_sizes {
                for &res_scale in &plan.res_scales {
                    let config = RenderConfig {
                        backend,
                        batch_size,
                        ..plan.base_config.clone()
                    };
                    let camera = camera.scaled(res_scale);
                    rows.push(run_one(name, scene, &camera, &config, res_scale, plan)?);
                }
            }
        }
    }
    Ok(rows)
}

fn run_one(
    name: &str,
    scene: &[Gaussian3D],
    camera: &Camera,
    config: &RenderConfig,
    res_scale: u32,
    plan: &BenchPlan<'_>,
) -> Result<BenchRow, RenderError> {
    for _ in 0..plan.warmup {
        render(scene, camera, config)?;
    }
    let mut totals = Vec::with_capacity(plan.reps);
    let mut stage_sums = [0.0f64; 4];
    let mut counters = None;
    for _ in 0..plan.reps {
        let (_, stats) = render(scene, camera, config)?;
        totals.push(stats.timings.total.as_secs_f64() * 1e3);
        stage_sums[0] += stats.timings.preprocess.as_secs_f64() * 1e3;
        stage_sums[1] += stats.timings.binning.as_secs_f64() * 1e3;
        stage_sums[2] += stats.timings.blend.as_secs_f64() * 1e3;
        stage_sums[3] += stats.timings.assemble.as_secs_f64() * 1e3;
        match &counters {
            None => counters = Some(stats.counters),
            Some(prev) => debug_assert_eq!(*prev, stats.counters, "work counters must be exact"),
        }
    }
    let n = plan.reps as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let stddev = if plan.reps > 1 {
        (totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let counters = counters.unwrap_or_default();
    Ok(BenchRow {
        scene: name.to_string(),
        backend: config.backend,
        batch_size: config.batch_size,
        res_scale,
        mean_ms: mean,
        stddev_ms: stddev,
        preprocess_ms: stage_sums[0] / n,
        binning_ms: stage_sums[1] / n,
        blend_ms: stage_sums[2] / n,
        assemble_ms: stage_sums[3] / n,
        pairs: counters.scalar_pairs + counters.gemm_pairs,
        mac_count: counters.scalar_macs + counters.gemm_macs,
    })
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{},{}\n",
            r.scene,
            r.backend,
            r.batch_size,
            r.res_scale,
            r.mean_ms,
            r.stddev_ms,
            r.preprocess_ms,
            r.binning_ms,
            r.blend_ms,
            r.assemble_ms,
            r.pairs,
            r.mac_count,
        ));
    }
    out
}
