use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use tilesplat::bench::{run_plan, to_csv, BenchPlan};
use tilesplat::frame::{deviation_histogram, max_channel_deviation, psnr};
use tilesplat::render::{RenderConfig, RenderStats};
use tilesplat::scene::{load_camera, load_scene};
use tilesplat::{Backend, RenderFrame};

use crate::{BenchArgs, CompareArgs, RenderArgs};

pub fn render(args: &RenderArgs) -> Result<u8> {
    let scene = load_scene(&args.common.scene)
        .with_context(|| format!("loading scene {}", args.common.scene.display()))?;
    let camera = load_camera(&args.common.camera)
        .with_context(|| format!("loading camera {}", args.common.camera.display()))?;
    let config = RenderConfig {
        backend: args.backend.into(),
        batch_size: args.batch_size,
        ..args.common.config()
    };
    let (frame, stats) = tilesplat::render::render(&scene, &camera, &config)?;
    write_image(&frame, &args.out)?;
    print_stats(&stats);
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn print_stats(stats: &RenderStats) {
    println!("gaussians: {}", stats.gaussians);
    println!("retained splats: {}", stats.retained_splats);
    println!("duplications: {}", stats.duplications);
    let t = &stats.timings;
    println!("stage preprocess: {:.3} ms", t.preprocess.as_secs_f64() * 1e3);
    println!("stage binning: {:.3} ms", t.binning.as_secs_f64() * 1e3);
    println!("stage blend: {:.3} ms", t.blend.as_secs_f64() * 1e3);
    println!("stage assemble: {:.3} ms", t.assemble.as_secs_f64() * 1e3);
    println!("total: {:.3} ms", t.total.as_secs_f64() * 1e3);
    let c = &stats.counters;
    println!(
        "blend pairs: {} scalar, {} padded gemm",
        c.scalar_pairs, c.gemm_pairs
    );
    println!("blend macs: {}", c.scalar_macs + c.gemm_macs);
}

fn write_image(frame: &RenderFrame, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            frame.write_ppm(&mut w)?;
            w.flush()?;
        }
        Some("png") => {
            let img = image::RgbImage::from_raw(frame.width, frame.height, frame.to_rgb8())
                .expect("frame buffer matches its dimensions");
            img.save(path).with_context(|| format!("writing {}", path.display()))?;
        }
        other => bail!(
            "unsupported output format {:?} (use .ppm or .png)",
            other.unwrap_or("")
        ),
    }
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<u8> {
    let scene = load_scene(&args.common.scene)
        .with_context(|| format!("loading scene {}", args.common.scene.display()))?;
    let camera = load_camera(&args.common.camera)
        .with_context(|| format!("loading camera {}", args.common.camera.display()))?;
    let base = RenderConfig {
        batch_size: args.batch_size,
        ..args.common.config()
    };

    let reference = tilesplat::render::render(
        &scene,
        &camera,
        &RenderConfig {
            backend: Backend::Reference,
            ..base.clone()
        },
    )?
    .0;
    let gemm = tilesplat::render::render(
        &scene,
        &camera,
        &RenderConfig {
            backend: Backend::Gemm,
            ..base
        },
    )?
    .0;

    let psnr_db = psnr(&reference, &gemm);
    match psnr_db {
        None => println!("psnr: inf dB (frames identical)"),
        Some(db) => println!("psnr: {db:.2} dB"),
    }
    let max_dev = max_channel_deviation(&reference, &gemm);
    println!("max channel deviation: {max_dev:.6} ({:.2}/255)", max_dev * 255.0);
    let hist = deviation_histogram(&reference, &gemm, 5);
    println!("per-pixel max error histogram:");
    println!("  exactly 0: {}", hist[0]);
    for (i, count) in hist.iter().enumerate().skip(1) {
        if i + 1 == hist.len() {
            println!("  > {}/255: {count}", i - 1);
        } else {
            println!("  ({},{}]/255: {count}", i - 1, i);
        }
    }

    if let Some(floor) = args.psnr_floor {
        if let Some(db) = psnr_db {
            if db < floor {
                eprintln!("psnr {db:.2} dB below the configured floor of {floor:.2} dB");
                return Ok(1);
            }
        }
    }
    Ok(0)
}

pub fn bench(args: &BenchArgs) -> Result<u8> {
    let scene = load_scene(&args.common.scene)
        .with_context(|| format!("loading scene {}", args.common.scene.display()))?;
    let camera = load_camera(&args.common.camera)
        .with_context(|| format!("loading camera {}", args.common.camera.display()))?;
    let name = args
        .common
        .scene
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());

    let backends = match args.backend {
        Some(b) => vec![b.into()],
        None => vec![Backend::Reference, Backend::Gemm],
    };
    let plan = BenchPlan {
        scenes: vec![(name, &scene[..], &camera)],
        backends,
        batch_sizes: args.batch_size.clone(),
        res_scales: args.res_scale.clone(),
        warmup: args.warmup,
        reps: args.reps,
        base_config: args.common.config(),
    };
    let rows = run_plan(&plan)?;
    let csv = to_csv(&rows);
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(0)
}
