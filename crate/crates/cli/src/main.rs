//! Command-line surface: render frames, compare backends, run benchmarks.
//!
//! Exit codes: 0 success, 1 comparison floor violated, 2 usage or I/O error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tilesplat::render::RenderConfig;
use tilesplat::{Backend, Precision};

#[derive(Parser)]
#[command(name = "tilesplat", version, about = "Tile-based renderer for 3D Gaussian splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one frame to an image file and print a stats block
    Render(RenderArgs),
    /// Render with both backends and report PSNR and per-pixel error
    Compare(CompareArgs),
    /// Timed render sweeps over backend, batch size and resolution scale, as CSV
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Reference,
    Gemm,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Reference => Backend::Reference,
            BackendArg::Gemm => Backend::Gemm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    /// Single-precision matrix operands
    Full,
    /// Half-precision matrix operands, single-precision accumulation
    Mixed,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Precision {
        match p {
            PrecisionArg::Full => Precision::Full,
            PrecisionArg::Mixed => Precision::Mixed,
        }
    }
}

fn parse_rgb(s: &str) -> Result<Rgb, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated values r,g,b".into());
    }
    let mut rgb = [0.0f32; 3];
    for (slot, part) in rgb.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f32>()
            .map_err(|e| format!("bad channel '{part}': {e}"))?;
    }
    Ok(Rgb(rgb))
}

/// Newtype so clap can carry a parsed background color.
#[derive(Clone, Copy)]
struct Rgb([f32; 3]);

/// Flags shared by every subcommand that renders.
#[derive(Args)]
struct CommonOpts {
    /// Scene file (binary point-cloud export)
    #[arg(long)]
    scene: PathBuf,
    /// Camera description file
    #[arg(long)]
    camera: PathBuf,
    /// Matrix-backend arithmetic mode
    #[arg(long, value_enum, default_value_t = PrecisionArg::Full)]
    precision: PrecisionArg,
    /// Square tile edge in pixels
    #[arg(long, default_value_t = 16)]
    tile_size: usize,
    /// Worker threads (0 = machine default)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Background color as r,g,b in [0,1]
    #[arg(long, value_parser = parse_rgb, default_value = "0,0,0")]
    background: Rgb,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Blending backend
    #[arg(long, value_enum, default_value_t = BackendArg::Gemm)]
    backend: BackendArg,
    /// Splats blended per batch within a tile
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Output image path (.ppm or .png)
    #[arg(long, default_value = "out.ppm")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Splats blended per batch within a tile
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Exit with status 1 when PSNR falls below this many dB
    #[arg(long)]
    psnr_floor: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Restrict to one backend (default: both)
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Batch sizes to sweep
    #[arg(long, value_delimiter = ',', default_value = "256")]
    batch_size: Vec<usize>,
    /// Resolution scales to sweep
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    res_scale: Vec<u32>,
    /// Timed repetitions per combination
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Untimed repetitions before measuring
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// CSV output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonOpts {
    fn config(&self) -> RenderConfig {
        RenderConfig {
            precision: self.precision.into(),
            tile_size: self.tile_size,
            workers: self.workers,
            background: self.background.0,
            ..RenderConfig::default()
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Render(args) => commands::render(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::Bench(args) => commands::bench(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
