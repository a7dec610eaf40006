//! Software tile-based forward renderer for 3D Gaussian splat scenes.
//!
//! The pipeline has four stages: preprocessing (projection, color evaluation,
//! tile intersection), duplication, depth sorting, and blending. Blending is
//! available through two backends that must agree to sub-quantization error:
//!
//! * [`blend::reference`] — the scalar per-pixel compositing loop, evaluating
//!   the Gaussian falloff exponent directly for every (splat, pixel) pair.
//! * [`blend::gemm`] — the same compositing driven by a batched matrix
//!   multiply: the exponent is factored into a per-splat 6-vector dotted with
//!   a tile-universal per-pixel 6-vector, so a whole batch of splats against a
//!   whole tile of pixels reduces to one 6-dim (zero-padded to 8) GEMM run
//!   through a 16x8 blocked micro-kernel.
//!
//! Both backends run inside a double-buffered staged tile pipeline
//! ([`blend::pipeline`]) whose output is required to be bit-identical to
//! plain sequential execution.

pub mod bench;
pub mod binning;
pub mod blend;
pub mod frame;
pub mod preprocess;
pub mod render;
pub mod scene;
pub mod sh;
pub mod synth;

pub use blend::{Backend, Precision, RefPixel};
pub use frame::RenderFrame;
pub use render::{render, RenderConfig, RenderStats};
pub use scene::{Camera, Gaussian3D, Splat2D};
