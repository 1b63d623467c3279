//! Macroblock-level adaptive quantization driven by detection accuracy.
//!
//! The crate bundles a small intra block-DCT codec simulator, per-macroblock
//! quality measures, the proxy emphasis threshold, the region-aware routing
//! trainer, a synthetic detection oracle and the comparison baselines.

pub mod baselines;
pub mod codec;
pub mod error;
pub mod experiment;
pub mod frames;
pub mod grid;
pub mod oracle;
pub mod pet;
pub mod quality;
pub mod rer;
pub mod rng;

pub use error::{Error, Result};
pub use grid::Grid;
