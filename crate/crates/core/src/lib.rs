//! Precipitation downscaling toolkit: a small reverse-mode autodiff engine,
//! an attention-based super-resolution network over NHWC tensors, quantile
//! mapping and BCSD statistical baselines, forecast verification metrics,
//! and a synthetic heterogeneous-pair data pipeline.
//!
//! Everything runs on CPU with deterministic results for a fixed seed.

pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod stat;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testsupport;
