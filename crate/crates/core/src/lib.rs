//! Graph neural network node regression: linear graph convolutions with
//! skip reweighting feeding a truncated ReLU readout, trained by masked
//! least squares, together with the complexity and rate formulas that
//! describe it, baselines, synthetic data generators and an experiment
//! runner.

pub mod datagen;
pub mod error;
pub mod exp;
pub mod graph;
pub mod model;
pub mod rng;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
