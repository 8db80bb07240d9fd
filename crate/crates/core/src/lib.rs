pub mod backend;
pub mod baselines;
pub mod bench;
pub mod config;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod formats;
pub mod grid;
pub mod mvindex;
pub mod oracle;
pub mod pagestore;
pub mod types;

pub use error::{Error, Result};

/// Grid over `f64` coordinates.
pub type Grid = grid::GridSpec<f64>;
/// Trajectory sample with `f64` coordinates.
pub type Sample = grid::Sample<f64>;
