pub mod dataset;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod geometry;
pub mod manifest;
mod parallel;
pub mod raster;
pub mod render;
pub mod synth;

pub use error::{Error, Result};
