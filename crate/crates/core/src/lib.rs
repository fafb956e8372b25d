//! Perception-aware sampling of scatterplot data.
//!
//! Points live in the unit square. Weights combine rendered-image saliency
//! with kernel density; samplers pick subsets (or synthesize points) whose
//! renders should look like the full dataset's, and `metrics` checks that.

pub mod compress;
pub mod dataset;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod perception;
pub mod raster;
pub mod rng;
pub mod saliency;
pub mod samplers;
pub mod spatial;

pub use dataset::{Dataset, Point};
pub use error::{Error, Result};
