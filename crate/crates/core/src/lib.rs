//! Hyperspectral recovery from RGB images with a sampled spectral line.
//!
//! The crate covers the whole chain: reflectance normalization, sampling
//! checks, polynomial RGB-to-spectrum regression, tissue reflectance model
//! fitting, a small informed MLP, validation metrics and a synthetic phantom
//! generator that supplies ground truth.

// NaN must fail range checks, so `!(x > 0.0)` is intentional throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod analytics;
pub mod cube;
pub mod error;
pub mod grid;
pub mod io;
pub mod neural;
pub mod optim;
pub mod phantom;
pub mod preprocess;
pub mod regression;
pub mod sampling;
pub mod tissue;

pub use cube::{Hypercube, RgbImage, SampledLine};
pub use error::{Error, Result};
pub use grid::{Spectrum, WavelengthGrid};
