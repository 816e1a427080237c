//! Shapley and δ-Shapley data valuation by layer-stratified coalition
//! sampling, with stability-derived sample sizes.

pub mod coalition;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod games;
pub mod models;
pub mod seed;
pub mod summation;
pub mod utility;

pub use coalition::Coalition;
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use seed::SeedTree;
pub use utility::{Evaluation, Utility};
