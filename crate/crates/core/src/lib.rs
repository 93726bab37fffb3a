//! Venue recommendation by counterfactual citation impact.
//!
//! A paper's expected (log) citation count is estimated separately for every
//! candidate venue with inverse-propensity-weighted ridge base learners, and
//! the venue with the largest potential outcome is recommended. Around that
//! core live the pieces needed to build, check and ship such a model:
//!
//! - [`dataset`]: dblp-style ingestion, bag-of-fields features, stratified splits
//! - [`numeric`]: weighted ridge, multinomial logistic regression, Gaussian
//!   kernel, Spearman correlation
//! - [`propensity`]: clipped venue propensities and IPW sample weights
//! - [`learners`]: T- and S-learners, CV over the ridge grid, recommendations
//! - [`bias`]: unbiased MMD² with permutation tests between venues
//! - [`synth`]: synthetic benchmark with both potential outcomes
//! - [`eval`]: factual Spearman evaluation over repeated splits
//! - [`store`]: canonical, versioned model files

pub mod bias;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod learners;
pub mod numeric;
pub mod propensity;
pub mod rng;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
