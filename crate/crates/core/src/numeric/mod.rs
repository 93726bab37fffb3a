//! Numeric primitives shared by the learners and diagnostics.

mod design;
pub mod kernel;
pub mod logistic;
pub mod ridge;
pub mod spearman;

pub use design::{DesignMatrix, RowView};
pub use kernel::{median_heuristic_bandwidth, Bandwidth, Kernel, KernelSpec};
pub use logistic::{fit_multinomial_logistic, LogisticOptions, MultinomialLogisticModel};
pub use ridge::{fit_weighted_ridge, fit_weighted_ridge_path, LinearModel, RidgeFit, SolveMethod};
pub use spearman::{average_ranks, pearson, spearman};
