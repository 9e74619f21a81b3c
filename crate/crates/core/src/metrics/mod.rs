//! Confusion-matrix metrics, balanced kappa, feature divergence and the
//! paired t-test.

mod confusion;
mod divergence;
mod special;
mod ttest;

pub use confusion::{classwise_metrics, confusion, kappa_balanced, ClassMetrics, ClasswiseReport, ConfusionMatrix};
pub use divergence::{divergence, scatter_matrices};
pub use special::{ln_gamma, regularized_incomplete_beta, student_t_two_tailed};
pub use ttest::{paired_ttest, TTestResult};
