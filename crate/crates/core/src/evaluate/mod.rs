//! Metrics and meta-procedures: graph and covariance accuracy, within-block
//! correlation summaries, held-out likelihood, blocked cross-validation and
//! bootstrap edge confidence.

mod bootstrap;
mod cv;
mod loglik;
mod metrics;

pub use bootstrap::{bootstrap_confidence, edge_confidence, edge_indicator, final_graph, resample_units, BootstrapResult, EdgeConfidence};
pub use cv::{assign_folds, background_cov, blocked_cv, median, CvTable};
pub use loglik::{ghk_log_prob, test_loglik, LoglikConfig, LoglikEstimate};
pub use metrics::{correlation_summary, cov_rmse, cpdag_f1, threshold_rmse, CorrelationSummary, F1Score, HIST_BIN_WIDTH};
