//! Real-data ingestion: per-column discretization test and unit clustering.

mod cluster;
mod discretize;
mod gmm;
mod ingest;
mod shapiro;

pub use cluster::{hier_cluster_blocks, ward_linkage, Merge};
pub use discretize::{
    discretization_test, gmm_bic, ColumnReport, Decision, DiscretizationReport, MixtureModel, MIN_TEST_LENGTH, SW_ALPHA,
};
pub use gmm::{fit_gmm, GmmFit, GMM_MAX_ITERS, GMM_RESTARTS, GMM_TOL, MIN_VARIANCE};
pub use ingest::{ingest_expression, Ingested};
pub use shapiro::{shapiro_wilk, ShapiroWilk};
