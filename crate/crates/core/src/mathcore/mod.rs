//! Numerical kernels shared by every estimation stage.

pub mod bivariate;
pub mod lbfgsb;
pub mod linalg;
pub mod normal;
pub mod truncnorm;

pub use bivariate::bivariate_normal_rect;
pub use lbfgsb::{boxed_quasi_newton, LbfgsbOptions, Minimum};
pub use linalg::{cholesky_lower, sym_eigen, SymMatrix};
pub use normal::{std_normal_cdf, std_normal_quantile, Interval};
pub use truncnorm::{truncnorm_mean, truncnorm_sample};
