//! Generalized Hoeffding-Sobol sensitivity analysis for models with dependent inputs.
//!
//! The crate estimates a hierarchically orthogonal functional decomposition (HOFD)
//! of a model output `Y = f(X)` whose inputs come in independent pairs of
//! dependent variables (IPDV). From the decomposition it derives sensitivity
//! indices that account for input covariance and always sum to one.
//!
//! Layout:
//!
//! - [`distributions`]: Gaussian-mixture and copula input laws, sampling, and
//!   admissibility certification of the density lower-bound condition.
//! - [`smoother`]: leave-one-out local polynomial regression accelerated with
//!   Sherman-Morrison downdates.
//! - [`hofd`]: the bivariate Gauss-Seidel solver and the two-stage IPDV pipeline.
//! - [`indices`]: generalized indices with their variance/covariance split, and
//!   the classical nonparametric Sobol comparator.
//! - [`oracle`]: closed-form and grid-integration ground truth.
//! - [`bench`]: seeded replication harness behind the `hofd-sense` binary.

pub mod bench;
pub mod distributions;
pub mod error;
pub mod hofd;
pub mod indices;
pub mod oracle;
pub mod smoother;
pub mod stats;

pub use error::{Error, Result};
