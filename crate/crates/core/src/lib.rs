//! Sparse Bayesian logistic regression with spike-and-slab priors, fitted by
//! mean-field variational inference.
//!
//! The posterior is approximated by
//! `Q = prod_j [gamma_j N(mu_j, sigma_j^2) + (1 - gamma_j) delta_0]`, fitted by
//! coordinate ascent on a quadratic bound of the logistic likelihood.
//!
//! ```
//! use sparsevb::{fit, Dataset, FitConfig, Summary};
//!
//! let rows = vec![vec![1.0, 0.2], vec![-1.0, 0.1], vec![2.0, -0.3], vec![-2.0, 0.0]];
//! let data = Dataset::from_rows(&rows, vec![1, 0, 1, 0]).unwrap();
//! let result = fit(&data, &FitConfig::default()).unwrap();
//! let summary = Summary::new(&result.state, 0.5, 0.95).unwrap();
//! assert_eq!(summary.posterior_mean.len(), 2);
//! ```

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavi;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod optim;
pub mod prior;
pub mod sim;
pub mod special;
pub mod summary;

pub use cavi::{fit, FitConfig, FitResult, Init, UpdateOrder, VariationalState};
pub use diagnostics::{diagnose, DesignDiagnostics, DiagnoseOptions};
pub use error::{Error, Result};
pub use model::{BoundParams, Coefficients, Dataset};
pub use prior::{PriorSpec, Slab};
pub use sim::{run_experiment, Signal, SimDesign, Variant};
pub use summary::{Interval, Summary};
