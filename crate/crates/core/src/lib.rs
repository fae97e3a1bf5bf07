//! Robust sparse regression for complex-valued linear models.
//!
//! The estimator jointly fits a sparse coefficient vector and a noise scale by
//! solving generalized zero-subgradient equations built from a robust loss
//! (least squares or Huber). Solutions are computed by cyclic coordinate
//! descent with complex soft-thresholding. The [`doa`] and [`sim`] modules
//! apply the estimator to single-snapshot direction-of-arrival estimation with
//! a uniform linear array.

pub mod doa;
pub mod error;
pub mod loss;
pub mod path;
pub mod sim;
pub mod solver;

pub use num_complex::Complex64;

pub use crate::error::{Error, Result};
pub use crate::loss::{LossKind, LossModel};
pub use crate::path::{LambdaStar, PathOptions, SolutionPath};
pub use crate::solver::{KktReport, MLassoFit, Problem, SolverConfig};
