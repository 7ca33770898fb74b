//! Generalized DP-means clustering.
//!
//! DP-means spawns a new cluster whenever a point lies farther than a
//! penalty `λ` from every center, so the number of clusters is estimated
//! rather than fixed. This crate generalizes the squared-distance objective
//! to `Σ f(d(x_i, θ_{c(i)})) + f(λ) K`, where `d` is a Bregman or total
//! Bregman divergence and `f` is a monotone function that trades off robust
//! (concave `f`), average (linear) and worst-case (convex `f`) distortion.
//!
//! ```
//! use gdpmeans::{fit, ClusteringConfig, Divergence, FSpec, Matrix};
//!
//! let data = Matrix::column(&[0.0, 0.1, 100.0, 100.1]);
//! let result = fit(
//!     &FSpec::power_mean(0.5, 1.0),
//!     &Divergence::squared_distance(),
//!     &data,
//!     &ClusteringConfig::new(1.0),
//! )
//! .unwrap();
//! assert_eq!(result.state.k(), 2);
//! ```

pub mod dataio;
pub mod divergence;
pub mod experiment;
pub mod fgen;
pub mod influence;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod solver;

mod error;

pub use divergence::{Divergence, DivergenceError, Generator};
pub use error::{Error, ErrorKind};
pub use fgen::{effective_beta, FError, FSpec, Shape};
pub use matrix::Matrix;
pub use par::Execution;
pub use solver::{
    assign_step, fit, fit_single_cluster, objective_eval, refine_center, ClusterState,
    ClusteringConfig, FitResult, Optimizer, OverlapPolicy, SolverError,
};
