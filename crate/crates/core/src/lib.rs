//! Screened Sinkhorn for entropic optimal transport.
//!
//! Rows and columns whose dual potentials are provably pinned at a threshold are
//! removed before optimization; the remaining dual is solved with a
//! bound-constrained quasi-Newton method and reassembled into a full plan.
//!
//! ```
//! use ndarray::array;
//! use screenkhorn::{screenkhorn, CostMatrix, DiscreteMeasure};
//!
//! let cost = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
//! let mu = DiscreteMeasure::uniform(2).unwrap();
//! let result = screenkhorn(&cost, 1.0, &mu, &mu, 2, 2).unwrap();
//! assert!(result.converged());
//! ```

// `!(x > 0.0)` is the NaN-rejecting form used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod box_solver;
pub mod diagnostics;
mod error;
pub mod ot;
pub mod screened_dual;
pub mod screening;
mod screenkhorn;

pub use box_solver::{minimize, restricted_sinkhorn, SmoothObjective, SolverConfig, SolverReport, Termination};
pub use error::{Error, Result, Step};
pub use ot::{
    divergence, dual_objective, gibbs_kernel, plan_from_potentials, sinkhorn, CostMatrix, DiscreteMeasure,
    DualPotentials, GibbsKernel, SinkhornConfig, SinkhornSolution, TransportPlan,
};
pub use screened_dual::{box_bounds, BoundsVariant, BoxBounds, ScreenedDualProblem};
pub use screening::{active_sets, epsilon_kappa, ratio_vectors, screen, Budget, ScreeningResult};
pub use screenkhorn::{
    decimation_to_budget, screened_marginals, screenkhorn, screenkhorn_with, solve_with_kernel, ScreenkhornOptions,
    ScreenkhornResult,
};
