//! Measures, costs, the Gibbs kernel, transport plans and the baseline Sinkhorn solver.

mod kernel;
mod measure;
mod plan;
mod sinkhorn;

pub use kernel::{gibbs_kernel, GibbsKernel};
pub use measure::{CostMatrix, DiscreteMeasure};
pub use plan::{divergence, dual_objective, plan_from_potentials, DualPotentials, TransportPlan};
pub(crate) use plan::exp_checked;
pub use sinkhorn::{sinkhorn, SinkhornConfig, SinkhornSolution};
