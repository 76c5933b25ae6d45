//! End-to-end screened solve: screening, box bounds, restricted Sinkhorn warm
//! start, bound-constrained solve on the active coordinates, and reassembly.

use std::time::{Duration, Instant};

use ndarray::Array1;

use crate::box_solver::{minimize, restricted_sinkhorn, SolverConfig, SolverReport};
use crate::error::{Error, Result, Step, StepContext};
use crate::ot::{exp_checked, gibbs_kernel, plan_from_potentials, CostMatrix, DiscreteMeasure, DualPotentials, GibbsKernel, TransportPlan};
use crate::screened_dual::{box_bounds, BoundsVariant, BoxBounds, ScreenedDualProblem};
use crate::screening::{screen, Budget, ScreeningResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenkhornOptions {
    pub bounds: BoundsVariant,
    pub solver: SolverConfig,
    /// Restricted Sinkhorn sweeps before the bound-constrained solve.
    pub warm_start_iterations: usize,
    /// Build the full `n x m` plan. When off only the marginals are computed.
    pub materialize_plan: bool,
}

impl Default for ScreenkhornOptions {
    fn default() -> Self {
        Self {
            bounds: BoundsVariant::Guarded,
            solver: SolverConfig::default(),
            warm_start_iterations: 3,
            materialize_plan: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScreenkhornResult {
    /// Full-length potentials; screened entries hold `log(eps / kappa)` and `log(eps kappa)`.
    pub potentials: DualPotentials,
    pub plan: Option<TransportPlan>,
    /// `mu^sc = B(u, v) 1`
    pub row_marginal: Array1<f64>,
    /// `nu^sc = B(u, v)^T 1`
    pub col_marginal: Array1<f64>,
    pub screening: ScreeningResult,
    pub bounds: BoxBounds,
    pub solver_report: SolverReport,
    /// Kernel, screening, solve and assembly.
    pub wall_time: Duration,
    pub screening_time: Duration,
}

impl ScreenkhornResult {
    pub fn converged(&self) -> bool {
        self.solver_report.converged
    }

    pub fn epsilon(&self) -> f64 {
        self.screening.epsilon
    }

    pub fn kappa(&self) -> f64 {
        self.screening.kappa
    }
}

/// Screened solve with default options.
pub fn screenkhorn(
    cost: &CostMatrix,
    eta: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    n_b: usize,
    m_b: usize,
) -> Result<ScreenkhornResult> {
    screenkhorn_with(cost, eta, mu, nu, n_b, m_b, &ScreenkhornOptions::default())
}

pub fn screenkhorn_with(
    cost: &CostMatrix,
    eta: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    n_b: usize,
    m_b: usize,
    options: &ScreenkhornOptions,
) -> Result<ScreenkhornResult> {
    let start = Instant::now();
    let kernel = gibbs_kernel(cost, eta).in_step(Step::Kernel)?;
    let (n, m) = kernel.dim();
    let budget = Budget::new(n_b, m_b, n, m)?;
    let mut result = solve_with_kernel(&kernel, mu, nu, budget, options)?;
    result.wall_time = start.elapsed();
    Ok(result)
}

/// Screened solve on a prebuilt kernel. `wall_time` then excludes kernel construction.
pub fn solve_with_kernel(
    kernel: &GibbsKernel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    budget: Budget,
    options: &ScreenkhornOptions,
) -> Result<ScreenkhornResult> {
    let start = Instant::now();
    options.solver.validate()?;
    let screening = screen(mu, nu, kernel, budget).in_step(Step::Screening)?;
    let problem = ScreenedDualProblem::build(mu, nu, kernel, &screening).in_step(Step::Screening)?;
    let screening_time = start.elapsed();

    let bounds = box_bounds(&problem, options.bounds).in_step(Step::Bounds)?;
    let (p, q) = (problem.n_active(), problem.m_active());
    let (lower, upper) = bounds.stacked(p, q);

    let (eps, kappa) = (screening.epsilon, screening.kappa);
    let a0 = Array1::from_elem(p, eps / kappa);
    let b0 = Array1::from_elem(q, eps * kappa);
    let (a, b) = restricted_sinkhorn(&problem, &a0, &b0, options.warm_start_iterations)
        .in_step(Step::WarmStart)?;
    let theta0: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .enumerate()
        .map(|(k, x)| x.ln().clamp(lower[k], upper[k]))
        .collect();

    let report = minimize(&problem, &lower, &upper, &theta0, &options.solver).in_step(Step::Solve)?;

    let mut u = Array1::from_elem(screening.n(), screening.u_threshold());
    let mut v = Array1::from_elem(screening.m(), screening.v_threshold());
    for (k, &i) in screening.active_rows.iter().enumerate() {
        u[i] = report.solution[k];
    }
    for (k, &j) in screening.active_cols.iter().enumerate() {
        v[j] = report.solution[p + k];
    }
    let potentials = DualPotentials { u, v };

    let (plan, row_marginal, col_marginal) = if options.materialize_plan {
        let plan = plan_from_potentials(&potentials, kernel).in_step(Step::Assembly)?;
        let (r, c) = (plan.row_marginal().clone(), plan.col_marginal().clone());
        (Some(plan), r, c)
    } else {
        let (r, c) = screened_marginals(&potentials, kernel).in_step(Step::Assembly)?;
        (None, r, c)
    };

    Ok(ScreenkhornResult {
        potentials,
        plan,
        row_marginal,
        col_marginal,
        screening,
        bounds,
        solver_report: report,
        wall_time: start.elapsed(),
        screening_time,
    })
}

/// Marginals of `B(u, v)` without forming the plan.
pub fn screened_marginals(pot: &DualPotentials, kernel: &GibbsKernel) -> Result<(Array1<f64>, Array1<f64>)> {
    let a = exp_checked(&pot.u, "row potential")?;
    let b = exp_checked(&pot.v, "column potential")?;
    let row = &a * &kernel.apply(b.view());
    let col = &b * &kernel.apply_transpose(a.view());
    Ok((row, col))
}

/// `n_b = max(1, round(factor n))`, `m_b = max(1, round(factor m))`.
pub fn decimation_to_budget(n: usize, m: usize, factor: f64) -> Result<(usize, usize)> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "factor",
            value: factor,
            reason: "budget factor must lie in (0, 1]",
        });
    }
    let scale = |k: usize| ((factor * k as f64).round() as usize).clamp(1, k.max(1));
    Ok((scale(n), scale(m)))
}
