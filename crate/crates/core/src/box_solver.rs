//! Bound-constrained minimization of smooth convex functions and the restricted
//! Sinkhorn warm start.
//!
//! `minimize` alternates a gradient-projection step (to find which coordinates sit
//! on a face of the box) with limited-memory BFGS directions computed on the free
//! coordinates only, followed by an Armijo backtracking search along the projected
//! path `P(x + alpha d)`.

use std::collections::VecDeque;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::screened_dual::ScreenedDualProblem;

/// Objective-and-gradient oracle. Writes the gradient into `grad` and returns the value.
pub trait SmoothObjective {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl<F> SmoothObjective for F
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self(x, grad)
    }
}

impl SmoothObjective for &ScreenedDualProblem {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.value_and_gradient(x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once the largest projected-gradient component is at most this.
    pub pg_tolerance: f64,
    pub max_iterations: usize,
    pub max_evaluations: usize,
    /// Number of stored `(s, y)` pairs.
    pub history_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            pg_tolerance: 1e-6,
            max_iterations: 100_000,
            max_evaluations: 100_000,
            history_size: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pg_tolerance > 0.0 && self.pg_tolerance.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "pg_tolerance",
                value: self.pg_tolerance,
                reason: "must be positive and finite",
            });
        }
        for (name, value) in [
            ("max_iterations", self.max_iterations),
            ("max_evaluations", self.max_evaluations),
            ("history_size", self.history_size),
        ] {
            if value == 0 {
                return Err(Error::InvalidParameter {
                    name,
                    value: 0.0,
                    reason: "must be at least 1",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    MaxEvaluations,
    /// No acceptable step along the projected path, even after dropping the history.
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub solution: Vec<f64>,
    pub objective_value: f64,
    pub projected_gradient_inf_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub termination: Termination,
}

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const ROUNDING: f64 = 4.0 * f64::EPSILON;

/// Projected gradient: components that would push a coordinate out of the box are zeroed.
pub fn projected_gradient(x: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn check_bounds(lower: &[f64], upper: &[f64], start: &[f64]) -> Result<()> {
    if lower.len() != start.len() || upper.len() != start.len() {
        return Err(Error::shape(
            "minimize",
            format!("bounds of length {}", start.len()),
            format!("({}, {})", lower.len(), upper.len()),
        ));
    }
    for i in 0..start.len() {
        let (lo, hi, x) = (lower[i], upper[i], start[i]);
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!("bad bounds [{lo}, {hi}] at coordinate {i}")));
        }
        if !(x.is_finite() && lo <= x && x <= hi) {
            return Err(Error::InvalidInput(format!(
                "start[{i}] = {x} is outside [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

struct History {
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    capacity: usize,
}

impl History {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|b| b * b).sum();
        if sy > f64::EPSILON * yy && sy > 0.0 {
            if self.pairs.len() == self.capacity {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y));
        }
    }

    /// Two-loop recursion restricted to the `free` coordinates.
    fn direction(&self, grad: &[f64], free: &[bool]) -> Vec<f64> {
        let masked = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .zip(free)
                .filter(|(_, &f)| f)
                .map(|((x, y), _)| x * y)
                .sum()
        };
        let mut q: Vec<f64> = grad.iter().zip(free).map(|(&g, &f)| if f { g } else { 0.0 }).collect();
        let mut used = Vec::with_capacity(self.pairs.len());
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y) in self.pairs.iter().rev() {
            let sy = masked(s, y);
            if sy <= 0.0 {
                continue;
            }
            let rho = 1.0 / sy;
            let alpha = rho * masked(s, &q);
            for i in 0..q.len() {
                if free[i] {
                    q[i] -= alpha * y[i];
                }
            }
            used.push((s, y, rho));
            alphas.push(alpha);
        }
        let gamma = used
            .first()
            .map(|(s, y, _)| masked(s, y) / masked(y, y))
            .filter(|g| g.is_finite() && *g > 0.0)
            .unwrap_or(1.0);
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), alpha) in used.iter().zip(alphas.iter()).rev() {
            let beta = rho * masked(y, &q);
            for i in 0..q.len() {
                if free[i] {
                    q[i] += (alpha - beta) * s[i];
                }
            }
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

/// Minimizes a smooth convex function over the box `[lower, upper]` from `start`.
///
/// Bounds may be infinite. Hitting an iteration or evaluation cap, or failing the
/// line search, returns a report with `converged = false`.
pub fn minimize<F: SmoothObjective>(
    mut objective: F,
    lower: &[f64],
    upper: &[f64],
    start: &[f64],
    config: &SolverConfig,
) -> Result<SolverReport> {
    config.validate()?;
    check_bounds(lower, upper, start)?;
    let d = start.len();
    let project = |i: usize, v: f64| v.clamp(lower[i], upper[i]);

    let mut x = start.to_vec();
    let mut g = vec![0.0; d];
    let mut f = objective.evaluate(&x, &mut g)?;
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut history = History {
        pairs: VecDeque::with_capacity(config.history_size),
        capacity: config.history_size,
    };

    let mut x_trial = vec![0.0; d];
    let mut g_trial = vec![0.0; d];

    let termination = loop {
        let pg = projected_gradient(&x, &g, lower, upper);
        let pg_norm = inf_norm(&pg);
        if pg_norm <= config.pg_tolerance {
            break Termination::Converged;
        }
        if iterations >= config.max_iterations {
            break Termination::MaxIterations;
        }
        if evaluations >= config.max_evaluations {
            break Termination::MaxEvaluations;
        }
        iterations += 1;

        let free: Vec<bool> = pg.iter().map(|&p| p != 0.0).collect();
        let mut steepest = history.pairs.is_empty();
        let mut accepted = None;
        for _attempt in 0..2 {
            let dir = if steepest {
                pg.iter().map(|&p| -p).collect()
            } else {
                history.direction(&g, &free)
            };
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                if steepest {
                    break;
                }
                history.pairs.clear();
                steepest = true;
                continue;
            }
            let mut alpha = if steepest { 1.0f64.min(1.0 / inf_norm(&dir)) } else { 1.0 };
            for _ in 0..MAX_BACKTRACKS {
                if evaluations >= config.max_evaluations {
                    break;
                }
                for i in 0..d {
                    x_trial[i] = project(i, x[i] + alpha * dir[i]);
                }
                let predicted: f64 = (0..d).map(|i| g[i] * (x_trial[i] - x[i])).sum();
                if predicted >= 0.0 {
                    // projection removed all descent or the step is below resolution
                    alpha *= BACKTRACK;
                    continue;
                }
                evaluations += 1;
                match objective.evaluate(&x_trial, &mut g_trial) {
                    Ok(f_trial) if f_trial <= f + ARMIJO * predicted => {
                        accepted = Some(f_trial);
                        break;
                    }
                    // Predicted decrease below the rounding level of f: Armijo cannot be
                    // decided, so accept a step that keeps f within rounding and
                    // reduces the projected gradient.
                    Ok(f_trial)
                        if -predicted <= ROUNDING * f.abs()
                            && f_trial <= f + ROUNDING * f.abs()
                            && inf_norm(&projected_gradient(&x_trial, &g_trial, lower, upper)) < pg_norm =>
                    {
                        accepted = Some(f_trial);
                        break;
                    }
                    Ok(_) => {}
                    // overflow far from the current point: treat as a failed step
                    Err(Error::NumericRange { .. }) => {}
                    Err(e) => return Err(e),
                }
                alpha *= BACKTRACK;
            }
            if accepted.is_some() || steepest {
                break;
            }
            history.pairs.clear();
            steepest = true;
        }

        let Some(f_new) = accepted else {
            break if evaluations >= config.max_evaluations {
                Termination::MaxEvaluations
            } else {
                Termination::LineSearchFailure
            };
        };
        let s: Vec<f64> = (0..d).map(|i| x_trial[i] - x[i]).collect();
        let y: Vec<f64> = (0..d).map(|i| g_trial[i] - g[i]).collect();
        history.push(s, y);
        std::mem::swap(&mut x, &mut x_trial);
        std::mem::swap(&mut g, &mut g_trial);
        f = f_new;
    };

    let pg_norm = inf_norm(&projected_gradient(&x, &g, lower, upper));
    Ok(SolverReport {
        solution: x,
        objective_value: f,
        projected_gradient_inf_norm: pg_norm,
        iterations,
        evaluations,
        converged: termination == Termination::Converged,
        termination,
    })
}

/// Scaling-domain Sinkhorn sweeps on the active block, with the screened
/// coordinates entering through the cross sums `s` and `t`.
pub fn restricted_sinkhorn(
    p: &ScreenedDualProblem,
    a0: &Array1<f64>,
    b0: &Array1<f64>,
    iters: usize,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if a0.len() != p.n_active() || b0.len() != p.m_active() {
        return Err(Error::shape(
            "restricted_sinkhorn",
            format!("({}, {})", p.n_active(), p.m_active()),
            format!("({}, {})", a0.len(), b0.len()),
        ));
    }
    if let Some(i) = a0.iter().chain(b0.iter()).position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "warm start scalings must be positive and finite (entry {i})"
        )));
    }
    let (eps, kappa) = (p.epsilon(), p.kappa());
    let fu_bar = eps * kappa * p.row_cross();
    let fv_bar = (eps / kappa) * p.col_cross();
    let k = p.kernel_block();
    let mut a = a0.clone();
    let mut b = b0.clone();
    for _ in 0..iters {
        let fv = k.t().dot(&a) + &fv_bar;
        b = p.nu_active() / &(kappa * fv);
        let fu = k.dot(&b) + &fu_bar;
        a = kappa * p.mu_active() / &fu;
    }
    if let Some(i) = a.iter().chain(b.iter()).position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::NumericRange {
            context: "restricted sinkhorn",
            index: i,
        });
    }
    Ok((a, b))
}
