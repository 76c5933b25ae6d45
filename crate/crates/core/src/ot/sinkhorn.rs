use ndarray::{Array1, Zip};

use super::kernel::GibbsKernel;
use super::measure::DiscreteMeasure;
use super::plan::DualPotentials;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    /// Stop once `||B 1 - mu||_1 + ||B^T 1 - nu||_1` drops below this.
    pub stop_threshold: f64,
    pub max_iter: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            stop_threshold: 1e-9,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    pub potentials: DualPotentials,
    pub iterations: usize,
    /// Combined l1 marginal violation at the returned iterate.
    pub violation: f64,
    pub converged: bool,
}

/// Plain scaling-domain Sinkhorn iterations `a <- mu / (K b)`, `b <- nu / (K^T a)`.
///
/// Hitting `max_iter` is not an error; the solution comes back with
/// `converged = false`.
pub fn sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kernel: &GibbsKernel,
    config: &SinkhornConfig,
) -> Result<SinkhornSolution> {
    let (n, m) = kernel.dim();
    if mu.len() != n || nu.len() != m {
        return Err(Error::shape(
            "sinkhorn",
            format!("measures of lengths ({n}, {m})"),
            format!("({}, {})", mu.len(), nu.len()),
        ));
    }
    if !(config.stop_threshold > 0.0) {
        return Err(Error::InvalidParameter {
            name: "stop_threshold",
            value: config.stop_threshold,
            reason: "must be positive",
        });
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            value: 0.0,
            reason: "must be at least 1",
        });
    }

    let mu = mu.weights();
    let nu = nu.weights();
    let mut a = Array1::<f64>::ones(n);
    let mut b = Array1::<f64>::ones(m);
    let mut kb = kernel.apply(b.view());
    let mut violation = f64::INFINITY;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        a = divide(mu, &kb, "row scaling")?;
        let kta = kernel.apply_transpose(a.view());
        b = divide(nu, &kta, "column scaling")?;
        kb = kernel.apply(b.view());

        let row_err: f64 = Zip::from(&a)
            .and(&kb)
            .and(mu)
            .fold(0.0, |acc, &ai, &k, &t| acc + (ai * k - t).abs());
        let col_err: f64 = Zip::from(&b)
            .and(&kta)
            .and(nu)
            .fold(0.0, |acc, &bj, &k, &t| acc + (bj * k - t).abs());
        violation = row_err + col_err;
        if !violation.is_finite() {
            return Err(Error::Numeric(format!(
                "marginal violation became {violation} at iteration {iterations}"
            )));
        }
        if violation < config.stop_threshold {
            break;
        }
    }

    let u = log_checked(&a, "row scaling")?;
    let v = log_checked(&b, "column scaling")?;
    Ok(SinkhornSolution {
        potentials: DualPotentials { u, v },
        iterations,
        violation,
        converged: violation < config.stop_threshold,
    })
}

fn divide(target: &Array1<f64>, denom: &Array1<f64>, context: &'static str) -> Result<Array1<f64>> {
    if let Some(index) = denom.iter().position(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::NumericRange { context, index });
    }
    let out = target / denom;
    match out.iter().position(|x| !x.is_finite() || *x <= 0.0) {
        Some(index) => Err(Error::NumericRange { context, index }),
        None => Ok(out),
    }
}

fn log_checked(x: &Array1<f64>, context: &'static str) -> Result<Array1<f64>> {
    let l = x.mapv(f64::ln);
    match l.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NumericRange { context, index }),
        None => Ok(l),
    }
}
