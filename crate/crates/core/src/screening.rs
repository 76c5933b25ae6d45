//! Static screening: ratio vectors, `(epsilon, kappa)` from a point budget, and the
//! active index sets whose dual coordinates stay free.
//!
//! A row `i` is active when `mu_i >= (epsilon^2 / kappa) r_i(K)` and a column `j`
//! when `nu_j >= epsilon^2 kappa c_j(K)`. Every other coordinate is provably pinned
//! at its lower bound (`e^u = epsilon / kappa`, `e^v = epsilon kappa`) in the
//! constrained dual, so it can be removed before optimization.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::ot::{DiscreteMeasure, GibbsKernel};

/// Number of rows and columns kept free, `1 <= n_b <= n`, `1 <= m_b <= m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    n_b: usize,
    m_b: usize,
}

impl Budget {
    pub fn new(n_b: usize, m_b: usize, n: usize, m: usize) -> Result<Self> {
        if n_b == 0 || n_b > n {
            return Err(Error::InvalidParameter {
                name: "n_b",
                value: n_b as f64,
                reason: "row budget must lie in [1, n]",
            });
        }
        if m_b == 0 || m_b > m {
            return Err(Error::InvalidParameter {
                name: "m_b",
                value: m_b as f64,
                reason: "column budget must lie in [1, m]",
            });
        }
        Ok(Self { n_b, m_b })
    }

    pub fn full(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, n, m)
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn m_b(&self) -> usize {
        self.m_b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub epsilon: f64,
    pub kappa: f64,
    /// Cutoff `epsilon^2 / kappa` applied to `mu_i / r_i(K)`.
    pub row_threshold: f64,
    /// Cutoff `epsilon^2 kappa` applied to `nu_j / c_j(K)`.
    pub col_threshold: f64,
    /// `I`, increasing.
    pub active_rows: Vec<usize>,
    /// `J`, increasing.
    pub active_cols: Vec<usize>,
    pub inactive_rows: Vec<usize>,
    pub inactive_cols: Vec<usize>,
    /// `mu / r(K)` sorted in decreasing order.
    pub xi: Array1<f64>,
    /// `nu / c(K)` sorted in decreasing order.
    pub zeta: Array1<f64>,
}

impl ScreeningResult {
    pub fn n(&self) -> usize {
        self.active_rows.len() + self.inactive_rows.len()
    }

    pub fn m(&self) -> usize {
        self.active_cols.len() + self.inactive_cols.len()
    }

    /// Threshold value `log(epsilon / kappa)` of every screened row potential.
    pub fn u_threshold(&self) -> f64 {
        (self.epsilon / self.kappa).ln()
    }

    /// Threshold value `log(epsilon kappa)` of every screened column potential.
    pub fn v_threshold(&self) -> f64 {
        (self.epsilon * self.kappa).ln()
    }
}

fn check_dims(mu: &DiscreteMeasure, nu: &DiscreteMeasure, kernel: &GibbsKernel) -> Result<()> {
    let (n, m) = kernel.dim();
    if mu.len() != n || nu.len() != m {
        return Err(Error::shape(
            "screening",
            format!("measures of lengths ({n}, {m})"),
            format!("({}, {})", mu.len(), nu.len()),
        ));
    }
    Ok(())
}

fn raw_ratios(mu: &DiscreteMeasure, nu: &DiscreteMeasure, kernel: &GibbsKernel) -> (Array1<f64>, Array1<f64>) {
    (mu.weights() / kernel.row_sums(), nu.weights() / kernel.col_sums())
}

fn sorted_decreasing(x: &Array1<f64>) -> Array1<f64> {
    let mut v = x.to_vec();
    // stable: equal values keep original index order
    v.sort_by(|a, b| b.total_cmp(a));
    Array1::from(v)
}

/// `xi = sort_desc(mu / r(K))`, `zeta = sort_desc(nu / c(K))`.
pub fn ratio_vectors(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kernel: &GibbsKernel,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_dims(mu, nu, kernel)?;
    let (row, col) = raw_ratios(mu, nu, kernel);
    Ok((sorted_decreasing(&row), sorted_decreasing(&col)))
}

/// `epsilon = (xi_{n_b} zeta_{m_b})^{1/4}`, `kappa = sqrt(zeta_{m_b} / xi_{n_b})`,
/// with `xi_{n_b}` the `n_b`-th largest ratio.
pub fn epsilon_kappa(xi: &Array1<f64>, zeta: &Array1<f64>, budget: Budget) -> Result<(f64, f64)> {
    let (x, z) = budget_ratios(xi, zeta, budget)?;
    Ok(((x * z).sqrt().sqrt(), (z / x).sqrt()))
}

fn budget_ratios(xi: &Array1<f64>, zeta: &Array1<f64>, budget: Budget) -> Result<(f64, f64)> {
    let x = *xi.get(budget.n_b - 1).ok_or_else(|| {
        Error::shape("epsilon_kappa", format!("at least {} row ratios", budget.n_b), xi.len())
    })?;
    let z = *zeta.get(budget.m_b - 1).ok_or_else(|| {
        Error::shape("epsilon_kappa", format!("at least {} column ratios", budget.m_b), zeta.len())
    })?;
    if !(x > 0.0 && z > 0.0 && x.is_finite() && z.is_finite()) {
        return Err(Error::DegenerateScreening(format!(
            "budget ratios must be positive and finite (xi = {x}, zeta = {z})"
        )));
    }
    Ok((x, z))
}

fn partition(ratios: &Array1<f64>, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    (0..ratios.len()).partition(|&i| ratios[i] >= threshold)
}

fn assemble(
    epsilon: f64,
    kappa: f64,
    row_threshold: f64,
    col_threshold: f64,
    row_ratios: &Array1<f64>,
    col_ratios: &Array1<f64>,
) -> Result<ScreeningResult> {
    let (active_rows, inactive_rows) = partition(row_ratios, row_threshold);
    let (active_cols, inactive_cols) = partition(col_ratios, col_threshold);
    if active_rows.is_empty() {
        return Err(Error::DegenerateScreening(format!(
            "no active rows at threshold {row_threshold:e}"
        )));
    }
    if active_cols.is_empty() {
        return Err(Error::DegenerateScreening(format!(
            "no active columns at threshold {col_threshold:e}"
        )));
    }
    Ok(ScreeningResult {
        epsilon,
        kappa,
        row_threshold,
        col_threshold,
        active_rows,
        active_cols,
        inactive_rows,
        inactive_cols,
        xi: sorted_decreasing(row_ratios),
        zeta: sorted_decreasing(col_ratios),
    })
}

/// Active sets for arbitrary `(epsilon, kappa)`.
///
/// Boundary indices (ratio exactly equal to the cutoff) are kept active.
pub fn active_sets(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kernel: &GibbsKernel,
    epsilon: f64,
    kappa: f64,
) -> Result<ScreeningResult> {
    check_dims(mu, nu, kernel)?;
    for (name, value) in [("epsilon", epsilon), ("kappa", kappa)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                value,
                reason: "must be positive and finite",
            });
        }
    }
    let (row, col) = raw_ratios(mu, nu, kernel);
    let e2 = epsilon * epsilon;
    assemble(epsilon, kappa, e2 / kappa, e2 * kappa, &row, &col)
}

/// Screening with a point budget (Step 1 of the screened solve).
///
/// The cutoffs are the budget ratios `xi_{n_b}` and `zeta_{m_b}` themselves, which
/// equal `epsilon^2 / kappa` and `epsilon^2 kappa` algebraically; using them directly
/// keeps the `n_b`-th row from being dropped by rounding. Tied ratios can make
/// `|I| > n_b`.
pub fn screen(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kernel: &GibbsKernel,
    budget: Budget,
) -> Result<ScreeningResult> {
    check_dims(mu, nu, kernel)?;
    let (n, m) = kernel.dim();
    Budget::new(budget.n_b, budget.m_b, n, m)?;
    let (row, col) = raw_ratios(mu, nu, kernel);
    let xi = sorted_decreasing(&row);
    let zeta = sorted_decreasing(&col);
    let (x, z) = budget_ratios(&xi, &zeta, budget)?;
    let (epsilon, kappa) = epsilon_kappa(&xi, &zeta, budget)?;
    assemble(epsilon, kappa, x, z, &row, &col)
}
