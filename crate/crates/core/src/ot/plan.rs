use ndarray::{Array1, Array2, Axis};

use super::kernel::GibbsKernel;
use super::measure::{CostMatrix, DiscreteMeasure};
use crate::error::{Error, Result};

/// Log-domain dual variables `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

impl DualPotentials {
    pub fn new(u: Array1<f64>, v: Array1<f64>) -> Result<Self> {
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("u[{i}] is not finite")));
        }
        if let Some(j) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("v[{j}] is not finite")));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            u: Array1::zeros(n),
            v: Array1::zeros(m),
        }
    }

    /// Scaling vectors `(e^u, e^v)`, failing on overflow.
    pub fn scalings(&self) -> Result<(Array1<f64>, Array1<f64>)> {
        Ok((
            exp_checked(&self.u, "row potential")?,
            exp_checked(&self.v, "column potential")?,
        ))
    }
}

pub(crate) fn exp_checked(x: &Array1<f64>, context: &'static str) -> Result<Array1<f64>> {
    let e = x.mapv(f64::exp);
    match e.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NumericRange { context, index }),
        None => Ok(e),
    }
}

/// A coupling `P` with its row and column marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Array2<f64>,
    row_marginal: Array1<f64>,
    col_marginal: Array1<f64>,
}

impl TransportPlan {
    /// Wraps an arbitrary nonnegative matrix.
    pub fn from_entries(entries: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), p)) = entries
            .indexed_iter()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "plan entry ({i}, {j}) must be finite and nonnegative, got {p}"
            )));
        }
        Ok(Self::with_marginals(entries))
    }

    fn with_marginals(entries: Array2<f64>) -> Self {
        let row_marginal = entries.rows().into_iter().map(|r| r.sum()).collect();
        let col_marginal = entries.sum_axis(Axis(0));
        Self {
            entries,
            row_marginal,
            col_marginal,
        }
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn row_marginal(&self) -> &Array1<f64> {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &Array1<f64> {
        &self.col_marginal
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }
}

fn check_dims(
    context: &'static str,
    pot: &DualPotentials,
    kernel: &GibbsKernel,
) -> Result<()> {
    let (n, m) = kernel.dim();
    if pot.u.len() != n || pot.v.len() != m {
        return Err(Error::shape(
            context,
            format!("potentials of lengths ({n}, {m})"),
            format!("({}, {})", pot.u.len(), pot.v.len()),
        ));
    }
    Ok(())
}

/// `B(u, v) = diag(e^u) K diag(e^v)`.
pub fn plan_from_potentials(pot: &DualPotentials, kernel: &GibbsKernel) -> Result<TransportPlan> {
    check_dims("plan_from_potentials", pot, kernel)?;
    let (a, b) = pot.scalings()?;
    let mut entries = kernel.entries().clone();
    for (mut row, &ai) in entries.rows_mut().into_iter().zip(a.iter()) {
        row.zip_mut_with(&b, |p, &bj| *p *= ai * bj);
    }
    if let Some(((i, _), _)) = entries.indexed_iter().find(|(_, p)| !p.is_finite()) {
        return Err(Error::NumericRange {
            context: "transport plan",
            index: i,
        });
    }
    Ok(TransportPlan::with_marginals(entries))
}

/// `Psi(u, v) = 1^T B(u, v) 1 - <u, mu> - <v, nu>`.
pub fn dual_objective(
    pot: &DualPotentials,
    kernel: &GibbsKernel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<f64> {
    check_dims("dual_objective", pot, kernel)?;
    let (n, m) = kernel.dim();
    if mu.len() != n || nu.len() != m {
        return Err(Error::shape(
            "dual_objective",
            format!("measures of lengths ({n}, {m})"),
            format!("({}, {})", mu.len(), nu.len()),
        ));
    }
    let (a, b) = pot.scalings()?;
    let mass = a.dot(&kernel.apply(b.view()));
    if !mass.is_finite() {
        return Err(Error::NumericRange {
            context: "dual objective",
            index: 0,
        });
    }
    Ok(mass - pot.u.dot(mu.weights()) - pot.v.dot(nu.weights()))
}

/// `<C, P>`.
pub fn divergence(plan: &TransportPlan, cost: &CostMatrix) -> Result<f64> {
    if plan.dim() != cost.dim() {
        return Err(Error::shape(
            "divergence",
            format!("{:?}", cost.dim()),
            format!("{:?}", plan.dim()),
        ));
    }
    Ok(plan
        .entries()
        .iter()
        .zip(cost.entries().iter())
        .map(|(p, c)| p * c)
        .sum())
}
