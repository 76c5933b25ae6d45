//! Python bindings. Vectors and matrices cross the boundary as lists (any
//! sequence works on input, including numpy arrays).

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::screenkhorn as sk;
use ::screenkhorn::diagnostics;

fn to_py(e: sk::Error) -> PyErr {
    use sk::Error as E;
    match e.root() {
        E::InvalidParameter { .. } | E::InvalidInput(_) | E::ShapeMismatch { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn problem(cost: Vec<Vec<f64>>, mu: Vec<f64>, nu: Vec<f64>) -> PyResult<(sk::CostMatrix, sk::DiscreteMeasure, sk::DiscreteMeasure)> {
    Ok((
        sk::CostMatrix::new(matrix(cost)?).map_err(to_py)?,
        sk::DiscreteMeasure::new(Array1::from(mu)).map_err(to_py)?,
        sk::DiscreteMeasure::new(Array1::from(nu)).map_err(to_py)?,
    ))
}

#[pyclass(get_all, frozen, skip_from_py_object, module = "pyscreenkhorn")]
#[derive(Clone)]
pub struct Certificate {
    name: String,
    empirical_value: f64,
    bound_value: f64,
    stated_bound: f64,
    slack: f64,
    satisfied: bool,
}

impl From<diagnostics::Certificate> for Certificate {
    fn from(c: diagnostics::Certificate) -> Self {
        Self {
            name: c.name.to_string(),
            empirical_value: c.empirical_value,
            bound_value: c.bound_value,
            stated_bound: c.stated_bound,
            slack: c.slack,
            satisfied: c.satisfied,
        }
    }
}

#[pymethods]
impl Certificate {
    fn __repr__(&self) -> String {
        format!(
            "Certificate({}, empirical={:e}, bound={:e}, satisfied={})",
            self.name, self.empirical_value, self.bound_value, self.satisfied
        )
    }
}

#[pyclass(get_all, frozen, module = "pyscreenkhorn")]
pub struct SinkhornResult {
    u: Vec<f64>,
    v: Vec<f64>,
    plan: Vec<Vec<f64>>,
    iterations: usize,
    violation: f64,
    converged: bool,
}

/// Outcome of a screened solve. Keeps the problem so certificates can be evaluated later.
#[pyclass(frozen, module = "pyscreenkhorn")]
pub struct ScreenkhornResult {
    inner: sk::ScreenkhornResult,
    kernel: sk::GibbsKernel,
    cost: sk::CostMatrix,
    mu: sk::DiscreteMeasure,
    nu: sk::DiscreteMeasure,
}

#[pymethods]
impl ScreenkhornResult {
    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.potentials.u.to_vec()
    }
    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.potentials.v.to_vec()
    }
    #[getter]
    fn plan(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.plan.as_ref().map(|p| rows(p.entries()))
    }
    #[getter]
    fn row_marginal(&self) -> Vec<f64> {
        self.inner.row_marginal.to_vec()
    }
    #[getter]
    fn col_marginal(&self) -> Vec<f64> {
        self.inner.col_marginal.to_vec()
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }
    #[getter]
    fn active_rows(&self) -> Vec<usize> {
        self.inner.screening.active_rows.clone()
    }
    #[getter]
    fn active_cols(&self) -> Vec<usize> {
        self.inner.screening.active_cols.clone()
    }
    /// `(u_lower, u_upper, v_lower, v_upper)` in log scale.
    #[getter]
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let b = self.inner.bounds;
        (b.u_lower, b.u_upper, b.v_lower, b.v_upper)
    }
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }
    #[getter]
    fn iterations(&self) -> usize {
        self.inner.solver_report.iterations
    }
    #[getter]
    fn objective(&self) -> f64 {
        self.inner.solver_report.objective_value
    }
    #[getter]
    fn projected_gradient(&self) -> f64 {
        self.inner.solver_report.projected_gradient_inf_norm
    }
    #[getter]
    fn termination(&self) -> String {
        format!("{:?}", self.inner.solver_report.termination)
    }
    #[getter]
    fn wall_time(&self) -> f64 {
        self.inner.wall_time.as_secs_f64()
    }
    #[getter]
    fn screening_time(&self) -> f64 {
        self.inner.screening_time.as_secs_f64()
    }

    /// `(||mu - mu^sc||_1, ||nu - nu^sc||_1)`
    fn marginal_violations(&self) -> PyResult<(f64, f64)> {
        let r = &self.inner;
        diagnostics::violations_of_marginals(&r.row_marginal, &r.col_marginal, &self.mu, &self.nu).map_err(to_py)
    }

    fn omega_kappa(&self) -> f64 {
        diagnostics::omega_kappa(&self.inner)
    }

    fn objective_gap_scale(&self) -> PyResult<f64> {
        diagnostics::objective_gap_scale(&self.inner, &self.cost, self.kernel.eta(), &self.mu, &self.nu).map_err(to_py)
    }

    /// Row and column violation bounds followed by the two mass bounds. Fails on unconverged solves.
    fn certificates(&self) -> PyResult<Vec<Certificate>> {
        let (r, k, mu, nu) = (&self.inner, &self.kernel, &self.mu, &self.nu);
        let mut out = vec![
            diagnostics::violation_certificate_rows(r, k, mu, nu).map_err(to_py)?,
            diagnostics::violation_certificate_cols(r, k, mu, nu).map_err(to_py)?,
        ];
        let (a, b) = diagnostics::marginal_norm_certificates(r, k, mu, nu).map_err(to_py)?;
        out.push(a);
        out.push(b);
        Ok(out.into_iter().map(Certificate::from).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "ScreenkhornResult(active={}x{}, epsilon={:e}, kappa={:e}, converged={})",
            self.inner.screening.active_rows.len(),
            self.inner.screening.active_cols.len(),
            self.inner.epsilon(),
            self.inner.kappa(),
            self.inner.converged()
        )
    }
}

/// Screened Sinkhorn keeping `n_b` rows and `m_b` columns active.
#[pyfunction(name = "screenkhorn")]
#[pyo3(signature = (cost, mu, nu, eta, n_b, m_b, *, tight_bounds = false, pg_tolerance = 1e-6,
                    max_iterations = 100_000, materialize_plan = true))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    cost: Vec<Vec<f64>>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    eta: f64,
    n_b: usize,
    m_b: usize,
    tight_bounds: bool,
    pg_tolerance: f64,
    max_iterations: usize,
    materialize_plan: bool,
) -> PyResult<ScreenkhornResult> {
    let (cost, mu, nu) = problem(cost, mu, nu)?;
    let options = sk::ScreenkhornOptions {
        bounds: if tight_bounds {
            sk::BoundsVariant::Tight
        } else {
            sk::BoundsVariant::Guarded
        },
        solver: sk::SolverConfig {
            pg_tolerance,
            max_iterations,
            ..Default::default()
        },
        materialize_plan,
        ..Default::default()
    };
    let (inner, kernel) = py
        .detach(|| {
            let inner = sk::screenkhorn_with(&cost, eta, &mu, &nu, n_b, m_b, &options)?;
            Ok::<_, sk::Error>((inner, sk::gibbs_kernel(&cost, eta)?))
        })
        .map_err(to_py)?;
    Ok(ScreenkhornResult {
        inner,
        kernel,
        cost,
        mu,
        nu,
    })
}

/// Baseline Sinkhorn.
#[pyfunction]
#[pyo3(signature = (cost, mu, nu, eta, *, stop_threshold = 1e-9, max_iter = 1000))]
fn sinkhorn(
    py: Python<'_>,
    cost: Vec<Vec<f64>>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    eta: f64,
    stop_threshold: f64,
    max_iter: usize,
) -> PyResult<SinkhornResult> {
    let (cost, mu, nu) = problem(cost, mu, nu)?;
    let config = sk::SinkhornConfig {
        stop_threshold,
        max_iter,
    };
    py.detach(|| {
        let kernel = sk::gibbs_kernel(&cost, eta)?;
        let s = sk::sinkhorn(&mu, &nu, &kernel, &config)?;
        let plan = sk::plan_from_potentials(&s.potentials, &kernel)?;
        Ok(SinkhornResult {
            u: s.potentials.u.to_vec(),
            v: s.potentials.v.to_vec(),
            plan: rows(plan.entries()),
            iterations: s.iterations,
            violation: s.violation,
            converged: s.converged,
        })
    })
    .map_err(to_py)
}

/// `(epsilon, kappa, active_rows, active_cols)` for the given budget.
#[pyfunction]
fn screen(
    cost: Vec<Vec<f64>>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    eta: f64,
    n_b: usize,
    m_b: usize,
) -> PyResult<(f64, f64, Vec<usize>, Vec<usize>)> {
    let (cost, mu, nu) = problem(cost, mu, nu)?;
    let kernel = sk::gibbs_kernel(&cost, eta).map_err(to_py)?;
    let (n, m) = kernel.dim();
    let budget = sk::Budget::new(n_b, m_b, n, m).map_err(to_py)?;
    let sr = sk::screen(&mu, &nu, &kernel, budget).map_err(to_py)?;
    Ok((sr.epsilon, sr.kappa, sr.active_rows, sr.active_cols))
}

#[pyfunction]
fn decimation_to_budget(n: usize, m: usize, factor: f64) -> PyResult<(usize, usize)> {
    sk::decimation_to_budget(n, m, factor).map_err(to_py)
}

/// `|<C, P_ref> - <C, P>| / <C, P_ref>`
#[pyfunction]
fn relative_divergence(reference: Vec<Vec<f64>>, candidate: Vec<Vec<f64>>, cost: Vec<Vec<f64>>) -> PyResult<f64> {
    let r = sk::TransportPlan::from_entries(matrix(reference)?).map_err(to_py)?;
    let c = sk::TransportPlan::from_entries(matrix(candidate)?).map_err(to_py)?;
    let cost = sk::CostMatrix::new(matrix(cost)?).map_err(to_py)?;
    diagnostics::relative_divergence(&r, &c, &cost).map_err(to_py)
}

#[pyfunction]
fn pinsker_check(gamma: Vec<f64>, beta: Vec<f64>) -> PyResult<Certificate> {
    diagnostics::pinsker_check(&gamma, &beta).map(Certificate::from).map_err(to_py)
}

#[pymodule]
fn pyscreenkhorn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ScreenkhornResult>()?;
    m.add_class::<SinkhornResult>()?;
    m.add_class::<Certificate>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sinkhorn, m)?)?;
    m.add_function(wrap_pyfunction!(screen, m)?)?;
    m.add_function(wrap_pyfunction!(decimation_to_budget, m)?)?;
    m.add_function(wrap_pyfunction!(relative_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(pinsker_check, m)?)?;
    Ok(())
}
