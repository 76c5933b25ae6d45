//! The screened dual problem over the active coordinates `(u_I, v_J)` and the
//! box bounds that contain its solution.
//!
//! With the screened coordinates fixed at `log(epsilon / kappa)` and `log(epsilon kappa)`,
//! the constrained dual reduces to
//!
//! ```text
//! Psi(u, v) = e^u' K_IJ e^v + eps*kappa * e^u' s + (eps/kappa) * t' e^v
//!             - kappa * mu_I' u - nu_J' v / kappa + Xi
//! ```
//!
//! where `s_i = sum_{j not in J} K_ij`, `t_j = sum_{i not in I} K_ij` and `Xi` collects
//! the constant contribution of the screened block.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::ot::{exp_checked, DiscreteMeasure, GibbsKernel};
use crate::screening::ScreeningResult;

#[derive(Debug, Clone)]
pub struct ScreenedDualProblem {
    kernel_block: Array2<f64>,
    row_cross: Array1<f64>,
    col_cross: Array1<f64>,
    xi_const: f64,
    epsilon: f64,
    kappa: f64,
    mu_active: Array1<f64>,
    nu_active: Array1<f64>,
    k_min: f64,
    n: usize,
    m: usize,
    active_rows: Vec<usize>,
    active_cols: Vec<usize>,
}

impl ScreenedDualProblem {
    /// Restricts the dual to the active sets of `sr`.
    pub fn build(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        kernel: &GibbsKernel,
        sr: &ScreeningResult,
    ) -> Result<Self> {
        Self::from_sets(
            mu,
            nu,
            kernel,
            sr.epsilon,
            sr.kappa,
            &sr.active_rows,
            &sr.active_cols,
        )
    }

    /// The constrained dual with nothing screened: every coordinate free, subject
    /// only to `e^u >= epsilon / kappa` and `e^v >= epsilon kappa` (supplied as bounds
    /// by the caller).
    pub fn unreduced(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        kernel: &GibbsKernel,
        epsilon: f64,
        kappa: f64,
    ) -> Result<Self> {
        let (n, m) = kernel.dim();
        let rows: Vec<usize> = (0..n).collect();
        let cols: Vec<usize> = (0..m).collect();
        Self::from_sets(mu, nu, kernel, epsilon, kappa, &rows, &cols)
    }

    fn from_sets(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        kernel: &GibbsKernel,
        epsilon: f64,
        kappa: f64,
        rows: &[usize],
        cols: &[usize],
    ) -> Result<Self> {
        let (n, m) = kernel.dim();
        if mu.len() != n || nu.len() != m {
            return Err(Error::shape(
                "build_problem",
                format!("measures of lengths ({n}, {m})"),
                format!("({}, {})", mu.len(), nu.len()),
            ));
        }
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::DegenerateScreening(
                "screened problem has no free rows or columns".into(),
            ));
        }
        if rows.iter().any(|&i| i >= n) || cols.iter().any(|&j| j >= m) {
            return Err(Error::InvalidInput("active index out of range".into()));
        }
        for (name, value) in [("epsilon", epsilon), ("kappa", kappa)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive and finite",
                });
            }
        }

        let mut row_active = vec![false; n];
        rows.iter().for_each(|&i| row_active[i] = true);
        let mut col_active = vec![false; m];
        cols.iter().for_each(|&j| col_active[j] = true);

        let k = kernel.entries();
        let kernel_block = Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| k[[rows[a], cols[b]]]);
        // over the whole kernel: the bounds sum K over all columns, screened ones included
        let k_min = kernel.min_entry();

        let mut row_cross = Array1::zeros(rows.len());
        for (a, &i) in rows.iter().enumerate() {
            row_cross[a] = (0..m).filter(|&j| !col_active[j]).map(|j| k[[i, j]]).sum();
        }
        let mut col_cross = Array1::<f64>::zeros(cols.len());
        let mut screened_block = 0.0;
        for i in (0..n).filter(|&i| !row_active[i]) {
            let row = k.row(i);
            for (b, &j) in cols.iter().enumerate() {
                col_cross[b] += row[j];
            }
            screened_block += (0..m).filter(|&j| !col_active[j]).map(|j| row[j]).sum::<f64>();
        }

        let mu_w = mu.weights();
        let nu_w = nu.weights();
        let mu_screened: f64 = (0..n).filter(|&i| !row_active[i]).map(|i| mu_w[i]).sum();
        let nu_screened: f64 = (0..m).filter(|&j| !col_active[j]).map(|j| nu_w[j]).sum();
        let xi_const = epsilon * epsilon * screened_block
            - kappa * (epsilon / kappa).ln() * mu_screened
            - (epsilon * kappa).ln() * nu_screened / kappa;

        Ok(Self {
            kernel_block,
            row_cross,
            col_cross,
            xi_const,
            epsilon,
            kappa,
            mu_active: rows.iter().map(|&i| mu_w[i]).collect(),
            nu_active: cols.iter().map(|&j| nu_w[j]).collect(),
            k_min,
            n,
            m,
            active_rows: rows.to_vec(),
            active_cols: cols.to_vec(),
        })
    }

    pub fn kernel_block(&self) -> &Array2<f64> {
        &self.kernel_block
    }

    /// `s_i = sum_{j not in J} K_ij` for `i in I`.
    pub fn row_cross(&self) -> &Array1<f64> {
        &self.row_cross
    }

    /// `t_j = sum_{i not in I} K_ij` for `j in J`.
    pub fn col_cross(&self) -> &Array1<f64> {
        &self.col_cross
    }

    pub fn xi_const(&self) -> f64 {
        self.xi_const
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu_active(&self) -> &Array1<f64> {
        &self.mu_active
    }

    pub fn nu_active(&self) -> &Array1<f64> {
        &self.nu_active
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_active(&self) -> usize {
        self.active_rows.len()
    }

    pub fn m_active(&self) -> usize {
        self.active_cols.len()
    }

    pub fn active_rows(&self) -> &[usize] {
        &self.active_rows
    }

    pub fn active_cols(&self) -> &[usize] {
        &self.active_cols
    }

    /// Number of stacked variables `|I| + |J|`.
    pub fn dim(&self) -> usize {
        self.n_active() + self.m_active()
    }

    fn check_lengths(&self, u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<()> {
        if u.len() != self.n_active() || v.len() != self.m_active() {
            return Err(Error::shape(
                "screened dual",
                format!("({}, {})", self.n_active(), self.m_active()),
                format!("({}, {})", u.len(), v.len()),
            ));
        }
        Ok(())
    }

    pub fn objective(&self, u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_lengths(u, v)?;
        let eu = exp_checked(&u.to_owned(), "screened row potential")?;
        let ev = exp_checked(&v.to_owned(), "screened column potential")?;
        let kev = self.kernel_block.dot(&ev);
        let ek = self.epsilon * self.kappa;
        let e_over_k = self.epsilon / self.kappa;
        let value = eu.dot(&(kev + ek * &self.row_cross)) + e_over_k * self.col_cross.dot(&ev)
            - self.kappa * self.mu_active.dot(&u)
            - self.nu_active.dot(&v) / self.kappa
            + self.xi_const;
        if !value.is_finite() {
            return Err(Error::NumericRange {
                context: "screened objective",
                index: 0,
            });
        }
        Ok(value)
    }

    pub fn gradient(
        &self,
        u: ArrayView1<'_, f64>,
        v: ArrayView1<'_, f64>,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check_lengths(u, v)?;
        let eu = exp_checked(&u.to_owned(), "screened row potential")?;
        let ev = exp_checked(&v.to_owned(), "screened column potential")?;
        let (_, gu, gv) = self.eval_scaled(&u, &v, &eu, &ev);
        Ok((gu, gv))
    }

    fn eval_scaled(
        &self,
        u: &ArrayView1<'_, f64>,
        v: &ArrayView1<'_, f64>,
        eu: &Array1<f64>,
        ev: &Array1<f64>,
    ) -> (f64, Array1<f64>, Array1<f64>) {
        let ek = self.epsilon * self.kappa;
        let e_over_k = self.epsilon / self.kappa;
        let row_field = self.kernel_block.dot(ev) + ek * &self.row_cross;
        let col_field = self.kernel_block.t().dot(eu) + e_over_k * &self.col_cross;
        let value = eu.dot(&row_field) + e_over_k * self.col_cross.dot(ev)
            - self.kappa * self.mu_active.dot(u)
            - self.nu_active.dot(v) / self.kappa
            + self.xi_const;
        let gu = eu * &row_field - self.kappa * &self.mu_active;
        let gv = ev * &col_field - &self.nu_active / self.kappa;
        (value, gu, gv)
    }

    /// Objective and gradient at the stacked point `theta = (u_I, v_J)`.
    pub fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let p = self.n_active();
        if theta.len() != self.dim() || grad.len() != self.dim() {
            return Err(Error::shape("screened dual", self.dim(), theta.len()));
        }
        let u = ArrayView1::from(&theta[..p]);
        let v = ArrayView1::from(&theta[p..]);
        let eu = exp_checked(&u.to_owned(), "screened row potential")?;
        let ev = exp_checked(&v.to_owned(), "screened column potential")?;
        let (value, gu, gv) = self.eval_scaled(&u, &v, &eu, &ev);
        if !value.is_finite() {
            return Err(Error::NumericRange {
                context: "screened objective",
                index: 0,
            });
        }
        grad[..p].iter_mut().zip(gu.iter()).for_each(|(g, x)| *g = *x);
        grad[p..].iter_mut().zip(gv.iter()).for_each(|(g, x)| *g = *x);
        Ok(value)
    }
}

/// Which lower-bound formula to use for the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundsVariant {
    /// Lower bounds with the inner `epsilon v (...)` guard on the denominator.
    #[default]
    Guarded,
    /// Lower bounds without the inner guard. Never looser than `Guarded`.
    Tight,
}

/// Scalar log-domain box applied uniformly to all active rows and all active columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBounds {
    pub u_lower: f64,
    pub u_upper: f64,
    pub v_lower: f64,
    pub v_upper: f64,
}

impl BoxBounds {
    /// Per-coordinate `(lower, upper)` vectors for the stacked variable `(u_I, v_J)`.
    pub fn stacked(&self, n_active: usize, m_active: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lower = vec![self.u_lower; n_active];
        lower.extend(std::iter::repeat_n(self.v_lower, m_active));
        let mut upper = vec![self.u_upper; n_active];
        upper.extend(std::iter::repeat_n(self.v_upper, m_active));
        (lower, upper)
    }

    pub fn contains(&self, u: &[f64], v: &[f64]) -> bool {
        u.iter().all(|&x| self.u_lower <= x && x <= self.u_upper)
            && v.iter().all(|&x| self.v_lower <= x && x <= self.v_upper)
    }
}

/// Degenerate boxes (a single point) can come out crossed by an ulp or two; those collapse to the lower end.
fn settle(side: &'static str, lower: f64, upper: f64) -> Result<(f64, f64)> {
    if !lower.is_finite() || !upper.is_finite() {
        return Err(Error::InfeasibleBounds { side, lower, upper });
    }
    if lower <= upper {
        return Ok((lower, upper));
    }
    if lower - upper <= 16.0 * f64::EPSILON * lower.abs().max(upper.abs()).max(1.0) {
        return Ok((lower, lower));
    }
    Err(Error::InfeasibleBounds { side, lower, upper })
}

/// Box containing the solution of the screened problem, using the actual
/// active-set sizes `|I|`, `|J|` as the budget.
pub fn box_bounds(p: &ScreenedDualProblem, variant: BoundsVariant) -> Result<BoxBounds> {
    let eps = p.epsilon;
    let kappa = p.kappa;
    let k_min = p.k_min;
    if !(k_min > 0.0) {
        return Err(Error::Numeric(format!("k_min must be positive, got {k_min}")));
    }
    let (n, m) = (p.n as f64, p.m as f64);
    let (n_b, m_b) = (p.n_active() as f64, p.m_active() as f64);
    let mu_lo = p.mu_active.iter().copied().fold(f64::INFINITY, f64::min);
    let mu_hi = p.mu_active.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nu_lo = p.nu_active.iter().copied().fold(f64::INFINITY, f64::min);
    let nu_hi = p.nu_active.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let guard = |x: f64| match variant {
        BoundsVariant::Guarded => eps.max(x),
        BoundsVariant::Tight => x,
    };
    let u_lower = (eps / kappa)
        .max(mu_lo / (eps * (m - m_b) + guard(nu_hi / (n * eps * kappa * k_min)) * m_b))
        .ln();
    let u_upper = (mu_hi / (m * eps * k_min)).ln();
    let v_lower = (eps * kappa)
        .max(nu_lo / (eps * (n - n_b) + guard(kappa * mu_hi / (m * eps * k_min)) * n_b))
        .ln();
    let v_upper = (nu_hi / (n * eps * k_min)).ln();

    let (u_lower, u_upper) = settle("row", u_lower, u_upper)?;
    let (v_lower, v_upper) = settle("column", v_lower, v_upper)?;
    Ok(BoxBounds {
        u_lower,
        u_upper,
        v_lower,
        v_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{dual_objective, gibbs_kernel, CostMatrix, DualPotentials};
    use crate::screening::{screen, Budget};
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn instance(n: usize, m: usize, costs: &[f64], mu: &[f64], nu: &[f64], eta: f64) -> (DiscreteMeasure, DiscreteMeasure, GibbsKernel) {
        let c = CostMatrix::new(Array2::from_shape_vec((n, m), costs.to_vec()).unwrap()).unwrap();
        (
            DiscreteMeasure::new(Array1::from(mu.to_vec())).unwrap(),
            DiscreteMeasure::new(Array1::from(nu.to_vec())).unwrap(),
            gibbs_kernel(&c, eta).unwrap(),
        )
    }

    fn sets(n: usize, m: usize, rows: &[usize], cols: &[usize], eps: f64, kappa: f64) -> ScreeningResult {
        ScreeningResult {
            epsilon: eps,
            kappa,
            row_threshold: eps * eps / kappa,
            col_threshold: eps * eps * kappa,
            active_rows: rows.to_vec(),
            active_cols: cols.to_vec(),
            inactive_rows: (0..n).filter(|i| !rows.contains(i)).collect(),
            inactive_cols: (0..m).filter(|j| !cols.contains(j)).collect(),
            xi: Array1::zeros(n),
            zeta: Array1::zeros(m),
        }
    }

    #[test]
    fn full_sets_have_no_cross_terms() {
        let (mu, nu, k) = instance(2, 3, &[0.1, 0.5, 0.9, 0.3, 0.2, 0.7], &[0.4, 0.6], &[0.2, 0.3, 0.5], 1.0);
        let sr = screen(&mu, &nu, &k, Budget::full(2, 3).unwrap()).unwrap();
        let p = ScreenedDualProblem::build(&mu, &nu, &k, &sr).unwrap();
        assert_eq!(p.row_cross(), &Array1::<f64>::zeros(2));
        assert_eq!(p.col_cross(), &Array1::<f64>::zeros(3));
        assert_eq!(p.xi_const(), 0.0);
    }

    #[test]
    fn single_active_pair() {
        let (mu, nu, k) = instance(2, 2, &[0.0; 4], &[0.5, 0.5], &[0.5, 0.5], 1.0);
        let p = ScreenedDualProblem::build(&mu, &nu, &k, &sets(2, 2, &[0], &[0], 1.0, 1.0)).unwrap();
        assert_eq!(p.row_cross(), &array![1.0]);
        assert_eq!(p.col_cross(), &array![1.0]);
        assert_eq!(p.xi_const(), 1.0);
        assert_eq!(p.k_min(), 1.0);
    }

    #[test]
    fn empty_active_set_is_degenerate() {
        let (mu, nu, k) = instance(2, 2, &[0.0; 4], &[0.5, 0.5], &[0.5, 0.5], 1.0);
        let err = ScreenedDualProblem::build(&mu, &nu, &k, &sets(2, 2, &[], &[0], 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateScreening(_)));
    }

    #[test]
    fn scalar_problem() {
        let (mu, nu, k) = instance(1, 1, &[0.0], &[1.0], &[1.0], 1.0);
        let p = ScreenedDualProblem::build(&mu, &nu, &k, &sets(1, 1, &[0], &[0], 1.0, 1.0)).unwrap();
        let at = |u: f64, v: f64| p.objective(array![u].view(), array![v].view()).unwrap();
        assert_eq!(at(0.0, 0.0), 1.0);
        assert_relative_eq!(at(0.3, 0.4), (0.7f64).exp() - 0.7, max_relative = 1e-15);
        let (gu, gv) = p.gradient(array![0.0].view(), array![0.0].view()).unwrap();
        assert_eq!((gu[0], gv[0]), (0.0, 0.0));
    }

    #[test]
    fn first_order_condition_zeroes_row_gradient() {
        // full budget so s = 0; choose u so that e^u (K e^v) = kappa mu
        let (mu, nu, k) = instance(2, 2, &[0.2, 0.6, 0.4, 0.1], &[0.3, 0.7], &[0.45, 0.55], 1.0);
        let p = ScreenedDualProblem::build(&mu, &nu, &k, &sets(2, 2, &[0, 1], &[0, 1], 0.3, 1.7)).unwrap();
        let v = array![0.2, -0.4];
        let kev = p.kernel_block().dot(&v.mapv(f64::exp));
        let u = (1.7 * p.mu_active() / &kev).mapv(f64::ln);
        let (gu, _) = p.gradient(u.view(), v.view()).unwrap();
        for g in gu {
            assert!(g.abs() < 1e-15);
        }
    }

    #[test]
    fn full_budget_with_unit_kappa_is_the_sinkhorn_dual() {
        let (mu, _, k) = instance(3, 3, &[0.0, 0.4, 0.9, 0.4, 0.0, 0.3, 0.9, 0.3, 0.0], &[0.2, 0.3, 0.5], &[1.0; 3], 0.5);
        let sr = screen(&mu, &mu, &k, Budget::full(3, 3).unwrap()).unwrap();
        assert_relative_eq!(sr.kappa, 1.0, max_relative = 1e-14);
        let p = ScreenedDualProblem::build(&mu, &mu, &k, &sr).unwrap();
        let u = array![0.1, -0.3, 0.25];
        let v = array![-0.2, 0.05, 0.4];
        let reduced = p.objective(u.view(), v.view()).unwrap();
        let full = dual_objective(&DualPotentials::new(u, v).unwrap(), &k, &mu, &mu).unwrap();
        assert_relative_eq!(reduced, full, max_relative = 1e-12);
    }

    #[test]
    fn stacked_matches_split_evaluation() {
        let (mu, nu, k) = instance(3, 2, &[0.3, 0.8, 0.1, 0.5, 0.9, 0.2], &[0.2, 0.5, 0.3], &[0.6, 0.4], 1.0);
        let p = ScreenedDualProblem::build(&mu, &nu, &k, &sets(3, 2, &[0, 2], &[1], 0.4, 0.8)).unwrap();
        let theta = [0.1, -0.2, 0.3];
        let mut g = [0.0; 3];
        let f = p.value_and_gradient(&theta, &mut g).unwrap();
        let u = array![0.1, -0.2];
        let v = array![0.3];
        assert_eq!(f, p.objective(u.view(), v.view()).unwrap());
        let (gu, gv) = p.gradient(u.view(), v.view()).unwrap();
        assert_eq!(&g[..], &[gu[0], gu[1], gv[0]]);
    }

    #[test]
    fn hand_evaluated_bounds() {
        // K = 1, mu = nu = (1/2, 1/2), full budget: xi = zeta = 1/4, eps = 1/2, kappa = 1.
        let (mu, nu, k) = instance(2, 2, &[0.0; 4], &[0.5, 0.5], &[0.5, 0.5], 1.0);
        let sr = screen(&mu, &nu, &k, Budget::full(2, 2).unwrap()).unwrap();
        assert_relative_eq!(sr.epsilon, 0.5, max_relative = 1e-15);
        let p = ScreenedDualProblem::build(&mu, &nu, &k, &sr).unwrap();
        let b = box_bounds(&p, BoundsVariant::Guarded).unwrap();
        // lower: log(0.5 v 0.5 / (0 + (0.5 v 0.5/(2*0.5*1*1)) * 2)) = log 0.5
        // upper: log(0.5 / (2 * 0.5 * 1)) = log 0.5
        let half = 0.5f64.ln();
        for x in [b.u_lower, b.u_upper, b.v_lower, b.v_upper] {
            assert_relative_eq!(x, half, max_relative = 1e-15);
        }
    }

    #[test]
    fn crossed_boxes_collapse_only_within_rounding() {
        let x = 1.2556491686890539f64;
        let up = f64::from_bits(x.to_bits() + 1);
        assert_eq!(settle("row", up, x).unwrap(), (up, up));
        assert!(matches!(settle("row", 2.0, 1.0), Err(Error::InfeasibleBounds { side: "row", .. })));
        assert!(settle("column", f64::NEG_INFINITY, 0.0).is_err());
    }

    #[test]
    fn hand_evaluated_bounds_with_screening() {
        // eps = 0.2, kappa = 2, n = m = 3, I = {0, 1}, J = {0}, K_min = e^{-0.5}
        let costs = [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (mu, nu, k) = instance(3, 3, &costs, &[0.5, 0.3, 0.2], &[0.6, 0.25, 0.15], 1.0);
        let p = ScreenedDualProblem::build(&mu, &nu, &k, &sets(3, 3, &[0, 1], &[0], 0.2, 2.0)).unwrap();
        let k_min = (-0.5f64).exp();
        assert_relative_eq!(p.k_min(), k_min, max_relative = 1e-15);
        let (eps, kap) = (0.2, 2.0);
        // u: mu in I = {0.5, 0.3}, nu in J = {0.6}
        let inner = (0.6 / (3.0 * eps * kap * k_min)).max(eps);
        let u_lo = (eps / kap).max(0.3 / (eps * 2.0 + inner * 1.0)).ln();
        let u_hi = (0.5 / (3.0 * eps * k_min)).ln();
        let inner_v = (kap * 0.5 / (3.0 * eps * k_min)).max(eps);
        let v_lo = (eps * kap).max(0.6 / (eps * 1.0 + inner_v * 2.0)).ln();
        let v_hi = (0.6 / (3.0 * eps * k_min)).ln();
        let b = box_bounds(&p, BoundsVariant::Guarded).unwrap();
        assert_relative_eq!(b.u_lower, u_lo, max_relative = 1e-14);
        assert_relative_eq!(b.u_upper, u_hi, max_relative = 1e-14);
        assert_relative_eq!(b.v_lower, v_lo, max_relative = 1e-14);
        assert_relative_eq!(b.v_upper, v_hi, max_relative = 1e-14);
        let prop = box_bounds(&p, BoundsVariant::Tight).unwrap();
        assert!(prop.u_lower >= b.u_lower && prop.v_lower >= b.v_lower);
        assert_eq!(prop.u_upper, b.u_upper);
    }

    type Problem = (usize, usize, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, f64);

    fn arb_problem() -> impl Strategy<Value = Problem> {
        (1usize..9, 1usize..9).prop_flat_map(|(n, m)| {
            (
                Just(n),
                Just(m),
                proptest::collection::vec(0.0f64..2.0, n * m),
                proptest::collection::vec(0.05f64..1.0, n),
                proptest::collection::vec(0.05f64..1.0, m),
                0.1f64..1.0,
                0.1f64..1.0,
                prop_oneof![Just(0.5), Just(1.0), Just(2.0)],
            )
        })
    }

    proptest! {
        #[test]
        fn xi_matches_naive_sum((n, m, c, a, b, fb, fm, eta) in arb_problem()) {
            let (mu, nu, k) = instance(n, m, &c, &a, &b, eta);
            let n_b = ((n as f64 * fb).ceil() as usize).clamp(1, n);
            let m_b = ((m as f64 * fm).ceil() as usize).clamp(1, m);
            let sr = screen(&mu, &nu, &k, Budget::new(n_b, m_b, n, m).unwrap()).unwrap();
            let p = ScreenedDualProblem::build(&mu, &nu, &k, &sr).unwrap();
            let (eps, kap) = (sr.epsilon, sr.kappa);
            let mut naive = 0.0;
            for &i in &sr.inactive_rows {
                for &j in &sr.inactive_cols {
                    naive += eps * eps * k.entries()[[i, j]];
                }
                naive -= kap * (eps / kap).ln() * mu.weights()[i];
            }
            for &j in &sr.inactive_cols {
                naive -= (eps * kap).ln() * nu.weights()[j] / kap;
            }
            prop_assert!((p.xi_const() - naive).abs() <= 1e-12 * naive.abs().max(1e-300) + 1e-15);
            prop_assert!(p.k_min() > 0.0);
        }

        #[test]
        fn objective_equals_full_evaluation_at_fixed_screened_point((n, m, c, a, b, fb, fm, eta) in arb_problem(),
            seed_u in proptest::collection::vec(-1.0f64..1.0, 8), seed_v in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let (mu, nu, k) = instance(n, m, &c, &a, &b, eta);
            let n_b = ((n as f64 * fb).ceil() as usize).clamp(1, n);
            let m_b = ((m as f64 * fm).ceil() as usize).clamp(1, m);
            let sr = screen(&mu, &nu, &k, Budget::new(n_b, m_b, n, m).unwrap()).unwrap();
            let p = ScreenedDualProblem::build(&mu, &nu, &k, &sr).unwrap();
            let u_act: Array1<f64> = (0..p.n_active()).map(|a| sr.u_threshold() + seed_u[a].abs()).collect();
            let v_act: Array1<f64> = (0..p.m_active()).map(|b| sr.v_threshold() + seed_v[b].abs()).collect();
            // full-matrix evaluation of the kappa-scaled dual with screened coordinates at threshold
            let mut u = Array1::from_elem(n, sr.u_threshold());
            let mut v = Array1::from_elem(m, sr.v_threshold());
            for (a, &i) in sr.active_rows.iter().enumerate() { u[i] = u_act[a]; }
            for (b, &j) in sr.active_cols.iter().enumerate() { v[j] = v_act[b]; }
            let mut full = 0.0;
            for i in 0..n {
                for j in 0..m {
                    full += u[i].exp() * k.entries()[[i, j]] * v[j].exp();
                }
                full -= sr.kappa * u[i] * mu.weights()[i];
            }
            for j in 0..m {
                full -= v[j] * nu.weights()[j] / sr.kappa;
            }
            let reduced = p.objective(u_act.view(), v_act.view()).unwrap();
            prop_assert!((reduced - full).abs() <= 1e-12 * (1.0 + full.abs()));
        }

        #[test]
        fn midpoint_convexity((n, m, c, a, b, fb, fm, eta) in arb_problem(),
            x in proptest::collection::vec(-2.0f64..2.0, 16), y in proptest::collection::vec(-2.0f64..2.0, 16), t in 0.0f64..1.0) {
            let (mu, nu, k) = instance(n, m, &c, &a, &b, eta);
            let n_b = ((n as f64 * fb).ceil() as usize).clamp(1, n);
            let m_b = ((m as f64 * fm).ceil() as usize).clamp(1, m);
            let sr = screen(&mu, &nu, &k, Budget::new(n_b, m_b, n, m).unwrap()).unwrap();
            let p = ScreenedDualProblem::build(&mu, &nu, &k, &sr).unwrap();
            let d = p.dim();
            let f = |z: &[f64]| { let mut g = vec![0.0; d]; p.value_and_gradient(z, &mut g).unwrap() };
            let z: Vec<f64> = (0..d).map(|i| t * x[i] + (1.0 - t) * y[i]).collect();
            prop_assert!(f(&z) <= t * f(&x[..d]) + (1.0 - t) * f(&y[..d]) + 1e-10);
        }

        #[test]
        fn algorithm_lower_bounds_dominate_thresholds((n, m, c, a, b, fb, fm, eta) in arb_problem()) {
            let (mu, nu, k) = instance(n, m, &c, &a, &b, eta);
            let n_b = ((n as f64 * fb).ceil() as usize).clamp(1, n);
            let m_b = ((m as f64 * fm).ceil() as usize).clamp(1, m);
            let sr = screen(&mu, &nu, &k, Budget::new(n_b, m_b, n, m).unwrap()).unwrap();
            let p = ScreenedDualProblem::build(&mu, &nu, &k, &sr).unwrap();
            if let Ok(bx) = box_bounds(&p, BoundsVariant::Guarded) {
                prop_assert!(bx.u_lower >= sr.u_threshold() && bx.v_lower >= sr.v_threshold());
                prop_assert!(bx.u_lower <= bx.u_upper && bx.v_lower <= bx.v_upper);
            }
        }
    }
}
