use ndarray::{Array1, Array2, ArrayView1};

use super::measure::CostMatrix;
use crate::error::{Error, Result};

/// Gibbs kernel `K = exp(-C / eta)` with cached row sums `r(K)` and column sums `c(K)`.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    entries: Array2<f64>,
    row_sums: Array1<f64>,
    col_sums: Array1<f64>,
    eta: f64,
}

impl GibbsKernel {
    pub fn new(cost: &CostMatrix, eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                reason: "regularization must be positive and finite",
            });
        }
        let entries = cost.entries().mapv(|c| (-c / eta).exp());
        if let Some(((i, j), _)) = entries.indexed_iter().find(|(_, &k)| k <= 0.0) {
            return Err(Error::Numeric(format!(
                "kernel entry ({i}, {j}) underflowed to zero (cost {} / eta {eta})",
                cost.entries()[[i, j]]
            )));
        }
        Ok(Self::from_entries_unchecked(entries, eta))
    }

    fn from_entries_unchecked(entries: Array2<f64>, eta: f64) -> Self {
        // Both sums run left to right in the summed index, so a symmetric kernel
        // gets bitwise equal row and column sums.
        let row_sums = entries.rows().into_iter().map(|r| r.iter().fold(0.0, |a, &k| a + k)).collect();
        let mut col_sums = Array1::zeros(entries.ncols());
        for row in entries.rows() {
            col_sums += &row;
        }
        Self {
            entries,
            row_sums,
            col_sums,
            eta,
        }
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn row_sums(&self) -> &Array1<f64> {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &Array1<f64> {
        &self.col_sums
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `K x`
    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.entries.dot(&x)
    }

    /// `K^T y`
    pub fn apply_transpose(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        self.entries.t().dot(&y)
    }
}

pub fn gibbs_kernel(cost: &CostMatrix, eta: f64) -> Result<GibbsKernel> {
    GibbsKernel::new(cost, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn zero_cost_gives_ones() {
        let c = CostMatrix::new(Array2::zeros((2, 2))).unwrap();
        let k = gibbs_kernel(&c, 1.0).unwrap();
        assert_eq!(k.entries(), &Array2::from_elem((2, 2), 1.0));
        assert_eq!(k.row_sums(), &array![2.0, 2.0]);
    }

    #[test]
    fn ln2_cost_gives_half() {
        let eta = 0.3;
        let c = CostMatrix::new(Array2::from_elem((3, 2), eta * 2f64.ln())).unwrap();
        let k = gibbs_kernel(&c, eta).unwrap();
        for &x in k.entries() {
            assert_relative_eq!(x, 0.5, max_relative = 1e-15);
        }
    }

    #[test]
    fn swap_cost() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let k = gibbs_kernel(&c, 1.0).unwrap();
        let e = (-1f64).exp();
        assert_eq!(k.entries(), &array![[1.0, e], [e, 1.0]]);
        assert_eq!(k.row_sums(), &array![1.0 + e, 1.0 + e]);
        assert_eq!(k.col_sums(), &array![1.0 + e, 1.0 + e]);
    }

    #[test]
    fn rejects_bad_eta() {
        let c = CostMatrix::new(Array2::zeros((1, 1))).unwrap();
        assert!(matches!(
            gibbs_kernel(&c, 0.0),
            Err(Error::InvalidParameter { name: "eta", .. })
        ));
        assert!(gibbs_kernel(&c, -1.0).is_err());
        assert!(gibbs_kernel(&c, f64::NAN).is_err());
    }

    #[test]
    fn lower_bound_from_sup_norm() {
        let c = CostMatrix::new(array![[0.0, 2.0, 0.5], [1.5, 0.25, 3.0]]).unwrap();
        let eta = 0.7;
        let k = gibbs_kernel(&c, eta).unwrap();
        assert!(k.min_entry() >= (-c.max_entry() / eta).exp() - 1e-15);
        assert!(k.entries().iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn symmetric_kernel_has_identical_row_and_col_sums() {
        let x: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 13.0).collect();
        let c = CostMatrix::new(Array2::from_shape_fn((37, 37), |(i, j)| (x[i] - x[j]).abs())).unwrap();
        let k = gibbs_kernel(&c, 0.9).unwrap();
        assert_eq!(k.row_sums(), k.col_sums());
    }
}
