//! Gaussian point clouds and Euclidean costs.

use ndarray::Array2;
use screenkhorn::CostMatrix;

use crate::error::BenchError;
use crate::rng::SplitMix64;

/// `X ~ N(0, I)` with `n` rows and `Y ~ N((3, 3), [[1, -0.8], [-0.8, 1]])` with `m` rows.
///
/// `Y` uses the lower Cholesky factor `[[1, 0], [-0.8, 0.6]]`. One stream feeds
/// both clouds, `X` first, one Box-Muller pair per point.
pub fn generate_gaussian_pair(n: usize, m: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = SplitMix64::new(seed);
    let mut x = Array2::zeros((n, 2));
    for mut row in x.rows_mut() {
        let (z1, z2) = rng.normal_pair();
        row[0] = z1;
        row[1] = z2;
    }
    let mut y = Array2::zeros((m, 2));
    for mut row in y.rows_mut() {
        let (z1, z2) = rng.normal_pair();
        row[0] = 3.0 + z1;
        row[1] = 3.0 - 0.8 * z1 + 0.6 * z2;
    }
    (x, y)
}

/// `C_ij = ||x_i - y_j||_2`, optionally divided by its largest entry.
pub fn pairwise_euclidean(x: &Array2<f64>, y: &Array2<f64>, normalize: bool) -> Result<CostMatrix, BenchError> {
    if x.ncols() != y.ncols() {
        return Err(BenchError::Input(format!(
            "point dimensions differ: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let mut c = Array2::from_shape_fn((x.nrows(), y.nrows()), |(i, j)| {
        x.row(i)
            .iter()
            .zip(y.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    });
    if normalize {
        let max = c.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(BenchError::Input("cannot normalize a cost matrix that is identically zero".into()));
        }
        c.mapv_inplace(|v| v / max);
    }
    Ok(CostMatrix::new(c)?)
}
