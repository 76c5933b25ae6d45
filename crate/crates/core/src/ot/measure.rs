use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Strictly positive probability weights on a finite support.
///
/// The constructor renormalizes so the weights sum to one; zero weights are
/// rejected because the screening ratios and log-domain potentials need every
/// atom to carry mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Array1<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: impl Into<Array1<f64>>) -> Result<Self> {
        let weights: Array1<f64> = weights.into();
        if weights.is_empty() {
            return Err(Error::InvalidInput("measure has no atoms".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight {i} must be positive and finite, got {w}"
                )));
            }
        }
        let total: f64 = weights.sum();
        Ok(Self {
            weights: weights / total,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(Array1::from_elem(n, 1.0))
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Nonnegative, finite `n x m` transport cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (n, m) = entries.dim();
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(format!("cost matrix is {n}x{m}")));
        }
        for ((i, j), &c) in entries.indexed_iter() {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "cost entry ({i}, {j}) is not finite: {c}"
                )));
            }
            if c < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "cost entry ({i}, {j}) is negative: {c}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// `max_ij C_ij`, i.e. the entrywise sup-norm of a nonnegative matrix.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}
