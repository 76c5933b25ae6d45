//! Data generation, file formats and the sweep runner behind the `bench` binary.

// `!(x > 0.0)` is the NaN-rejecting form used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiment;
pub mod io;
pub mod rng;

pub use data::{generate_gaussian_pair, pairwise_euclidean};
pub use error::BenchError;
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutcome, ResultRow};
pub use io::{load_problem, MeasureSource};
