use thiserror::Error;

/// Stage of the screened solve, attached to errors raised inside [`crate::screenkhorn()`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Kernel,
    Screening,
    Bounds,
    WarmStart,
    Solve,
    Assembly,
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Step::Kernel => "kernel construction",
            Step::Screening => "screening",
            Step::Bounds => "box bounds",
            Step::WarmStart => "restricted sinkhorn warm start",
            Step::Solve => "bound-constrained solve",
            Step::Assembly => "plan assembly",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Malformed input data (weights, costs, scaling vectors).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// An exponential overflowed (or a product underflowed to zero).
    #[error("numeric range exceeded in {context} at index {index}")]
    NumericRange { context: &'static str, index: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The screened problem would have no free variables, or the budget ratio vanished.
    #[error("degenerate screening: {0}")]
    DegenerateScreening(String),

    #[error("infeasible {side} bounds: lower {lower} > upper {upper}")]
    InfeasibleBounds {
        side: &'static str,
        lower: f64,
        upper: f64,
    },

    #[error("oracle did not converge after {iterations} iterations (projected gradient {projected_gradient:e})")]
    OracleFailure {
        iterations: usize,
        projected_gradient: f64,
    },

    /// A certificate was requested on a solve that did not reach its stationarity tolerance.
    #[error("certificate refused: solver did not converge")]
    NotConverged,

    #[error("{step} failed: {source}")]
    InStep {
        step: Step,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Innermost error, skipping any [`Error::InStep`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StepContext<T> {
    fn in_step(self, step: Step) -> Result<T>;
}

impl<T> StepContext<T> for Result<T> {
    fn in_step(self, step: Step) -> Result<T> {
        self.map_err(|e| Error::InStep {
            step,
            source: Box::new(e),
        })
    }
}
