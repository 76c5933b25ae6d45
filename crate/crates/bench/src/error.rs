use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Input(String),
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Solver(#[from] screenkhorn::Error),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("{0} certificate violation(s)")]
    Certificate(usize),
}

impl BenchError {
    /// Process exit code: 1 input, 2 numeric or solver failure, 3 certificate violation.
    pub fn exit_code(&self) -> i32 {
        use screenkhorn::Error as E;
        match self {
            BenchError::Input(_) | BenchError::Parse { .. } | BenchError::Io { .. } | BenchError::Csv(_) => 1,
            BenchError::Solver(e) => match e.root() {
                E::InvalidParameter { .. } | E::InvalidInput(_) | E::ShapeMismatch { .. } => 1,
                _ => 2,
            },
            BenchError::NotConverged(_) => 2,
            BenchError::Certificate(_) => 3,
        }
    }
}
