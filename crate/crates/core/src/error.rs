use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label {label} outside 1..={num_classes}")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error(
        "{num_classes} classes exceed the subset enumeration cap of {cap}; \
         use the top-k objective with BSM/ASM instead"
    )]
    SubsetCapExceeded { num_classes: usize, cap: usize },

    #[error("solver diverged at iteration {iteration} (objective {value})")]
    Divergence { iteration: usize, value: f64 },

    #[error("objective is unbounded below")]
    Unbounded,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program did not finish within {0} pivots")]
    IterationLimit(usize),

    #[error("widened confidence vector is below the training one at component {0}")]
    WideningBelowLambda(usize),

    #[error("size budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("model serialization: {0}")]
    Serialization(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error comes from the numerical side (solvers, LPs, bounds)
    /// rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::Unbounded
                | Error::Infeasible
                | Error::IterationLimit(_)
                | Error::BudgetExceeded(_)
                | Error::WideningBelowLambda(_)
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
