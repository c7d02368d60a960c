use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Config text is not valid JSON or does not match the model schema.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("diagonal entry at `{path}` is -inf; every station needs a non-negative holding time")]
    BottomDiagonal { path: String },

    #[error("entry at `{path}` references undeclared component {component}")]
    DanglingComponent { path: String, component: usize },

    #[error("invalid parameter at `{path}`: {message}")]
    InvalidParameter { path: String, message: String },

    #[error("system is unstable: {0}")]
    Unstable(String),

    #[error("no positive decay region: {0}")]
    NoDecayRegion(String),

    #[error("not available: {0}")]
    NotAvailable(String),

    #[error("tail fit window: {0}")]
    TailWindow(String),

    #[error("degenerate dater distribution: {0}")]
    DegenerateTail(String),

    #[error("routing optimization infeasible: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Validation-class failures (bad input) as opposed to estimation failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema { .. }
                | Error::BottomDiagonal { .. }
                | Error::DanglingComponent { .. }
                | Error::InvalidParameter { .. }
                | Error::Dimension(_)
                | Error::Invalid(_)
        )
    }
}
