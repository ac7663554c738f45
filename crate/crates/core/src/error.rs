use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The trilateration design matrix has deficient column rank.
    #[error("singular beacon geometry: {0}")]
    SingularGeometry(String),

    /// UᵀU is singular or its condition number exceeds the configured cap.
    #[error("degenerate geometry (condition number {condition:.3e})")]
    DegenerateGeometry { condition: f64 },

    #[error("{degenerate} of {total} drone-domain points have degenerate geometry")]
    DomainDegeneracy { degenerate: usize, total: usize },

    #[error("no correlation peak: received signal is identically zero")]
    NoPeak,

    #[error("infeasible beacon domain: {0}")]
    InfeasibleDomain(String),

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
