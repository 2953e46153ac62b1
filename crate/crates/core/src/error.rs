use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge at mu = {mu}: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Convergence { mu: f64, estimate: f64, tolerance: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("scan failed at every grid point: {}", summarize(.0))]
    ScanFailed(Vec<(f64, String)>),

    #[error("input line {line}: {message}")]
    Input { line: u64, message: String },

    #[error("table cache: {0}")]
    Cache(String),

    #[error("model evaluation failed: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable identifier for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Convergence { .. } => "numerical_convergence",
            Error::InsufficientData(_) => "insufficient_data",
            Error::DegenerateData(_) => "degenerate_data",
            Error::ScanFailed(_) => "scan_failed",
            Error::Input { .. } => "input",
            Error::Cache(_) => "cache",
            Error::Model(_) => "model",
            Error::Io(_) => "io",
        }
    }
}

fn summarize(failures: &[(f64, String)]) -> String {
    failures.iter().map(|(alpha, cause)| format!("alpha={alpha}: {cause}")).collect::<Vec<_>>().join("; ")
}
