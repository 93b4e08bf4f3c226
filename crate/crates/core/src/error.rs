use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("unstable frame: {0}")]
    Instability(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("basis dimension {dim} exceeds cap {cap}")]
    Resource { dim: usize, cap: usize },
    #[error("integrator failure at t = {t}: {msg}")]
    Integrator { t: f64, msg: String },
    #[error("accuracy: {0}")]
    Accuracy(String),
    #[error("closure breakdown at t = {t}: covariance eigenvalue {eig}")]
    Closure { t: f64, eig: f64 },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
