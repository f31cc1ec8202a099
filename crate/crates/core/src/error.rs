use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or malformed config file. Exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Two fields that must share a mode lattice or grid do not.
    #[error("lattice/grid mismatch: {0}")]
    LatticeMismatch(String),

    /// An input violates a structural invariant (divergence-freeness,
    /// reality, support mask).
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// Non-finite values detected during evolution; carries the last good
    /// snapshot index.
    #[error("numerical blow-up at step {step}: {what}")]
    Numerical { step: usize, what: String },

    /// Quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: achieved error estimate {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code per the harness contract: 2 for configuration and
    /// infrastructure errors, 1 for physics/numerics failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            _ => 1,
        }
    }
}
