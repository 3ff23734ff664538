use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported polynomial family `{0}` (only legendre and hermite are available)")]
    UnsupportedFamily(String),

    #[error("quadrature with {points} points cannot resolve a basis of order {order} (need at least {})", order + 1)]
    QuadratureInsufficient { order: usize, points: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("index {index} out of range for {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "integration blew up at t={time}: particle {particle} has non-finite state; try a smaller time step (dt={dt})"
    )]
    Blowup { particle: usize, time: f64, dt: f64 },

    #[error("scheme failure: {0}")]
    SchemeFailure(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by the numerics rather than by the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Blowup { .. } | Error::SchemeFailure(_))
    }
}
