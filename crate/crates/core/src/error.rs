use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid construction parameters (non-positive sizes, bad step, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A point was queried outside the closed domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Boundary point cannot be classified (corner, not on the boundary).
    #[error("classification error: {0}")]
    Classification(String),
    /// Caller violated an operation precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Linear solve, factorization or eigensolver failure.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
