use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Caller supplied an argument outside the operation's domain.
    #[error("invalid input: {0}")]
    Input(String),
    /// A precondition on the data was broken (e.g. adding an existing edge).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Two tensors that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A NaN or infinity appeared where a finite number is required.
    #[error("non-finite value: {0}")]
    Numeric(String),
    /// An exhaustive search hit its configured cap.
    #[error("search budget exceeded after {0} candidates")]
    BudgetExceeded(u64),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
