use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameters outside the admissible region: {0}")]
    Precondition(String),
    #[error("orbit does not return to the obstacle: {0}")]
    NonReturning(String),
    #[error("degenerate denominator in tangent map: {0}")]
    Degenerate(String),
    #[error("finite-difference stencil crosses a singular curve: {0}")]
    ComponentChange(String),
    #[error("strip construction failed: {0}")]
    AnchorNotEnclosed(String),
    #[error("spacing bound not reached: {0}")]
    SpacingUnattainable(String),
    #[error("word not realizable: {0}")]
    WordNotRealizable(String),
    #[error("no tangency in bracket: {0}")]
    NoTangency(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Errors caused by the caller's input rather than by the computation.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::SpacingUnattainable(_)
                | Error::WordNotRealizable(_)
                | Error::NoTangency(_)
                | Error::AnchorNotEnclosed(_)
        )
    }
}
