use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("radius {index} is not positive")]
    NonPositiveRadius { index: usize },
    #[error("distance data not realizable in R^n (eigenvalue {eigenvalue:e})")]
    NonRealizable { eigenvalue: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("sign indeterminate: {0}")]
    Indeterminate(String),
    #[error("empty real intersection for spheres {set:?}")]
    EmptyIntersection { set: Vec<usize> },
    #[error("tangency: {0}")]
    Tangency(String),
    #[error("finite-difference noise dominates for {param} (fd {fd:e}, sigma {sigma:e})")]
    FdNoise { param: String, fd: f64, sigma: f64 },
}

impl Error {
    /// True for failures caused by near-singular geometry rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonRealizable { .. }
                | Error::Degenerate(_)
                | Error::Tangency(_)
                | Error::FdNoise { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
