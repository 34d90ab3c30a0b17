use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("gamma function pole at {0}")]
    Pole(f64),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("{0} is undefined for sigma1 = 0; use the deterministic abscissa -eps + sqrt(g*delta)")]
    ZeroNoise(&'static str),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("numerical overflow in {0}")]
    Overflow(&'static str),
}

impl Error {
    /// True for failures of an iterative numerical scheme, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Overflow(_) | Error::Pole(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
