use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants fall in two families: input/validation problems (`Domain`,
/// `Input`) and numerical failures (`Series`, `DegenerateWeights`,
/// `Numeric`). [`Error::is_numerical`] tells them apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(
        "{function}: series did not converge after {terms} terms \
         (partial sum ln|S| = {log_partial_sum})"
    )]
    Series {
        function: &'static str,
        terms: usize,
        log_partial_sum: f64,
    },

    #[error(
        "importance weights degenerate: effective sample size {ess:.1} < {min_ess} \
         from {n_draws} draws; increase n_draws"
    )]
    DegenerateWeights { ess: f64, min_ess: f64, n_draws: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("observation {id}: {source}")]
    Observation {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Series { .. } | Error::DegenerateWeights { .. } | Error::Numeric(_) => true,
            Error::Observation { source, .. } | Error::Replicate { source, .. } => source.is_numerical(),
            Error::Domain(_) | Error::Input(_) => false,
        }
    }

    pub(crate) fn for_observation(self, id: impl Into<String>) -> Self {
        Error::Observation {
            id: id.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
