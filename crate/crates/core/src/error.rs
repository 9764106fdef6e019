use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("distance {distance_m} m is below the minimum of {min_distance_m} m")]
    BelowMinimumDistance { distance_m: f64, min_distance_m: f64 },

    #[error("{terminals} terminals cannot be separated by {antennas} antennas")]
    RankDeficient { terminals: usize, antennas: usize },

    #[error("condition number {condition:e} of A^H A exceeds the ceiling {ceiling:e}")]
    IllConditioned { condition: f64, ceiling: f64 },

    #[error("A^H A is numerically singular")]
    Singular,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class selectors do not partition the terminals: {0}")]
    NotAPartition(String),

    #[error("no gain for terminal {0}")]
    MissingGain(usize),

    #[error("inconsistent move plan: {0}")]
    InconsistentPlan(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by the numerics of the weight solve rather
    /// than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::IllConditioned { .. } | Error::Singular
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
