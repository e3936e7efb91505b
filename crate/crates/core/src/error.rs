use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("zero-probability heralding branch (p = {0:e})")]
    ZeroProbabilityBranch(f64),

    #[error("table is {n_prep}x{n_meas}, need at least {need_prep}x{need_meas}")]
    Shape {
        n_prep: usize,
        n_meas: usize,
        need_prep: usize,
        need_meas: usize,
    },

    #[error("index ({i}, {j}) out of range for a {n_prep}x{n_meas} table")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        n_prep: usize,
        n_meas: usize,
    },

    #[error("enumeration would visit {count} strategies, above the cap of {cap}")]
    EnumerationCap { count: String, cap: u64 },

    #[error("insufficient statistics: cell ({i}, {j}) has no detections to postselect on")]
    InsufficientStatistics { i: usize, j: usize },

    #[error("schedule is missing required event `{0}`")]
    MissingEvent(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors raised by the physics or statistics itself, as opposed
    /// to malformed input or I/O.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::ZeroProbabilityBranch(_)
                | Error::EnumerationCap { .. }
                | Error::InsufficientStatistics { .. }
                | Error::Shape { .. }
        )
    }
}
