use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Invalid configuration value, naming the field and the violated constraint.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{field}`: must be {constraint} (got {value})")]
pub struct ConfigError {
    pub field: &'static str,
    pub constraint: &'static str,
    pub value: f64,
}

impl ConfigError {
    pub fn new(field: &'static str, constraint: &'static str, value: f64) -> Self {
        Self {
            field,
            constraint,
            value,
        }
    }
}

/// Which group of stacked observation rows a numeric failure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationBlock {
    Speed,
    Acceleration,
    Range {
        bs_id: u32,
    },
    Azimuth {
        bs_id: u32,
    },
    Pseudo {
        index: usize,
    },
    /// No single block is singular on its own; only the stacked system is.
    Stacked,
}

impl core::fmt::Display for ObservationBlock {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ObservationBlock::Speed => f.write_str("speed"),
            ObservationBlock::Acceleration => f.write_str("acceleration"),
            ObservationBlock::Range { bs_id } => write!(f, "range[bs {bs_id}]"),
            ObservationBlock::Azimuth { bs_id } => write!(f, "azimuth[bs {bs_id}]"),
            ObservationBlock::Pseudo { index } => write!(f, "pseudo[{index}]"),
            ObservationBlock::Stacked => f.write_str("stacked observations"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("non-finite estimator state")]
    NonFiniteState,
    #[error("singular innovation covariance in {block} block")]
    SingularInnovation { block: ObservationBlock },
    #[error("vehicle coincides with base station {bs_id}")]
    DegenerateGeometry { bs_id: u32 },
    #[error("azimuth undefined between coincident points")]
    CoincidentPoints,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: u64,
        #[source]
        source: NumericError,
    },
    #[error("batch epoch {batch} does not match estimator epoch {state}")]
    EpochMismatch { state: u64, batch: u64 },
    #[error("invalid argument: {0}")]
    Argument(&'static str),
    #[error("base station {0} is not managed by any fog instance")]
    UnmanagedBs(u32),
    #[error("invalid fog topology: {0}")]
    Topology(&'static str),
}

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Argument(_) | Error::UnmanagedBs(_) | Error::Topology(_)
        )
    }
}
