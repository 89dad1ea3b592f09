use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {got} is too small (need at least {min})")]
    DimensionTooSmall { got: usize, min: usize },

    #[error("dimension {0} exceeds the supported maximum of 63 coordinates")]
    DimensionTooLarge(usize),

    #[error("parameter family covers orders up to {covered}, dimension {needed} requires more")]
    FamilyTooSmall { covered: usize, needed: usize },

    #[error("measure total weight {0} is not 1")]
    NotProbability(f64),

    #[error("atom {index} is invalid: {reason}")]
    InvalidAtom { index: usize, reason: String },

    #[error("p_n({k}:{l}) = {value} is negative at resolution n = {n}; increase n")]
    NegativeRate { k: usize, l: usize, value: f64, n: f64 },

    #[error("invalid parameter family: {0}")]
    InvalidFamily(String),

    #[error("time window [{s}, {t}] is outside the horizon [0, {horizon}]")]
    WindowOutsideHorizon { s: f64, t: f64, horizon: f64 },

    #[error("time {t} is beyond the simulated horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("event cap of {0} events reached before the stopping time")]
    EventCap(u64),

    #[error("start point is outside the domain: {0}")]
    StartOutsideDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all {0} replicas failed")]
    AllReplicasFailed(usize),

    #[error("degenerate binning: {0}")]
    DegenerateBinning(String),
}

pub type Result<T> = std::result::Result<T, Error>;
