use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Fock dimension {0}: need at least 2")]
    InvalidDimension(usize),

    #[error("coherent amplitude |alpha|^2 = {norm_sq:.3} loses weight {tail:.2e} above cutoff {cutoff}")]
    TruncationOverflow { norm_sq: f64, cutoff: usize, tail: f64 },

    #[error("not a density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("lab-frame quantity requested without a drive frequency (omega_s must be > 0)")]
    MissingDriveFrequency,

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("bracket [{lo}, {hi}] does not enclose a single collision")]
    Bracket { lo: f64, hi: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("time step {dt} too coarse: must be at most {max}")]
    Resolution { dt: f64, max: f64 },

    #[error("integration unstable at t = {t}: |alpha|^2 = {norm_sq:.3e}")]
    Instability { t: f64, norm_sq: f64 },

    #[error("i/o: {0}")]
    Io(String),

    #[error("dimension {size} exceeds the configured maximum {max}")]
    TooLarge { size: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
