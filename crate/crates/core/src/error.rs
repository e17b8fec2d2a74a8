use nlsysid_geometry::GeometryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller broke an operation's precondition (wrong lengths, nonpositive
    /// physical parameters, invalid noise specs, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("state norm {norm:.3e} exceeded the hard ceiling {ceiling:.1e} at t = {step}")]
    Divergence { step: usize, norm: f64, ceiling: f64 },

    #[error("truncated-Gaussian rejection sampler gave up after {attempts} attempts (sigma = {sigma}, bound = {bound})")]
    SamplerExhausted { attempts: u64, sigma: f64, bound: f64 },

    #[error("insufficient data: {samples} samples for a row with {unknowns} unknowns")]
    InsufficientData { samples: usize, unknowns: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("uncertainty set of row {row} became empty at step {step}; the noise bound is smaller than the true disturbance bound")]
    NoiseBoundViolation { row: usize, step: u64 },

    #[error("BMSB estimation failed: no radius in the grid gives a probability strictly inside (0, 1) (min probabilities {profile:?}); try a finer grid")]
    BmsbEstimation { profile: Vec<f64> },

    #[error("bound precondition: {0}")]
    BoundPrecondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn contract(msg: impl Into<String>) -> CoreError {
    CoreError::Contract(msg.into())
}

pub(crate) fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(contract(format!(
            "{what}: expected length {expected}, found {found}"
        )));
    }
    Ok(())
}
