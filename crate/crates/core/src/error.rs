use thiserror::Error;

/// Errors raised by model construction, sampling, propagation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown variant `{0}`")]
    UnknownVariant(String),

    #[error("adiabatic states {lower} and {upper} are degenerate (gap {gap:e}) at R = {r:?}")]
    Degeneracy {
        lower: usize,
        upper: usize,
        gap: f64,
        r: Vec<f64>,
    },

    #[error("degenerate mapping state: trace(g g^\u{2020}) = {0:e}")]
    DegenerateState(f64),

    #[error("singular window weight at action {0}")]
    SingularWeight(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("momentum rescale impossible: mapping energy {h_ref:e} below adiabatic energy {e_occ:e}")]
    RescaleImpossible { h_ref: f64, e_occ: f64 },

    #[error("wavepacket density {edge_density:e} at the grid edge at t = {t}")]
    DomainTooSmall { t: f64, edge_density: f64 },

    #[error("{failed} of {total} trajectories failed (limit 0.1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
