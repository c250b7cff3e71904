use thiserror::Error;

/// Errors raised by the simulation and numerics modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument outside domain: {0}")]
    Domain(String),

    /// |B| = 0 where a Larmor orbit is required.
    #[error("no Larmor orbit at zero field; use straight-line flight")]
    StraightLineRegime,

    #[error("start point lies inside an obstacle (distance {distance:e} < radius {radius:e})")]
    StartInsideObstacle { distance: f64, radius: f64 },

    #[error("event cap of {cap} exceeded at t = {time}")]
    EventCapExceeded { cap: usize, time: f64 },

    #[error("near-singular operator: |lambda_{mode}| = {value:e}")]
    NearSingular { mode: i64, value: f64 },

    #[error("series not guaranteed convergent: contraction bound {bound} >= 1")]
    DivergenceRisk { bound: f64 },

    #[error("memory truncation K_cut = {k_cut} leaves weight {residual:e} above tolerance")]
    MemoryTruncation { k_cut: usize, residual: f64 },

    #[error("kinetic solver unstable at t = {time}: L2 norm grew by factor {growth}")]
    Unstable { time: f64, growth: f64 },

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
