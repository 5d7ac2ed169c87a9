use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("control field Rabi frequency must be positive (cos θ = 0 leaves the effective mass undefined)")]
    ZeroControlField,

    #[error("probe detuning δ must be nonzero (effective mass undefined)")]
    ZeroProbeDetuning,

    #[error("effective mass {m_eff:e} kg is not positive; flip the sign of δ (δ < 0 gives m_eff > 0)")]
    NegativeMass { m_eff: f64 },

    #[error("sector dimension {dim} exceeds the cap of {cap} (M = {m_sites}, n = {n})")]
    DimensionCap { m_sites: usize, n: usize, dim: u128, cap: usize },

    #[error("operator failed the hermiticity check (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dense solver cap exceeded: dimension {dim} > {cap}; {hint}")]
    DenseCap { dim: usize, cap: usize, hint: &'static str },

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("solver tolerance violated: {0}")]
    Tolerance(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("ramp schedule: {0}")]
    Schedule(String),
}
