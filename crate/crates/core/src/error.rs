use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("equilibrium cubic has no positive root")]
    NoPositiveRoot,

    #[error("equilibrium index {index} out of range ({available} available)")]
    EquilibriumIndex { index: usize, available: usize },

    #[error("Hopf case violation: {0}")]
    CaseViolation(String),

    #[error("transversality denominator vanishes ({0:e})")]
    DenominatorZero(f64),

    #[error("resonance detected: |det Delta(n i omega0, gamma0)| = {modulus:e} at n = {n}")]
    ResonanceDetected { n: i64, modulus: f64 },

    #[error("solvability matrix C is singular (det C = {0:e})")]
    SingularC(f64),

    #[error("singular characteristic matrix at n = {n} (|det| = {modulus:e})")]
    SingularDelta { n: i64, modulus: f64 },

    #[error("requested order {requested} exceeds the configured maximum {max}")]
    OrderOverflow { requested: usize, max: usize },

    #[error("order {requested} not available (expansion built to order {available})")]
    OrderUnavailable { requested: usize, available: usize },

    #[error("truncated frequency is not positive (omega = {0})")]
    NonpositiveFrequency(f64),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh too coarse: delay wraps {wraps} periods (bound {bound})")]
    MeshTooCoarse { wraps: usize, bound: usize },

    #[error("guess amplitude {0:e} is degenerate (collapses to the equilibrium)")]
    DegenerateOrbit(f64),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<crate::bvp::PeriodicOrbit>>,
    },

    #[error("singular Jacobian in Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("model pole: v(t - s0) + v0 = {value:e} at t = {t}")]
    PoleEncountered { t: f64, value: f64 },

    #[error("history covers {have} but the largest delay is {need}")]
    HistoryTooShort { have: f64, need: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Configuration problems as opposed to numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::EquilibriumIndex { .. }
                | Error::CaseViolation(_)
                | Error::InvalidMesh(_)
                | Error::OrderOverflow { .. }
                | Error::OrderUnavailable { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
