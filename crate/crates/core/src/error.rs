use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("assumptions violated: {0}")]
    Assumptions(String),

    #[error("newton iteration stalled after {iterations} steps (residuals {history:?})")]
    NewtonDivergence { iterations: usize, history: Vec<f64> },

    #[error("no stationary radius in search window [{lo}, {hi}]")]
    NoStationaryRadius { lo: f64, hi: f64 },

    #[error("incompatible rigid-motion data: net force residual {residual:e}")]
    IncompatibleRigidMotion { residual: f64 },

    #[error("threshold undefined below gamma_star (gamma = {gamma}, gamma_star = {gamma_star})")]
    BelowThreshold { gamma: f64, gamma_star: f64 },

    #[error("eigensolver failed for l = {l}, epsilon = {epsilon:e}; matrix written to {}", dump.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<unavailable>".into()))]
    Eigen {
        l: usize,
        epsilon: f64,
        dump: Option<PathBuf>,
    },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("front left window ({lo}, {hi}): R = {radius} at t = {time}")]
    BlowUp { time: f64, radius: f64, lo: f64, hi: f64 },

    #[error("invalid Hanzawa spec: {0}")]
    InvalidHanzawa(String),
}

impl Error {
    /// Validation-class errors (bad input) as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Domain { .. }
                | Error::Assumptions(_)
                | Error::IncompatibleRigidMotion { .. }
                | Error::BelowThreshold { .. }
                | Error::InvalidHanzawa(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
