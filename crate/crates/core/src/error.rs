use thiserror::Error;

use crate::space::{Real, SpaceViolation};
use crate::strategy::StrategyViolation;

#[derive(Debug, Clone, Error)]
pub enum StopGameError {
    #[error("invalid filtered space: {0:?}")]
    InvalidSpace(Vec<SpaceViolation>),

    #[error("map is not a stopping time ({0})")]
    InvalidStoppingTime(String),

    #[error("invalid stopping strategy: {0:?}")]
    InvalidStrategy(Vec<StrategyViolation>),

    #[error("payoff field is not adapted at {0} tuple(s)")]
    NotAdapted(usize),

    #[error("no window width h satisfies eta(h) < epsilon: eta(min step) = {eta_min_step}")]
    NoValidH { eta_min_step: Real },

    #[error("phi_h({time}) = {value} is not a grid point")]
    NonGridResult { time: Real, value: Real },

    #[error("lower obstacle exceeds upper obstacle at time index {time}, outcome {outcome}")]
    OrderViolation { time: usize, outcome: usize },

    #[error("{what}: {count} exceeds the desk-scale cap {cap}")]
    GuardExceeded { what: &'static str, count: u128, cap: u128 },

    #[error("certified gap {gap} exceeds bound {bound} ({context})")]
    CertificationFailed { context: String, gap: Real, bound: Real },

    #[error("family entry {entry} fails at window time {time}: gap {gap} > {bound}")]
    WindowCertificationFailed { entry: usize, time: usize, gap: Real, bound: Real },

    #[error("no grid step satisfies the delta conditions on the F_theta atom containing outcome {outcome}")]
    NoValidDelta { outcome: usize },

    #[error("ordering theorem violated: {0}")]
    TheoremViolation(String),

    #[error("time index {0} is outside the family range")]
    OutOfRange(usize),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, StopGameError>;
