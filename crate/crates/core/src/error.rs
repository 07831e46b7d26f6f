use thiserror::Error;

use crate::model::Violation;

/// Errors raised by the solvers and simulators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParams(Vec<Violation>),
    #[error("experimentation condition fails: no belief has a learning region")]
    ExpViolated,
    #[error("branch {0} is undefined for these parameters")]
    UndefinedBranch(&'static str),
    #[error("no sign change for {what} on [{lo}, {hi}]")]
    BracketingFailure { what: &'static str, lo: f64, hi: f64 },
    #[error("belief {0} is a kink of the value function")]
    KinkPoint(f64),
    #[error("target belief {target} is not reachable from {from} under the given drift")]
    Unreachable { from: f64, target: f64 },
    #[error("signal has probability zero")]
    DegenerateSignal,
    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),
    #[error("one half of the belief distribution carries no mass")]
    EmptyHalf,
    #[error("attention frontier violates its assumptions: {0}")]
    AssumptionViolated(String),
    #[error("frontier has no curvature at its fixed point (second derivative {0})")]
    SaddleDegenerate(f64),
    #[error("middle action ({u_m_r}, {u_m_l}) breaks the payoff ordering: {reason}")]
    OrderingViolation {
        u_m_r: f64,
        u_m_l: f64,
        reason: &'static str,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
