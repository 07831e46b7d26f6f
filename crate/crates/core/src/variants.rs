//! Extensions with a linear attention technology: attention bounded away
//! from the corners, different arrival rates per source, and extra terminal
//! actions between ℓ and r.

use serde::{Deserialize, Serialize};

use crate::branch::{LinearBranch, Rates};
use crate::error::{Error, Result};
use crate::model::{Action, ModelParams};
use crate::policy::{Choice, RegimeSolution, Technology};

/// Admissible attention interval `[alpha_min, alpha_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionBounds {
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl AttentionBounds {
    pub fn symmetric(alpha_max: f64) -> Self {
        AttentionBounds { alpha_min: 1.0 - alpha_max, alpha_max }
    }

    /// `alpha_max = 1` is accepted and gives the baseline.
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_min >= 0.0 && self.alpha_min < 0.5 && self.alpha_max > 0.5 && self.alpha_max <= 1.0;
        if !ok {
            return Err(Error::InvalidSpec(format!(
                "attention bounds must satisfy 0 ≤ alpha_min < 1/2 < alpha_max ≤ 1, got [{}, {}]",
                self.alpha_min, self.alpha_max
            )));
        }
        if (self.alpha_min + self.alpha_max - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec("attention bounds must be symmetric around 1/2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymRates {
    pub lambda_r: f64,
    pub lambda_l: f64,
}

impl AsymRates {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_r > 0.0 && self.lambda_r.is_finite() && self.lambda_l > 0.0 && self.lambda_l.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "arrival rates must be positive, got ({}, {})",
                self.lambda_r, self.lambda_l
            )));
        }
        Ok(())
    }
}

pub fn nonexclusive_solution(params: &ModelParams, bounds: AttentionBounds) -> Result<RegimeSolution> {
    bounds.validate()?;
    RegimeSolution::new(params, Technology::nonexclusive(params.lambda, bounds.alpha_max))
}

/// `params.lambda` is ignored; the two rates come from `rates`.
pub fn asymmetric_solution(params: &ModelParams, rates: AsymRates) -> Result<RegimeSolution> {
    rates.validate()?;
    RegimeSolution::new(params, Technology::asymmetric(rates.lambda_r, rates.lambda_l))
}

/// A terminal action paying `u_m_r` in state R and `u_m_l` in state L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiddleAction {
    pub u_m_r: f64,
    pub u_m_l: f64,
}

impl MiddleAction {
    pub fn payoff(&self, p: f64) -> f64 {
        p * self.u_m_r + (1.0 - p) * self.u_m_l
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let bad = |reason: &'static str| {
            Err(Error::OrderingViolation { u_m_r: self.u_m_r, u_m_l: self.u_m_l, reason })
        };
        if !(self.u_m_r > params.u_lr && self.u_m_r < params.u_rr) {
            return bad("u_m_R must lie strictly between u_l_R and u_r_R");
        }
        if !(self.u_m_l < params.u_ll) {
            return bad("u_m_L must be below u_l_L");
        }
        Ok(())
    }
}

/// Cutoffs of the strategy that takes the middle action on
/// `[p_m_low, p_m_high]` and learns toward it from outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCutoffs {
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub p_m_low: f64,
    pub p_m_high: f64,
}

fn u_fa(params: &ModelParams, rate: f64, payoff: f64) -> f64 {
    (rate * payoff - params.c) / (params.rho + rate)
}

pub fn m_strategy_cutoffs(params: &ModelParams, m: MiddleAction) -> MCutoffs {
    let ModelParams { u_rr, u_ll, lambda, rho, c, .. } = *params;
    let in_unit = |q: f64| (q > 0.0 && q < 1.0).then_some(q);
    let q1 = if m.u_m_r < u_fa(params, lambda, u_rr) && c + rho * m.u_m_l > 0.0 {
        in_unit((m.u_m_l * rho + c) / (rho * (m.u_m_l - m.u_m_r) + (u_rr - m.u_m_r) * lambda))
    } else {
        None
    };
    let q2 = if m.u_m_l < u_fa(params, lambda, u_ll) && c + rho * m.u_m_r > 0.0 {
        in_unit(
            ((u_ll - m.u_m_l) * lambda - m.u_m_l * rho - c)
                / (rho * (m.u_m_r - m.u_m_l) + (u_ll - m.u_m_l) * lambda),
        )
    } else {
        None
    };
    let beats_s = |q: f64| m.payoff(q) >= params.u_s(q);
    MCutoffs {
        q1,
        q2,
        p_m_high: q1.filter(|&q| beats_s(q)).unwrap_or(1.0),
        p_m_low: q2.filter(|&q| beats_s(q)).unwrap_or(0.0),
    }
}

/// Value of the m-strategy for one middle action.
#[derive(Debug, Clone, Copy)]
pub struct MStrategy {
    pub action: MiddleAction,
    pub cutoffs: MCutoffs,
    below: Option<LinearBranch>,
    above: Option<LinearBranch>,
}

impl MStrategy {
    pub fn new(params: &ModelParams, action: MiddleAction) -> Result<Self> {
        action.validate(params)?;
        let cutoffs = m_strategy_cutoffs(params, action);
        let lam = params.lambda;
        let below = (cutoffs.p_m_low > 0.0).then(|| {
            let q = cutoffs.p_m_low;
            LinearBranch::through(params, Rates::new(0.0, lam), q, action.payoff(q))
        });
        let above = (cutoffs.p_m_high < 1.0).then(|| {
            let q = cutoffs.p_m_high;
            LinearBranch::through(params, Rates::new(lam, 0.0), q, action.payoff(q))
        });
        Ok(MStrategy { action, cutoffs, below, above })
    }

    /// Value and the attention level it prescribes (`None` = take m).
    pub fn eval(&self, p: f64) -> (f64, Option<f64>) {
        match (self.below, self.above) {
            (Some(b), _) if p < self.cutoffs.p_m_low => (b.value(p), Some(0.0)),
            (_, Some(a)) if p > self.cutoffs.p_m_high => (a.value(p), Some(1.0)),
            _ => (self.action.payoff(p), None),
        }
    }

    pub fn value(&self, p: f64) -> f64 {
        self.eval(p).0
    }
}

/// What the decision maker does at a belief when middle actions exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiChoice {
    Stop { action: Action },
    /// Take the middle action with this index (after sorting).
    StopMiddle { index: usize },
    Attend { alpha: f64 },
}

impl MultiChoice {
    fn from_choice(c: Choice) -> Self {
        match c {
            Choice::Stop(action) => MultiChoice::Stop { action },
            Choice::Attend(alpha) => MultiChoice::Attend { alpha },
        }
    }
}

/// Baseline solution plus one m-strategy per middle action.
#[derive(Debug, Clone)]
pub struct MultiAction {
    pub baseline: RegimeSolution,
    pub strategies: Vec<MStrategy>,
}

impl MultiAction {
    /// Sorts middles by `u_m_r` and checks that each one trades off against
    /// its neighbours (none dominates another).
    pub fn new(params: &ModelParams, middles: &[MiddleAction]) -> Result<Self> {
        let baseline = crate::policy::solve(params)?;
        let mut sorted = middles.to_vec();
        sorted.sort_by(|a, b| a.u_m_r.total_cmp(&b.u_m_r));
        for w in sorted.windows(2) {
            if !(w[1].u_m_r > w[0].u_m_r && w[1].u_m_l < w[0].u_m_l) {
                return Err(Error::OrderingViolation {
                    u_m_r: w[1].u_m_r,
                    u_m_l: w[1].u_m_l,
                    reason: "middle actions must trade off across states",
                });
            }
        }
        let strategies = sorted
            .into_iter()
            .map(|m| MStrategy::new(&baseline.params, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiAction { baseline, strategies })
    }

    pub fn eval(&self, p: f64) -> (f64, MultiChoice) {
        let mut best = (self.baseline.value(p), MultiChoice::from_choice(self.baseline.choice(p)));
        for (i, s) in self.strategies.iter().enumerate() {
            let (v, alpha) = s.eval(p);
            if v > best.0 {
                best = (
                    v,
                    match alpha {
                        Some(alpha) => MultiChoice::Attend { alpha },
                        None => MultiChoice::StopMiddle { index: i },
                    },
                );
            }
        }
        best
    }

    /// Terminal actions `(u_R, u_L)` of the middles, for the discrete oracle.
    pub fn oracle_actions(&self) -> Vec<(f64, f64)> {
        self.strategies.iter().map(|s| (s.action.u_m_r, s.action.u_m_l)).collect()
    }
}

/// Envelope of the baseline value and every m-strategy at `p`.
pub fn multi_action_envelope(params: &ModelParams, middles: &[MiddleAction], p: f64) -> Result<(f64, MultiChoice)> {
    Ok(MultiAction::new(params, middles)?.eval(p))
}
