//! Model parameters, immediate payoffs, benchmark values and the closed-form
//! cutoffs of the baseline problem.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Payoffs, arrival rate, discount rate and flow cost.
///
/// Field names follow `u_<action><state>`: `u_rr` is the payoff of action r in
/// state R, `u_lr` the payoff of action ℓ in state R, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub u_rr: f64,
    pub u_ll: f64,
    pub u_lr: f64,
    pub u_rl: f64,
    pub lambda: f64,
    pub rho: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "l")]
    L,
    #[serde(rename = "r")]
    R,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::L => "l",
            Action::R => "r",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    L,
    R,
}

impl State {
    /// The action that is correct in this state.
    pub fn action(self) -> Action {
        match self {
            State::L => Action::L,
            State::R => Action::R,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    NoLearning,
    OwnOnly,
    OwnAndOpposite,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A broken parameter assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NotFinite(&'static str),
    LambdaNotPositive,
    RhoNegative,
    CostNegative,
    RightPayoff,
    LeftPayoff,
    DominantAction,
    NoImpatience,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotFinite(k) => write!(f, "{k} must be finite"),
            Violation::LambdaNotPositive => f.write_str("lambda > 0"),
            Violation::RhoNegative => f.write_str("rho ≥ 0"),
            Violation::CostNegative => f.write_str("c ≥ 0"),
            Violation::RightPayoff => f.write_str("u_r_R > max(0,u_l_R)"),
            Violation::LeftPayoff => f.write_str("u_l_L > max(0,u_r_L)"),
            Violation::DominantAction => f.write_str("no dominant action"),
            Violation::NoImpatience => f.write_str("rho + c > 0"),
        }
    }
}

/// Returns every broken assumption; empty iff `params` is valid.
pub fn validate_params(params: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let fields = [
        ("u_r_R", params.u_rr),
        ("u_l_L", params.u_ll),
        ("u_l_R", params.u_lr),
        ("u_r_L", params.u_rl),
        ("lambda", params.lambda),
        ("rho", params.rho),
        ("c", params.c),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            out.push(Violation::NotFinite(name));
        }
    }
    if !out.is_empty() {
        return out;
    }
    if params.lambda <= 0.0 {
        out.push(Violation::LambdaNotPositive);
    }
    if params.rho < 0.0 {
        out.push(Violation::RhoNegative);
    }
    if params.c < 0.0 {
        out.push(Violation::CostNegative);
    }
    if !(params.u_rr > params.u_lr.max(0.0)) {
        out.push(Violation::RightPayoff);
    }
    if !(params.u_ll > params.u_rl.max(0.0)) {
        out.push(Violation::LeftPayoff);
    }
    let r_dominates = params.u_rr >= params.u_lr && params.u_rl >= params.u_ll;
    let l_dominates = params.u_lr >= params.u_rr && params.u_ll >= params.u_rl;
    if r_dominates || l_dominates {
        out.push(Violation::DominantAction);
    }
    if !(params.rho + params.c > 0.0) {
        out.push(Violation::NoImpatience);
    }
    out
}

/// Output of [`immediate_payoffs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Immediate {
    pub u_l: f64,
    pub u_r: f64,
    pub u: f64,
    pub x_star: Action,
    pub p_hat: f64,
}

/// Output of [`benchmark_values`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Benchmarks {
    pub u_s: f64,
    pub u_fa: f64,
    pub exp_holds: bool,
}

/// Output of [`regime_cutoffs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostCutoffs {
    pub c_bar: f64,
    pub c_underbar: f64,
    pub regime: Regime,
}

/// Output of [`boundary_beliefs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Boundaries {
    pub p_low_star: f64,
    pub p_high_star: f64,
    pub p_star: f64,
}

impl ModelParams {
    pub fn new(u_rr: f64, u_ll: f64, u_lr: f64, u_rl: f64, lambda: f64, rho: f64, c: f64) -> Self {
        ModelParams { u_rr, u_ll, u_lr, u_rl, lambda, rho, c }
    }

    pub fn validated(self) -> Result<Self> {
        let v = validate_params(&self);
        if v.is_empty() { Ok(self) } else { Err(Error::InvalidParams(v)) }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn is_symmetric(&self) -> bool {
        self.u_rr == self.u_ll && self.u_lr == self.u_rl
    }

    pub fn u_l(&self, p: f64) -> f64 {
        p * self.u_lr + (1.0 - p) * self.u_ll
    }

    pub fn u_r(&self, p: f64) -> f64 {
        p * self.u_rr + (1.0 - p) * self.u_rl
    }

    pub fn u(&self, p: f64) -> f64 {
        self.u_l(p).max(self.u_r(p))
    }

    /// Payoff of `a` at belief `p`.
    pub fn payoff(&self, a: Action, p: f64) -> f64 {
        match a {
            Action::L => self.u_l(p),
            Action::R => self.u_r(p),
        }
    }

    /// Derivative of the payoff of `a` in `p`.
    pub fn payoff_slope(&self, a: Action) -> f64 {
        match a {
            Action::L => self.u_lr - self.u_ll,
            Action::R => self.u_rr - self.u_rl,
        }
    }

    /// Belief at which both actions pay the same.
    pub fn p_hat(&self) -> f64 {
        let dl = self.u_ll - self.u_rl;
        dl / (dl + (self.u_rr - self.u_lr))
    }

    /// Best immediate action; ties at `p_hat` go to r.
    pub fn best_action(&self, p: f64) -> Action {
        if p >= self.p_hat() { Action::R } else { Action::L }
    }

    /// Full-information payoff `p u_r^R + (1-p) u_l^L`.
    pub fn u_star(&self, p: f64) -> f64 {
        p * self.u_rr + (1.0 - p) * self.u_ll
    }

    /// Value of perpetual evidence at rate `s` in both states.
    pub fn stationary_value(&self, s: f64, p: f64) -> f64 {
        (s * self.u_star(p) - self.c) / (self.rho + s)
    }

    pub fn u_s(&self, p: f64) -> f64 {
        self.stationary_value(0.5 * self.lambda, p)
    }

    pub fn u_fa(&self, p: f64) -> f64 {
        self.stationary_value(self.lambda, p)
    }

    pub fn exp_holds(&self) -> bool {
        let ph = self.p_hat();
        self.u_fa(ph) > self.u(ph)
    }

    /// Cost above which no belief has a learning region.
    pub fn c_bar(&self) -> f64 {
        c_bar_for_rate(self, self.lambda)
    }

    /// Cost below which opposite-biased learning appears.
    pub fn c_underbar(&self) -> f64 {
        c_underbar_nonexclusive(self, 1.0)
    }

    pub fn regime(&self) -> Regime {
        classify(self.c, self.c_bar(), self.c_underbar())
    }
}

/// `max(0, s (U* - U)(p̂) - ρ U(p̂))`: the cost at which full attention at rate
/// `s` stops beating immediate action at the kink.
pub fn c_bar_for_rate(params: &ModelParams, s: f64) -> f64 {
    let ph = params.p_hat();
    let u = params.u(ph);
    (s * (params.u_star(ph) - u) - params.rho * u).max(0.0)
}

/// Lower cost threshold when attention is confined to `[1-ᾱ, ᾱ]`. `ᾱ = 1` is
/// the baseline.
pub fn c_underbar_nonexclusive(params: &ModelParams, alpha_max: f64) -> f64 {
    let ModelParams { u_rr, u_ll, u_lr, u_rl, lambda, rho, .. } = *params;
    let c_bar = c_bar_for_rate(params, lambda * alpha_max);
    let ratio = rho / lambda;
    let skew = 2.0 * alpha_max - 1.0;
    let lead = rho + lambda * alpha_max;
    let (kr, kl) = if rho == 0.0 && alpha_max == 1.0 {
        let k = lambda / (1.0 + 2f64.exp());
        (k * (u_rr - u_lr), k * (u_ll - u_rl))
    } else {
        // 1 + base^expo computed in log space
        let base_ln = ((2.0 * rho + lambda) / (skew * lambda)).ln();
        let expo = skew / ((1.0 - alpha_max) + ratio);
        let denom = 1.0 + (expo * base_ln).exp();
        (
            lead * (u_rr - u_lr) / denom - rho * u_rr,
            lead * (u_ll - u_rl) / denom - rho * u_ll,
        )
    };
    kr.min(kl).min(c_bar).max(0.0)
}

/// Regime from a cost and its two thresholds; boundaries are closed as in the
/// main characterization (c = c̄ means no learning, c = c̲ means own only).
pub fn classify(c: f64, c_bar: f64, c_underbar: f64) -> Regime {
    if c >= c_bar {
        Regime::NoLearning
    } else if c >= c_underbar {
        Regime::OwnOnly
    } else {
        Regime::OwnAndOpposite
    }
}

pub fn immediate_payoffs(params: &ModelParams, p: f64) -> Immediate {
    Immediate {
        u_l: params.u_l(p),
        u_r: params.u_r(p),
        u: params.u(p),
        x_star: params.best_action(p),
        p_hat: params.p_hat(),
    }
}

pub fn benchmark_values(params: &ModelParams, p: f64) -> Benchmarks {
    Benchmarks {
        u_s: params.u_s(p),
        u_fa: params.u_fa(p),
        exp_holds: params.exp_holds(),
    }
}

pub fn regime_cutoffs(params: &ModelParams) -> CostCutoffs {
    let c_bar = params.c_bar();
    let c_underbar = params.c_underbar();
    CostCutoffs { c_bar, c_underbar, regime: classify(params.c, c_bar, c_underbar) }
}

/// Closed-form boundary beliefs of the baseline model.
pub fn boundary_beliefs(params: &ModelParams) -> Result<Boundaries> {
    if !params.exp_holds() {
        return Err(Error::ExpViolated);
    }
    let l = params.lambda;
    Ok(Boundaries {
        p_low_star: p_low_star(params, l),
        p_high_star: p_high_star(params, l),
        p_star: p_star(params, l, l),
    })
}

/// Lower stopping boundary for R-evidence arriving at rate `r`.
pub fn p_low_star(params: &ModelParams, r: f64) -> f64 {
    let ModelParams { u_rr, u_ll, u_lr, rho, c, .. } = *params;
    (c + rho * u_ll) / (r * (u_rr - u_lr) + rho * (u_ll - u_lr))
}

/// Upper stopping boundary for L-evidence arriving at rate `l`.
pub fn p_high_star(params: &ModelParams, l: f64) -> f64 {
    let ModelParams { u_rr, u_ll, u_rl, rho, c, .. } = *params;
    (l * (u_ll - u_rl) - rho * u_rl - c) / (rho * (u_rr - u_rl) + l * (u_ll - u_rl))
}

/// Absorbing belief of opposite-biased learning, given the R-evidence rate of
/// the high-attention experiment and the L-evidence rate of the low one.
pub fn p_star(params: &ModelParams, r: f64, l: f64) -> f64 {
    let a = (params.u_ll * params.rho + params.c) * l;
    let b = (params.u_rr * params.rho + params.c) * r;
    a / (a + b)
}
