//! Belief paths absent news, first-passage times, closed-form outcome
//! statistics and Monte-Carlo simulation.
//!
//! Absent news the log-odds of state R move linearly in time within a policy
//! segment, so a no-news path is a short list of [`Leg`]s whose end points are
//! found analytically. Everything else (delays, mistake probabilities, the
//! value of a policy, simulated breakthrough times) integrates exactly over
//! those legs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::branch::Rates;
use crate::error::{Error, Result};
use crate::model::{Action, ModelParams, State};
use crate::numeric::{logistic, logit};
use crate::policy::{Choice, RegimeSolution, Segment, SegmentKind};

/// A policy given as an ordered partition of [0, 1].
#[derive(Debug, Clone)]
pub struct PolicyMap {
    pub segments: Vec<Segment>,
}

impl PolicyMap {
    pub fn from_solution(sol: &RegimeSolution) -> Self {
        PolicyMap { segments: sol.segments().to_vec() }
    }

    /// Constant attention `alpha` on the baseline technology, never stopping.
    pub fn constant(params: &ModelParams, alpha: f64) -> Self {
        let rates = Rates::new(params.lambda * alpha, params.lambda * (1.0 - alpha));
        PolicyMap {
            segments: vec![Segment {
                lo: 0.0,
                hi: 1.0,
                lo_closed: true,
                hi_closed: true,
                kind: SegmentKind::Stationary,
                choice: Choice::Attend(alpha),
                rates: Some(rates),
            }],
        }
    }

    fn index_of(&self, p: f64) -> usize {
        self.segments
            .iter()
            .position(|s| s.contains(p))
            .expect("policy segments cover [0, 1]")
    }
}

/// A stretch of time with one choice and constant log-odds drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Leg {
    pub t0: f64,
    /// `f64::INFINITY` for the last leg of a path that never stops.
    pub t1: f64,
    pub p0: f64,
    pub p1: f64,
    pub choice: Choice,
    pub rates: Rates,
}

impl Leg {
    fn dxdt(&self) -> f64 {
        -self.rates.drift()
    }

    fn belief_at(&self, t: f64) -> f64 {
        if self.p0 <= 0.0 || self.p0 >= 1.0 || self.dxdt() == 0.0 {
            return self.p0;
        }
        logistic(logit(self.p0) + self.dxdt() * (t - self.t0))
    }

    fn duration(&self) -> f64 {
        self.t1 - self.t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Terminal {
    /// Absent news the decision maker acts at this time and belief.
    Stop { action: Action, time: f64, belief: f64 },
    /// Learning continues forever absent news.
    Never,
}

/// The deterministic path followed while no breakthrough arrives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoNewsPath {
    pub p0: f64,
    pub legs: Vec<Leg>,
    pub terminal: Terminal,
}

impl NoNewsPath {
    pub fn new(policy: &PolicyMap, p0: f64) -> Self {
        let mut legs = Vec::new();
        let mut idx = policy.index_of(p0);
        let mut p = p0;
        let mut t = 0.0;
        let terminal = loop {
            let seg = &policy.segments[idx];
            let rates = match (seg.choice, seg.rates) {
                (Choice::Stop(action), _) => break Terminal::Stop { action, time: t, belief: p },
                (Choice::Attend(_), Some(r)) => r,
                (Choice::Attend(_), None) => unreachable!("attention segment without rates"),
            };
            let dxdt = -rates.drift();
            if dxdt == 0.0 || p <= 0.0 || p >= 1.0 || legs.len() > 64 {
                legs.push(Leg { t0: t, t1: f64::INFINITY, p0: p, p1: p, choice: seg.choice, rates });
                break Terminal::Never;
            }
            let (target, next) = if dxdt > 0.0 {
                (seg.hi, idx + 1)
            } else {
                (seg.lo, idx.wrapping_sub(1))
            };
            if target <= 0.0 || target >= 1.0 {
                let p1 = if target <= 0.0 { 0.0 } else { 1.0 };
                legs.push(Leg { t0: t, t1: f64::INFINITY, p0: p, p1, choice: seg.choice, rates });
                break Terminal::Never;
            }
            let dt = ((logit(target) - logit(p)) / dxdt).max(0.0);
            legs.push(Leg { t0: t, t1: t + dt, p0: p, p1: target, choice: seg.choice, rates });
            t += dt;
            p = target;
            idx = next;
        };
        NoNewsPath { p0, legs, terminal }
    }

    /// Belief at time `t` absent news.
    pub fn belief_at(&self, t: f64) -> f64 {
        for leg in &self.legs {
            if t <= leg.t1 {
                return leg.belief_at(t.max(leg.t0));
            }
        }
        match self.terminal {
            Terminal::Stop { belief, .. } => belief,
            Terminal::Never => self.legs.last().map_or(self.p0, |l| l.p1),
        }
    }

    /// Choice in effect at time `t` absent news.
    pub fn choice_at(&self, t: f64) -> Choice {
        for leg in &self.legs {
            if t < leg.t1 {
                return leg.choice;
            }
        }
        match self.terminal {
            Terminal::Stop { action, .. } => Choice::Stop(action),
            Terminal::Never => self.legs.last().map(|l| l.choice).unwrap_or(Choice::Attend(0.5)),
        }
    }

    /// Cumulative breakthrough hazard up to `t` in `state`.
    pub fn hazard_to(&self, state: State, t: f64) -> f64 {
        let mut h = 0.0;
        for leg in &self.legs {
            if t <= leg.t0 {
                break;
            }
            let rate = leg.rates.hazard(state);
            if rate > 0.0 {
                h += rate * (t.min(leg.t1) - leg.t0);
            }
        }
        h
    }

    /// Time at which the cumulative hazard in `state` reaches `e`, if ever
    /// before the decision maker stops.
    pub fn breakthrough_time(&self, state: State, e: f64) -> Option<f64> {
        let mut h = 0.0;
        for leg in &self.legs {
            let rate = leg.rates.hazard(state);
            if rate > 0.0 {
                let gain = rate * leg.duration();
                if h + gain >= e {
                    return Some(leg.t0 + (e - h) / rate);
                }
                h += gain;
            }
        }
        None
    }
}

/// Belief at time `t` absent news under `policy`.
pub fn drift_and_path(policy: &PolicyMap, p0: f64, t: f64) -> f64 {
    NoNewsPath::new(policy, p0).belief_at(t)
}

/// Time for the no-news belief to move from `p0` to `target` under constant
/// attention `alpha` on the baseline technology.
pub fn first_passage_time(params: &ModelParams, p0: f64, target: f64, alpha: f64) -> Result<f64> {
    if p0 == target {
        return Ok(0.0);
    }
    let dxdt = -params.lambda * (2.0 * alpha - 1.0);
    let t = (logit(target) - logit(p0)) / dxdt;
    if dxdt == 0.0 || !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Unreachable { from: p0, target });
    }
    Ok(t)
}

/// Exact expected outcomes of following a policy from `p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcomes {
    pub expected_delay: f64,
    pub mistake_prob: f64,
    /// Expected discounted payoff net of flow costs.
    pub value: f64,
}

fn correct_payoff(params: &ModelParams, state: State) -> f64 {
    match state {
        State::R => params.u_rr,
        State::L => params.u_ll,
    }
}

fn payoff_in(params: &ModelParams, action: Action, state: State) -> f64 {
    match (action, state) {
        (Action::R, State::R) => params.u_rr,
        (Action::R, State::L) => params.u_rl,
        (Action::L, State::R) => params.u_lr,
        (Action::L, State::L) => params.u_ll,
    }
}

/// Outcomes of a no-news path, integrated leg by leg.
pub fn path_outcomes(params: &ModelParams, path: &NoNewsPath) -> Outcomes {
    let rho = params.rho;
    let mut out = Outcomes { expected_delay: 0.0, mistake_prob: 0.0, value: 0.0 };
    for (state, prob) in [(State::R, path.p0), (State::L, 1.0 - path.p0)] {
        if prob == 0.0 {
            continue;
        }
        let u = correct_payoff(params, state);
        let mut surv = 1.0;
        let mut delay = 0.0;
        let mut value = 0.0;
        for leg in &path.legs {
            let h = leg.rates.hazard(state);
            let dur = leg.duration();
            let disc0 = (-rho * leg.t0).exp();
            let (int_s, int_ds) = if dur.is_infinite() {
                (if h > 0.0 { 1.0 / h } else { f64::INFINITY }, 1.0 / (rho + h))
            } else {
                let int_s = if h > 0.0 { -(-h * dur).exp_m1() / h } else { dur };
                let int_ds = if rho + h > 0.0 { -(-(rho + h) * dur).exp_m1() / (rho + h) } else { dur };
                (int_s, int_ds)
            };
            delay += surv * int_s;
            value += surv * disc0 * (h * u - params.c) * int_ds;
            if dur.is_finite() {
                surv *= (-h * dur).exp();
            } else {
                surv = 0.0;
            }
        }
        if let Terminal::Stop { action, time, .. } = path.terminal {
            value += surv * (-rho * time).exp() * payoff_in(params, action, state);
            if action != state.action() {
                out.mistake_prob += prob * surv;
            }
        }
        out.expected_delay += prob * delay;
        out.value += prob * value;
    }
    out
}

/// Expected delay and mistake probability under the optimal policy.
pub fn analytic_outcomes(sol: &RegimeSolution, p0: f64) -> Outcomes {
    path_outcomes(&sol.params, &NoNewsPath::new(&PolicyMap::from_solution(sol), p0))
}

/// Result of one simulated decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOutcome {
    pub state: State,
    pub action: Action,
    pub decision_time: f64,
    pub correct: bool,
    /// Whether the decision followed a breakthrough.
    pub breakthrough: bool,
    pub value: f64,
}

/// Random stream of path `index`; independent of evaluation order.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn discounted(params: &ModelParams, t: f64, payoff: f64) -> f64 {
    if params.rho == 0.0 {
        payoff - params.c * t
    } else {
        let d = (-params.rho * t).exp();
        d * payoff - params.c * (1.0 - d) / params.rho
    }
}

/// Simulates one decision with a given state and unit-exponential draw.
pub fn simulate_one(params: &ModelParams, path: &NoNewsPath, state: State, e: f64) -> SimOutcome {
    let (action, time, breakthrough) = match path.breakthrough_time(state, e) {
        Some(t) => (state.action(), t, true),
        None => match path.terminal {
            Terminal::Stop { action, time, .. } => (action, time, false),
            Terminal::Never => (state.action(), f64::INFINITY, false),
        },
    };
    SimOutcome {
        state,
        action,
        decision_time: time,
        correct: action == state.action(),
        breakthrough,
        value: discounted(params, time, payoff_in(params, action, state)),
    }
}

/// Draws the state and breakthrough threshold for path `index`.
pub fn simulate_indexed(params: &ModelParams, path: &NoNewsPath, seed: u64, index: u64) -> SimOutcome {
    let mut rng = path_rng(seed, index);
    let u: f64 = rng.gen();
    let state = if u < path.p0 { State::R } else { State::L };
    let e: f64 = rng.sample(Exp1);
    simulate_one(params, path, state, e)
}

/// Posterior at time `t` along a simulated path; breakthroughs are absorbing.
pub fn posterior_at(path: &NoNewsPath, out: &SimOutcome, t: f64) -> f64 {
    if out.breakthrough && out.decision_time <= t {
        match out.state {
            State::R => 1.0,
            State::L => 0.0,
        }
    } else {
        path.belief_at(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub n_paths: u64,
    pub mean_delay: f64,
    pub se_delay: f64,
    pub mistake_rate: f64,
    pub se_mistake: f64,
    pub value: f64,
    pub se_value: f64,
}

#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn se(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

/// Monte-Carlo summary of `n_paths` decisions under `policy` from `p0`.
pub fn simulate_policy(params: &ModelParams, policy: &PolicyMap, p0: f64, n_paths: u64, seed: u64) -> McSummary {
    let path = NoNewsPath::new(policy, p0);
    let (mut delay, mut wrong, mut value) = (Moments::default(), Moments::default(), Moments::default());
    for i in 0..n_paths {
        let o = simulate_indexed(params, &path, seed, i);
        delay.push(o.decision_time);
        wrong.push(if o.correct { 0.0 } else { 1.0 });
        value.push(o.value);
    }
    McSummary {
        n_paths,
        mean_delay: delay.mean,
        se_delay: delay.se(),
        mistake_rate: wrong.mean,
        se_mistake: wrong.se(),
        value: value.mean,
        se_value: value.se(),
    }
}

/// Monte-Carlo summary under the optimal policy.
pub fn monte_carlo(sol: &RegimeSolution, p0: f64, n_paths: u64, seed: u64) -> McSummary {
    simulate_policy(&sol.params, &PolicyMap::from_solution(sol), p0, n_paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_alpha_closed_form() {
        let prm = ModelParams::new(1.0, 1.0, -1.0, -1.0, 1.0, 0.0, 0.1);
        let pol = PolicyMap::constant(&prm, 0.0);
        let p = drift_and_path(&pol, 0.5, 2f64.ln());
        assert!((p - 2.0 / 3.0).abs() < 1e-14);
        let half = PolicyMap::constant(&prm, 0.5);
        assert_eq!(drift_and_path(&half, 0.3, 5.0), 0.3);
    }

    #[test]
    fn first_passage_inverts_path() {
        let prm = ModelParams::new(1.0, 1.0, -1.0, -1.0, 1.3, 0.0, 0.1);
        let t = first_passage_time(&prm, 0.2, 0.7, 0.0).unwrap();
        let p = drift_and_path(&PolicyMap::constant(&prm, 0.0), 0.2, t);
        assert!((p - 0.7).abs() < 1e-12);
        assert!(first_passage_time(&prm, 0.2, 0.7, 1.0).is_err());
    }
}
