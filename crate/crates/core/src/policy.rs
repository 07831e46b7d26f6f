//! Value function envelope, optimal attention policy and HJB diagnostics.
//!
//! A [`Technology`] fixes which experiments the decision maker can run: a
//! "high" experiment (attention on the L-biased source, producing R-evidence
//! and a downward drift), a "low" one (the mirror), and the stationary mix
//! under which the belief stays put. The baseline, non-exclusive and
//! asymmetric-rate models differ only in these three rate pairs, so one
//! construction serves all of them.

use serde::{Deserialize, Serialize};

use crate::branch::{hjb_gain, LinearBranch, Rates};
use crate::error::{Error, Result};
use crate::model::{self, classify, Action, ModelParams, Regime};
use crate::numeric::bisect;

const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TechKind {
    Baseline,
    Nonexclusive { alpha_max: f64 },
    Asymmetric { lambda_r: f64, lambda_l: f64 },
}

/// The experiments available to the decision maker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub kind: TechKind,
    pub hi: Rates,
    pub lo: Rates,
    pub stationary: Rates,
    pub alpha_hi: f64,
    pub alpha_lo: f64,
    pub alpha_s: f64,
}

impl Technology {
    pub fn baseline(lambda: f64) -> Self {
        Technology {
            kind: TechKind::Baseline,
            hi: Rates::new(lambda, 0.0),
            lo: Rates::new(0.0, lambda),
            stationary: Rates::new(0.5 * lambda, 0.5 * lambda),
            alpha_hi: 1.0,
            alpha_lo: 0.0,
            alpha_s: 0.5,
        }
    }

    /// Attention confined to `[1 - alpha_max, alpha_max]`.
    pub fn nonexclusive(lambda: f64, alpha_max: f64) -> Self {
        let lo_a = 1.0 - alpha_max;
        Technology {
            kind: TechKind::Nonexclusive { alpha_max },
            hi: Rates::new(lambda * alpha_max, lambda * lo_a),
            lo: Rates::new(lambda * lo_a, lambda * alpha_max),
            stationary: Rates::new(0.5 * lambda, 0.5 * lambda),
            alpha_hi: alpha_max,
            alpha_lo: lo_a,
            alpha_s: 0.5,
        }
    }

    /// R-evidence at rate `lambda_r`, L-evidence at rate `lambda_l`.
    pub fn asymmetric(lambda_r: f64, lambda_l: f64) -> Self {
        let s = lambda_r * lambda_l / (lambda_r + lambda_l);
        Technology {
            kind: TechKind::Asymmetric { lambda_r, lambda_l },
            hi: Rates::new(lambda_r, 0.0),
            lo: Rates::new(0.0, lambda_l),
            stationary: Rates::new(s, s),
            alpha_hi: 1.0,
            alpha_lo: 0.0,
            alpha_s: lambda_l / (lambda_r + lambda_l),
        }
    }

    /// Rates under attention `alpha` (linear technologies only).
    pub fn rates_at(&self, alpha: f64) -> Rates {
        let w = (alpha - self.alpha_lo) / (self.alpha_hi - self.alpha_lo);
        Rates::new(
            self.lo.r + w * (self.hi.r - self.lo.r),
            self.lo.l + w * (self.hi.l - self.lo.l),
        )
    }

    pub fn u_s(&self, params: &ModelParams, p: f64) -> f64 {
        params.stationary_value(self.stationary.r, p)
    }

    pub fn u_s_slope(&self, params: &ModelParams) -> f64 {
        let s = self.stationary.r;
        s * (params.u_rr - params.u_ll) / (params.rho + s)
    }

    /// Full-attention benchmark relevant for the lower boundary.
    pub fn u_fa_low(&self, params: &ModelParams, p: f64) -> f64 {
        params.stationary_value(self.hi.r, p)
    }

    /// Full-attention benchmark relevant for the upper boundary.
    pub fn u_fa_high(&self, params: &ModelParams, p: f64) -> f64 {
        params.stationary_value(self.lo.l, p)
    }

    pub fn p_low_star(&self, params: &ModelParams) -> f64 {
        model::p_low_star(params, self.hi.r)
    }

    pub fn p_high_star(&self, params: &ModelParams) -> f64 {
        model::p_high_star(params, self.lo.l)
    }

    pub fn p_star(&self, params: &ModelParams) -> f64 {
        model::p_star(params, self.hi.r, self.lo.l)
    }

    /// Whether own-biased learning toward ℓ (resp. r) beats acting at the kink.
    pub fn exp_sides(&self, params: &ModelParams) -> (bool, bool) {
        let ph = params.p_hat();
        let u = params.u(ph);
        (self.u_fa_low(params, ph) > u, self.u_fa_high(params, ph) > u)
    }

    pub fn c_bar(&self, params: &ModelParams) -> f64 {
        model::c_bar_for_rate(params, self.hi.r).max(model::c_bar_for_rate(params, self.lo.l))
    }

    /// Lower cost threshold: closed form where one exists, otherwise found
    /// numerically from the regime characterization.
    pub fn c_underbar(&self, params: &ModelParams) -> f64 {
        match self.kind {
            TechKind::Baseline => params.c_underbar(),
            TechKind::Nonexclusive { alpha_max } => {
                model::c_underbar_nonexclusive(params, alpha_max)
            }
            TechKind::Asymmetric { .. } => numeric_c_underbar(params, self),
        }
    }

    pub fn regime(&self, params: &ModelParams) -> Regime {
        match self.kind {
            TechKind::Asymmetric { .. } => numeric_regime(params, self),
            _ => classify(params.c, self.c_bar(params), self.c_underbar(params)),
        }
    }
}

/// Gap `max(V̲_own(p*), V̄_own(p*)) − U^S(p*)`; opposite-biased learning is
/// optimal exactly when this is negative.
pub fn opposite_gap(params: &ModelParams, tech: &Technology) -> f64 {
    let ps = tech.p_star(params);
    let pl = tech.p_low_star(params);
    let ph = tech.p_high_star(params);
    let (left, right) = tech.exp_sides(params);
    let mut best = f64::NEG_INFINITY;
    if left {
        best = best.max(LinearBranch::through(params, tech.hi, pl, params.u_l(pl)).value(ps));
    }
    if right {
        best = best.max(LinearBranch::through(params, tech.lo, ph, params.u_r(ph)).value(ps));
    }
    best - tech.u_s(params, ps)
}

/// Regime from the defining inequalities rather than the cost thresholds.
pub fn numeric_regime(params: &ModelParams, tech: &Technology) -> Regime {
    let (left, right) = tech.exp_sides(params);
    if !(left || right) {
        Regime::NoLearning
    } else if opposite_gap(params, tech) < 0.0 {
        Regime::OwnAndOpposite
    } else {
        Regime::OwnOnly
    }
}

/// Cost at which the regime switches between own-only and own-and-opposite,
/// by bisection on the opposite-learning gap over `[0, c̄]`.
pub fn numeric_c_underbar(params: &ModelParams, tech: &Technology) -> f64 {
    let c_bar = tech.c_bar(params);
    if c_bar <= 0.0 {
        return 0.0;
    }
    let gap = |c: f64| opposite_gap(&params.with_c(c), tech);
    let top = c_bar * (1.0 - 1e-12);
    if gap(top) < 0.0 {
        return c_bar;
    }
    // c = 0 is excluded when ρ = 0
    let bottom = if params.rho > 0.0 { 0.0 } else { c_bar * 1e-12 };
    if gap(bottom) >= 0.0 {
        return 0.0;
    }
    bisect(gap, bottom, top, 1e-14, "opposite gap in c").unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchKind {
    OwnLeft,
    OwnRight,
    OppLeft,
    OppRight,
    StopL,
    StopR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Stop(Action),
    OwnLeft,
    OwnRight,
    OppLeft,
    OppRight,
    Stationary,
}

impl SegmentKind {
    pub fn label(&self) -> &'static str {
        match self {
            SegmentKind::Stop(Action::L) => "stop_l",
            SegmentKind::Stop(Action::R) => "stop_r",
            SegmentKind::OwnLeft => "own_left",
            SegmentKind::OwnRight => "own_right",
            SegmentKind::OppLeft => "opp_left",
            SegmentKind::OppRight => "opp_right",
            SegmentKind::Stationary => "stationary",
        }
    }
}

/// Optimal action at a belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Choice {
    Stop(Action),
    Attend(f64),
}

/// A maximal belief interval with a single prescribed choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub kind: SegmentKind,
    pub choice: Choice,
    /// Evidence rates while in the segment; `None` once stopped.
    pub rates: Option<Rates>,
}

impl Segment {
    pub fn contains(&self, p: f64) -> bool {
        (p > self.lo || (self.lo_closed && p == self.lo))
            && (p < self.hi || (self.hi_closed && p == self.hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSet {
    pub p_hat: f64,
    pub p_low_star: f64,
    pub p_high_star: f64,
    pub p_star: f64,
    pub p_check: Option<f64>,
    pub p_low: Option<f64>,
    pub p_high: Option<f64>,
    pub c_bar: f64,
    pub c_underbar: f64,
    /// Actual bounds of the experimentation region. They differ from the
    /// boundary beliefs only when one learning branch is dominated.
    pub region_low: f64,
    pub region_high: f64,
}

/// Complete solution for one parameter set and technology.
#[derive(Debug, Clone)]
pub struct RegimeSolution {
    pub params: ModelParams,
    pub tech: Technology,
    pub regime: Regime,
    pub cutoffs: CutoffSet,
    segments: Vec<Segment>,
    own_left: Option<LinearBranch>,
    own_right: Option<LinearBranch>,
    opp_left: LinearBranch,
    opp_right: LinearBranch,
}

/// Solves the baseline model.
pub fn solve(params: &ModelParams) -> Result<RegimeSolution> {
    RegimeSolution::new(params, Technology::baseline(params.lambda))
}

/// Grid point in `(lo, hi)` where `f` is largest. A branch pasted to `U` at
/// one end of its domain touches `U` there, so the exit crossing has to be
/// bracketed from the inside.
fn peak(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const N: usize = 4000;
    (1..N)
        .map(|i| lo + (hi - lo) * i as f64 / N as f64)
        .max_by(|&x, &y| f(x).total_cmp(&f(y)))
        .unwrap_or(0.5 * (lo + hi))
}

impl RegimeSolution {
    pub fn new(params: &ModelParams, tech: Technology) -> Result<Self> {
        let params = params.validated()?;
        let regime = tech.regime(&params);
        let pl_star = tech.p_low_star(&params);
        let ph_star = tech.p_high_star(&params);
        let p_star = tech.p_star(&params);
        let (left_ok, right_ok) = tech.exp_sides(&params);
        let own_left = left_ok
            .then(|| LinearBranch::through(&params, tech.hi, pl_star, params.u_l(pl_star)));
        let own_right = right_ok
            .then(|| LinearBranch::through(&params, tech.lo, ph_star, params.u_r(ph_star)));
        let us = tech.u_s(&params, p_star);
        let opp_left = LinearBranch::through(&params, tech.lo, p_star, us);
        let opp_right = LinearBranch::through(&params, tech.hi, p_star, us);

        let mut sol = RegimeSolution {
            params,
            tech,
            regime,
            cutoffs: CutoffSet {
                p_hat: params.p_hat(),
                p_low_star: pl_star,
                p_high_star: ph_star,
                p_star,
                p_check: None,
                p_low: None,
                p_high: None,
                c_bar: tech.c_bar(&params),
                c_underbar: tech.c_underbar(&params),
                region_low: params.p_hat(),
                region_high: params.p_hat(),
            },
            segments: Vec::new(),
            own_left,
            own_right,
            opp_left,
            opp_right,
        };
        match regime {
            Regime::NoLearning => sol.push_stop(0.0, 1.0, true),
            Regime::OwnOnly => sol.build_own_only()?,
            Regime::OwnAndOpposite => sol.build_own_and_opposite()?,
        }
        Ok(sol)
    }

    fn push(&mut self, lo: f64, hi: f64, lo_closed: bool, hi_closed: bool, kind: SegmentKind) {
        let t = &self.tech;
        let (choice, rates) = match kind {
            SegmentKind::Stop(a) => (Choice::Stop(a), None),
            SegmentKind::OwnLeft | SegmentKind::OppRight => (Choice::Attend(t.alpha_hi), Some(t.hi)),
            SegmentKind::OwnRight | SegmentKind::OppLeft => (Choice::Attend(t.alpha_lo), Some(t.lo)),
            SegmentKind::Stationary => (Choice::Attend(t.alpha_s), Some(t.stationary)),
        };
        self.segments.push(Segment { lo, hi, lo_closed, hi_closed, kind, choice, rates });
    }

    /// Stopping on `[lo, hi]` (left end always closed), split at p̂.
    fn push_stop(&mut self, lo: f64, hi: f64, hi_closed: bool) {
        let ph = self.params.p_hat();
        if lo < ph && hi > ph {
            self.push(lo, ph, true, false, SegmentKind::Stop(Action::L));
            self.push(ph, hi, true, hi_closed, SegmentKind::Stop(Action::R));
        } else {
            let a = if 0.5 * (lo + hi) < ph { Action::L } else { Action::R };
            self.push(lo, hi, true, hi_closed, SegmentKind::Stop(a));
        }
    }

    fn build_own_only(&mut self) -> Result<()> {
        let pl = self.cutoffs.p_low_star;
        let ph = self.cutoffs.p_high_star;
        let p = self.params;
        let left_dominated = |s: &Self| match (s.own_left, s.own_right) {
            (Some(a), Some(b)) => a.value(pl) - b.value(pl) <= 0.0,
            (None, _) => true,
            _ => false,
        };
        let right_dominated = |s: &Self| match (s.own_left, s.own_right) {
            (Some(a), Some(b)) => a.value(ph) - b.value(ph) >= 0.0,
            (_, None) => true,
            _ => false,
        };
        match (left_dominated(self), right_dominated(self)) {
            (false, false) => {
                let (a, b) = (self.own_left.unwrap(), self.own_right.unwrap());
                let pc = bisect(|x| a.value(x) - b.value(x), pl, ph, ROOT_TOL, "own switch point")?;
                self.cutoffs.p_check = Some(pc);
                self.push_stop(0.0, pl, true);
                self.push(pl, pc, false, false, SegmentKind::OwnLeft);
                self.push(pc, ph, true, false, SegmentKind::OwnRight);
                self.push_stop(ph, 1.0, true);
                self.set_region(pl, ph);
            }
            (false, true) => {
                let a = self.own_left.unwrap();
                let from = peak(|x| a.value(x) - p.u(x), pl, 1.0);
                let q = bisect(|x| a.value(x) - p.u(x), from, 1.0, ROOT_TOL, "own-left exit")?;
                self.push_stop(0.0, pl, true);
                self.push(pl, q, false, false, SegmentKind::OwnLeft);
                self.push_stop(q, 1.0, true);
                self.set_region(pl, q);
            }
            (true, false) => {
                let b = self.own_right.unwrap();
                let to = peak(|x| b.value(x) - p.u(x), 0.0, ph);
                let q = bisect(|x| b.value(x) - p.u(x), 0.0, to, ROOT_TOL, "own-right exit")?;
                self.push_stop(0.0, q, true);
                self.push(q, ph, false, false, SegmentKind::OwnRight);
                self.push_stop(ph, 1.0, true);
                self.set_region(q, ph);
            }
            (true, true) => return Err(Error::Numerical("no own-biased branch is optimal".into())),
        }
        Ok(())
    }

    fn build_own_and_opposite(&mut self) -> Result<()> {
        let pl = self.cutoffs.p_low_star;
        let ph = self.cutoffs.p_high_star;
        let ps = self.cutoffs.p_star;
        let p = self.params;
        let (ol, or) = (self.opp_left, self.opp_right);

        // left of p*
        let left = match self.own_left {
            Some(a) if pl < ps && a.value(pl) > ol.value(pl) => {
                let x = bisect(|x| a.value(x) - ol.value(x), pl, ps, ROOT_TOL, "lower switch point")?;
                self.cutoffs.p_low = Some(x);
                (pl, Some(x))
            }
            _ => {
                let x = bisect(|x| ol.value(x) - p.u(x), 0.0, ps, ROOT_TOL, "opposite-left exit")?;
                (x, None)
            }
        };
        let right = match self.own_right {
            Some(b) if ph > ps && b.value(ph) > or.value(ph) => {
                let x = bisect(|x| or.value(x) - b.value(x), ps, ph, ROOT_TOL, "upper switch point")?;
                self.cutoffs.p_high = Some(x);
                (ph, Some(x))
            }
            _ => {
                let x = bisect(|x| or.value(x) - p.u(x), ps, 1.0, ROOT_TOL, "opposite-right exit")?;
                (x, None)
            }
        };

        self.push_stop(0.0, left.0, true);
        match left.1 {
            Some(x) => {
                self.push(left.0, x, false, false, SegmentKind::OwnLeft);
                self.push(x, ps, true, false, SegmentKind::OppLeft);
            }
            None => self.push(left.0, ps, false, false, SegmentKind::OppLeft),
        }
        self.push(ps, ps, true, true, SegmentKind::Stationary);
        match right.1 {
            Some(x) => {
                self.push(ps, x, false, true, SegmentKind::OppRight);
                self.push(x, right.0, false, false, SegmentKind::OwnRight);
            }
            None => self.push(ps, right.0, false, false, SegmentKind::OppRight),
        }
        self.push_stop(right.0, 1.0, true);
        self.set_region(left.0, right.0);
        Ok(())
    }

    fn set_region(&mut self, lo: f64, hi: f64) {
        self.cutoffs.region_low = lo;
        self.cutoffs.region_high = hi;
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment_at(&self, p: f64) -> &Segment {
        let p = p.clamp(0.0, 1.0);
        self.segments
            .iter()
            .find(|s| s.contains(p))
            .expect("segments cover [0, 1]")
    }

    /// Closed-form branch behind a kind, if it exists for these parameters.
    pub fn branch(&self, kind: BranchKind) -> Option<&LinearBranch> {
        match kind {
            BranchKind::OwnLeft => self.own_left.as_ref(),
            BranchKind::OwnRight => self.own_right.as_ref(),
            BranchKind::OppLeft => Some(&self.opp_left),
            BranchKind::OppRight => Some(&self.opp_right),
            BranchKind::StopL | BranchKind::StopR => None,
        }
    }

    fn eval_kind(&self, kind: SegmentKind, p: f64) -> (f64, f64) {
        let prm = &self.params;
        match kind {
            SegmentKind::Stop(a) => (prm.payoff(a, p), prm.payoff_slope(a)),
            SegmentKind::OwnLeft => self.own_left.expect("own-left branch").eval(p),
            SegmentKind::OwnRight => self.own_right.expect("own-right branch").eval(p),
            SegmentKind::OppLeft => self.opp_left.eval(p),
            SegmentKind::OppRight => self.opp_right.eval(p),
            SegmentKind::Stationary => (self.tech.u_s(prm, p), self.tech.u_s_slope(prm)),
        }
    }

    /// `V_Env(p)`.
    pub fn value(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if p == 0.0 {
            return self.params.u_ll;
        }
        if p == 1.0 {
            return self.params.u_rr;
        }
        self.eval_kind(self.segment_at(p).kind, p).0
    }

    /// One-sided derivatives `(left, right)`; equal away from kinks.
    pub fn derivative(&self, p: f64) -> (f64, f64) {
        let idx = self
            .segments
            .iter()
            .position(|s| s.contains(p))
            .expect("segments cover [0, 1]");
        let own = self.eval_kind(self.segments[idx].kind, p).1;
        let seg = &self.segments[idx];
        let left = if p == seg.lo && idx > 0 {
            self.eval_kind(self.segments[idx - 1].kind, p).1
        } else {
            own
        };
        let right = if p == seg.hi && idx + 1 < self.segments.len() {
            self.eval_kind(self.segments[idx + 1].kind, p).1
        } else {
            own
        };
        // the stationary point sits between two branches with equal slope
        (left, right)
    }

    pub fn choice(&self, p: f64) -> Choice {
        self.segment_at(p).choice
    }

    /// Max over every candidate value on its domain. Agrees with
    /// [`value`](Self::value) when the segment construction is right.
    pub fn candidate_max(&self, p: f64) -> f64 {
        let c = &self.cutoffs;
        let mut v = self.params.u(p);
        if let Some(b) = self.own_left {
            if p >= c.p_low_star {
                v = v.max(b.value(p));
            }
        }
        if let Some(b) = self.own_right {
            if p <= c.p_high_star {
                v = v.max(b.value(p));
            }
        }
        if p <= c.p_star {
            v = v.max(self.opp_left.value(p));
        }
        if p >= c.p_star {
            v = v.max(self.opp_right.value(p));
        }
        v
    }

    /// Interior switch points where the value function has a convex kink.
    pub fn switch_points(&self) -> Vec<f64> {
        [self.cutoffs.p_check, self.cutoffs.p_low, self.cutoffs.p_high]
            .into_iter()
            .flatten()
            .collect()
    }

    /// Every segment boundary strictly inside (0, 1).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| [s.lo, s.hi])
            .filter(|&x| x > 0.0 && x < 1.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Value and derivative of a single baseline branch.
pub fn branch_value(params: &ModelParams, kind: BranchKind, p: f64) -> Result<(f64, f64)> {
    let params = params.validated()?;
    let tech = Technology::baseline(params.lambda);
    let own = |rates: Rates, q: f64, v: f64| -> Result<(f64, f64)> {
        if !params.exp_holds() {
            return Err(Error::UndefinedBranch(match kind {
                BranchKind::OwnLeft => "own_left",
                _ => "own_right",
            }));
        }
        Ok(LinearBranch::through(&params, rates, q, v).eval(p))
    };
    let ps = tech.p_star(&params);
    match kind {
        BranchKind::StopL => Ok((params.u_l(p), params.payoff_slope(Action::L))),
        BranchKind::StopR => Ok((params.u_r(p), params.payoff_slope(Action::R))),
        BranchKind::OwnLeft => {
            let q = tech.p_low_star(&params);
            own(tech.hi, q, params.u_l(q))
        }
        BranchKind::OwnRight => {
            let q = tech.p_high_star(&params);
            own(tech.lo, q, params.u_r(q))
        }
        BranchKind::OppLeft => Ok(LinearBranch::through(&params, tech.lo, ps, tech.u_s(&params, ps)).eval(p)),
        BranchKind::OppRight => Ok(LinearBranch::through(&params, tech.hi, ps, tech.u_s(&params, ps)).eval(p)),
    }
}

/// Baseline `V_Env(p)`.
pub fn value_envelope(params: &ModelParams, p: f64) -> Result<f64> {
    Ok(solve(params)?.value(p))
}

/// Baseline optimal choice at `p`.
pub fn optimal_alpha(params: &ModelParams, p: f64) -> Result<Choice> {
    Ok(solve(params)?.choice(p))
}

/// Switch points of the baseline solution: `[p̌]` or `[p̲, p̄]`.
pub fn solve_switch_points(params: &ModelParams) -> Result<Vec<f64>> {
    Ok(solve(params)?.switch_points())
}

/// Pointwise HJB checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `|max(max_α F_α − c − ρV, U − V)|`.
    pub residual: f64,
    /// Derivative-gap identity between the two drift directions through
    /// `(p, V)`; baseline technology only.
    pub crossing_gap: Option<f64>,
    /// `∂F/∂α` evaluated with the slope of the low-attention ODE through `(p, V)`.
    pub df_dalpha: f64,
    /// `df_dalpha − (2ρ+λ)(U^S − V)`; baseline technology only.
    pub df_dalpha_gap: Option<f64>,
    /// `|V′ − U′|` when `p` is a stopping boundary.
    pub smooth_paste_gap: Option<f64>,
}

/// Slope that makes the ODE of `rates` hold at `(p, v)`.
pub fn ode_slope(params: &ModelParams, rates: Rates, p: f64, v: f64) -> f64 {
    let num = rates.r * p * (params.u_rr - v) + rates.l * (1.0 - p) * (params.u_ll - v)
        - params.c
        - params.rho * v;
    num / (rates.drift() * p * (1.0 - p))
}

pub fn hjb_diagnostics(sol: &RegimeSolution, p: f64) -> Result<Diagnostics> {
    for k in sol.switch_points() {
        if (p - k).abs() < 1e-9 {
            return Err(Error::KinkPoint(k));
        }
    }
    let prm = &sol.params;
    let t = &sol.tech;
    let v = sol.value(p);
    let dv = sol.derivative(p).0;
    let gain = hjb_gain(prm, t.hi, p, v, dv).max(hjb_gain(prm, t.lo, p, v, dv));
    let residual = gain.max(prm.u(p) - v).abs();

    let lam = prm.lambda;
    let us = t.u_s(prm, p);
    let v0 = ode_slope(prm, t.lo, p, v);
    let v1 = ode_slope(prm, t.hi, p, v);
    let dr = t.hi.r - t.lo.r;
    let dl = t.hi.l - t.lo.l;
    let df = dr * p * (prm.u_rr - v) + dl * (1.0 - p) * (prm.u_ll - v)
        - (dr - dl) * p * (1.0 - p) * v0;
    let baseline = matches!(t.kind, TechKind::Baseline);
    let crossing_gap = baseline.then(|| {
        (v0 - v1) - (lam + 2.0 * prm.rho) / (lam * p * (1.0 - p)) * (v - us)
    });
    let df_dalpha_gap = baseline.then_some(df - (2.0 * prm.rho + lam) * (us - v));

    let c = &sol.cutoffs;
    let smooth_paste_gap = match (sol.own_left, sol.own_right) {
        (Some(b), _) if p == c.p_low_star => Some((b.deriv(p) - prm.payoff_slope(Action::L)).abs()),
        (_, Some(b)) if p == c.p_high_star => Some((b.deriv(p) - prm.payoff_slope(Action::R)).abs()),
        _ => None,
    };
    Ok(Diagnostics { residual, crossing_gap, df_dalpha: df, df_dalpha_gap, smooth_paste_gap })
}

/// Named smooth-pasting and value-matching gaps at the free boundaries.
pub fn smooth_pasting_gaps(sol: &RegimeSolution) -> Vec<(&'static str, f64)> {
    let prm = &sol.params;
    let c = &sol.cutoffs;
    let mut out = Vec::new();
    if let Some(b) = sol.own_left {
        let (v, d) = b.eval(c.p_low_star);
        out.push(("value_low_star", (v - prm.u_l(c.p_low_star)).abs()));
        out.push(("slope_low_star", (d - prm.payoff_slope(Action::L)).abs()));
    }
    if let Some(b) = sol.own_right {
        let (v, d) = b.eval(c.p_high_star);
        out.push(("value_high_star", (v - prm.u_r(c.p_high_star)).abs()));
        out.push(("slope_high_star", (d - prm.payoff_slope(Action::R)).abs()));
    }
    let us = sol.tech.u_s(prm, c.p_star);
    let ds = sol.tech.u_s_slope(prm);
    for (name_v, name_d, b) in [
        ("value_star_left", "slope_star_left", sol.opp_left),
        ("value_star_right", "slope_star_right", sol.opp_right),
    ] {
        let (v, d) = b.eval(c.p_star);
        out.push((name_v, (v - us).abs()));
        out.push((name_d, (d - ds).abs()));
    }
    out
}

/// One-sided derivatives at each interior switch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kink {
    pub p: f64,
    pub left: f64,
    pub right: f64,
}

pub fn kinks(sol: &RegimeSolution) -> Vec<Kink> {
    sol.switch_points()
        .into_iter()
        .map(|p| {
            let (left, right) = sol.derivative(p);
            Kink { p, left, right }
        })
        .collect()
}
