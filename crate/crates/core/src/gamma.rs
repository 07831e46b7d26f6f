//! Diminishing returns to attention.
//!
//! Attention `α` buys R-evidence at rate `λ·g(α)` and L-evidence at rate
//! `λ·g(1−α)`. Writing `x` for the normalized R-rate, the feasible L-rate is
//! `Γ(x) = g(1 − g⁻¹(x))`. Interior attention levels follow an ODE for `x(p)`,
//! and along such stretches the value is `A(x)ū − B(x)c`.
//!
//! Only symmetric payoffs are handled. Time is rescaled so that the rate
//! scale is 1 (ρ and c are divided by λ); values are unchanged by this.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::branch::{LinearBranch, Rates};
use crate::error::{Error, Result};
use crate::model::{self, Action, ModelParams};
use crate::numeric::{bisect, hermite, rk4_step};
use crate::oracle::{DiscreteProblem, Step};
use crate::policy::{Choice, RegimeSolution};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The frontier `Γ` built from an attention technology `g`.
#[derive(Clone)]
pub struct GammaFrontier {
    g: RealFn,
    // analytic g′ and g″, when supplied
    derivs: Option<(RealFn, RealFn)>,
    /// Fixed point `Γ(γ) = γ`.
    pub gamma: f64,
    /// `Γ` is affine, so the model is the baseline one.
    pub linear: bool,
}

impl fmt::Debug for GammaFrontier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GammaFrontier")
            .field("gamma", &self.gamma)
            .field("linear", &self.linear)
            .field("analytic", &self.derivs.is_some())
            .finish()
    }
}

/// Built-in attention technologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GKind {
    /// `g(x) = x`.
    Linear,
    /// `g(x) = √(1 + 4x − x²) − 1`.
    Sqrt,
}

impl GammaFrontier {
    pub fn linear() -> Self {
        gamma_from_g_with(|x| x, Some((Arc::new(|_| 1.0), Arc::new(|_| 0.0)))).expect("linear frontier is valid")
    }

    pub fn sqrt_example() -> Self {
        let s = |x: f64| (1.0 + 4.0 * x - x * x).sqrt();
        gamma_from_g_with(
            move |x| s(x) - 1.0,
            Some((Arc::new(move |x| (2.0 - x) / s(x)), Arc::new(move |x| -5.0 / s(x).powi(3)))),
        )
        .expect("example frontier is valid")
    }

    pub fn from_kind(kind: GKind) -> Self {
        match kind {
            GKind::Linear => Self::linear(),
            GKind::Sqrt => Self::sqrt_example(),
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    /// `g⁻¹(y)` by bisection down to adjacent floats.
    pub fn g_inv(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        let (mut a, mut b) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.g(m) < y {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Attention level that buys R-rate `x`.
    pub fn alpha_of(&self, x: f64) -> f64 {
        self.g_inv(x)
    }

    /// `Γ(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        self.g(1.0 - self.g_inv(x))
    }

    /// `Γ′(x)`.
    pub fn prime(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.derivs {
            Some((dg, _)) => {
                let a = self.g_inv(x);
                -dg(1.0 - a) / dg(a)
            }
            None => stencil(|t| self.value(t), x).0,
        }
    }

    /// `Γ″(x)`.
    pub fn second(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.derivs {
            Some((dg, d2g)) => {
                let a = self.g_inv(x);
                let (g1, g1m) = (dg(a), dg(1.0 - a));
                (d2g(1.0 - a) * g1 + g1m * d2g(a)) / g1.powi(3)
            }
            None => stencil(|t| self.value(t), x).1,
        }
    }
}

/// Five-point first and second derivatives, one-sided near the ends of [0, 1].
fn stencil<F: Fn(f64) -> f64>(f: F, x: f64) -> (f64, f64) {
    let h = 1e-3;
    if x - 2.0 * h >= 0.0 && x + 2.0 * h <= 1.0 {
        let (m2, m1, p1, p2) = (f(x - 2.0 * h), f(x - h), f(x + h), f(x + 2.0 * h));
        let f0 = f(x);
        (
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h),
            (-m2 + 16.0 * m1 - 30.0 * f0 + 16.0 * p1 - p2) / (12.0 * h * h),
        )
    } else {
        let s = if x - 2.0 * h < 0.0 { 1.0 } else { -1.0 };
        let v: Vec<f64> = (0..5).map(|k| f(x + s * k as f64 * h)).collect();
        (
            s * (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h),
            (35.0 * v[0] - 104.0 * v[1] + 114.0 * v[2] - 56.0 * v[3] + 11.0 * v[4]) / (12.0 * h * h),
        )
    }
}

/// Builds `Γ` from `g` with finite-difference derivatives.
pub fn gamma_from_g<G: Fn(f64) -> f64 + Send + Sync + 'static>(g: G) -> Result<GammaFrontier> {
    gamma_from_g_with(g, None)
}

/// Builds `Γ` from `g` and, optionally, analytic `g′` and `g″`, and checks
/// the shape requirements on a grid.
pub fn gamma_from_g_with<G: Fn(f64) -> f64 + Send + Sync + 'static>(
    g: G,
    derivs: Option<(RealFn, RealFn)>,
) -> Result<GammaFrontier> {
    let violated = |what: String| Err(Error::AssumptionViolated(what));
    if (g(0.0)).abs() > 1e-12 || (g(1.0) - 1.0).abs() > 1e-12 {
        return violated(format!("g(0) = 0 and g(1) = 1 required, got {} and {}", g(0.0), g(1.0)));
    }
    let n = 400;
    for i in 0..n {
        let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
        if !(g(b) > g(a)) {
            return violated(format!("g must be strictly increasing, fails on [{a}, {b}]"));
        }
    }
    let gamma = g(0.5);
    let mut fr = GammaFrontier { g: Arc::new(g), derivs, gamma, linear: false };
    if (fr.value(0.0) - 1.0).abs() > 1e-9 || fr.value(1.0).abs() > 1e-9 {
        return violated("Γ(0) = 1 and Γ(1) = 0 required".into());
    }
    if (fr.value(gamma) - gamma).abs() > 1e-9 {
        return violated(format!("Γ(γ) ≠ γ at γ = {gamma}"));
    }
    let mut max_curv: f64 = 0.0;
    for i in 0..=200 {
        let x = i as f64 / 200.0;
        let d2 = fr.second(x);
        if d2 > 1e-7 {
            return violated(format!("Γ must be concave, Γ″({x}) = {d2}"));
        }
        if fr.prime(x) >= 0.0 {
            return violated(format!("Γ must be strictly decreasing, Γ′({x}) = {}", fr.prime(x)));
        }
        max_curv = max_curv.max(d2.abs());
    }
    if (fr.prime(gamma) + 1.0).abs() > 1e-6 {
        return violated(format!("Γ′(γ) = {} instead of −1", fr.prime(gamma)));
    }
    fr.linear = max_curv <= 1e-7;
    Ok(fr)
}

/// `(A(x), B(x))`.
pub fn ab_coefficients(frontier: &GammaFrontier, lam: f64, rho: f64) -> (f64, f64) {
    let (gv, gp) = (frontier.value(lam), frontier.prime(lam));
    let d = gv - gp * lam + rho * (1.0 - gp);
    ((gv - gp * lam) / d, (1.0 - gp) / d)
}

/// `(A′(x), B′(x))`.
pub fn ab_derivatives(frontier: &GammaFrontier, lam: f64, rho: f64) -> (f64, f64) {
    let (gv, gp, gpp) = (frontier.value(lam), frontier.prime(lam), frontier.second(lam));
    let d = gv - gp * lam + rho * (1.0 - gp);
    let dd = -gpp * (lam + rho);
    let (na, nb) = (gv - gp * lam, 1.0 - gp);
    let (dna, dnb) = (-gpp * lam, -gpp);
    ((dna * d - na * dd) / (d * d), (dnb * d - nb * dd) / (d * d))
}

/// Numerator and denominator of `x′(p) = P/Q`.
pub fn lambda_ode(frontier: &GammaFrontier, rho: f64, p: f64, lam: f64) -> (f64, f64) {
    let (gv, gp, gpp) = (frontier.value(lam), frontier.prime(lam), frontier.second(lam));
    let big_p = (gv - gp * lam + rho * (1.0 - gp)) * (p + gp * (1.0 - p));
    let big_q = p * (1.0 - p) * gpp * (gv - lam);
    (big_p, big_q)
}

/// Slope of the opposite-biased solution where it leaves `(1/2, γ)`.
pub fn saddle_slope(frontier: &GammaFrontier, rho: f64) -> Result<f64> {
    let g2 = frontier.second(frontier.gamma);
    if g2 >= 0.0 {
        return Err(Error::SaddleDegenerate(g2));
    }
    let k = rho + frontier.gamma;
    Ok(-k + (k * k - 8.0 * k / g2).sqrt())
}

/// Monotone samples `y(x)` with slopes, interpolated by cubic Hermite.
#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl Curve {
    fn push(&mut self, x: f64, y: f64, dy: f64) {
        self.x.push(x);
        self.y.push(y);
        self.dy.push(dy);
    }

    /// Reorders so that `x` increases.
    fn sorted(mut self) -> Self {
        if self.x.len() > 1 && self.x[0] > self.x[self.x.len() - 1] {
            self.x.reverse();
            self.y.reverse();
            self.dy.reverse();
        }
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&t| t <= x).saturating_sub(1).min(n - 2);
        hermite(self.x[i], self.y[i], self.dy[i], self.x[i + 1], self.y[i + 1], self.dy[i + 1], x)
    }

    /// `x` with `eval(x) = y`, for monotone `y`.
    pub fn solve(&self, y: f64) -> f64 {
        let n = self.x.len();
        let inc = self.y[n - 1] > self.y[0];
        let i = if inc {
            self.y.partition_point(|&t| t <= y)
        } else {
            self.y.partition_point(|&t| t >= y)
        }
        .clamp(1, n - 1)
            - 1;
        let f = |t: f64| {
            hermite(self.x[i], self.y[i], self.dy[i], self.x[i + 1], self.y[i + 1], self.dy[i + 1], t) - y
        };
        bisect(f, self.x[i], self.x[i + 1], 0.0, "curve inverse").unwrap_or(if (y - self.y[i]).abs()
            < (y - self.y[i + 1]).abs()
        {
            self.x[i]
        } else {
            self.x[i + 1]
        })
    }
}

/// Integrates `y′ = f(x, y)` from `(x0, y0)` with step `h` (signed) until
/// `x` reaches `x_end` or `stop(y)` changes sign, which is then located.
/// `stop` must be positive at the start.
fn integrate<F, S>(f: &F, x0: f64, y0: f64, h: f64, x_end: f64, stop: S) -> (Curve, bool)
where
    F: Fn(f64, f64) -> f64,
    S: Fn(f64) -> f64,
{
    let mut c = Curve { x: vec![], y: vec![], dy: vec![] };
    let (mut x, mut y) = (x0, y0);
    c.push(x, y, f(x, y));
    loop {
        let step = if (x_end - x).abs() <= h.abs() { x_end - x } else { h };
        if step == 0.0 {
            return (c, false);
        }
        let yn = rk4_step(f, x, y, step);
        if stop(yn) <= 0.0 || !yn.is_finite() {
            let s = bisect(
                |s| {
                    let v = rk4_step(f, x, y, s);
                    if v.is_finite() { stop(v) } else { -1.0 }
                },
                0.0,
                step,
                0.0,
                "integration event",
            )
            .unwrap_or(step);
            let ye = rk4_step(f, x, y, s);
            let xe = x + s;
            if xe != x {
                c.push(xe, ye, f(xe, ye));
            }
            return (c, true);
        }
        x += step;
        y = yn;
        c.push(x, y, f(x, y));
    }
}

/// Saddle start offset.
pub const SADDLE_EPS: f64 = 1e-6;
const P_STEP: f64 = 1e-4;
const LAMBDA_STEPS: usize = 4000;
/// Integration stops this close to 0 or 1.
const P_EDGE: f64 = 1e-9;

/// The opposite-biased interior solution.
#[derive(Debug, Clone, Serialize)]
pub struct OppositePiece {
    pub q_low: f64,
    pub q_high: f64,
    pub slope: f64,
    /// `x(p)` on `[q_low, 1/2]`.
    pub left: Curve,
    /// `x(p)` on `[1/2, q_high]`.
    pub right: Curve,
}

/// Own-biased interior solution on the left, `p(x)` for `x` from 1 down.
#[derive(Debug, Clone, Serialize)]
pub struct OwnPiece {
    pub q_b: f64,
    pub q_s: f64,
    /// `p(x)`, increasing `x`.
    pub curve: Curve,
}

/// Which part of the interior solution to integrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchStart {
    OppositeFromSaddle,
    /// Starting at `q_b` with `x = 1`.
    OwnFromCorner(f64),
}

/// Result of [`integrate_lambda`].
#[derive(Debug, Clone, Serialize)]
pub enum GammaPiece {
    Opposite(OppositePiece),
    Own(OwnPiece),
}

/// Integrates the interior attention ODE from the given start.
pub fn integrate_lambda(frontier: &GammaFrontier, rho: f64, start: BranchStart) -> Result<GammaPiece> {
    match start {
        BranchStart::OppositeFromSaddle => integrate_opposite(frontier, rho, SADDLE_EPS).map(GammaPiece::Opposite),
        BranchStart::OwnFromCorner(q_b) => integrate_own(frontier, rho, q_b).map(GammaPiece::Own),
    }
}

/// Opposite-biased `x(p)` through `(1/2, γ)`, stepped off the saddle by `eps`.
pub fn integrate_opposite(frontier: &GammaFrontier, rho: f64, eps: f64) -> Result<OppositePiece> {
    let slope = saddle_slope(frontier, rho)?;
    let gm = frontier.gamma;
    let f = |p: f64, lam: f64| {
        let (pp, qq) = lambda_ode(frontier, rho, p, lam.clamp(0.0, 1.0));
        pp / qq
    };
    let (mut left, hit_low) = integrate(&f, 0.5 - eps, gm - slope * eps, -P_STEP, P_EDGE, |l| l);
    let (mut right, hit_high) = integrate(&f, 0.5 + eps, gm + slope * eps, P_STEP, 1.0 - P_EDGE, |l| 1.0 - l);
    // the saddle itself, with the analytic slope
    left.x.insert(0, 0.5);
    left.y.insert(0, gm);
    left.dy.insert(0, slope);
    right.x.insert(0, 0.5);
    right.y.insert(0, gm);
    right.dy.insert(0, slope);
    let q_low = if hit_low { *left.x.last().unwrap() } else { 0.0 };
    let q_high = if hit_high { *right.x.last().unwrap() } else { 1.0 };
    Ok(OppositePiece { q_low, q_high, slope, left: left.sorted(), right: right.sorted() })
}

/// Own-biased interior `p(x)` from `(q_b, 1)` toward `x = γ`, stopping at
/// `p = 1/2` if reached first.
pub fn integrate_own(frontier: &GammaFrontier, rho: f64, q_b: f64) -> Result<OwnPiece> {
    let gm = frontier.gamma;
    let f = |lam: f64, p: f64| {
        let (pp, qq) = lambda_ode(frontier, rho, p.clamp(0.0, 1.0), lam);
        qq / pp
    };
    let h = -(1.0 - gm) / LAMBDA_STEPS as f64;
    let (curve, hit_half) = integrate(&f, 1.0, q_b, h, gm, |p| 0.5 - p);
    let q_s = if hit_half { 0.5 } else { *curve.y.last().unwrap() };
    Ok(OwnPiece { q_b, q_s, curve: curve.sorted() })
}

/// What the decision maker does at a belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaChoice {
    Stop { action: Action },
    /// Normalized R-rate `lambda` bought with attention `alpha`.
    Attend { lambda: f64, alpha: f64 },
}

/// Value function and policy with a curved frontier.
#[derive(Debug, Clone)]
pub struct GammaSolution {
    pub frontier: GammaFrontier,
    pub params: ModelParams,
    /// `params` with λ = 1 and ρ, c divided by λ.
    pub norm: ModelParams,
    pub exp: bool,
    pub p_low_star: f64,
    pub p_high_star: f64,
    pub own: Option<OwnPiece>,
    pub opposite: Option<OppositePiece>,
    /// Opposite-biased learning enters the envelope.
    pub uses_opposite: bool,
    own_branch: Option<LinearBranch>,
    opp_low: Option<LinearBranch>,
    opp_high: Option<LinearBranch>,
    baseline: Option<RegimeSolution>,
}

impl GammaSolution {
    pub fn new(frontier: GammaFrontier, params: &ModelParams) -> Result<Self> {
        let params = params.validated()?;
        if !params.is_symmetric() {
            return Err(Error::InvalidSpec("the curved-frontier model needs symmetric payoffs".into()));
        }
        let lam = params.lambda;
        let norm = ModelParams { lambda: 1.0, rho: params.rho / lam, c: params.c / lam, ..params };
        let exp = norm.exp_holds();
        let p_low_star = model::p_low_star(&norm, 1.0);
        let p_high_star = model::p_high_star(&norm, 1.0);
        let mut sol = GammaSolution {
            frontier,
            params,
            norm,
            exp,
            p_low_star,
            p_high_star,
            own: None,
            opposite: None,
            uses_opposite: false,
            own_branch: None,
            opp_low: None,
            opp_high: None,
            baseline: None,
        };
        if sol.frontier.linear {
            sol.baseline = Some(crate::policy::solve(&norm)?);
            return Ok(sol);
        }
        if !exp {
            return Ok(sol);
        }
        let rho = norm.rho;
        let own_branch = LinearBranch::through(&norm, Rates::new(1.0, 0.0), p_low_star, norm.u_l(p_low_star));
        sol.own_branch = Some(own_branch);
        let q_b = find_q_b(&sol.frontier, &norm, &own_branch, p_low_star)?;
        if q_b < 0.5 {
            sol.own = Some(integrate_own(&sol.frontier, rho, q_b)?);
        }
        sol.uses_opposite = sol.own.as_ref().is_some_and(|o| o.q_s < 0.5);
        if sol.uses_opposite {
            let opp = integrate_opposite(&sol.frontier, rho, SADDLE_EPS)?;
            let (a0, b0) = ab_coefficients(&sol.frontier, 0.0, rho);
            let (a1, b1) = ab_coefficients(&sol.frontier, 1.0, rho);
            let (ub, c) = (norm.u_rr, norm.c);
            if opp.q_low > 0.0 {
                sol.opp_low = Some(LinearBranch::through(&norm, Rates::new(0.0, 1.0), opp.q_low, a0 * ub - b0 * c));
            }
            if opp.q_high < 1.0 {
                sol.opp_high = Some(LinearBranch::through(&norm, Rates::new(1.0, 0.0), opp.q_high, a1 * ub - b1 * c));
            }
            sol.opposite = Some(opp);
        }
        Ok(sol)
    }

    fn interior(&self, lam: f64) -> f64 {
        let (a, b) = ab_coefficients(&self.frontier, lam, self.norm.rho);
        a * self.norm.u_rr - b * self.norm.c
    }

    fn u_s(&self) -> f64 {
        let g = self.frontier.gamma;
        (g * self.norm.u_rr - self.norm.c) / (self.norm.rho + g)
    }

    /// Own-biased candidate on the left half: value and R-rate (`None` = stop).
    fn own_left(&self, p: f64) -> (f64, Option<f64>) {
        if p <= self.p_low_star {
            return (self.norm.u(p), None);
        }
        let branch = self.own_branch.expect("set when learning is possible");
        match &self.own {
            None => (branch.value(p), Some(1.0)),
            Some(o) if p <= o.q_b => (branch.value(p), Some(1.0)),
            Some(o) if p <= o.q_s => {
                let lam = o.curve.solve(p);
                (self.interior(lam), Some(lam))
            }
            Some(_) => (self.u_s(), Some(self.frontier.gamma)),
        }
    }

    /// `V^Γ_own` and its R-rate.
    pub fn own_value(&self, p: f64) -> (f64, Option<f64>) {
        if p <= 0.5 {
            self.own_left(p)
        } else {
            let (v, lam) = self.own_left(1.0 - p);
            (v, lam.map(|l| self.frontier.value(l)))
        }
    }

    /// `V^Γ_opp` and its R-rate, when opposite-biased learning is relevant.
    pub fn opposite_value(&self, p: f64) -> Option<(f64, f64)> {
        let opp = self.opposite.as_ref()?;
        Some(if p <= opp.q_low {
            (self.opp_low.expect("branch below q_low").value(p), 0.0)
        } else if p >= opp.q_high {
            (self.opp_high.expect("branch above q_high").value(p), 1.0)
        } else {
            let lam = if p <= 0.5 { opp.left.eval(p) } else { opp.right.eval(p) };
            (self.interior(lam), lam)
        })
    }

    /// `V^Γ(p)` and the chosen attention.
    pub fn eval(&self, p: f64) -> (f64, GammaChoice) {
        let stop = |p: f64| GammaChoice::Stop { action: self.norm.best_action(p) };
        if let Some(b) = &self.baseline {
            let choice = match b.choice(p) {
                Choice::Stop(action) => GammaChoice::Stop { action },
                Choice::Attend(alpha) => GammaChoice::Attend { lambda: alpha, alpha },
            };
            return (b.value(p), choice);
        }
        if !self.exp {
            return (self.norm.u(p), stop(p));
        }
        let attend = |lam: f64| GammaChoice::Attend { lambda: lam, alpha: self.frontier.alpha_of(lam) };
        let (mut v, lam) = self.own_value(p);
        let mut choice = lam.map_or_else(|| stop(p), attend);
        if let Some((vo, lo)) = self.opposite_value(p) {
            if vo > v {
                v = vo;
                choice = attend(lo);
            }
        }
        (v, choice)
    }

    pub fn value(&self, p: f64) -> f64 {
        self.eval(p).0
    }

    /// Name of the envelope piece active at `p`.
    pub fn branch_label(&self, p: f64) -> &'static str {
        if let Some(b) = &self.baseline {
            return b.segment_at(p).kind.label();
        }
        match self.eval(p).1 {
            GammaChoice::Stop { action: Action::L } => "stop_l",
            GammaChoice::Stop { action: Action::R } => "stop_r",
            GammaChoice::Attend { lambda, .. } => {
                let own = self.own_value(p).0;
                if self.opposite_value(p).is_some_and(|(v, _)| v > own) {
                    "opposite"
                } else if lambda == self.frontier.gamma {
                    "stationary"
                } else if lambda == 0.0 || lambda == 1.0 {
                    "own_corner"
                } else {
                    "own_interior"
                }
            }
        }
    }

    /// Rates `(r, l)` in real time for normalized R-rate `lam`.
    pub fn rates(&self, lam: f64) -> Rates {
        Rates::new(self.params.lambda * lam, self.params.lambda * self.frontier.value(lam))
    }

    /// `c + ρV − max_x H` at `p` using `v`, `dv` in normalized units,
    /// maximized over `n` frontier points.
    pub fn hjb_gap(&self, p: f64, v: f64, dv: f64, lam: f64) -> f64 {
        let h = |x: f64| {
            let gv = self.frontier.value(x);
            x * p * (self.norm.u_rr - v) + gv * (1.0 - p) * (self.norm.u_ll - v) - p * (1.0 - p) * (x - gv) * dv
        };
        self.norm.c + self.norm.rho * v - h(lam)
    }
}

/// First belief above `p_low_star` where the own branch falls to `A(1)ū − B(1)c`,
/// or 1/2 when it stays above up to there.
fn find_q_b(frontier: &GammaFrontier, norm: &ModelParams, own: &LinearBranch, p_low_star: f64) -> Result<f64> {
    let (a1, b1) = ab_coefficients(frontier, 1.0, norm.rho);
    let target = a1 * norm.u_rr - b1 * norm.c;
    let f = |p: f64| own.value(p) - target;
    if f(p_low_star) <= 0.0 {
        return Ok(p_low_star);
    }
    let n = 2000;
    let mut prev = p_low_star;
    for i in 1..=n {
        let p = p_low_star + (0.5 - p_low_star) * i as f64 / n as f64;
        if f(p) <= 0.0 {
            return bisect(f, prev, p, 0.0, "q_b");
        }
        prev = p;
    }
    Ok(0.5)
}

/// `V^Γ(p)` and the attention choice.
pub fn gamma_envelope(frontier: &GammaFrontier, params: &ModelParams, p: f64) -> Result<(f64, GammaChoice)> {
    Ok(GammaSolution::new(frontier.clone(), params)?.eval(p))
}

/// Discrete problem whose per-period experiments are `n` frontier points.
pub fn frontier_oracle(frontier: &GammaFrontier, params: &ModelParams, dt: f64, n_grid: usize, n: usize) -> DiscreteProblem {
    let menu = (0..n)
        .map(|k| {
            let x = k as f64 / (n - 1) as f64;
            Step::Poisson { r: params.lambda * x, l: params.lambda * frontier.value(x), dt }
        })
        .collect();
    DiscreteProblem::new(params, dt, n_grid, menu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_fixed_point() {
        let f = GammaFrontier::sqrt_example();
        assert!((f.gamma - (2.75_f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((f.prime(f.gamma) + 1.0).abs() < 1e-12);
        assert!(!f.linear);
        assert!(GammaFrontier::linear().linear);
    }

    #[test]
    fn stencil_matches_analytic() {
        let a = GammaFrontier::sqrt_example();
        let n = gamma_from_g(|x| (1.0 + 4.0 * x - x * x).sqrt() - 1.0).unwrap();
        for &x in &[0.0, 0.2, 0.6, 1.0] {
            assert!((a.prime(x) - n.prime(x)).abs() < 1e-7);
            assert!((a.second(x) - n.second(x)).abs() < 1e-4 * a.second(x).abs());
        }
    }
}
