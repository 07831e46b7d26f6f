//! Comparative-statics sign checks by finite differences of the solver
//! output. Shared with the acceptance runner.

use super::*;
use attention_core::policy::solve;
use attention_core::{ModelParams, Regime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DRAWS: usize = 50;
const H: f64 = 1e-4;
const TOL: f64 = 1e-10;

type Tweak = fn(&mut ModelParams, f64);

fn by_c(p: &mut ModelParams, d: f64) {
    p.c += d;
}
fn by_rho(p: &mut ModelParams, d: f64) {
    p.rho += d;
}
fn by_u_rl(p: &mut ModelParams, d: f64) {
    p.u_rl += d;
}
fn by_u_lr(p: &mut ModelParams, d: f64) {
    p.u_lr += d;
}
fn by_u_rr(p: &mut ModelParams, d: f64) {
    p.u_rr += d;
}
fn by_u_ll(p: &mut ModelParams, d: f64) {
    p.u_ll += d;
}

fn moved(p: &ModelParams, f: Tweak, d: f64) -> ModelParams {
    let mut q = *p;
    f(&mut q, d);
    q
}

fn worse_mistakes(p: &ModelParams, k: f64) -> ModelParams {
    ModelParams { u_lr: p.u_lr - k, u_rl: p.u_rl - k, ..*p }
}

/// Experimentation region, `None` when empty.
pub fn region(p: &ModelParams) -> Option<(f64, f64)> {
    let sol = solve(p).unwrap();
    (sol.regime != Regime::NoLearning).then_some((sol.cutoffs.region_low, sol.cutoffs.region_high))
}

fn opposite_region(p: &ModelParams) -> Option<(f64, f64)> {
    let c = solve(p).unwrap().cutoffs;
    c.p_low.zip(c.p_high)
}

fn contains(big: Option<(f64, f64)>, small: Option<(f64, f64)>) -> bool {
    match (big, small) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some((a, b)), Some((x, y))) => a <= x + TOL && b >= y - TOL,
    }
}

#[derive(Default)]
pub struct Tally {
    pub checks: Vec<(&'static str, usize)>,
    pub failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, name: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        match self.checks.iter_mut().find(|(n, _)| *n == name) {
            Some((_, k)) => *k += 1,
            None => self.checks.push((name, 1)),
        }
        if !ok {
            self.failures.push(format!("{name}: {}", detail()));
        }
    }

    pub fn count(&self, name: &str) -> usize {
        self.checks.iter().find(|(n, _)| *n == name).map_or(0, |(_, k)| *k)
    }

    pub fn total(&self) -> usize {
        self.checks.iter().map(|(_, k)| k).sum()
    }
}

/// Statements that hold, and literal readings known to have counterexamples.
pub struct Report {
    pub holds: Tally,
    pub literal: Tally,
}

/// A region shrinks (weakly) as the tweaked parameter rises.
fn expands_as_falls(t: &mut Tally, name: &'static str, p: &ModelParams, f: Tweak, get: fn(&ModelParams) -> Option<(f64, f64)>) {
    let lo = moved(p, f, -H);
    if lo.validated().is_err() {
        return;
    }
    let (a, b) = (get(&lo), get(p));
    t.check(name, contains(a, b), || format!("{a:?} does not contain {b:?} for {p:?}"));
}

/// Payoffs, rates and discounting of one draw; the cost is chosen per check.
pub fn draw_base(rng: &mut impl Rng) -> ModelParams {
    draw_params(rng, 0.5).with_c(0.0)
}

fn at_fraction(base: &ModelParams, frac: f64) -> ModelParams {
    base.with_c(frac * base.c_bar())
}

fn own_only(base: &ModelParams) -> Option<ModelParams> {
    let (lo, hi) = (base.c_underbar(), base.c_bar());
    (hi - lo > 1e-3).then(|| base.with_c(0.5 * (lo + hi)))
}

/// Central difference in ρ, one-sided at ρ = 0.
fn d_rho(p: &ModelParams, f: impl Fn(&ModelParams) -> f64) -> f64 {
    let down = if p.rho >= H { moved(p, by_rho, -H) } else { *p };
    let up = moved(p, by_rho, H);
    (f(&up) - f(&down)) / (up.rho - down.rho)
}

fn kink_payoff_positive(p: &ModelParams) -> bool {
    u(p, p_hat(p)) > 0.0
}

fn boundaries(r: &mut Report, base: &ModelParams) {
    let t = &mut r.holds;
    for frac in [0.05, 0.5, 0.97, 1.0 + 0.5 * H] {
        let p = at_fraction(base, frac);
        if p.c <= H {
            continue;
        }
        expands_as_falls(t, "region vs c", &p, by_c, region);
        if p.rho > H {
            expands_as_falls(&mut r.literal, "region vs rho, any payoffs", &p, by_rho, region);
            if kink_payoff_positive(&p) {
                expands_as_falls(t, "region vs rho", &p, by_rho, region);
            }
        }
        expands_as_falls(t, "region vs u_rL", &p, by_u_rl, region);
        expands_as_falls(t, "region vs u_lR", &p, by_u_lr, region);
        expands_as_falls(t, "opposite region vs u_rL", &p, by_u_rl, opposite_region);
        expands_as_falls(t, "opposite region vs u_lR", &p, by_u_lr, opposite_region);
        for (name, f) in [("c_underbar vs u_rL", by_u_rl as Tweak), ("c_underbar vs u_lR", by_u_lr)] {
            let (a, b) = (moved(&p, f, -H).c_underbar(), p.c_underbar());
            t.check(name, a >= b - TOL, || format!("{a} < {b} for {p:?}"));
        }
        if p.c < p.c_bar() {
            let (lo, hi) = region(&p).unwrap();
            let (up_lo, up_hi) = region(&moved(&p, by_u_rr, H)).unwrap();
            t.check("region shifts down with u_rR", up_lo <= lo + TOL && up_hi <= hi + TOL, || format!("{p:?}"));
            let (up_lo, up_hi) = region(&moved(&p, by_u_ll, H)).unwrap();
            t.check("region shifts up with u_lL", up_lo >= lo - TOL && up_hi >= hi - TOL, || format!("{p:?}"));
        }
    }

    let corner = ModelParams { rho: 1e-6, ..base.with_c(1e-6) };
    let (lo, hi) = region(&corner).unwrap();
    t.check("region covers (0,1) as (rho,c)->0", lo <= 1e-3 && hi >= 1.0 - 1e-3, || format!("({lo}, {hi}) for {corner:?}"));

    let p = at_fraction(base, 0.5);
    let mut last = region(&p).unwrap();
    for k in [1e1, 1e2, 1e3, 1e4, 1e6] {
        let r = region(&worse_mistakes(&p, k)).unwrap();
        t.check("region grows as mistakes worsen", r.0 <= last.0 + TOL && r.1 >= last.1 - TOL, || format!("{r:?} after {last:?}"));
        last = r;
    }
    t.check("region covers (0,1) as mistakes worsen", last.0 <= 1e-3 && last.1 >= 1.0 - 1e-3, || format!("{last:?}"));
}

fn modes(t: &mut Tally, base: &ModelParams) {
    if let Some(p) = own_only(base) {
        let check = |q: &ModelParams| solve(q).unwrap().cutoffs.p_check.unwrap();
        let here = check(&p);
        let down = moved(&p, by_u_lr, -H);
        if down.regime() == Regime::OwnOnly {
            let v = check(&down);
            t.check("p_check falls with u_lR", v < here, || format!("{v} vs {here} for {p:?}"));
        }
        let down = moved(&p, by_u_rl, -H);
        if down.regime() == Regime::OwnOnly {
            let v = check(&down);
            t.check("p_check rises with u_rL", v > here, || format!("{v} vs {here} for {p:?}"));
        }
    }

    let p = at_fraction(base, 0.5);
    let mut last: Option<(f64, f64)> = None;
    for k in [1e1, 1e2, 1e3, 1e4, 1e6] {
        let r = opposite_region(&worse_mistakes(&p, k));
        t.check("opposite region grows as mistakes worsen", contains(r, last), || format!("{r:?} after {last:?}"));
        last = r;
    }
    let appears = worse_mistakes(&p, 1e6).regime() == Regime::OwnAndOpposite;
    t.check("opposite region appears for costly mistakes", appears, || format!("{p:?}"));
    let (lo, hi) = last.unwrap_or((0.5, 0.5));
    t.check("opposite region covers (0,1) as mistakes worsen", lo <= 1e-3 && hi >= 1.0 - 1e-3, || format!("({lo}, {hi})"));
}

fn discounting(r: &mut Report, base: &ModelParams) {
    let t = &mut r.holds;
    let p = base.with_c(0.0);
    if p.c_bar() > H {
        // U is smallest at its kink, so U > 0 on [0,1] iff U(p̂) > 0
        let positive = kink_payoff_positive(&p);
        let d = d_rho(&p, |q| q.c_bar());
        t.check("dc_bar/drho < 0 iff U > 0", (d < 0.0) == positive, || format!("slope {d}, U>0 {positive}, {p:?}"));
        if !positive {
            // the flip side: just above c̄, more discounting opens a region
            let q = p.with_c(p.c_bar() + 0.5 * H * u(&p, p_hat(&p)).abs());
            let opened = region(&moved(&q, by_rho, H)).is_some() && region(&q).is_none();
            t.check("higher rho opens the region when U(p_hat) < 0", opened, || format!("{q:?}"));
        }
    }
    if p.c_underbar() > H && p.u_rr > p.u_lr.abs() && p.u_ll > p.u_rl.abs() {
        let d = d_rho(&p, |q| q.c_underbar());
        t.check("dc_underbar/drho < 0 for small mistakes", d < 0.0, || format!("slope {d} for {p:?}"));
    }
    let both = worse_mistakes(&p, 100.0);
    if both.c_underbar() > H {
        let d = d_rho(&both, |x| x.c_underbar());
        t.check("dc_underbar/drho > 0 for costly mistakes", d > 0.0, || format!("slope {d} for {both:?}"));
    }
    for q in [ModelParams { u_lr: -100.0, ..p }, ModelParams { u_rl: -100.0, ..p }] {
        if q.c_underbar() > H {
            let d = d_rho(&q, |x| x.c_underbar());
            r.literal.check("dc_underbar/drho > 0 for one costly mistake", d > 0.0, || format!("slope {d} for {q:?}"));
        }
    }
}

pub fn run_suite(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = Report { holds: Tally::default(), literal: Tally::default() };
    for _ in 0..DRAWS {
        let base = draw_base(&mut rng);
        boundaries(&mut r, &base);
        modes(&mut r.holds, &base);
        discounting(&mut r, &base);
    }
    r
}

/// Every check family that must run at least `min` times.
pub const FAMILIES: [&str; 11] = [
    "region vs c",
    "region vs rho",
    "region vs u_lR",
    "region shifts down with u_rR",
    "region shifts up with u_lL",
    "p_check falls with u_lR",
    "p_check rises with u_rL",
    "dc_bar/drho < 0 iff U > 0",
    "higher rho opens the region when U(p_hat) < 0",
    "dc_underbar/drho < 0 for small mistakes",
    "dc_underbar/drho > 0 for costly mistakes",
];
