//! Shared helpers for the integration tests: parameter draws and oracles
//! written independently of the library formulas.
#![allow(dead_code)]

pub mod statics;

use attention_core::ModelParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn near_symmetric(c: f64) -> ModelParams {
    ModelParams::new(1.0, 0.9, -0.9, -0.9, 1.0, 0.0, c)
}

pub fn reference(c: f64) -> ModelParams {
    ModelParams::new(1.0, 0.8, -1.0, -0.8, 1.0, 0.0, c)
}

pub fn symmetric(c: f64) -> ModelParams {
    ModelParams::new(1.0, 1.0, -1.0, -1.0, 1.0, 0.0, c)
}

/// Kink of `U`, solved by hand from `U_l = U_r`.
pub fn p_hat(p: &ModelParams) -> f64 {
    (p.u_ll - p.u_rl) / ((p.u_rr - p.u_lr) + (p.u_ll - p.u_rl))
}

pub fn u_l(p: &ModelParams, q: f64) -> f64 {
    q * p.u_lr + (1.0 - q) * p.u_ll
}

pub fn u_r(p: &ModelParams, q: f64) -> f64 {
    q * p.u_rr + (1.0 - q) * p.u_rl
}

pub fn u(p: &ModelParams, q: f64) -> f64 {
    u_l(p, q).max(u_r(p, q))
}

/// Value of learning at full rate from both sources: the first arrival
/// reveals the state, at rate λ, flow cost `c` until then.
pub fn u_fa(p: &ModelParams, q: f64) -> f64 {
    (p.lambda * (q * p.u_rr + (1.0 - q) * p.u_ll) - p.c) / (p.rho + p.lambda)
}

/// Same with both sources at half rate.
pub fn u_s(p: &ModelParams, q: f64) -> f64 {
    let s = p.lambda / 2.0;
    (s * (q * p.u_rr + (1.0 - q) * p.u_ll) - p.c) / (p.rho + s)
}

/// `c̄` as the root in `c` of `U^FA(p̂) = U(p̂)`, by bisection.
pub fn c_bar_oracle(p: &ModelParams) -> f64 {
    let ph = p_hat(p);
    let gap = |c: f64| u_fa(&p.with_c(c), ph) - u(p, ph);
    let (mut lo, mut hi) = (0.0, 100.0);
    if gap(lo) <= 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

/// HJB slope for evidence rates `(r, l)`: the belief drifts at
/// `-(r-l)p(1-p)`, and `c + ρV = r p (u_rr - V) + l (1-p)(u_ll - V) + V' ṗ`.
pub fn hjb_slope(p: &ModelParams, r: f64, l: f64, q: f64, v: f64) -> f64 {
    let gain = r * q * (p.u_rr - v) + l * (1.0 - q) * (p.u_ll - v) - p.c - p.rho * v;
    gain / ((r - l) * q * (1.0 - q))
}

/// Classic RK4 for `y' = f(x, y)` from `(x0, y0)` to `x1` in `n` steps.
pub fn rk4(f: impl Fn(f64, f64) -> f64, x0: f64, y0: f64, x1: f64, n: usize) -> f64 {
    let h = (x1 - x0) / n as f64;
    let (mut x, mut y) = (x0, y0);
    for _ in 0..n {
        let k1 = f(x, y);
        let k2 = f(x + h / 2.0, y + h * k1 / 2.0);
        let k3 = f(x + h / 2.0, y + h * k2 / 2.0);
        let k4 = f(x + h, y + h * k3);
        y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        x += h;
    }
    y
}

/// Valid parameters with `c = frac · c̄`, so the regime is controlled by `frac`.
pub fn draw_params(rng: &mut impl Rng, frac: f64) -> ModelParams {
    loop {
        let u_rr = rng.gen_range(0.5..1.5);
        let u_ll = rng.gen_range(0.5..1.5);
        let u_lr = rng.gen_range(-1.5..0.3);
        let u_rl = rng.gen_range(-1.5..0.3);
        let lambda = rng.gen_range(0.5..2.0);
        let rho = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.01..0.5) };
        let base = ModelParams::new(u_rr, u_ll, u_lr, u_rl, lambda, rho, 0.0);
        let c = frac * c_bar_oracle(&base);
        let p = base.with_c(c);
        if p.validated().is_ok() && c > 1e-3 {
            return p;
        }
    }
}

/// `n` draws cycling through the three regimes.
pub fn regime_draws(seed: u64, n: usize) -> Vec<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let frac = match i % 3 {
                0 => rng.gen_range(0.03..0.15),
                1 => rng.gen_range(0.4..0.95),
                _ => rng.gen_range(1.05..1.5),
            };
            draw_params(&mut rng, frac)
        })
        .collect()
}

/// Valid parameters with cost between 2% and 130% of `c̄`.
pub fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (
        0.5..1.5f64,
        0.5..1.5f64,
        -1.5..0.3f64,
        -1.5..0.3f64,
        0.5..2.0f64,
        prop_oneof![Just(0.0), 0.01..0.5f64],
        0.02..1.3f64,
    )
        .prop_map(|(u_rr, u_ll, u_lr, u_rl, lambda, rho, frac)| {
            let base = ModelParams::new(u_rr, u_ll, u_lr, u_rl, lambda, rho, 0.0);
            base.with_c((frac * c_bar_oracle(&base)).max(1e-3))
        })
        .prop_filter("valid parameters", |p| p.validated().is_ok())
}

/// Same, restricted to parameters where learning occurs.
pub fn learning_params_strategy() -> impl Strategy<Value = ModelParams> {
    params_strategy().prop_filter("learning region", |p| p.exp_holds())
}

/// Symmetric payoffs `(ū, ū, w, w)`.
pub fn symmetric_strategy() -> impl Strategy<Value = ModelParams> {
    (0.5..1.5f64, -1.0..0.3f64, 0.5..2.0f64, prop_oneof![Just(0.0), 0.01..0.5f64], 0.05..0.95f64)
        .prop_map(|(ub, w, lambda, rho, frac)| {
            let base = ModelParams::new(ub, ub, w, w, lambda, rho, 0.0);
            base.with_c((frac * c_bar_oracle(&base)).max(1e-3))
        })
        .prop_filter("valid parameters", |p| p.validated().is_ok())
}
