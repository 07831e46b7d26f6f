//! Closed-form solutions of the linear HJB ODE for a fixed experiment.
//!
//! With R-evidence arriving at rate `r` in state R and L-evidence at rate `l`
//! in state L, a value function that keeps using this experiment satisfies
//!
//! ```text
//! c + ρV = r p (u_rr − V) + l (1−p)(u_ll − V) − (r − l) p (1−p) V′
//! ```
//!
//! The general solution is a particular solution plus a multiple of the
//! homogeneous one. A [`LinearBranch`] picks the multiple that passes through a
//! given anchor point `(q, v)`.

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::numeric::clamp_belief;

/// Evidence rates of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// R-evidence rate in state R.
    pub r: f64,
    /// L-evidence rate in state L.
    pub l: f64,
}

impl Rates {
    pub const fn new(r: f64, l: f64) -> Self {
        Rates { r, l }
    }

    /// Absent news the log-odds move at `-(r - l)` per unit of time.
    pub fn drift(&self) -> f64 {
        self.r - self.l
    }

    /// Breakthrough hazard in the given state.
    pub fn hazard(&self, state: crate::model::State) -> f64 {
        match state {
            crate::model::State::R => self.r,
            crate::model::State::L => self.l,
        }
    }

    /// `ṗ` absent news.
    pub fn belief_drift(&self, p: f64) -> f64 {
        -self.drift() * p * (1.0 - p)
    }
}

/// Right-hand side of the HJB for experiment `rates`, minus `c + ρV`.
/// Zero along any branch that uses this experiment.
pub fn hjb_gain(params: &ModelParams, rates: Rates, p: f64, v: f64, dv: f64) -> f64 {
    rates.r * p * (params.u_rr - v) + rates.l * (1.0 - p) * (params.u_ll - v)
        - rates.drift() * p * (1.0 - p) * dv
        - params.c
        - params.rho * v
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Particular {
    Linear { k_r: f64, k_l: f64 },
    /// ρ = 0 and no L-evidence.
    LogR,
    /// ρ = 0 and no R-evidence.
    LogL,
}

/// One closed-form branch, anchored at `(q, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBranch {
    params: ModelParams,
    rates: Rates,
    particular: Particular,
    anchor: f64,
    coeff: f64,
    lnh_anchor: f64,
}

impl LinearBranch {
    /// Branch through `(q, v)`. Panics if the experiment has no drift, since
    /// the ODE is then algebraic.
    pub fn through(params: &ModelParams, rates: Rates, q: f64, v: f64) -> Self {
        assert!(rates.drift() != 0.0, "branch needs a drifting experiment");
        let particular = if params.rho == 0.0 && rates.l == 0.0 {
            Particular::LogR
        } else if params.rho == 0.0 && rates.r == 0.0 {
            Particular::LogL
        } else {
            Particular::Linear {
                k_r: (rates.r * params.u_rr - params.c) / (params.rho + rates.r),
                k_l: (rates.l * params.u_ll - params.c) / (params.rho + rates.l),
            }
        };
        let mut b = LinearBranch {
            params: *params,
            rates,
            particular,
            anchor: q,
            coeff: 0.0,
            lnh_anchor: 0.0,
        };
        let qc = clamp_belief(q);
        b.lnh_anchor = b.ln_h(qc).0;
        b.coeff = v - b.particular_at(qc).0;
        b
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    fn particular_at(&self, p: f64) -> (f64, f64) {
        let ModelParams { u_rr, u_ll, c, .. } = self.params;
        match self.particular {
            Particular::Linear { k_r, k_l } => (k_r * p + k_l * (1.0 - p), k_r - k_l),
            Particular::LogR => {
                let a = self.rates.r;
                let lo = (p / (1.0 - p)).ln();
                (
                    u_rr - c / a * ((1.0 - p) * lo + 1.0),
                    -c / a * (-lo + 1.0 / p),
                )
            }
            Particular::LogL => {
                let b = self.rates.l;
                let lo = ((1.0 - p) / p).ln();
                (
                    u_ll - c / b * (p * lo + 1.0),
                    -c / b * (lo - 1.0 / (1.0 - p)),
                )
            }
        }
    }

    /// Log of the homogeneous solution and its derivative.
    fn ln_h(&self, p: f64) -> (f64, f64) {
        let rho = self.params.rho;
        let d = self.rates.drift();
        let ep = -(rho + self.rates.l) / d;
        let eq = (rho + self.rates.r) / d;
        let term = |e: f64, x: f64| if e == 0.0 { 0.0 } else { e * x.ln() };
        (term(ep, p) + term(eq, 1.0 - p), ep / p - eq / (1.0 - p))
    }

    /// Value and derivative at `p` (clamped away from 0 and 1).
    pub fn eval(&self, p: f64) -> (f64, f64) {
        let p = clamp_belief(p);
        let (z, dz) = self.particular_at(p);
        if self.coeff == 0.0 {
            return (z, dz);
        }
        let (lh, dlh) = self.ln_h(p);
        let w = self.coeff * (lh - self.lnh_anchor).exp();
        (z + w, dz + w * dlh)
    }

    pub fn value(&self, p: f64) -> f64 {
        self.eval(p).0
    }

    pub fn deriv(&self, p: f64) -> f64 {
        self.eval(p).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rho: f64) -> ModelParams {
        ModelParams::new(1.0, 0.9, -0.9, -0.9, 1.0, rho, 0.3)
    }

    #[test]
    fn passes_through_anchor_and_solves_ode() {
        for rho in [0.0, 0.2] {
            let p = params(rho);
            for rates in [Rates::new(1.0, 0.0), Rates::new(0.0, 1.0), Rates::new(0.8, 0.2)] {
                let b = LinearBranch::through(&p, rates, 0.3, 0.1);
                assert!((b.value(0.3) - 0.1).abs() < 1e-14);
                for &x in &[0.1, 0.4, 0.7] {
                    let (v, dv) = b.eval(x);
                    assert!(hjb_gain(&p, rates, x, v, dv).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn log_forms_match_small_rho() {
        let b0 = LinearBranch::through(&params(0.0), Rates::new(1.0, 0.0), 0.2, 0.0);
        let b1 = LinearBranch::through(&params(1e-6), Rates::new(1.0, 0.0), 0.2, 0.0);
        for &x in &[0.25, 0.5, 0.9] {
            assert!((b0.value(x) - b1.value(x)).abs() < 1e-4);
        }
    }
}
