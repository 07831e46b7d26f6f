//! Discrete-time dynamic program over binary experiments.
//!
//! Each period of length `dt` the decision maker either acts or pays `c·dt`
//! and observes one signal. Values live on a uniform belief grid and are
//! interpolated linearly, which keeps them convex. Infinite-horizon problems
//! are solved by Gauss-Seidel sweeps, then polished by policy iteration with
//! an exact banded solve and checked by their Bellman residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::linspace;

/// Binary signal with `P(s_L | L) = a` and `P(s_R | R) = b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Experiment {
    pub a: f64,
    pub b: f64,
    pub dt: f64,
}

impl Experiment {
    /// Checks `a, b ∈ [0,1]`, `1 ≤ a + b ≤ 1 + λ dt` and `dt < 1/λ`.
    pub fn new(a: f64, b: f64, dt: f64, lambda: f64) -> Result<Self> {
        let tol = 1e-12;
        let ok = (0.0..=1.0).contains(&a)
            && (0.0..=1.0).contains(&b)
            && a + b >= 1.0 - tol
            && a + b <= 1.0 + lambda * dt + tol
            && dt > 0.0
            && dt * lambda < 1.0;
        if ok {
            Ok(Experiment { a, b, dt })
        } else {
            Err(Error::InvalidSpec(format!("experiment (a={a}, b={b}, dt={dt}) violates its constraints")))
        }
    }

    /// Conclusive R-evidence with probability `λ dt` in state R.
    pub fn sigma_l(lambda: f64, dt: f64) -> Self {
        Experiment { a: 1.0, b: lambda * dt, dt }
    }

    /// Conclusive L-evidence with probability `λ dt` in state L.
    pub fn sigma_r(lambda: f64, dt: f64) -> Self {
        Experiment { a: lambda * dt, b: 1.0, dt }
    }

    /// Point on the efficient frontier `b = 1 + λ dt − a`.
    pub fn on_frontier(a: f64, lambda: f64, dt: f64) -> Self {
        Experiment { a, b: 1.0 + lambda * dt - a, dt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Posteriors {
    pub q_r: f64,
    pub prob_r: f64,
    pub q_l: f64,
    pub prob_l: f64,
}

/// Posteriors after each signal realization and their probabilities.
pub fn experiment_posteriors(p: f64, e: &Experiment) -> Result<Posteriors> {
    let prob_r = p * e.b + (1.0 - p) * (1.0 - e.a);
    let prob_l = p * (1.0 - e.b) + (1.0 - p) * e.a;
    if prob_r <= 0.0 || prob_l <= 0.0 {
        return Err(Error::DegenerateSignal);
    }
    Ok(Posteriors {
        q_r: p * e.b / prob_r,
        prob_r,
        q_l: p * (1.0 - e.b) / prob_l,
        prob_l,
    })
}

/// One per-period option of the decision maker besides acting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Step {
    Binary(Experiment),
    /// Poisson evidence at rates `(r, l)` for one period of length `dt`.
    Poisson { r: f64, l: f64, dt: f64 },
}

impl Step {
    /// `(probability, posterior)` pairs with positive probability.
    pub fn outcomes(&self, p: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(3);
        match *self {
            Step::Binary(e) => {
                let pr = p * e.b + (1.0 - p) * (1.0 - e.a);
                let pl = p * (1.0 - e.b) + (1.0 - p) * e.a;
                if pr > 0.0 {
                    out.push((pr, p * e.b / pr));
                }
                if pl > 0.0 {
                    out.push((pl, p * (1.0 - e.b) / pl));
                }
            }
            Step::Poisson { r, l, dt } => {
                let pr = p * r * dt;
                let pl = (1.0 - p) * l * dt;
                let pn = 1.0 - pr - pl;
                if pr > 0.0 {
                    out.push((pr, 1.0));
                }
                if pl > 0.0 {
                    out.push((pl, 0.0));
                }
                if pn > 0.0 {
                    out.push((pn, p * (1.0 - r * dt) / pn));
                }
            }
        }
        out
    }
}

/// Per-cell decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellChoice {
    /// Index into the action list.
    Stop(usize),
    /// Index into the step menu.
    Experiment(usize),
}

/// A discrete problem: grid, terminal actions `(u_R, u_L)` and step menu.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub params: ModelParams,
    pub dt: f64,
    pub grid: Vec<f64>,
    pub actions: Vec<(f64, f64)>,
    pub menu: Vec<Step>,
    // per step, per cell: sparse (index, weight) row
    rows: Vec<Vec<Vec<(usize, f64)>>>,
}

/// Solved grid.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteDP {
    pub grid: Vec<f64>,
    pub value: Vec<f64>,
    pub choice: Vec<CellChoice>,
    /// `None` for the infinite horizon.
    pub horizon: Option<usize>,
    pub iterations: usize,
    /// `‖T V − V‖∞` for the infinite horizon, 0 otherwise.
    pub residual: f64,
}

impl DiscreteDP {
    /// Linear interpolation of the value.
    pub fn value_at(&self, p: f64) -> f64 {
        interp(&self.grid, &self.value, p)
    }
}

fn locate(n: usize, q: f64) -> (usize, f64) {
    let x = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (x.floor() as usize).min(n - 2);
    (i, x - i as f64)
}

/// Linear interpolation on a uniform grid over [0, 1].
pub fn interp(grid: &[f64], v: &[f64], q: f64) -> f64 {
    let (i, w) = locate(grid.len(), q);
    v[i] * (1.0 - w) + v[i + 1] * w
}

impl DiscreteProblem {
    /// Binary actions ℓ and r with the two corner experiments.
    pub fn corners(params: &ModelParams, dt: f64, n_grid: usize) -> Self {
        let menu = vec![
            Step::Binary(Experiment::sigma_l(params.lambda, dt)),
            Step::Binary(Experiment::sigma_r(params.lambda, dt)),
        ];
        Self::new(params, dt, n_grid, menu)
    }

    pub fn new(params: &ModelParams, dt: f64, n_grid: usize, menu: Vec<Step>) -> Self {
        let grid = linspace(0.0, 1.0, n_grid);
        let rows = menu
            .iter()
            .map(|s| {
                grid.iter()
                    .map(|&p| {
                        let mut row: Vec<(usize, f64)> = Vec::with_capacity(6);
                        for (prob, q) in s.outcomes(p) {
                            let (i, w) = locate(n_grid, q);
                            for (j, ww) in [(i, prob * (1.0 - w)), (i + 1, prob * w)] {
                                if ww == 0.0 {
                                    continue;
                                }
                                match row.iter_mut().find(|e| e.0 == j) {
                                    Some(e) => e.1 += ww,
                                    None => row.push((j, ww)),
                                }
                            }
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        DiscreteProblem {
            params: *params,
            dt,
            grid,
            actions: vec![(params.u_lr, params.u_ll), (params.u_rr, params.u_rl)],
            menu,
            rows,
        }
    }

    /// Adds terminal actions given by `(u_R, u_L)`.
    pub fn with_actions(mut self, extra: &[(f64, f64)]) -> Self {
        self.actions.extend_from_slice(extra);
        self
    }

    fn beta(&self) -> f64 {
        (-self.params.rho * self.dt).exp()
    }

    fn flow(&self) -> f64 {
        -self.params.c * self.dt
    }

    fn best_stop(&self, i: usize) -> (f64, usize) {
        let p = self.grid[i];
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, &(ur, ul)) in self.actions.iter().enumerate() {
            let v = p * ur + (1.0 - p) * ul;
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    /// Immediate-action value on the grid.
    pub fn stop_values(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.best_stop(i).0).collect()
    }

    fn step_value(&self, k: usize, i: usize, cont: &[f64]) -> f64 {
        let ev: f64 = self.rows[k][i].iter().map(|&(j, w)| w * cont[j]).sum();
        self.flow() + self.beta() * ev
    }

    /// One Bellman backup. Ties keep stopping.
    pub fn backup(&self, cont: &[f64]) -> (Vec<f64>, Vec<CellChoice>) {
        let n = self.grid.len();
        let mut v = Vec::with_capacity(n);
        let mut ch = Vec::with_capacity(n);
        for i in 0..n {
            let (mut best, a) = self.best_stop(i);
            let mut choice = CellChoice::Stop(a);
            for k in 0..self.menu.len() {
                let x = self.step_value(k, i, cont);
                if x > best {
                    best = x;
                    choice = CellChoice::Experiment(k);
                }
            }
            v.push(best);
            ch.push(choice);
        }
        (v, ch)
    }

    /// Backward induction from the immediate-action value.
    pub fn solve_finite(&self, n_periods: usize) -> DiscreteDP {
        let mut v = self.stop_values();
        let mut choice = vec![CellChoice::Stop(0); v.len()];
        for _ in 0..n_periods {
            let (nv, ch) = self.backup(&v);
            v = nv;
            choice = ch;
        }
        DiscreteDP {
            grid: self.grid.clone(),
            value: v,
            choice,
            horizon: Some(n_periods),
            iterations: n_periods,
            residual: 0.0,
        }
    }

    /// Exact value of a fixed stationary policy.
    fn evaluate(&self, choice: &[CellChoice], stop: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        let beta = self.beta();
        let mut v = vec![0.0; n];
        let mut free = Vec::new();
        for i in 0..n {
            match choice[i] {
                CellChoice::Stop(a) => {
                    let (ur, ul) = self.actions[a];
                    let p = self.grid[i];
                    v[i] = p * ur + (1.0 - p) * ul;
                }
                CellChoice::Experiment(_) => free.push(i),
            }
        }
        let _ = stop;
        if free.is_empty() {
            return Ok(v);
        }
        // bandwidth among free cells
        let (mut kl, mut ku) = (0usize, 0usize);
        for &i in &free {
            if let CellChoice::Experiment(k) = choice[i] {
                for &(j, _) in &self.rows[k][i] {
                    if matches!(choice[j], CellChoice::Experiment(_)) {
                        if j < i {
                            kl = kl.max(i - j);
                        } else {
                            ku = ku.max(j - i);
                        }
                    }
                }
            }
        }
        if kl + ku > 64 {
            return Err(Error::Numerical(format!("transition band too wide ({kl}+{ku})")));
        }
        // unknowns are indexed by grid position; fixed cells get identity rows
        let width = kl + ku + 1;
        let mut band = vec![0.0; n * width];
        let mut rhs = v.clone();
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for i in 0..n {
            band[at(i, i)] = 1.0;
        }
        for &i in &free {
            let CellChoice::Experiment(k) = choice[i] else { unreachable!() };
            rhs[i] = self.flow();
            for &(j, w) in &self.rows[k][i] {
                if matches!(choice[j], CellChoice::Experiment(_)) {
                    band[at(i, j)] -= beta * w;
                } else {
                    rhs[i] += beta * w * v[j];
                }
            }
        }
        banded_solve(n, kl, ku, &mut band, &mut rhs)?;
        Ok(rhs)
    }

    /// Value of repeating step `k` at cell `i` until the belief leaves it,
    /// given values elsewhere.
    fn step_value_self(&self, k: usize, i: usize, cont: &[f64]) -> f64 {
        let beta = self.beta();
        let (mut other, mut own) = (0.0, 0.0);
        for &(j, w) in &self.rows[k][i] {
            if j == i {
                own += w;
            } else {
                other += w * cont[j];
            }
        }
        (self.flow() + beta * other) / (1.0 - beta * own)
    }

    /// One in-place Gauss-Seidel sweep; returns the largest change.
    fn sweep(&self, v: &mut [f64], upward: bool) -> f64 {
        let n = v.len();
        let mut delta: f64 = 0.0;
        for t in 0..n {
            let i = if upward { t } else { n - 1 - t };
            let mut best = self.best_stop(i).0;
            for k in 0..self.menu.len() {
                best = best.max(self.step_value_self(k, i, v));
            }
            delta = delta.max((best - v[i]).abs());
            v[i] = best;
        }
        delta
    }

    /// Policy iteration with exact evaluation, from `choice`.
    fn polish(&self, mut choice: Vec<CellChoice>, stop: &[f64]) -> Result<(Vec<f64>, Vec<CellChoice>, usize)> {
        let mut v = self.evaluate(&choice, stop)?;
        let mut iterations = 0;
        for _ in 0..100 {
            let (tv, new_choice) = self.backup(&v);
            let mut changed = false;
            for i in 0..v.len() {
                // switch only on a strict improvement to avoid cycling on ties
                if new_choice[i] != choice[i] && tv[i] > v[i] + 1e-13 {
                    choice[i] = new_choice[i];
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            v = self.evaluate(&choice, stop)?;
            iterations += 1;
        }
        Ok((v, choice, iterations))
    }

    /// Infinite-horizon fixed point.
    ///
    /// Gauss-Seidel sweeps in alternating directions carry values along the
    /// no-news drift in a single pass; the resulting greedy policy is then
    /// polished by policy iteration with exact evaluation.
    pub fn solve_infinite(&self) -> Result<DiscreteDP> {
        let stop = self.stop_values();
        let mut v = stop.clone();
        let mut sweeps = 0;
        while sweeps < 200_000 {
            let d = self.sweep(&mut v, sweeps % 2 == 0);
            sweeps += 1;
            if d < 1e-13 && sweeps >= 2 {
                break;
            }
        }
        let (_, greedy) = self.backup(&v);
        // coarse steps jump too far for the banded solve; keep the sweeps then
        let (v, choice, iterations) = match self.polish(greedy.clone(), &stop) {
            Ok((pv, pc, k)) => (pv, pc, sweeps + k),
            Err(_) => (v, greedy, sweeps),
        };
        let (tv, _) = self.backup(&v);
        let residual = tv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual > 1e-9 {
            return Err(Error::Numerical(format!("value iteration stalled with residual {residual:e}")));
        }
        Ok(DiscreteDP {
            grid: self.grid.clone(),
            value: v,
            choice,
            horizon: None,
            iterations,
            residual,
        })
    }
}

/// In-place LU solve of a diagonally dominant banded system without pivoting.
fn banded_solve(n: usize, kl: usize, ku: usize, band: &mut [f64], rhs: &mut [f64]) -> Result<()> {
    let width = kl + ku + 1;
    let at = |i: usize, j: usize| i * width + (j + kl - i);
    for k in 0..n {
        let piv = band[at(k, k)];
        if piv.abs() < 1e-300 {
            return Err(Error::Numerical("singular policy-evaluation system".into()));
        }
        for i in (k + 1)..(k + 1 + kl).min(n) {
            let f = band[at(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            for j in k..(k + 1 + ku).min(n) {
                band[at(i, j)] -= f * band[at(k, j)];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..(k + 1 + ku).min(n) {
            s -= band[at(k, j)] * rhs[j];
        }
        rhs[k] = s / band[at(k, k)];
    }
    Ok(())
}

/// One backup of `cont` with the corner experiments and `lambda`, `dt`.
pub fn bellman_backup(params: &ModelParams, dt: f64, cont: &[f64]) -> (Vec<f64>, Vec<CellChoice>) {
    DiscreteProblem::corners(params, dt, cont.len()).backup(cont)
}

pub fn solve_finite_horizon(params: &ModelParams, dt: f64, n_periods: usize, n_grid: usize) -> DiscreteDP {
    DiscreteProblem::corners(params, dt, n_grid).solve_finite(n_periods)
}

/// Comparison of corner and interior experiments on the frontier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dominance {
    pub best_corner_value: f64,
    pub best_interior_value: f64,
    pub best_interior_a: f64,
    pub dominated: bool,
}

/// Expected continuation value of experiment `e` at belief `p`.
pub fn experiment_value(e: &Experiment, p: f64, cont: &dyn Fn(f64) -> f64) -> f64 {
    Step::Binary(*e).outcomes(p).into_iter().map(|(w, q)| w * cont(q)).sum()
}

/// Searches `n_a` frontier experiments for one that beats both corners.
pub fn corner_dominance_check(
    params: &ModelParams,
    dt: f64,
    cont: &dyn Fn(f64) -> f64,
    p: f64,
    n_a: usize,
) -> Dominance {
    let lam = params.lambda;
    let corner = experiment_value(&Experiment::sigma_l(lam, dt), p, cont)
        .max(experiment_value(&Experiment::sigma_r(lam, dt), p, cont));
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for a in linspace(lam * dt, 1.0, n_a).into_iter().skip(1).take(n_a - 2) {
        let v = experiment_value(&Experiment::on_frontier(a, lam, dt), p, cont);
        if v > best.0 {
            best = (v, a);
        }
    }
    Dominance {
        best_corner_value: corner,
        best_interior_value: best.0,
        best_interior_a: best.1,
        dominated: best.0 <= corner + 1e-10,
    }
}

/// First-period decision of the two-period problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TwoPeriodChoice {
    Stop,
    OwnBiased,
    OppositeBiased,
}

/// Exact (grid-free) two-period problem with the corner experiments.
pub fn two_period(params: &ModelParams, dt: f64, p0: f64, periods: usize) -> (f64, TwoPeriodChoice) {
    fn value(prm: &ModelParams, dt: f64, p: f64, left: usize) -> (f64, Option<usize>) {
        let stop = prm.u(p);
        if left == 0 {
            return (stop, None);
        }
        let beta = (-prm.rho * dt).exp();
        let mut best = (stop, None);
        for (k, e) in [Experiment::sigma_l(prm.lambda, dt), Experiment::sigma_r(prm.lambda, dt)]
            .iter()
            .enumerate()
        {
            let ev: f64 = Step::Binary(*e)
                .outcomes(p)
                .into_iter()
                .map(|(w, q)| w * value(prm, dt, q, left - 1).0)
                .sum();
            let v = -prm.c * dt + beta * ev;
            if v > best.0 {
                best = (v, Some(k));
            }
        }
        best
    }
    let (v, k) = value(params, dt, p0, periods);
    let choice = match k {
        None => TwoPeriodChoice::Stop,
        // σ^L (k = 0) is own-biased when ℓ is the likely state
        Some(0) if p0 < params.p_hat() => TwoPeriodChoice::OwnBiased,
        Some(1) if p0 >= params.p_hat() => TwoPeriodChoice::OwnBiased,
        Some(_) => TwoPeriodChoice::OppositeBiased,
    };
    (v, choice)
}

/// Beliefs at which the first-period choice changes, scanning `[0, 1]` in
/// steps of `step`. Each entry is `(belief, choice below, choice above)`.
pub fn two_period_thresholds(
    params: &ModelParams,
    dt: f64,
    periods: usize,
    step: f64,
) -> Vec<(f64, TwoPeriodChoice, TwoPeriodChoice)> {
    let n = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    let mut prev = two_period(params, dt, 0.0, periods).1;
    for i in 1..=n {
        let p = i as f64 / n as f64;
        let c = two_period(params, dt, p, periods).1;
        if c != prev {
            out.push((p - 0.5 / n as f64, prev, c));
            prev = c;
        }
    }
    out
}
