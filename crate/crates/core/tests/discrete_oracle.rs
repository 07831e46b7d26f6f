mod common;

use attention_core::oracle::{
    bellman_backup, corner_dominance_check, experiment_posteriors, experiment_value, solve_finite_horizon,
    two_period, two_period_thresholds, CellChoice, DiscreteProblem, Experiment, TwoPeriodChoice,
};
use attention_core::policy::{solve, Choice};
use attention_core::{Error, ModelParams};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_period_case() -> ModelParams {
    ModelParams::new(1.0, 1.0, -1.0, -1.0, 0.85, 0.0, 0.125)
}

fn second_differences_ok(v: &[f64]) -> bool {
    v.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-10)
}

#[test]
fn corner_experiments_are_conclusive() {
    let (lam, dt) = (1.0, 0.1);
    let post = experiment_posteriors(0.4, &Experiment::sigma_l(lam, dt)).unwrap();
    assert_eq!(post.q_r, 1.0);
    let post = experiment_posteriors(0.4, &Experiment::sigma_r(lam, dt)).unwrap();
    assert_eq!(post.q_l, 0.0);
}

#[test]
fn zero_probability_signal_is_degenerate() {
    let e = Experiment::sigma_l(1.0, 0.1);
    assert!(matches!(experiment_posteriors(0.0, &e), Err(Error::DegenerateSignal)));
}

#[test]
fn experiment_constraints() {
    assert!(Experiment::new(0.9, 0.2, 0.1, 1.0).is_ok());
    assert!(Experiment::new(0.5, 0.4, 0.1, 1.0).is_err());
    assert!(Experiment::new(0.95, 0.2, 0.1, 1.0).is_err());
    assert!(Experiment::new(1.0, 1.0, 1.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn posteriors_follow_bayes(p in 0.01..0.99f64, lam in 0.1..3.0f64, dt in 1e-3..0.3f64, t in 0.0..=1.0f64) {
        prop_assume!(lam * dt < 1.0);
        let a = lam * dt + t * (1.0 - lam * dt);
        let e = Experiment::on_frontier(a, lam, dt);
        let post = experiment_posteriors(p, &e).unwrap();
        prop_assert!((post.prob_r + post.prob_l - 1.0).abs() < 1e-12);
        prop_assert!((post.prob_r * post.q_r + post.prob_l * post.q_l - p).abs() < 1e-12);
        let ld = lam * dt;
        prop_assert!((post.q_r - p * (ld + 1.0 - a) / (p * ld + 1.0 - a)).abs() < 1e-12);
        if a > ld {
            prop_assert!((post.q_l - p * (a - ld) / (a - p * ld)).abs() < 1e-12);
        }
    }
}

#[test]
fn backup_examples() {
    let p = two_period_case();
    let dp = DiscreteProblem::corners(&p, 1.0, 1001);
    let stop = dp.stop_values();
    let (v, ch) = bellman_backup(&p, 1.0, &stop);
    assert_eq!(ch[10], CellChoice::Stop(0));
    assert_eq!(ch[990], CellChoice::Stop(1));
    // one period left, likely R and close to the boundary: σ^R
    assert_eq!(ch[900], CellChoice::Experiment(1));
    for (x, s) in v.iter().zip(&stop) {
        assert!(x >= s);
    }
}

#[test]
fn backups_preserve_convexity() {
    for p in regime_draws(3, 6) {
        for dt in [0.5, 0.05] {
            if p.lambda * dt >= 1.0 {
                continue;
            }
            let dp = DiscreteProblem::corners(&p, dt, 401);
            let mut v = dp.stop_values();
            for _ in 0..30 {
                v = dp.backup(&v).0;
                assert!(second_differences_ok(&v));
            }
        }
    }
}

#[test]
fn more_periods_never_hurt() {
    for p in [two_period_case(), reference(0.13), near_symmetric(0.3)] {
        let mut last = solve_finite_horizon(&p, 0.2, 0, 501).value;
        for n in 1..25 {
            let v = solve_finite_horizon(&p, 0.2, n, 501).value;
            assert!(v.iter().zip(&last).all(|(a, b)| *a >= b - 1e-14));
            last = v;
        }
    }
}

#[test]
fn two_period_thresholds_match_reference_values() {
    let th = two_period_thresholds(&two_period_case(), 1.0, 2, 1e-4);
    use TwoPeriodChoice::*;
    let expected = [(0.07, Stop, OwnBiased), (0.27, OwnBiased, OppositeBiased), (0.73, OppositeBiased, OwnBiased), (0.93, OwnBiased, Stop)];
    assert_eq!(th.len(), 4, "{th:?}");
    for ((p, below, above), (q, b, a)) in th.iter().zip(expected) {
        assert!((p - q).abs() <= 0.01, "{p} vs {q}");
        assert_eq!((*below, *above), (b, a));
    }
}

#[test]
fn gridded_two_period_agrees_with_exact() {
    let p = two_period_case();
    let dp = solve_finite_horizon(&p, 1.0, 2, 1001);
    let th: Vec<f64> = two_period_thresholds(&p, 1.0, 2, 1e-4).iter().map(|t| t.0).collect();
    for (i, &q) in dp.grid.iter().enumerate() {
        if th.iter().any(|t| (t - q).abs() < 5e-3) {
            continue;
        }
        let (v, choice) = two_period(&p, 1.0, q, 2);
        assert!((dp.value[i] - v).abs() < 1e-3, "value at {q}");
        let grid_choice = match dp.choice[i] {
            CellChoice::Stop(_) => TwoPeriodChoice::Stop,
            CellChoice::Experiment(0) if q < 0.5 => TwoPeriodChoice::OwnBiased,
            CellChoice::Experiment(1) if q >= 0.5 => TwoPeriodChoice::OwnBiased,
            CellChoice::Experiment(_) => TwoPeriodChoice::OppositeBiased,
        };
        assert_eq!(grid_choice, choice, "choice at {q}");
    }
}

#[test]
fn single_period_is_always_own_biased() {
    let p = two_period_case();
    let mut experimenting = 0;
    for i in 0..=1000 {
        let q = i as f64 / 1000.0;
        match two_period(&p, 1.0, q, 1).1 {
            TwoPeriodChoice::OppositeBiased => panic!("opposite-biased at {q}"),
            TwoPeriodChoice::OwnBiased => experimenting += 1,
            TwoPeriodChoice::Stop => {}
        }
    }
    assert!(experimenting > 0);
}

/// Random convex function: max of affine pieces plus a convex quadratic.
fn convex_fn(rng: &mut impl Rng) -> impl Fn(f64) -> f64 {
    let pieces: Vec<(f64, f64)> = (0..rng.gen_range(1..6)).map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0))).collect();
    let (k, m) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0));
    move |q: f64| pieces.iter().map(|(s, b)| s * q + b).fold(f64::NEG_INFINITY, f64::max) + m * (q - k).powi(2)
}

#[test]
fn corners_dominate_for_convex_continuations() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let lam = rng.gen_range(0.2..3.0);
        let dt = rng.gen_range(0.01..0.9) / lam;
        let p = ModelParams { lambda: lam, ..reference(0.1) };
        let f = convex_fn(&mut rng);
        let q = rng.gen_range(0.001..0.999);
        let d = corner_dominance_check(&p, dt, &f, q, 201);
        assert!(d.dominated, "{d:?}");
        // points strictly inside the feasible set
        for _ in 0..10 {
            let a = rng.gen_range(0.0..=1.0);
            let b = rng.gen_range((1.0 - a)..=(1.0 + lam * dt - a).min(1.0));
            let v = experiment_value(&Experiment { a, b, dt }, q, &f);
            assert!(v <= d.best_corner_value + 1e-10);
        }
    }
}

#[test]
fn kink_of_immediate_payoff_is_dominated() {
    let p = near_symmetric(0.3);
    let d = corner_dominance_check(&p, 0.1, &|q| p.u(q), p.p_hat(), 201);
    assert!(d.dominated);
}

#[test]
fn concave_continuation_can_prefer_interior() {
    let p = symmetric(0.1);
    let concave = |q: f64| -(q - 0.5).powi(2) - 0.5 * q;
    let wins = (1..100).any(|i| !corner_dominance_check(&p, 0.3, &concave, i as f64 / 100.0, 201).dominated);
    assert!(wins);
}

#[test]
fn value_iteration_matches_envelope() {
    for p in regime_draws(20, 20) {
        let sol = solve(&p).unwrap();
        let dp = DiscreteProblem::corners(&p, 1e-3, 2001).solve_infinite().unwrap();
        assert!(dp.residual < 1e-9);
        let cuts: Vec<f64> = [
            Some(sol.cutoffs.p_low_star),
            Some(sol.cutoffs.p_high_star),
            Some(sol.cutoffs.p_star),
            sol.cutoffs.p_check,
            sol.cutoffs.p_low,
            sol.cutoffs.p_high,
        ]
        .into_iter()
        .flatten()
        .collect();
        let cell = 1.0 / 2000.0;
        for (i, &q) in dp.grid.iter().enumerate() {
            let gap = (dp.value[i] - sol.value(q)).abs();
            assert!(gap <= 1e-2, "gap {gap} at {q} for {p:?}");
            if !p.exp_holds() || cuts.iter().any(|c| (c - q).abs() <= 2.0 * cell) {
                continue;
            }
            let expect = match sol.choice(q) {
                Choice::Stop(a) => CellChoice::Stop(a as usize),
                Choice::Attend(a) if a == 1.0 => CellChoice::Experiment(0),
                Choice::Attend(a) if a == 0.0 => CellChoice::Experiment(1),
                Choice::Attend(_) => continue,
            };
            assert_eq!(dp.choice[i], expect, "policy at {q} for {p:?}");
        }
    }
}
