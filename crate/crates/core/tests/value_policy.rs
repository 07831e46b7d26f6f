mod common;

use attention_core::model::boundary_beliefs;
use attention_core::oracle::{CellChoice, DiscreteProblem};
use attention_core::policy::{
    branch_value, hjb_diagnostics, kinks, optimal_alpha, smooth_pasting_gaps, solve, solve_switch_points,
    value_envelope, BranchKind, Choice,
};
use attention_core::{Action, Error, ModelParams, Regime};
use common::*;
use proptest::prelude::*;

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| i as f64 / n as f64)
}

#[test]
fn own_left_pastes_at_lower_boundary() {
    let p = reference(0.3);
    let q = boundary_beliefs(&p).unwrap().p_low_star;
    let (v, d) = branch_value(&p, BranchKind::OwnLeft, q).unwrap();
    assert!((v - u_l(&p, q)).abs() < 1e-12);
    assert!((d - (p.u_lr - p.u_ll)).abs() < 1e-9);
}

#[test]
fn opposite_branches_meet_at_stationary_value() {
    let p = reference(0.13);
    let ps = boundary_beliefs(&p).unwrap().p_star;
    let (vl, dl) = branch_value(&p, BranchKind::OppLeft, ps).unwrap();
    let (vr, dr) = branch_value(&p, BranchKind::OppRight, ps).unwrap();
    assert!((vl - u_s(&p, ps)).abs() < 1e-12 && (vr - u_s(&p, ps)).abs() < 1e-12);
    assert!((dl - dr).abs() < 1e-9);
}

#[test]
fn own_left_reaches_full_attention_value_at_one() {
    for p in [reference(0.3), near_symmetric(0.2), ModelParams::new(1.2, 0.7, -0.4, -1.1, 1.5, 0.2, 0.1)] {
        let (v, _) = branch_value(&p, BranchKind::OwnLeft, 1.0).unwrap();
        assert!((v - u_fa(&p, 1.0)).abs() < 1e-9, "{v} vs {}", u_fa(&p, 1.0));
    }
}

#[test]
fn own_branches_need_learning() {
    assert!(matches!(branch_value(&reference(2.0), BranchKind::OwnLeft, 0.5), Err(Error::UndefinedBranch(_))));
}

#[test]
fn symmetric_switch_point_is_half() {
    let pts = solve_switch_points(&symmetric(0.3)).unwrap();
    assert_eq!(pts.len(), 1);
    assert!((pts[0] - 0.5).abs() < 1e-12);
}

#[test]
fn fig6_opposite_switch_points() {
    let p = reference(0.13);
    let pts = solve_switch_points(&p).unwrap();
    assert_eq!(pts.len(), 2);
    let (lo, hi) = (pts[0], pts[1]);
    assert!(lo < 0.5 && 0.5 < hi);
    let own = branch_value(&p, BranchKind::OwnLeft, lo).unwrap().0;
    let opp = branch_value(&p, BranchKind::OppLeft, lo).unwrap().0;
    assert!((own - opp).abs() < 1e-10);
    let own = branch_value(&p, BranchKind::OwnRight, hi).unwrap().0;
    let opp = branch_value(&p, BranchKind::OppRight, hi).unwrap().0;
    assert!((own - opp).abs() < 1e-10);
}

/// The first grid belief where the oracle's experiment index changes, inside
/// the learning region.
fn oracle_switches(p: &ModelParams) -> Vec<f64> {
    let dp = DiscreteProblem::corners(p, 1e-3, 2001).solve_infinite().unwrap();
    let mut out = Vec::new();
    for i in 1..dp.grid.len() {
        if let (CellChoice::Experiment(a), CellChoice::Experiment(b)) = (dp.choice[i - 1], dp.choice[i]) {
            if a != b {
                out.push(0.5 * (dp.grid[i - 1] + dp.grid[i]));
            }
        }
    }
    out
}

#[test]
fn switch_points_match_discrete_oracle() {
    for p in [reference(0.3), reference(0.13)] {
        let analytic = solve_switch_points(&p).unwrap();
        let discrete = oracle_switches(&p);
        // the oracle also switches at p* between the two opposite corners
        let discrete: Vec<f64> = discrete
            .into_iter()
            .filter(|x| analytic.len() == 1 || (x - 0.5).abs() > 5e-3)
            .collect();
        assert_eq!(discrete.len(), analytic.len(), "{discrete:?} vs {analytic:?}");
        for (a, d) in analytic.iter().zip(&discrete) {
            assert!((a - d).abs() < 1e-2, "{a} vs {d}");
        }
    }
}

#[test]
fn envelope_examples() {
    let p = reference(0.13);
    assert_eq!(value_envelope(&p, 0.0).unwrap(), p.u_ll);
    assert!((value_envelope(&p, 0.5).unwrap() - u_s(&p, 0.5)).abs() < 1e-14);
    let none = reference(2.0);
    for q in grid(100) {
        assert_eq!(value_envelope(&none, q).unwrap(), u(&none, q));
    }
}

#[test]
fn optimal_alpha_examples() {
    let p = reference(0.3);
    let sol = solve(&p).unwrap();
    let check = sol.cutoffs.p_check.unwrap();
    assert_eq!(optimal_alpha(&p, check - 1e-6).unwrap(), Choice::Attend(1.0));
    assert_eq!(optimal_alpha(&p, check).unwrap(), Choice::Attend(0.0));
    assert_eq!(optimal_alpha(&p, sol.cutoffs.p_high_star).unwrap(), Choice::Stop(Action::R));
    let q = reference(0.13);
    let ps = solve(&q).unwrap().cutoffs.p_star;
    assert_eq!(optimal_alpha(&q, ps).unwrap(), Choice::Attend(0.5));
}

#[test]
fn fig6_segment_sequences() {
    let labels = |p: &ModelParams| -> Vec<&'static str> {
        solve(p).unwrap().segments().iter().map(|s| s.kind.label()).collect()
    };
    assert_eq!(labels(&reference(0.3)), ["stop_l", "own_left", "own_right", "stop_r"]);
    assert_eq!(
        labels(&reference(0.13)),
        ["stop_l", "own_left", "opp_left", "stationary", "opp_right", "own_right", "stop_r"]
    );
    assert_eq!(labels(&reference(2.0)), ["stop_l", "stop_r"]);
}

#[test]
fn hjb_residual_and_identities_on_fig6() {
    for c in [0.3, 0.13, 0.6] {
        let sol = solve(&reference(c)).unwrap();
        for q in grid(2000) {
            match hjb_diagnostics(&sol, q) {
                Ok(d) => {
                    assert!(d.residual <= 1e-9, "residual {} at {q}", d.residual);
                    let v = sol.value(q);
                    if q > 1e-3 && q < 1.0 - 1e-3 {
                        let cross = d.crossing_gap.unwrap();
                        assert!(cross.abs() <= 1e-9 * (1.0 + (v - u_s(&sol.params, q)).abs() / (q * (1.0 - q))), "{cross}");
                        assert!(d.df_dalpha_gap.unwrap().abs() <= 1e-9, "at {q}");
                        let gap = u_s(&sol.params, q) - v;
                        if gap.abs() > 1e-6 {
                            assert_eq!(d.df_dalpha.signum(), gap.signum(), "at {q}");
                        }
                    }
                }
                Err(Error::KinkPoint(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        for (name, g) in smooth_pasting_gaps(&sol) {
            assert!(g <= 1e-9, "{name}: {g}");
        }
        for k in kinks(&sol) {
            assert!(k.left < k.right, "kink at {} not convex", k.p);
        }
    }
}

#[test]
fn fine_grid_envelope_bounds() {
    for p in regime_draws(3, 9) {
        let sol = solve(&p).unwrap();
        for q in grid(10_000) {
            let v = sol.value(q);
            assert!(v >= u(&p, q).max(u_s(&p, q)) - 1e-12);
            assert!(v <= u(&p, q).max(u_fa(&p, q)) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Each branch against an RK4 integration of its ODE from its anchor.
    #[test]
    fn branches_solve_their_odes(p in learning_params_strategy()) {
        let b = boundary_beliefs(&p).unwrap();
        let lam = p.lambda;
        let cases = [
            (BranchKind::OwnLeft, (lam, 0.0), b.p_low_star, u_l(&p, b.p_low_star), (b.p_low_star + b.p_high_star) / 2.0),
            (BranchKind::OwnRight, (0.0, lam), b.p_high_star, u_r(&p, b.p_high_star), (b.p_low_star + b.p_high_star) / 2.0),
            (BranchKind::OppLeft, (0.0, lam), b.p_star, u_s(&p, b.p_star), (b.p_low_star + b.p_star) / 2.0),
            (BranchKind::OppRight, (lam, 0.0), b.p_star, u_s(&p, b.p_star), (b.p_high_star + b.p_star) / 2.0),
        ];
        for (kind, (r, l), q0, v0, q1) in cases {
            let v = rk4(|x, y| hjb_slope(&p, r, l, x, y), q0, v0, q1, 4000);
            let closed = branch_value(&p, kind, q1).unwrap().0;
            prop_assert!((v - closed).abs() < 1e-8 * (1.0 + v.abs()), "{kind:?}: {v} vs {closed}");
        }
    }

    #[test]
    fn analytic_derivatives_match_differences(p in learning_params_strategy(), q in 0.05..0.95f64) {
        for kind in [BranchKind::OwnLeft, BranchKind::OwnRight, BranchKind::OppLeft, BranchKind::OppRight] {
            let h = 1e-6;
            let (_, d) = branch_value(&p, kind, q).unwrap();
            let fd = (branch_value(&p, kind, q + h).unwrap().0 - branch_value(&p, kind, q - h).unwrap().0) / (2.0 * h);
            prop_assert!((d - fd).abs() <= 1e-5 * d.abs().max(1.0), "{kind:?} at {q}: {d} vs {fd}");
        }
    }

    #[test]
    fn zero_discount_forms_are_continuous(p in learning_params_strategy(), q in 0.05..0.95f64) {
        let p0 = ModelParams { rho: 0.0, ..p };
        prop_assume!(p0.validated().is_ok() && p0.exp_holds());
        let p1 = ModelParams { rho: 1e-6, ..p0 };
        for kind in [BranchKind::OwnLeft, BranchKind::OwnRight, BranchKind::OppLeft, BranchKind::OppRight] {
            let a = branch_value(&p0, kind, q).unwrap().0;
            let b = branch_value(&p1, kind, q).unwrap().0;
            prop_assert!((a - b).abs() <= 1e-4 * (1.0 + a.abs()), "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn envelope_is_bracketed_and_continuous(p in params_strategy()) {
        let sol = solve(&p).unwrap();
        for q in grid(1000) {
            let v = sol.value(q);
            prop_assert!(v >= u(&p, q).max(u_s(&p, q)) - 1e-12);
            prop_assert!(v <= u(&p, q).max(u_fa(&p, q)) + 1e-12);
            if q < sol.cutoffs.region_low || q > sol.cutoffs.region_high {
                prop_assert_eq!(v, u(&p, q));
            }
        }
        for x in sol.breakpoints() {
            let (l, r) = (sol.value(x - 1e-9), sol.value(x + 1e-9));
            prop_assert!((l - r).abs() < 1e-6, "jump at {x}");
        }
    }

    #[test]
    fn policy_is_bang_bang(p in learning_params_strategy()) {
        let sol = solve(&p).unwrap();
        for q in grid(1000) {
            if let Choice::Attend(a) = sol.choice(q) {
                if sol.value(q) > u_s(&p, q) + 1e-9 {
                    prop_assert!(a == 0.0 || a == 1.0, "alpha {a} at {q}");
                } else if a == 0.5 {
                    prop_assert_eq!(sol.regime, Regime::OwnAndOpposite);
                }
            }
        }
    }

    #[test]
    fn cutoff_ordering(p in learning_params_strategy()) {
        let sol = solve(&p).unwrap();
        let c = sol.cutoffs;
        match sol.regime {
            Regime::OwnOnly => {
                let k = c.p_check.unwrap();
                prop_assert!(c.p_low_star < k && k < c.p_high_star);
                prop_assert!(c.p_low.is_none() && c.p_high.is_none());
            }
            Regime::OwnAndOpposite => {
                let (lo, hi) = (c.p_low.unwrap(), c.p_high.unwrap());
                prop_assert!(c.p_low_star < lo && lo < c.p_star && c.p_star < hi && hi < c.p_high_star);
                prop_assert!(c.p_check.is_none());
            }
            Regime::NoLearning => prop_assert!(false, "learning parameters gave NoLearning"),
        }
        for k in kinks(&sol) {
            prop_assert!(k.left <= k.right + 1e-12);
        }
    }

    #[test]
    fn residual_vanishes_off_kinks(p in learning_params_strategy()) {
        let sol = solve(&p).unwrap();
        for q in grid(500).filter(|q| *q > 0.0 && *q < 1.0) {
            if let Ok(d) = hjb_diagnostics(&sol, q) {
                prop_assert!(d.residual <= 1e-9 * (1.0 + sol.value(q).abs()), "{} at {q}", d.residual);
            }
        }
    }
}
