mod common;

use common::statics::*;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn comparative_statics_hold_on_random_draws() {
    let r = run_suite(2024);
    for (name, k) in &r.holds.checks {
        eprintln!("{k:5} checks  {name}");
    }
    let t = &r.holds;
    assert!(t.failures.is_empty(), "{} violations:\n{}", t.failures.len(), t.failures.join("\n"));
    for name in FAMILIES {
        assert!(t.count(name) >= 5, "{name} checked only {} times", t.count(name));
    }
}

/// Two unconditional readings fail: ρ only acts like a cost when `U > 0`,
/// and one costly mistake leaves `c̲` governed by the other side.
#[test]
fn literal_readings_have_counterexamples() {
    let r = run_suite(2024);
    let fails = |name: &str| r.literal.failures.iter().filter(|f| f.starts_with(name)).count();
    assert!(fails("region vs rho, any payoffs") > 0);
    assert!(fails("dc_underbar/drho > 0 for one costly mistake") > 0);
}

#[test]
fn both_signs_of_the_discounting_effect_occur() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let signs: Vec<bool> = (0..DRAWS).map(|_| draw_base(&mut rng)).map(|p| u(&p, p_hat(&p)) > 0.0).collect();
    assert!(signs.iter().any(|&s| s) && signs.iter().any(|&s| !s));
}
