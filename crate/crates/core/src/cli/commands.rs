//! One function per command. Each returns the artifacts to write.

use serde_json::{Map, Value};

use super::config::{RunConfig, Variant};
use super::output::{envelope, num, Artifact, Content, Table, Val};
use super::CliError;
use crate::dynamics::{analytic_outcomes, monte_carlo, simulate_indexed, NoNewsPath, PolicyMap};
use crate::gamma::{frontier_oracle, saddle_slope, GammaChoice, GammaFrontier, GammaSolution};
use crate::model::{Action, ModelParams, State};
use crate::numeric::linspace;
use crate::oracle::{two_period, two_period_thresholds, CellChoice, DiscreteProblem, Step, TwoPeriodChoice};
use crate::policy::{self, hjb_diagnostics, kinks, smooth_pasting_gaps, Choice, RegimeSolution};
use crate::population::{evolve, init_population, polarization_metric, DistributionSpec, Element};
use crate::variants::{asymmetric_solution, nonexclusive_solution, MultiAction, MultiChoice};

/// Runs `command` on a validated configuration.
pub fn execute(command: &str, cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    match command {
        "solve" => solve(cfg),
        "oracle" => oracle(cfg),
        "simulate" => simulate(cfg),
        "population" => population(cfg),
        "sweep" => sweep(cfg),
        "diagnose" => diagnose(cfg),
        "twoperiod" => twoperiod(cfg),
        other => Err(CliError::Validation(format!("unknown command `{other}`"))),
    }
}

/// A solved model of any variant.
pub enum Solved {
    Linear(RegimeSolution),
    Gamma(GammaSolution),
    Multi(MultiAction),
}

impl Solved {
    pub fn build(cfg: &RunConfig) -> Result<Self, CliError> {
        let p = &cfg.params;
        Ok(match &cfg.variant {
            Variant::Baseline => Solved::Linear(policy::solve(p)?),
            Variant::Nonexclusive(b) => Solved::Linear(nonexclusive_solution(p, *b)?),
            Variant::Asymmetric(r) => Solved::Linear(asymmetric_solution(p, *r)?),
            Variant::Gamma(kind) => Solved::Gamma(GammaSolution::new(GammaFrontier::from_kind(*kind), p)?),
            Variant::Multiaction(m) => Solved::Multi(MultiAction::new(p, m)?),
        })
    }

    /// Value, attention level (`None` when acting) and branch name.
    pub fn eval(&self, p: f64) -> (f64, Option<f64>, String) {
        match self {
            Solved::Linear(s) => {
                let alpha = match s.choice(p) {
                    Choice::Attend(a) => Some(a),
                    Choice::Stop(_) => None,
                };
                (s.value(p), alpha, s.segment_at(p).kind.label().to_string())
            }
            Solved::Gamma(g) => {
                let (v, choice) = g.eval(p);
                let alpha = match choice {
                    GammaChoice::Attend { alpha, .. } => Some(alpha),
                    GammaChoice::Stop { .. } => None,
                };
                (v, alpha, g.branch_label(p).to_string())
            }
            Solved::Multi(m) => {
                let (v, choice) = m.eval(p);
                match choice {
                    MultiChoice::Stop { action } => (v, None, stop_label(action).to_string()),
                    MultiChoice::StopMiddle { index } => (v, None, format!("stop_m{index}")),
                    MultiChoice::Attend { alpha } => {
                        let owner = m.strategies.iter().position(|s| s.value(p) == v && v > m.baseline.value(p));
                        let label = match owner {
                            Some(i) => format!("learn_m{i}"),
                            None => m.baseline.segment_at(p).kind.label().to_string(),
                        };
                        (v, Some(alpha), label)
                    }
                }
            }
        }
    }

    pub fn value(&self, p: f64) -> f64 {
        self.eval(p).0
    }
}

fn stop_label(a: Action) -> &'static str {
    match a {
        Action::L => "stop_l",
        Action::R => "stop_r",
    }
}

fn linear_only(cfg: &RunConfig) -> Result<RegimeSolution, CliError> {
    match Solved::build(cfg)? {
        Solved::Linear(s) => Ok(s),
        _ => Err(CliError::Validation(format!(
            "variant {} is not supported here; use baseline, nonexclusive or asymmetric",
            cfg.variant.name()
        ))),
    }
}

fn grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let n = cfg.usize_or("grid", 2001)?;
    if n < 2 {
        return Err(CliError::Validation("grid needs at least 2 points".into()));
    }
    Ok(linspace(0.0, 1.0, n))
}

fn positive(cfg: &RunConfig, key: &str, default: f64) -> Result<f64, CliError> {
    let v = cfg.f64_or(key, default)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Validation(format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

fn linear_meta(t: &mut Table, s: &RegimeSolution) {
    let c = &s.cutoffs;
    t.meta("regime", Val::text(s.regime.to_string()));
    t.meta("p_hat", c.p_hat);
    t.meta("p_low_star", c.p_low_star);
    t.meta("p_high_star", c.p_high_star);
    t.meta("p_star", c.p_star);
    t.meta("p_check", c.p_check);
    t.meta("p_low", c.p_low);
    t.meta("p_high", c.p_high);
    t.meta("c_bar", c.c_bar);
    t.meta("c_underbar", c.c_underbar);
    t.meta("region_low", c.region_low);
    t.meta("region_high", c.region_high);
}

fn solved_meta(t: &mut Table, solved: &Solved) -> Result<(), CliError> {
    t.meta("variant", Val::text(match solved {
        Solved::Linear(s) => format!("{:?}", s.tech.kind).split([' ', '{']).next().unwrap_or("").to_lowercase(),
        Solved::Gamma(_) => "gamma".into(),
        Solved::Multi(_) => "multiaction".into(),
    }));
    match solved {
        Solved::Linear(s) => linear_meta(t, s),
        Solved::Gamma(g) => {
            let regime = if g.frontier.linear || !g.exp {
                g.norm.regime().to_string()
            } else if g.uses_opposite {
                "OwnAndOpposite".into()
            } else {
                "OwnOnly".into()
            };
            t.meta("regime", Val::text(regime));
            t.meta("gamma", g.frontier.gamma);
            t.meta("linear_frontier", Val::text(g.frontier.linear.to_string()));
            t.meta("p_low_star", g.p_low_star);
            t.meta("p_high_star", g.p_high_star);
            t.meta("q_b", g.own.as_ref().map(|o| o.q_b));
            t.meta("q_s", g.own.as_ref().map(|o| o.q_s));
            t.meta("q_low", g.opposite.as_ref().map(|o| o.q_low));
            t.meta("q_high", g.opposite.as_ref().map(|o| o.q_high));
            if !g.frontier.linear {
                t.meta("saddle_slope", saddle_slope(&g.frontier, g.norm.rho)?);
            }
        }
        Solved::Multi(m) => {
            linear_meta(t, &m.baseline);
            for (i, s) in m.strategies.iter().enumerate() {
                t.meta(format!("m{i}.u_R"), s.action.u_m_r);
                t.meta(format!("m{i}.u_L"), s.action.u_m_l);
                t.meta(format!("m{i}.q1"), s.cutoffs.q1);
                t.meta(format!("m{i}.q2"), s.cutoffs.q2);
                t.meta(format!("m{i}.p_m_low"), s.cutoffs.p_m_low);
                t.meta(format!("m{i}.p_m_high"), s.cutoffs.p_m_high);
            }
        }
    }
    Ok(())
}

fn solve(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let solved = Solved::build(cfg)?;
    let mut t = Table::new(&["p", "V", "alpha", "branch"]);
    solved_meta(&mut t, &solved)?;
    for p in grid(cfg)? {
        let (v, alpha, branch) = solved.eval(p);
        t.push(vec![p.into(), v.into(), alpha.into(), Val::Text(branch)]);
    }
    Ok(vec![Artifact::main(Content::Table(t))])
}

/// The discrete problem matching the configured variant.
pub fn discrete_problem(cfg: &RunConfig, solved: &Solved, dt: f64, n_grid: usize) -> Result<DiscreteProblem, CliError> {
    let p = &cfg.params;
    Ok(match (&cfg.variant, solved) {
        (Variant::Baseline, _) => DiscreteProblem::corners(p, dt, n_grid),
        (_, Solved::Linear(s)) => {
            let step = |r: crate::branch::Rates| Step::Poisson { r: r.r, l: r.l, dt };
            DiscreteProblem::new(p, dt, n_grid, vec![step(s.tech.hi), step(s.tech.lo)])
        }
        (_, Solved::Gamma(g)) => {
            let n = cfg.usize_or("n_lambda", 51)?;
            if n < 2 {
                return Err(CliError::Validation("n_lambda needs at least 2 points".into()));
            }
            frontier_oracle(&g.frontier, p, dt, n_grid, n)
        }
        (_, Solved::Multi(m)) => DiscreteProblem::corners(p, dt, n_grid).with_actions(&m.oracle_actions()),
    })
}

fn oracle(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let solved = Solved::build(cfg)?;
    let dt = positive(cfg, "dt", 1e-3)?;
    let n = grid(cfg)?.len();
    let problem = discrete_problem(cfg, &solved, dt, n)?;
    let dp = problem.solve_infinite()?;
    let mut t = Table::new(&["p", "V_dp", "V_analytic", "gap", "choice"]);
    let mut sup = 0.0_f64;
    for (i, &p) in dp.grid.iter().enumerate() {
        let va = solved.value(p);
        let gap = dp.value[i] - va;
        sup = sup.max(gap.abs());
        let choice = match dp.choice[i] {
            CellChoice::Stop(k) => format!("stop{k}"),
            CellChoice::Experiment(k) => format!("exp{k}"),
        };
        t.push(vec![p.into(), dp.value[i].into(), va.into(), gap.into(), Val::Text(choice)]);
    }
    t.meta("dt", dt);
    t.meta("sup_gap", sup);
    t.meta("dp_iterations", dp.iterations as f64);
    t.meta("dp_residual", dp.residual);
    t.meta("n_experiments", problem.menu.len() as f64);
    t.meta("n_actions", problem.actions.len() as f64);
    Ok(vec![Artifact::main(Content::Table(t))])
}

fn state_label(s: State) -> &'static str {
    match s {
        State::L => "L",
        State::R => "R",
    }
}

fn simulate(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let sol = linear_only(cfg)?;
    let p0 = cfg.f64_or("p0", 0.5)?;
    if !(0.0..=1.0).contains(&p0) {
        return Err(CliError::Validation(format!("p0 must lie in [0, 1], got {p0}")));
    }
    let n = cfg.u64_or("n_paths", 10_000)?;
    let seed = cfg.u64_or("seed", 0)?;
    let mc = monte_carlo(&sol, p0, n, seed);
    let exact = analytic_outcomes(&sol, p0);

    let mut summary = Map::new();
    summary.insert("n_paths".into(), Value::from(mc.n_paths));
    for (k, v) in [
        ("mean_delay", mc.mean_delay),
        ("se_delay", mc.se_delay),
        ("mistake_rate", mc.mistake_rate),
        ("se_mistake", mc.se_mistake),
        ("value", mc.value),
        ("se_value", mc.se_value),
    ] {
        summary.insert(k.into(), num(v));
    }
    let mut analytic = Map::new();
    analytic.insert("expected_delay".into(), num(exact.expected_delay));
    analytic.insert("mistake_prob".into(), num(exact.mistake_prob));
    analytic.insert("value".into(), num(exact.value));
    analytic.insert("V".into(), num(sol.value(p0)));

    let mut root = envelope("simulate", cfg);
    root.insert("regime".into(), Value::String(sol.regime.to_string()));
    root.insert("seed".into(), Value::from(seed));
    root.insert("summary".into(), Value::Object(summary));
    root.insert("analytic".into(), Value::Object(analytic));
    let mut out = vec![Artifact::main(Content::Json(root))];

    if let Some(path) = cfg.raw("paths_out") {
        let path_obj = NoNewsPath::new(&PolicyMap::from_solution(&sol), p0);
        let mut t = Table::new(&["index", "state", "action", "decision_time", "correct", "breakthrough", "value"]);
        for i in 0..n {
            let o = simulate_indexed(&sol.params, &path_obj, seed, i);
            t.push(vec![
                Val::Text(i.to_string()),
                state_label(o.state).into(),
                stop_label(o.action).trim_start_matches("stop_").into(),
                o.decision_time.into(),
                Val::Text(o.correct.to_string()),
                Val::Text(o.breakthrough.to_string()),
                o.value.into(),
            ]);
        }
        out.push(Artifact { path: Some(path.into()), content: Content::CsvTable(t) });
    }
    Ok(out)
}

/// `uniform | normal:MEAN:SD | point:X | nodes:x:d,x:d,…`
pub fn parse_init(s: &str) -> Result<DistributionSpec, String> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("expected a number, got `{t}`"));
    if s == "uniform" {
        return Ok(DistributionSpec::Uniform);
    }
    if let Some(rest) = s.strip_prefix("normal:") {
        let (m, sd) = rest.split_once(':').ok_or("expected normal:MEAN:SD")?;
        return Ok(DistributionSpec::TruncatedNormal { mean: num(m)?, sd: num(sd)? });
    }
    if let Some(rest) = s.strip_prefix("point:") {
        return Ok(DistributionSpec::PointMass { at: num(rest)? });
    }
    if let Some(rest) = s.strip_prefix("nodes:") {
        let nodes = rest
            .split(',')
            .map(|pair| {
                let (x, d) = pair.split_once(':').ok_or_else(|| format!("expected x:d, got `{pair}`"))?;
                Ok((num(x)?, num(d)?))
            })
            .collect::<Result<Vec<_>, String>>()?;
        return Ok(DistributionSpec::Nodes { nodes });
    }
    Err(format!("unknown distribution `{s}`"))
}

fn population(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let sol = linear_only(cfg)?;
    let spec = match cfg.raw("init") {
        None => DistributionSpec::Uniform,
        Some(s) => parse_init(s).map_err(|m| CliError::parse("init", None, m))?,
    };
    let truth = match cfg.raw("truth").map(str::trim) {
        None | Some("L") => State::L,
        Some("R") => State::R,
        Some(v) => return Err(CliError::parse("truth", None, format!("expected L or R, got `{v}`"))),
    };
    let times: Vec<f64> = match (cfg.raw("times"), cfg.f64_opt("t_end")?) {
        (Some(list), _) => list
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::parse("times", None, format!("bad time `{t}`"))))
            .collect::<Result<_, _>>()?,
        (None, Some(t_end)) => {
            let dt = positive(cfg, "dt", t_end / 10.0)?;
            crate::population::snapshot_times(dt, t_end)
        }
        (None, None) => vec![0.0, 0.4, 1.5],
    };
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Validation("snapshot times must be finite, non-negative and sorted".into()));
    }
    let n_cells = cfg.usize_or("n_cells", 2000)?.max(1);
    let measure = init_population(&spec, n_cells)?;
    let snaps = evolve(&sol, &measure, truth, &times);

    let mut t = Table::new(&["time", "kind", "location", "mass_or_density", "media_choice"]);
    linear_meta(&mut t, &sol);
    t.meta("truth", state_label(truth));
    for (i, s) in snaps.iter().enumerate() {
        t.meta(format!("snapshot.{i}.time"), s.time);
        t.meta(format!("snapshot.{i}.total_mass"), s.measure.total_mass());
        t.meta(format!("snapshot.{i}.polarization"), s.polarization.or_else(|| polarization_metric(&s.measure).ok()));
        t.meta(format!("snapshot.{i}.l_outlet"), s.media_share.l_outlet);
        t.meta(format!("snapshot.{i}.r_outlet"), s.media_share.r_outlet);
        t.meta(format!("snapshot.{i}.multi_home"), s.media_share.multi_home);
        t.meta(format!("snapshot.{i}.none"), s.media_share.none);
        for e in &s.elements {
            let row = match *e {
                Element::Atom { location, mass, media } => {
                    vec![s.time.into(), "atom".into(), location.into(), mass.into(), media.label().into()]
                }
                Element::Cell { lo, hi, mass, media } => {
                    let density = if hi > lo { mass / (hi - lo) } else { f64::INFINITY };
                    vec![s.time.into(), "node".into(), (0.5 * (lo + hi)).into(), density.into(), media.label().into()]
                }
            };
            t.push(row);
        }
    }
    Ok(vec![Artifact::main(Content::Table(t))])
}

const SWEEP_KEYS: [&str; 10] = ["uRR", "uLL", "uLR", "uRL", "lambda", "rho", "c", "alpha_max", "lambda_R", "lambda_L"];

fn sweep(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    linear_only(cfg)?;
    let key = cfg.required("key")?.trim().to_string();
    if !SWEEP_KEYS.contains(&key.as_str()) || cfg.raw(&key).is_none() {
        return Err(CliError::parse("key", None, format!("cannot sweep `{key}` for this variant")));
    }
    let from = cfg.f64_opt("from")?.ok_or_else(|| CliError::parse("from", None, "missing required key"))?;
    let to = cfg.f64_opt("to")?.ok_or_else(|| CliError::parse("to", None, "missing required key"))?;
    let steps = cfg.usize_or("steps", 11)?;
    if steps < 2 {
        return Err(CliError::Validation("steps needs at least 2 values".into()));
    }
    let mut t = Table::new(&[
        "value", "c_bar", "c_underbar", "regime", "p_hat", "p_low_star", "p_high_star", "p_star", "p_check", "p_low",
        "p_high",
    ]);
    t.meta("key", Val::text(key.clone()));
    for x in linspace(from, to, steps) {
        let row = match cfg.with_value(&key, x).and_then(|c| linear_only(&c)) {
            Ok(s) => {
                let c = &s.cutoffs;
                vec![
                    x.into(),
                    c.c_bar.into(),
                    c.c_underbar.into(),
                    Val::text(s.regime.to_string()),
                    c.p_hat.into(),
                    c.p_low_star.into(),
                    c.p_high_star.into(),
                    c.p_star.into(),
                    c.p_check.into(),
                    c.p_low.into(),
                    c.p_high.into(),
                ]
            }
            Err(CliError::Validation(_)) => {
                let mut r = vec![x.into(), Val::Null, Val::Null, "invalid".into()];
                r.resize(11, Val::Null);
                r
            }
            Err(e) => return Err(e),
        };
        t.push(row);
    }
    Ok(vec![Artifact::main(Content::Table(t))])
}

fn diagnose(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let sol = linear_only(cfg)?;
    let mut t = Table::new(&["p", "V", "branch", "residual", "crossing_gap", "df_dalpha_gap"]);
    linear_meta(&mut t, &sol);
    let mut max_res = 0.0_f64;
    let mut max_cross = 0.0_f64;
    let mut max_df = 0.0_f64;
    for p in grid(cfg)? {
        let label = sol.segment_at(p).kind.label();
        match hjb_diagnostics(&sol, p) {
            Ok(d) => {
                max_res = max_res.max(d.residual);
                if let Some(g) = d.crossing_gap.filter(|g| g.is_finite()) {
                    max_cross = max_cross.max(g.abs());
                }
                if let Some(g) = d.df_dalpha_gap.filter(|g| g.is_finite()) {
                    max_df = max_df.max(g.abs());
                }
                t.push(vec![p.into(), sol.value(p).into(), label.into(), d.residual.into(), d.crossing_gap.into(), d.df_dalpha_gap.into()]);
            }
            Err(crate::Error::KinkPoint(_)) => {
                t.push(vec![p.into(), sol.value(p).into(), "kink".into(), Val::Null, Val::Null, Val::Null]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    t.meta("max_residual", max_res);
    t.meta("max_crossing_gap", max_cross);
    t.meta("max_df_dalpha_gap", max_df);
    for (name, gap) in smooth_pasting_gaps(&sol) {
        t.meta(format!("gap.{name}"), gap);
    }
    for (i, k) in kinks(&sol).iter().enumerate() {
        t.meta(format!("kink.{i}.p"), k.p);
        t.meta(format!("kink.{i}.left"), k.left);
        t.meta(format!("kink.{i}.right"), k.right);
    }
    Ok(vec![Artifact::main(Content::Table(t))])
}

fn two_period_label(c: TwoPeriodChoice) -> &'static str {
    match c {
        TwoPeriodChoice::Stop => "stop",
        TwoPeriodChoice::OwnBiased => "own_biased",
        TwoPeriodChoice::OppositeBiased => "opposite_biased",
    }
}

fn twoperiod(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    if cfg.variant != Variant::Baseline {
        return Err(CliError::Validation("twoperiod supports the baseline variant only".into()));
    }
    let params: &ModelParams = &cfg.params;
    let dt = positive(cfg, "dt", 1.0)?;
    let periods = cfg.usize_or("periods", 2)?;
    let n = cfg.usize_or("grid", 1001)?;
    if n < 2 {
        return Err(CliError::Validation("grid needs at least 2 points".into()));
    }
    let mut t = Table::new(&["p0", "value", "choice"]);
    t.meta("dt", dt);
    t.meta("periods", periods as f64);
    for (i, (b, below, above)) in two_period_thresholds(params, dt, periods, 1e-4).into_iter().enumerate() {
        t.meta(format!("threshold.{i}"), b);
        t.meta(format!("threshold.{i}.below"), two_period_label(below));
        t.meta(format!("threshold.{i}.above"), two_period_label(above));
    }
    for p in linspace(0.0, 1.0, n) {
        let (v, c) = two_period(params, dt, p, periods);
        t.push(vec![p.into(), v.into(), two_period_label(c).into()]);
    }
    Ok(vec![Artifact::main(Content::Table(t))])
}
