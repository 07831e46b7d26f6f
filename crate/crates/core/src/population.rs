//! Evolution of a population of decision makers who all follow the optimal
//! policy while the true state is fixed.
//!
//! The belief distribution is a set of atoms plus cells of constant density.
//! Every element follows the deterministic no-news path of its initial belief
//! and keeps the exact survival probability `exp(-∫ hazard)`; the complement
//! moves to the atom at the revealed state. No sampling is involved.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{NoNewsPath, PolicyMap, Terminal};
use crate::error::{Error, Result};
use crate::model::State;
use crate::numeric::linspace;
use crate::policy::{Choice, RegimeSolution};

/// Initial belief distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform,
    /// Normal restricted to [0, 1].
    TruncatedNormal { mean: f64, sd: f64 },
    /// Piecewise-linear density through `(belief, density)` nodes.
    Nodes { nodes: Vec<(f64, f64)> },
    PointMass { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Mass spread evenly over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl Cell {
    pub fn density(&self) -> f64 {
        self.mass / (self.hi - self.lo)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Mass inside `[a, b]`.
    fn mass_in(&self, a: f64, b: f64) -> f64 {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        if hi <= lo {
            0.0
        } else {
            self.mass * (hi - lo) / (self.hi - self.lo)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BeliefMeasure {
    pub atoms: Vec<Atom>,
    pub cells: Vec<Cell>,
}

impl BeliefMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.cells.iter().map(|c| c.mass).sum::<f64>()
    }

    /// Mass at beliefs `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.location <= x).map(|a| a.mass).sum::<f64>()
            + self.cells.iter().map(|c| c.mass_in(f64::NEG_INFINITY, x)).sum::<f64>()
    }

    /// The part of the measure on `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        BeliefMeasure {
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.location >= lo && a.location <= hi)
                .copied()
                .collect(),
            cells: self
                .cells
                .iter()
                .filter_map(|c| {
                    let m = c.mass_in(lo, hi);
                    (m > 0.0).then(|| Cell { lo: c.lo.max(lo), hi: c.hi.min(hi), mass: m })
                })
                .collect(),
        }
    }

    /// Rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.total_mass();
        if !(m > 0.0) {
            return Err(Error::InvalidSpec("measure has no mass".into()));
        }
        Ok(BeliefMeasure {
            atoms: self.atoms.iter().map(|a| Atom { mass: a.mass / m, ..*a }).collect(),
            cells: self.cells.iter().map(|c| Cell { mass: c.mass / m, ..*c }).collect(),
        })
    }

    /// Splits cells at the given beliefs.
    pub fn split_at(&self, points: &[f64]) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len() + points.len());
        for c in &self.cells {
            let mut edges = vec![c.lo];
            edges.extend(points.iter().copied().filter(|&x| x > c.lo && x < c.hi));
            edges.push(c.hi);
            for w in edges.windows(2) {
                cells.push(Cell { lo: w[0], hi: w[1], mass: c.mass_in(w[0], w[1]) });
            }
        }
        BeliefMeasure { atoms: self.atoms.clone(), cells }
    }
}

/// Builds a unit-mass measure with `n_cells` equal-width cells.
pub fn init_population(spec: &DistributionSpec, n_cells: usize) -> Result<BeliefMeasure> {
    let edges = linspace(0.0, 1.0, n_cells.max(1) + 1);
    let cell_masses: Vec<f64> = match spec {
        DistributionSpec::PointMass { at } => {
            if !(0.0..=1.0).contains(at) {
                return Err(Error::InvalidSpec(format!("point mass at {at} outside [0, 1]")));
            }
            return Ok(BeliefMeasure { atoms: vec![Atom { location: *at, mass: 1.0 }], cells: vec![] });
        }
        DistributionSpec::Uniform => edges.windows(2).map(|w| w[1] - w[0]).collect(),
        DistributionSpec::TruncatedNormal { mean, sd } => {
            let n = Normal::new(*mean, *sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            edges.windows(2).map(|w| n.cdf(w[1]) - n.cdf(w[0])).collect()
        }
        DistributionSpec::Nodes { nodes } => {
            if nodes.len() < 2 {
                return Err(Error::InvalidSpec("need at least two density nodes".into()));
            }
            for w in nodes.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(Error::InvalidSpec("node beliefs must increase".into()));
                }
            }
            if let Some(&(x, d)) = nodes.iter().find(|n| n.1 < 0.0 || !n.1.is_finite()) {
                return Err(Error::InvalidSpec(format!("negative density {d} at {x}")));
            }
            if nodes[0].0 < 0.0 || nodes[nodes.len() - 1].0 > 1.0 {
                return Err(Error::InvalidSpec("nodes must lie in [0, 1]".into()));
            }
            edges.windows(2).map(|w| linear_integral(nodes, w[0], w[1])).collect()
        }
    };
    let measure = BeliefMeasure {
        atoms: vec![],
        cells: edges
            .windows(2)
            .zip(cell_masses)
            .map(|(w, mass)| Cell { lo: w[0], hi: w[1], mass })
            .collect(),
    };
    measure.normalized()
}

/// Integral of the piecewise-linear interpolant of `nodes` over `[a, b]`.
fn linear_integral(nodes: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for w in nodes.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let lo = x0.max(a);
        let hi = x1.min(b);
        if hi > lo {
            let f = |x: f64| y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            total += 0.5 * (f(lo) + f(hi)) * (hi - lo);
        }
    }
    total
}

/// Shares of the population by information source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MediaShare {
    pub l_outlet: f64,
    pub r_outlet: f64,
    pub multi_home: f64,
    pub none: f64,
}

/// Where an element gets its news at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Media {
    LOutlet,
    ROutlet,
    MultiHome,
    None,
}

impl Media {
    pub fn label(&self) -> &'static str {
        match self {
            Media::LOutlet => "l_outlet",
            Media::ROutlet => "r_outlet",
            Media::MultiHome => "multi_home",
            Media::None => "none",
        }
    }
}

/// An atom or cell tagged with current media use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Element {
    Atom { location: f64, mass: f64, media: Media },
    Cell { lo: f64, hi: f64, mass: f64, media: Media },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSnapshot {
    pub time: f64,
    pub measure: BeliefMeasure,
    pub elements: Vec<Element>,
    pub media_share: MediaShare,
    /// `None` when one half of the distribution is empty.
    pub polarization: Option<f64>,
}

struct Tracked {
    mass: f64,
    center: NoNewsPath,
    // edge paths; `None` for atoms
    edges: Option<(NoNewsPath, NoNewsPath)>,
}

fn media_of(sol: &RegimeSolution, choice: Choice) -> Media {
    match choice {
        Choice::Stop(_) => Media::None,
        Choice::Attend(a) if a == sol.tech.alpha_s => Media::MultiHome,
        Choice::Attend(a) if a == sol.tech.alpha_hi => Media::LOutlet,
        Choice::Attend(_) => Media::ROutlet,
    }
}

/// Snapshots of the population at each of `times`.
pub fn evolve(sol: &RegimeSolution, measure: &BeliefMeasure, truth: State, times: &[f64]) -> Vec<PopulationSnapshot> {
    let policy = PolicyMap::from_solution(sol);
    let measure = measure.split_at(&sol.breakpoints());
    let mut tracked: Vec<Tracked> = measure
        .atoms
        .iter()
        .map(|a| Tracked { mass: a.mass, center: NoNewsPath::new(&policy, a.location), edges: None })
        .collect();
    tracked.extend(measure.cells.iter().filter(|c| c.mass > 0.0).map(|c| Tracked {
        mass: c.mass,
        center: NoNewsPath::new(&policy, c.center()),
        edges: Some((NoNewsPath::new(&policy, c.lo), NoNewsPath::new(&policy, c.hi))),
    }));
    let revealed = match truth {
        State::L => 0.0,
        State::R => 1.0,
    };
    times
        .iter()
        .map(|&t| {
            let mut elements = Vec::with_capacity(tracked.len() + 1);
            let mut absorbed = 0.0;
            for e in &tracked {
                let alive = e.mass * (-e.center.hazard_to(truth, t)).exp();
                absorbed += e.mass - alive;
                let media = media_of(sol, e.center.choice_at(t));
                let p = e.center.belief_at(t);
                let settled = match e.center.terminal {
                    Terminal::Stop { time, .. } => time <= t,
                    Terminal::Never => e.center.legs.last().is_some_and(|l| {
                        l.t1.is_infinite() && l.t0 <= t && l.p0 == l.p1
                    }),
                };
                let started_still = e.center.legs.is_empty();
                match &e.edges {
                    Some((lo, hi)) if !(settled && !started_still) => {
                        let (a, b) = (lo.belief_at(t), hi.belief_at(t));
                        let (a, b) = if a <= b { (a, b) } else { (b, a) };
                        if b - a > 1e-15 {
                            elements.push(Element::Cell { lo: a, hi: b, mass: alive, media });
                        } else {
                            elements.push(Element::Atom { location: p, mass: alive, media });
                        }
                    }
                    _ => elements.push(Element::Atom { location: p, mass: alive, media }),
                }
            }
            elements.push(Element::Atom { location: revealed, mass: absorbed, media: Media::None });
            snapshot(t, elements)
        })
        .collect()
}

/// Evenly spaced snapshot times `0, dt, 2dt, …` up to `t_end`.
pub fn snapshot_times(dt: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / dt).round() as usize;
    (0..=n).map(|i| (i as f64 * dt).min(t_end)).collect()
}

fn snapshot(time: f64, elements: Vec<Element>) -> PopulationSnapshot {
    let mut share = MediaShare::default();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut cells = Vec::new();
    for e in &elements {
        let (mass, media) = match *e {
            Element::Atom { location, mass, media } => {
                match atoms.iter_mut().find(|a| (a.location - location).abs() <= 1e-12) {
                    Some(a) => a.mass += mass,
                    None => atoms.push(Atom { location, mass }),
                }
                (mass, media)
            }
            Element::Cell { lo, hi, mass, media } => {
                cells.push(Cell { lo, hi, mass });
                (mass, media)
            }
        };
        match media {
            Media::LOutlet => share.l_outlet += mass,
            Media::ROutlet => share.r_outlet += mass,
            Media::MultiHome => share.multi_home += mass,
            Media::None => share.none += mass,
        }
    }
    atoms.retain(|a| a.mass > 0.0);
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    cells.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let measure = BeliefMeasure { atoms, cells };
    let total = measure.total_mass();
    if total > 0.0 {
        share.l_outlet /= total;
        share.r_outlet /= total;
        share.multi_home /= total;
        share.none /= total;
    }
    let polarization = polarization_metric(&measure).ok();
    PopulationSnapshot { time, measure, elements, media_share: share, polarization }
}

/// Smallest belief at which the cumulative mass reaches `target`.
///
/// Advection preserves order, so cells never overlap and the distribution
/// function is linear between consecutive cell edges apart from atom jumps.
fn quantile(measure: &BeliefMeasure, target: f64) -> f64 {
    let mut pts: Vec<f64> = measure.atoms.iter().map(|a| a.location).collect();
    for c in &measure.cells {
        pts.push(c.lo);
        pts.push(c.hi);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut prev: Option<(f64, f64)> = None;
    for &x in &pts {
        let fx = measure.cdf(x);
        if fx >= target {
            let jump: f64 = measure.atoms.iter().filter(|a| a.location == x).map(|a| a.mass).sum();
            if let Some((px, fp)) = prev {
                let below = fx - jump;
                if target <= below && below > fp {
                    return px + (target - fp) / (below - fp) * (x - px);
                }
            }
            return x;
        }
        prev = Some((x, fx));
    }
    pts.last().copied().unwrap_or(0.5)
}

/// Median belief among those at or above 1/2 minus the median among those at
/// or below 1/2. Atoms at exactly 1/2 count in both halves.
pub fn polarization_metric(measure: &BeliefMeasure) -> Result<f64> {
    let upper = measure.restrict(0.5, 1.0);
    let lower = measure.restrict(0.0, 0.5);
    let (mu, ml) = (upper.total_mass(), lower.total_mass());
    if !(mu > 0.0) || !(ml > 0.0) {
        return Err(Error::EmptyHalf);
    }
    Ok(quantile(&upper, 0.5 * mu) - quantile(&lower, 0.5 * ml))
}
