//! Direct simulation of the contact process in a finite window.
//!
//! Each particle at `x` dies at rate `U(x) = V(x) + W(x)` and places an
//! offspring in `dy` at rate `a(y, x) m(dy)`. The event loop uses
//! uniformization: every particle carries the candidate rate
//! `r_max ≥ U(x) + ∫ a(y, x) m(dy)`, and a candidate at `x` becomes a death
//! with probability `U(x) / r_max`, a birth with probability
//! `∫ a(y, x) m(dy) / r_max`, and nothing otherwise. Offspring landing
//! outside an absorbing window are dropped, which thins births to the
//! window-restricted rate `∫_Λ a(y, x) m(dy)` exactly.
//!
//! On graphs and grids particles sit on nodes and a node may hold several
//! particles; correlation functions are taken relative to `m̄ = Ψ m` with
//! factorial moments on the diagonal.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::Field;
use crate::model::lattice::{Multi, Stencil};
use crate::model::{Boundary, DerivedModel, Discrete, KernelOp, Point, Repr, MAX_DIM};
use crate::rng::RngStream;
use crate::stats::{chunked, MeanVar};

/// Finite multiset of positions at a common time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfiguration {
    pub points: Vec<Point>,
    pub time: f64,
}

impl ParticleConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Occupation numbers of the `n` nodes of a discrete backend.
    pub fn counts(&self, n: usize) -> Vec<u32> {
        let mut c = vec![0; n];
        for p in &self.points {
            if let Point::Node(i) = p {
                c[*i] += 1;
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Birth,
    Death,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub position: Point,
}

/// Births and deaths in the order they happened.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    fn push(&mut self, event: Event) {
        debug_assert!(self.events.last().is_none_or(|e| e.time < event.time));
        self.events.push(event);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Switch off births (`a ≡ 0`).
    pub pure_death: bool,
    /// Abort once the population exceeds this size.
    pub population_cap: usize,
    pub record_events: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            pure_death: false,
            population_cap: 1_000_000,
            record_events: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParticleError {
    #[error("rho must be positive and finite, got {0}")]
    BadRho(f64),
    #[error("population reached {size} > cap {cap} at t = {time}")]
    PopulationCap { time: f64, size: usize, cap: usize },
    #[error("snapshot times must be sorted and not before the start time")]
    BadTimes,
    #[error("death rate {rate} at {at} exceeds the uniformization bound {bound}")]
    RateBound { rate: f64, bound: f64, at: String },
    #[error("{0}")]
    Unsupported(String),
}

enum Births {
    /// Per-parent tables over `a(y, x) m_y`.
    Dense(Vec<Option<WeightedIndex<f64>>>),
    Separable([WeightedIndex<f64>; MAX_DIM], [usize; MAX_DIM]),
    General(WeightedIndex<f64>, Vec<Multi>),
    Continuum,
}

/// Event sampler bound to a derived model.
pub struct ParticleSimulator<'a> {
    model: &'a DerivedModel,
    births: Births,
    /// Full offspring mass `∫ a(y, x) m(dy)` per node (one entry for
    /// translation-invariant backends).
    mass: Vec<f64>,
    r_max: f64,
    options: SimOptions,
}

impl<'a> ParticleSimulator<'a> {
    pub fn new(model: &'a DerivedModel, options: SimOptions) -> Result<Self, ParticleError> {
        let (births, mass) = match model.repr() {
            Repr::Discrete(d) => match &d.op {
                KernelOp::Dense { a } => {
                    let n = d.n;
                    let tables = (0..n)
                        .map(|x| {
                            let w: Vec<f64> = (0..n).map(|y| a[y * n + x] * d.m[y]).collect();
                            WeightedIndex::new(&w).ok()
                        })
                        .collect();
                    (Births::Dense(tables), d.offspring_mass())
                }
                KernelOp::Stencil(st) => {
                    let births = match st {
                        Stencil::Separable {
                            factors, radius, ..
                        } => Births::Separable(
                            [0, 1, 2].map(|k| {
                                WeightedIndex::new(&factors[k]).expect("stencil factors carry mass")
                            }),
                            *radius,
                        ),
                        Stencil::General {
                            offsets, weights, ..
                        } => Births::General(
                            WeightedIndex::new(weights)
                                .map_err(|e| ParticleError::Unsupported(e.to_string()))?,
                            offsets.clone(),
                        ),
                    };
                    (births, vec![d.offspring_mass()[0]])
                }
            },
            Repr::Continuum(c) => (Births::Continuum, vec![c.offspring_mass(&[0.0; MAX_DIM])]),
        };
        let mass_max = if options.pure_death {
            0.0
        } else {
            mass.iter().copied().fold(0.0, f64::max)
        };
        let u_bound = match model.repr() {
            Repr::Discrete(d) => d.u.iter().copied().fold(0.0, f64::max),
            // probe-based bound on V; violations are detected during the run
            Repr::Continuum(c) if !c.psi_is_constant() => 1.25 * model.u_max(),
            Repr::Continuum(_) => model.u_max(),
        };
        Ok(Self {
            model,
            births,
            mass,
            r_max: u_bound + mass_max,
            options,
        })
    }

    fn death_rate(&self, p: &Point) -> f64 {
        self.model.v_at(p) + self.model.w_at(p)
    }

    fn birth_mass(&self, p: &Point) -> f64 {
        if self.options.pure_death {
            return 0.0;
        }
        match p {
            Point::Node(i) if self.mass.len() > 1 => self.mass[*i],
            _ => self.mass[0],
        }
    }

    /// Offspring position for a parent at `p`, or `None` if it lands
    /// outside the window.
    fn offspring<R: Rng + ?Sized>(&self, p: &Point, rng: &mut R) -> Option<Point> {
        match (&self.births, p, self.model.repr()) {
            (Births::Dense(tables), Point::Node(x), _) => {
                tables[*x].as_ref().map(|t| Point::Node(t.sample(rng)))
            }
            (Births::Separable(tables, radius), Point::Node(x), Repr::Discrete(d)) => {
                let lat = d.lattice.as_ref()?;
                let mut site = lat.multi(*x);
                for k in 0..MAX_DIM {
                    site[k] += tables[k].sample(rng) as i64 - radius[k] as i64;
                }
                lat.node(site).map(Point::Node)
            }
            (Births::General(table, offsets), Point::Node(x), Repr::Discrete(d)) => {
                let lat = d.lattice.as_ref()?;
                let o = offsets[table.sample(rng)];
                let mut site = lat.multi(*x);
                for k in 0..MAX_DIM {
                    site[k] += o[k];
                }
                lat.node(site).map(Point::Node)
            }
            (Births::Continuum, Point::Site(x), Repr::Continuum(c)) => {
                let z = c.kernel.sample_offset(c.dim, rng);
                let mut y = *x;
                for k in 0..c.dim {
                    y[k] += z[k];
                }
                match c.window.boundary {
                    Boundary::Periodic => {
                        c.window.wrap(&mut y);
                        Some(Point::Site(y))
                    }
                    _ => c.window.contains(&y).then_some(Point::Site(y)),
                }
            }
            _ => None,
        }
    }

    /// Runs from `config` and returns the configuration at each of `times`.
    pub fn run<R: Rng + ?Sized>(
        &self,
        config: &ParticleConfiguration,
        times: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<ParticleConfiguration>, EventLog), ParticleError> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < config.time)
        {
            return Err(ParticleError::BadTimes);
        }
        let mut points = config.points.clone();
        let mut t = config.time;
        let mut log = EventLog::default();
        let mut snapshots = Vec::with_capacity(times.len());
        for &target in times {
            while !points.is_empty() {
                let tau: f64 = Exp1.sample(rng);
                let next = t + tau / (points.len() as f64 * self.r_max);
                if next > target {
                    break;
                }
                t = next;
                let idx = rng.random_range(0..points.len());
                let p = points[idx];
                let u = self.death_rate(&p);
                let m = self.birth_mass(&p);
                if u + m > self.r_max {
                    return Err(ParticleError::RateBound {
                        rate: u + m,
                        bound: self.r_max,
                        at: format!("{p:?}"),
                    });
                }
                let r = rng.random::<f64>() * self.r_max;
                if r < u {
                    points.swap_remove(idx);
                    if self.options.record_events {
                        log.push(Event {
                            time: t,
                            kind: EventKind::Death,
                            position: p,
                        });
                    }
                } else if r < u + m {
                    if let Some(y) = self.offspring(&p, rng) {
                        points.push(y);
                        if points.len() > self.options.population_cap {
                            return Err(ParticleError::PopulationCap {
                                time: t,
                                size: points.len(),
                                cap: self.options.population_cap,
                            });
                        }
                        if self.options.record_events {
                            log.push(Event {
                                time: t,
                                kind: EventKind::Birth,
                                position: y,
                            });
                        }
                    }
                }
            }
            // no event before `target`; by memorylessness restart there
            t = target;
            snapshots.push(ParticleConfiguration {
                points: points.clone(),
                time: target,
            });
        }
        Ok((snapshots, log))
    }
}

/// Runs `config` up to `horizon`; see [`ParticleSimulator::run`].
pub fn simulate(
    config: &ParticleConfiguration,
    model: &DerivedModel,
    horizon: f64,
    options: SimOptions,
    rng: RngStream,
) -> Result<(ParticleConfiguration, EventLog), ParticleError> {
    let sim = ParticleSimulator::new(model, options)?;
    let (mut snaps, log) = sim.run(config, &[horizon], &mut rng.rng())?;
    Ok((snaps.pop().expect("one snapshot"), log))
}

/// Poisson configuration with intensity `ρ m̄` on the model's space, so that
/// `k_0^(n) ≡ ρ^n`.
pub fn sample_poisson_initial<R: Rng + ?Sized>(
    model: &DerivedModel,
    rho: f64,
    rng: &mut R,
) -> Result<ParticleConfiguration, ParticleError> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(ParticleError::BadRho(rho));
    }
    let mut points = Vec::new();
    match model.repr() {
        Repr::Discrete(d) => {
            for (i, mb) in d.mbar.iter().enumerate() {
                let c = poisson(rho * mb, rng);
                points.extend(std::iter::repeat_n(Point::Node(i), c));
            }
        }
        Repr::Continuum(c) => {
            // thinning of a homogeneous process at intensity ρ Ψ_max
            let psi_max = c.psi_max();
            let count = poisson(rho * psi_max * c.window.volume(), rng);
            for _ in 0..count {
                let mut x = [0.0; MAX_DIM];
                for k in 0..c.dim {
                    x[k] = c.window.lower[k]
                        + rng.random::<f64>() * (c.window.upper[k] - c.window.lower[k]);
                }
                if rng.random::<f64>() * psi_max < c.psi(&x) {
                    points.push(Point::Site(x));
                }
            }
        }
    }
    Ok(ParticleConfiguration { points, time: 0.0 })
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as usize
}

/// Regions over which counts are aggregated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Binning {
    /// Explicit node sets of a discrete backend.
    Nodes { bins: Vec<Vec<usize>> },
    /// Regular cells over a box of a continuum window.
    Cells {
        lower: Vec<f64>,
        upper: Vec<f64>,
        counts: Vec<usize>,
    },
}

/// Moment estimates from an ensemble at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCorrelations {
    pub time: f64,
    pub samples: usize,
    /// `m̄(bin)`.
    pub bin_mass: Vec<f64>,
    pub k1: Vec<f64>,
    pub k1_se: Vec<f64>,
    /// Row-major over bin pairs; empty when only first moments were asked.
    pub k2: Vec<f64>,
    pub k2_se: Vec<f64>,
    pub warnings: Vec<String>,
}

enum Locator {
    Nodes(Vec<Option<usize>>),
    Cells {
        lower: Vec<f64>,
        width: Vec<f64>,
        counts: Vec<usize>,
    },
}

/// Streaming estimator of binned `k¹` and `k²`.
pub struct CorrelationAccumulator {
    locator: Locator,
    bin_mass: Vec<f64>,
    order: usize,
    time: f64,
    k1: Vec<MeanVar>,
    k2: Vec<MeanVar>,
}

impl CorrelationAccumulator {
    pub fn new(
        model: &DerivedModel,
        binning: &Binning,
        order: usize,
    ) -> Result<Self, ParticleError> {
        if !(1..=2).contains(&order) {
            return Err(ParticleError::Unsupported(format!("moment order {order}")));
        }
        let (locator, bin_mass) = match (binning, model.repr()) {
            (Binning::Nodes { bins }, Repr::Discrete(d)) => {
                let mut of = vec![None; d.n];
                let mut mass = vec![0.0; bins.len()];
                for (b, nodes) in bins.iter().enumerate() {
                    for &i in nodes {
                        if i >= d.n || of[i].is_some() {
                            return Err(ParticleError::Unsupported(format!(
                                "bin {b}: node {i} invalid or repeated"
                            )));
                        }
                        of[i] = Some(b);
                        mass[b] += d.mbar[i];
                    }
                }
                (Locator::Nodes(of), mass)
            }
            (
                Binning::Cells {
                    lower,
                    upper,
                    counts,
                },
                Repr::Continuum(c),
            ) => {
                if lower.len() != c.dim || upper.len() != c.dim || counts.len() != c.dim {
                    return Err(ParticleError::Unsupported(
                        "cell binning needs one entry per axis".into(),
                    ));
                }
                let width: Vec<f64> = (0..c.dim)
                    .map(|k| (upper[k] - lower[k]) / counts[k] as f64)
                    .collect();
                let total: usize = counts.iter().product();
                let mass = (0..total)
                    .map(|b| cell_mass(b, lower, &width, counts, |x| c.psi(x)))
                    .collect();
                (
                    Locator::Cells {
                        lower: lower.clone(),
                        width,
                        counts: counts.clone(),
                    },
                    mass,
                )
            }
            _ => {
                return Err(ParticleError::Unsupported(
                    "binning does not match the backend".into(),
                ))
            }
        };
        let bins = bin_mass.len();
        Ok(Self {
            locator,
            bin_mass,
            order,
            time: f64::NAN,
            k1: vec![MeanVar::new(); bins],
            k2: if order == 2 {
                vec![MeanVar::new(); bins * bins]
            } else {
                Vec::new()
            },
        })
    }

    fn bin_of(&self, p: &Point) -> Option<usize> {
        match (&self.locator, p) {
            (Locator::Nodes(of), Point::Node(i)) => of.get(*i).copied().flatten(),
            (
                Locator::Cells {
                    lower,
                    width,
                    counts,
                },
                Point::Site(x),
            ) => {
                let mut idx = 0usize;
                for k in 0..counts.len() {
                    let c = ((x[k] - lower[k]) / width[k]).floor();
                    if c < 0.0 || c >= counts[k] as f64 {
                        return None;
                    }
                    idx = idx * counts[k] + c as usize;
                }
                Some(idx)
            }
            _ => None,
        }
    }

    /// Empty accumulator with the same bins.
    pub fn fresh(&self) -> Self {
        Self {
            locator: match &self.locator {
                Locator::Nodes(of) => Locator::Nodes(of.clone()),
                Locator::Cells {
                    lower,
                    width,
                    counts,
                } => Locator::Cells {
                    lower: lower.clone(),
                    width: width.clone(),
                    counts: counts.clone(),
                },
            },
            bin_mass: self.bin_mass.clone(),
            order: self.order,
            time: f64::NAN,
            k1: vec![MeanVar::new(); self.k1.len()],
            k2: vec![MeanVar::new(); self.k2.len()],
        }
    }

    pub fn push(&mut self, config: &ParticleConfiguration) {
        self.time = config.time;
        let bins = self.bin_mass.len();
        let mut c = vec![0.0f64; bins];
        for p in &config.points {
            if let Some(b) = self.bin_of(p) {
                c[b] += 1.0;
            }
        }
        for (acc, x) in self.k1.iter_mut().zip(&c) {
            acc.push(*x);
        }
        if self.order == 2 {
            for i in 0..bins {
                for j in 0..bins {
                    let pairs = if i == j {
                        c[i] * (c[i] - 1.0)
                    } else {
                        c[i] * c[j]
                    };
                    self.k2[i * bins + j].push(pairs);
                }
            }
        }
    }

    pub fn merge(&mut self, other: &CorrelationAccumulator) {
        if self.time.is_nan() {
            self.time = other.time;
        }
        for (a, b) in self.k1.iter_mut().zip(&other.k1) {
            a.merge(b);
        }
        for (a, b) in self.k2.iter_mut().zip(&other.k2) {
            a.merge(b);
        }
    }

    /// Normalized estimates; bins expecting fewer than `min_expected`
    /// points produce a warning.
    pub fn finish(&self, min_expected: f64) -> EmpiricalCorrelations {
        let bins = self.bin_mass.len();
        let m = &self.bin_mass;
        let mut warnings = Vec::new();
        for (b, acc) in self.k1.iter().enumerate() {
            if acc.mean() < min_expected {
                warnings.push(format!(
                    "bin {b}: mean count {:.3} below the minimum {min_expected}",
                    acc.mean()
                ));
            }
        }
        let (mut k2, mut k2_se) = (Vec::new(), Vec::new());
        for (idx, acc) in self.k2.iter().enumerate() {
            let norm = m[idx / bins] * m[idx % bins];
            k2.push(acc.mean() / norm);
            k2_se.push(acc.std_error() / norm);
        }
        EmpiricalCorrelations {
            time: self.time,
            samples: self.k1.first().map_or(0, |a| a.count() as usize),
            bin_mass: m.clone(),
            k1: self.k1.iter().zip(m).map(|(a, w)| a.mean() / w).collect(),
            k1_se: self
                .k1
                .iter()
                .zip(m)
                .map(|(a, w)| a.std_error() / w)
                .collect(),
            k2,
            k2_se,
            warnings,
        }
    }
}

/// `∫_cell Ψ dx` by an 8-point-per-axis midpoint rule.
fn cell_mass(
    b: usize,
    lower: &[f64],
    width: &[f64],
    counts: &[usize],
    psi: impl Fn(&[f64; MAX_DIM]) -> f64,
) -> f64 {
    const SUB: usize = 8;
    let dim = counts.len();
    let mut origin = [0.0; MAX_DIM];
    let mut rest = b;
    for k in (0..dim).rev() {
        origin[k] = lower[k] + (rest % counts[k]) as f64 * width[k];
        rest /= counts[k];
    }
    let total = SUB.pow(dim as u32);
    let mut acc = 0.0;
    for s in 0..total {
        let mut x = origin;
        let mut r = s;
        for k in 0..dim {
            x[k] += ((r % SUB) as f64 + 0.5) / SUB as f64 * width[k];
            r /= SUB;
        }
        acc += psi(&x);
    }
    acc / total as f64 * width.iter().product::<f64>()
}

/// Binned `k¹`, `k²` estimates from an ensemble of configurations at a
/// common time.
pub fn estimate_correlations(
    ensemble: &[ParticleConfiguration],
    model: &DerivedModel,
    binning: &Binning,
    order: usize,
    min_expected: f64,
) -> Result<EmpiricalCorrelations, ParticleError> {
    let mut acc = CorrelationAccumulator::new(model, binning, order)?;
    for c in ensemble {
        acc.push(c);
    }
    Ok(acc.finish(min_expected))
}

/// Independent runs from Poisson data, run `i` on stream `rng.child(i)`;
/// returns binned estimates at each of `times`.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    model: &DerivedModel,
    rho: f64,
    times: &[f64],
    runs: usize,
    binning: &Binning,
    order: usize,
    options: SimOptions,
    min_expected: f64,
    rng: RngStream,
) -> Result<Vec<EmpiricalCorrelations>, ParticleError> {
    let sim = ParticleSimulator::new(model, options)?;
    let template = CorrelationAccumulator::new(model, binning, order)?;
    let parts = chunked(runs, 64, |range| {
        let mut accs: Vec<CorrelationAccumulator> =
            times.iter().map(|_| template.fresh()).collect();
        for i in range {
            let mut r = rng.child(i as u64).rng();
            let start = sample_poisson_initial(model, rho, &mut r)?;
            let (snaps, _) = sim.run(&start, times, &mut r)?;
            for (acc, snap) in accs.iter_mut().zip(&snaps) {
                acc.push(snap);
            }
        }
        Ok::<_, ParticleError>(accs)
    });
    let mut total: Vec<CorrelationAccumulator> = times.iter().map(|_| template.fresh()).collect();
    for part in parts {
        for (acc, p) in total.iter_mut().zip(&part?) {
            acc.merge(p);
        }
    }
    Ok(total.iter().map(|a| a.finish(min_expected)).collect())
}

/// Hierarchy fields on a discrete backend averaged over node bins with the
/// weights of `m̄`, for direct comparison with [`EmpiricalCorrelations`].
pub fn bin_fields(
    disc: &Discrete,
    bins: &[Vec<usize>],
    k1: &Field,
    k2: Option<&Field>,
) -> (Vec<f64>, Vec<f64>) {
    let mass: Vec<f64> = bins
        .iter()
        .map(|b| b.iter().map(|&i| disc.mbar[i]).sum())
        .collect();
    let b1 = bins
        .iter()
        .zip(&mass)
        .map(|(b, m)| b.iter().map(|&i| k1.values[i] * disc.mbar[i]).sum::<f64>() / m)
        .collect();
    let b2 = match k2 {
        None => Vec::new(),
        Some(k2) => {
            let mut out = Vec::with_capacity(bins.len() * bins.len());
            for (bi, mi) in bins.iter().zip(&mass) {
                for (bj, mj) in bins.iter().zip(&mass) {
                    let mut acc = 0.0;
                    for &x in bi {
                        for &y in bj {
                            acc += k2.get2(x, y) * disc.mbar[x] * disc.mbar[y];
                        }
                    }
                    out.push(acc / (mi * mj));
                }
            }
            out
        }
    };
    (b1, b2)
}
