//! The one-particle jump process with generator
//! `L f(x) = ∫ b(x, y) (f(y) - f(x)) m̄(dy)`.
//!
//! A walker at `x` waits an exponential time with rate `V(x)` and then
//! jumps to `y` with law `b(x, y) m̄(dy) / V(x)`. Trajectories are piecewise
//! constant, so path functionals are integrated exactly segment by segment.
//! On absorbing box grids a jump may leave the box; the trajectory is then
//! marked as exited and every functional treats the walker as gone.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::lattice::Multi;
use crate::model::{Coords, DerivedModel, KernelOp, ModelError, Point, Repr, Stencil, MAX_DIM};
use crate::rng::RngStream;

/// One constant piece of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub state: Point,
    pub holding: f64,
}

/// Piecewise-constant path on `[0, horizon]`. The holding times add up to
/// at least `horizon` unless the walker left an absorbing box, in which
/// case `exited` is set and the path ends at the exit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpTrajectory {
    pub start: Point,
    pub segments: Vec<Segment>,
    pub horizon: f64,
    pub exited: bool,
}

impl JumpTrajectory {
    /// State occupied at time `t`, or `None` once the walker has exited.
    pub fn state_at(&self, t: f64) -> Option<Point> {
        let mut clock = 0.0;
        for seg in &self.segments {
            clock += seg.holding;
            if t < clock {
                return Some(seg.state);
            }
        }
        if self.exited {
            None
        } else {
            self.segments.last().map(|s| s.state)
        }
    }

    pub fn jumps(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }
}

/// `∫_0^horizon f(X(t)) dt` along a trajectory, exact for piecewise-constant
/// paths; time after an exit contributes nothing.
pub fn path_integral(traj: &JumpTrajectory, f: impl Fn(&Point) -> f64) -> f64 {
    let mut remaining = traj.horizon;
    let mut acc = 0.0;
    for seg in &traj.segments {
        if remaining <= 0.0 {
            break;
        }
        let dt = seg.holding.min(remaining);
        acc += f(&seg.state) * dt;
        remaining -= dt;
    }
    acc
}

/// `∫_0^horizon g(X(t), Y(t)) dt` for two trajectories over the same horizon.
pub fn pair_integral(
    x: &JumpTrajectory,
    y: &JumpTrajectory,
    g: impl Fn(&Point, &Point) -> f64,
) -> f64 {
    let mut remaining = x.horizon.min(y.horizon);
    let mut acc = 0.0;
    for (v, dt) in pair_pieces(x, y, g) {
        let dt = dt.min(remaining);
        acc += v * dt;
        remaining -= dt;
    }
    acc
}

/// Merged pieces `(g(X, Y), duration)` of two trajectories, up to the first
/// exit or the common horizon (the last piece may overshoot the horizon).
pub(crate) fn pair_pieces<'t>(
    x: &'t JumpTrajectory,
    y: &'t JumpTrajectory,
    g: impl Fn(&Point, &Point) -> f64 + 't,
) -> impl Iterator<Item = (f64, f64)> + 't {
    let horizon = x.horizon.min(y.horizon);
    let (mut i, mut j) = (0usize, 0usize);
    let mut ex = x.segments.first().map_or(0.0, |s| s.holding);
    let mut ey = y.segments.first().map_or(0.0, |s| s.holding);
    let mut t = 0.0;
    std::iter::from_fn(move || {
        if t >= horizon || i >= x.segments.len() || j >= y.segments.len() {
            return None;
        }
        let next = ex.min(ey);
        let piece = (g(&x.segments[i].state, &y.segments[j].state), next - t);
        t = next;
        if ex <= t {
            i += 1;
            if let Some(s) = x.segments.get(i) {
                ex += s.holding;
            }
        }
        if ey <= t {
            j += 1;
            if let Some(s) = y.segments.get(j) {
                ey += s.holding;
            }
        }
        Some(piece)
    })
}

/// Proposal used for rejection sampling of continuum jump targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Proposal {
    /// Draw the displacement from the kernel's own profile and accept with
    /// probability `Psi(y) / Psi_max`; exact, no envelope needed.
    KernelProfile,
    /// Centred Gaussian displacement; `envelope` must bound the ratio of the
    /// normalized kernel profile to the proposal density.
    Gaussian { sigma: f64, envelope: f64 },
    /// Uniform displacement in a ball; the kernel must vanish outside it.
    UniformBall { radius: f64, envelope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    pub proposal: Proposal,
    /// Rejection attempts allowed per jump before giving up.
    pub max_attempts: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            proposal: Proposal::KernelProfile,
            max_attempts: 100_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JumpError {
    #[error("jump process needs a critical model: {0}")]
    NotCritical(ModelError),
    #[error("target sampling at {at} exceeded {attempts} rejection attempts")]
    AttemptBudget { attempts: usize, at: String },
    #[error("proposal envelope too small at {at}: acceptance ratio {ratio:.3e} > 1")]
    Envelope { ratio: f64, at: String },
    #[error("non-finite or non-positive jump rate {rate} at {at}")]
    BadRate { rate: f64, at: String },
    #[error("point {0:?} is not representable in this backend")]
    Unrepresentable(Point),
}

enum Targets {
    /// Per-row inverse-CDF tables over `b(x_i, x_j) m̄_j`.
    Dense(Vec<Option<WeightedIndex<f64>>>),
    /// Offset tables for a lattice stencil; targets are accepted with
    /// probability `Psi(y) / Psi_max` unless Psi is constant.
    Separable([WeightedIndex<f64>; MAX_DIM], [usize; MAX_DIM]),
    General(WeightedIndex<f64>, Vec<Multi>),
    Continuum,
}

/// Immutable sampler bound to a derived model; cheap to share across
/// threads, each trajectory bringing its own random stream.
pub struct JumpSampler<'a> {
    model: &'a DerivedModel,
    targets: Targets,
    psi_constant: bool,
    options: SamplerOptions,
}

impl<'a> JumpSampler<'a> {
    /// Builds the target tables. Fails unless the model is critical, since
    /// only then is the total jump rate out of `x` equal to `V(x)`.
    pub fn new(model: &'a DerivedModel, options: SamplerOptions) -> Result<Self, JumpError> {
        model.check_criticality().map_err(JumpError::NotCritical)?;
        let (targets, psi_constant) = match model.repr() {
            Repr::Discrete(d) => match &d.op {
                KernelOp::Dense { .. } => {
                    let rows = (0..d.n)
                        .map(|i| {
                            let w: Vec<f64> = (0..d.n).map(|j| d.b_raw(i, j) * d.mbar[j]).collect();
                            WeightedIndex::new(&w).ok()
                        })
                        .collect();
                    (Targets::Dense(rows), true)
                }
                KernelOp::Stencil(st) => {
                    let constant = d.psi_is_constant();
                    match st {
                        Stencil::Separable {
                            factors, radius, ..
                        } => {
                            let tables = [0, 1, 2].map(|k| {
                                WeightedIndex::new(&factors[k]).expect("stencil factors carry mass")
                            });
                            (Targets::Separable(tables, *radius), constant)
                        }
                        Stencil::General {
                            offsets, weights, ..
                        } => {
                            let table =
                                WeightedIndex::new(weights).map_err(|_| JumpError::BadRate {
                                    rate: 0.0,
                                    at: "stencil".into(),
                                })?;
                            (Targets::General(table, offsets.clone()), constant)
                        }
                    }
                }
            },
            Repr::Continuum(c) => {
                match options.proposal {
                    Proposal::Gaussian { sigma, envelope }
                    | Proposal::UniformBall {
                        radius: sigma,
                        envelope,
                    } => {
                        if !(sigma > 0.0 && envelope >= 1.0) {
                            return Err(JumpError::Envelope {
                                ratio: envelope,
                                at: "proposal parameters".into(),
                            });
                        }
                    }
                    Proposal::KernelProfile => {}
                }
                (Targets::Continuum, c.psi_is_constant())
            }
        };
        Ok(Self {
            model,
            targets,
            psi_constant,
            options,
        })
    }

    pub fn model(&self) -> &DerivedModel {
        self.model
    }

    /// Exponential holding time with rate `V(x)`.
    pub fn holding<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Result<f64, JumpError> {
        let rate = self.model.v_at(x);
        if !(rate.is_finite() && rate > 0.0) {
            return Err(JumpError::BadRate {
                rate,
                at: format!("{x:?}"),
            });
        }
        let e: f64 = Exp1.sample(rng);
        Ok(e / rate)
    }

    /// Draws the next state; `None` means the walker left an absorbing box.
    pub fn jump<R: Rng + ?Sized>(
        &self,
        x: &Point,
        rng: &mut R,
    ) -> Result<Option<Point>, JumpError> {
        match (&self.targets, self.model.repr(), x) {
            (Targets::Dense(rows), _, Point::Node(i)) => {
                let row = rows
                    .get(*i)
                    .ok_or(JumpError::Unrepresentable(*x))?
                    .as_ref()
                    .ok_or(JumpError::BadRate {
                        rate: 0.0,
                        at: format!("node {i}"),
                    })?;
                Ok(Some(Point::Node(row.sample(rng))))
            }
            (Targets::Separable(..) | Targets::General(..), Repr::Discrete(d), Point::Node(i)) => {
                let lat = d
                    .lattice
                    .as_ref()
                    .expect("stencil backends carry a lattice");
                if *i >= d.n {
                    return Err(JumpError::Unrepresentable(*x));
                }
                let base = lat.multi(*i);
                for _ in 0..self.options.max_attempts {
                    let offset = match &self.targets {
                        Targets::Separable(tables, radius) => {
                            let mut o = [0i64; MAX_DIM];
                            for k in 0..MAX_DIM {
                                o[k] = tables[k].sample(rng) as i64 - radius[k] as i64;
                            }
                            o
                        }
                        Targets::General(table, offsets) => offsets[table.sample(rng)],
                        _ => unreachable!(),
                    };
                    let mut site = base;
                    for k in 0..MAX_DIM {
                        site[k] += offset[k];
                    }
                    let accept = self.psi_constant || {
                        let psi = d.psi_at_site(site).unwrap_or(0.0);
                        rng.random::<f64>() * d.psi_max < psi
                    };
                    if accept {
                        return Ok(lat.node(site).map(Point::Node));
                    }
                }
                Err(JumpError::AttemptBudget {
                    attempts: self.options.max_attempts,
                    at: format!("node {i}"),
                })
            }
            (Targets::Continuum, Repr::Continuum(c), Point::Site(s)) => {
                let dim = c.dim;
                let kernel = &c.kernel;
                let rate = kernel.rate().unwrap_or(0.0);
                for _ in 0..self.options.max_attempts {
                    let (z, ratio) = match self.options.proposal {
                        Proposal::KernelProfile => (kernel.sample_offset(dim, rng), 1.0),
                        Proposal::Gaussian { sigma, envelope } => {
                            let mut z = [0.0; MAX_DIM];
                            for v in z.iter_mut().take(dim) {
                                let n: f64 = StandardNormal.sample(rng);
                                *v = sigma * n;
                            }
                            let r2: f64 = z[..dim].iter().map(|v| v * v).sum();
                            let q = (-r2 / (2.0 * sigma * sigma)).exp()
                                / (2.0 * std::f64::consts::PI * sigma * sigma)
                                    .powf(dim as f64 / 2.0);
                            (z, kernel.profile(&z, dim) / rate / (envelope * q))
                        }
                        Proposal::UniformBall { radius, envelope } => {
                            let z = uniform_in_ball(dim, radius, rng);
                            let vol = std::f64::consts::PI.powf(dim as f64 / 2.0)
                                / statrs::function::gamma::gamma(dim as f64 / 2.0 + 1.0)
                                * radius.powi(dim as i32);
                            (z, kernel.profile(&z, dim) / rate * vol / envelope)
                        }
                    };
                    if ratio > 1.0 + 1e-12 {
                        return Err(JumpError::Envelope {
                            ratio,
                            at: format!("{s:?}"),
                        });
                    }
                    let mut y = *s;
                    for k in 0..dim {
                        y[k] += z[k];
                    }
                    let psi_ratio = if self.psi_constant {
                        1.0
                    } else {
                        c.psi(&y) / c.psi_max()
                    };
                    if rng.random::<f64>() < ratio * psi_ratio {
                        if c.window.boundary == crate::model::Boundary::Periodic {
                            c.window.wrap(&mut y);
                        }
                        return Ok(Some(Point::Site(y)));
                    }
                }
                Err(JumpError::AttemptBudget {
                    attempts: self.options.max_attempts,
                    at: format!("{s:?}"),
                })
            }
            _ => Err(JumpError::Unrepresentable(*x)),
        }
    }

    /// Samples a trajectory on `[0, horizon]` from `x0`.
    pub fn trajectory<R: Rng + ?Sized>(
        &self,
        x0: Point,
        horizon: f64,
        rng: &mut R,
    ) -> Result<JumpTrajectory, JumpError> {
        let mut segments = Vec::new();
        let mut exited = false;
        self.walk(x0, horizon, rng, |seg| segments.push(seg), || exited = true)?;
        Ok(JumpTrajectory {
            start: x0,
            segments,
            horizon,
            exited,
        })
    }

    /// Streams the segments of a trajectory without storing them. The last
    /// reported segment may extend past `horizon`; `on_exit` fires when the
    /// walker leaves an absorbing box.
    pub fn walk<R: Rng + ?Sized>(
        &self,
        x0: Point,
        horizon: f64,
        rng: &mut R,
        mut on_segment: impl FnMut(Segment),
        mut on_exit: impl FnMut(),
    ) -> Result<(), JumpError> {
        let mut state = x0;
        let mut clock = 0.0;
        loop {
            let holding = self.holding(&state, rng)?;
            on_segment(Segment { state, holding });
            clock += holding;
            if clock >= horizon {
                return Ok(());
            }
            match self.jump(&state, rng)? {
                Some(next) => state = next,
                None => {
                    on_exit();
                    return Ok(());
                }
            }
        }
    }

    /// `∫_0^horizon f(X(t)) dt` along a freshly sampled path.
    pub fn integrate<R: Rng + ?Sized>(
        &self,
        x0: Point,
        horizon: f64,
        rng: &mut R,
        f: impl Fn(&Point) -> f64,
    ) -> Result<f64, JumpError> {
        let mut remaining = horizon;
        let mut acc = 0.0;
        self.walk(
            x0,
            horizon,
            rng,
            |seg| {
                let dt = seg.holding.min(remaining);
                acc += f(&seg.state) * dt;
                remaining -= dt;
            },
            || {},
        )?;
        Ok(acc)
    }
}

fn uniform_in_ball<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Coords {
    loop {
        let mut z = [0.0; MAX_DIM];
        for v in z.iter_mut().take(dim) {
            *v = radius * (2.0 * rng.random::<f64>() - 1.0);
        }
        if z[..dim].iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return z;
        }
    }
}

/// Samples one trajectory from the stream `rng`.
pub fn sample_trajectory(
    sampler: &JumpSampler<'_>,
    x0: Point,
    horizon: f64,
    rng: RngStream,
) -> Result<JumpTrajectory, JumpError> {
    sampler.trajectory(x0, horizon, &mut rng.rng())
}

/// Two independent trajectories, driven by the children 0 and 1 of `rng`.
pub fn sample_pair(
    sampler: &JumpSampler<'_>,
    x0: Point,
    y0: Point,
    horizon: f64,
    rng: RngStream,
) -> Result<(JumpTrajectory, JumpTrajectory), JumpError> {
    let x = sampler.trajectory(x0, horizon, &mut rng.child(0).rng())?;
    let y = sampler.trajectory(y0, horizon, &mut rng.child(1).rng())?;
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(state: usize, holding: f64) -> Segment {
        Segment {
            state: Point::Node(state),
            holding,
        }
    }

    #[test]
    fn path_integral_is_exact_on_segments() {
        let traj = JumpTrajectory {
            start: Point::Node(0),
            segments: vec![seg(0, 0.5), seg(1, 1.0), seg(0, 5.0)],
            horizon: 2.0,
            exited: false,
        };
        assert_eq!(path_integral(&traj, |_| 3.0), 6.0);
        assert_eq!(path_integral(&traj, |_| 0.0), 0.0);
        let w = |p: &Point| if *p == Point::Node(0) { 2.0 } else { 0.0 };
        // 0.5 s at node 0, 1 s at node 1, then 0.5 s at node 0
        assert_eq!(path_integral(&traj, w), 2.0);
    }

    #[test]
    fn exited_paths_stop_contributing() {
        let traj = JumpTrajectory {
            start: Point::Node(0),
            segments: vec![seg(0, 0.25)],
            horizon: 10.0,
            exited: true,
        };
        assert_eq!(path_integral(&traj, |_| 1.0), 0.25);
        assert_eq!(traj.state_at(1.0), None);
    }

    #[test]
    fn pair_integral_merges_jump_times() {
        let x = JumpTrajectory {
            start: Point::Node(0),
            segments: vec![seg(0, 1.0), seg(1, 9.0)],
            horizon: 3.0,
            exited: false,
        };
        let y = JumpTrajectory {
            start: Point::Node(1),
            segments: vec![seg(1, 2.0), seg(0, 9.0)],
            horizon: 3.0,
            exited: false,
        };
        // states: [0,1): (0,1); [1,2): (1,1); [2,3): (1,0)
        let g = |a: &Point, b: &Point| if a == b { 1.0 } else { 0.0 };
        assert_eq!(pair_integral(&x, &y, g), 1.0);
        assert_eq!(pair_integral(&x, &y, |_, _| 2.0), 6.0);
    }
}
