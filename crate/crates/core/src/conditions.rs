//! Monte Carlo estimates of the transience constant `H` and the
//! W-integrability constant `L`, with a power-law tail fit that decides
//! whether the time integrals converge.
//!
//! Every estimator samples walkers of the jump process, records the
//! integrand on a time grid (for the tail fit) and integrates it exactly
//! along each piecewise-constant path (for the constant itself). Reported
//! constants are maxima over a finite probe set, hence labelled `Ĥ`, `L̂`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jump::{pair_pieces, JumpError, JumpSampler};
use crate::model::Point;
use crate::rng::RngStream;
use crate::stats::{chunked, mixed_time_grid, trapezoid, CurveStats, MeanVar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

impl Verdict {
    /// Worst-case combination: one diverging probe makes the whole report
    /// diverge, and convergence must hold at every probe.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Diverging, _) | (_, Diverging) => Diverging,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionOptions {
    /// Walkers (or walker pairs) per probe.
    pub ensemble: usize,
    /// Uniform grid points before the geometric part of the time grid.
    pub linear_points: usize,
    /// Geometric grid points up to the horizon.
    pub log_points: usize,
    /// Largest extrapolated tail mass compatible with a converged verdict.
    pub tail_tolerance: f64,
    /// Ensemble members per parallel work item.
    pub chunk: usize,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            ensemble: 2000,
            linear_points: 40,
            log_points: 60,
            tail_tolerance: 1e-2,
            chunk: 64,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionError {
    #[error("probe set is empty")]
    EmptyProbe,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Jump(#[from] JumpError),
}

/// Power-law classification of an integrand tail over the final decades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Power-law exponent of `t` implied by the last two decades; `-inf`
    /// for a vanishing tail.
    pub slope: f64,
    /// Upper estimate of `∫_T^∞` (infinite unless the tail decays).
    pub tail_mass: f64,
    pub verdict: Verdict,
}

/// Number of standard errors separating a resolved signal from noise in
/// the tail classification.
pub const RESOLUTION_Z: f64 = 3.0;

/// Masses of an integrand over the last two decades before the horizon,
/// `M1` on `[T/100, T/10]` and `M2` on `[T/10, T]`, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecadeMasses {
    pub m1: f64,
    pub se1: f64,
    pub m2: f64,
    pub se2: f64,
}

/// Grid slice covering `[a, b]` (one point of slack on the left).
fn window(times: &[f64], a: f64, b: f64) -> std::ops::Range<usize> {
    let i = times.partition_point(|&t| t < a).saturating_sub(1);
    let j = times.partition_point(|&t| t <= b).max(i + 1);
    i..j
}

fn decade_windows(times: &[f64]) -> [std::ops::Range<usize>; 2] {
    let horizon = times.last().copied().unwrap_or(0.0);
    [
        window(times, horizon / 100.0, horizon / 10.0),
        window(times, horizon / 10.0, horizon),
    ]
}

impl DecadeMasses {
    /// Masses of a mean curve with the conservative standard error `∫ se`
    /// (the deviation of a sum is at most the sum of the deviations,
    /// whatever the correlations). Zero errors describe an exact curve.
    pub fn bounded(times: &[f64], y: &[f64], se: &[f64]) -> Self {
        let [w1, w2] = decade_windows(times);
        let mass =
            |w: &std::ops::Range<usize>, v: &[f64]| trapezoid(&times[w.clone()], &v[w.clone()]);
        Self {
            m1: mass(&w1, y),
            se1: mass(&w1, se),
            m2: mass(&w2, y),
            se2: mass(&w2, se),
        }
    }
}

/// Classifies the tail of a non-negative integrand sampled at `times`.
///
/// A plateau (mean over the last decade above half the global maximum)
/// diverges outright. Otherwise the decade masses are compared: a power
/// law `t^s` has `M2 / M1 = 10^(s+1)`, which defines the reported slope,
/// and its mass beyond `T` is the geometric series `M2 r / (1 - r)` with
/// `r = M2 / M1`. The tail mass uses the upper bounds `M2 + z se2` and
/// `(M2 + z se2) / (M1 - z se1)`, so sampling noise can only make it
/// larger. A slope below -1.05 converges if that mass is within
/// `tolerance`; a slope above -0.95 with a resolved last decade
/// (`M2 > z se2`) diverges; anything else is inconclusive.
pub fn fit_tail(
    times: &[f64],
    integrand: &[f64],
    masses: &DecadeMasses,
    tolerance: f64,
) -> TailFit {
    let horizon = times.last().copied().unwrap_or(0.0);
    let peak = integrand.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 || horizon <= 0.0 {
        return TailFit {
            slope: f64::NEG_INFINITY,
            tail_mass: 0.0,
            verdict: Verdict::Converged,
        };
    }
    let start = times.partition_point(|&t| t < horizon / 10.0);
    let (tt, yy) = (&times[start..], &integrand[start..]);
    let span = tt.last().unwrap_or(&0.0) - tt.first().unwrap_or(&0.0);
    let tail_mean = if span > 0.0 {
        trapezoid(tt, yy) / span
    } else {
        yy[0]
    };
    if tail_mean > 0.5 * peak {
        return TailFit {
            slope: 0.0,
            tail_mass: f64::INFINITY,
            verdict: Verdict::Diverging,
        };
    }
    let DecadeMasses { m1, se1, m2, se2 } = *masses;
    let slope = if m1 > 0.0 {
        (m2 / m1).log10() - 1.0
    } else if m2 > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    let upper2 = m2 + RESOLUTION_Z * se2;
    let lower1 = m1 - RESOLUTION_Z * se1;
    let tail_mass = if upper2 <= 0.0 {
        0.0
    } else if lower1 > upper2 {
        let r = upper2 / lower1;
        upper2 * r / (1.0 - r)
    } else {
        f64::INFINITY
    };
    let verdict = if slope < -1.05 && tail_mass <= tolerance {
        Verdict::Converged
    } else if slope > -0.95 && m2 > RESOLUTION_Z * se2 {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    };
    TailFit {
        slope,
        tail_mass,
        verdict,
    }
}

/// Result for one probe point (or probe pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub points: Vec<Point>,
    /// Estimated `∫_0^T` of the expected integrand.
    pub integral: f64,
    pub standard_error: f64,
    pub fit: TailFit,
    /// Ensemble mean of the integrand on the report's time grid.
    pub integrand: Vec<f64>,
    /// Standard errors of `integrand`.
    pub errors: Vec<f64>,
}

/// Outcome of a condition estimate over a probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    /// Probe maximum of the integrals (`Ĥ` or `L̂`).
    pub constant: f64,
    pub standard_error: f64,
    pub horizon: f64,
    /// Tail slope of the probe whose integral attains the maximum.
    pub tail_slope: f64,
    /// Largest extrapolated tail mass over the probe.
    pub tail_mass: f64,
    pub verdict: Verdict,
    pub ensemble: usize,
    pub times: Vec<f64>,
    /// Pointwise probe maximum of the mean integrand.
    pub integrand: Vec<f64>,
    pub probes: Vec<ProbeResult>,
    pub stream: RngStream,
}

impl ConditionReport {
    fn assemble(
        condition: &str,
        horizon: f64,
        ensemble: usize,
        times: Vec<f64>,
        probes: Vec<ProbeResult>,
        stream: RngStream,
    ) -> Self {
        let best = probes
            .iter()
            .max_by(|a, b| a.integral.total_cmp(&b.integral))
            .expect("non-empty probe");
        let integrand = (0..times.len())
            .map(|k| probes.iter().map(|p| p.integrand[k]).fold(0.0, f64::max))
            .collect();
        let verdict = probes
            .iter()
            .fold(Verdict::Converged, |v, p| v.combine(p.fit.verdict));
        Self {
            condition: condition.to_string(),
            constant: best.integral,
            standard_error: best.standard_error,
            horizon,
            tail_slope: best.fit.slope,
            tail_mass: probes.iter().map(|p| p.fit.tail_mass).fold(0.0, f64::max),
            verdict,
            ensemble,
            times,
            integrand,
            probes,
            stream,
        }
    }
}

/// Values at the grid times and running integrals up to them of a
/// piecewise-constant signal given as `(value, duration)` pieces. Time not
/// covered by the pieces (after an exit) contributes zero.
pub(crate) fn sweep(
    pieces: impl IntoIterator<Item = (f64, f64)>,
    grid: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut values = vec![0.0; grid.len()];
    let mut running = vec![0.0; grid.len()];
    let mut k = 0;
    let mut start = 0.0;
    let mut acc = 0.0;
    for (v, dt) in pieces {
        let end = start + dt;
        while k < grid.len() && grid[k] < end {
            values[k] = v;
            running[k] = acc + v * (grid[k] - start);
            k += 1;
        }
        acc += v * dt;
        start = end;
        if k == grid.len() {
            break;
        }
    }
    for r in running.iter_mut().skip(k) {
        *r = acc;
    }
    (values, running)
}

fn check_inputs(len: usize, horizon: f64) -> Result<(), ConditionError> {
    if len == 0 {
        return Err(ConditionError::EmptyProbe);
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ConditionError::BadHorizon(horizon));
    }
    Ok(())
}

#[derive(Clone)]
struct Acc {
    curve: CurveStats,
    integral: MeanVar,
    decades: [MeanVar; 2],
}

impl Acc {
    fn new(len: usize) -> Self {
        Self {
            curve: CurveStats::new(len),
            integral: MeanVar::new(),
            decades: [MeanVar::new(), MeanVar::new()],
        }
    }

    /// Records one path: its integrand on the grid and its exact integral.
    fn push(&mut self, times: &[f64], values: &[f64], integral: f64) {
        self.curve.push(values);
        self.integral.push(integral);
        for (d, w) in self.decades.iter_mut().zip(decade_windows(times)) {
            d.push(trapezoid(&times[w.clone()], &values[w]));
        }
    }

    fn merge(mut self, other: &Acc) -> Self {
        self.curve.merge(&other.curve);
        self.integral.merge(&other.integral);
        for (d, o) in self.decades.iter_mut().zip(&other.decades) {
            d.merge(o);
        }
        self
    }

    fn masses(&self) -> DecadeMasses {
        let [d1, d2] = &self.decades;
        DecadeMasses {
            m1: d1.mean(),
            se1: d1.std_error(),
            m2: d2.mean(),
            se2: d2.std_error(),
        }
    }
}

fn reduce(parts: Vec<Result<Acc, JumpError>>, len: usize) -> Result<Acc, JumpError> {
    parts
        .into_iter()
        .try_fold(Acc::new(len), |acc, part| part.map(|p| acc.merge(&p)))
}

fn probe_result(
    points: Vec<Point>,
    acc: &Acc,
    times: &[f64],
    opts: &ConditionOptions,
) -> ProbeResult {
    let integrand = acc.curve.means();
    let errors = acc.curve.std_errors();
    ProbeResult {
        points,
        integral: acc.integral.mean(),
        standard_error: acc.integral.std_error(),
        fit: fit_tail(times, &integrand, &acc.masses(), opts.tail_tolerance),
        integrand,
        errors,
    }
}

/// `Ĥ`: for every probe pair `(x, y)`, the Monte Carlo estimate of
/// `∫_0^T E_{x,y} b(X(t), Y(t)) dt` over two independent walkers,
/// integrated exactly along each pair of paths; the maximum over pairs.
pub fn estimate_transience(
    sampler: &JumpSampler<'_>,
    pairs: &[(Point, Point)],
    horizon: f64,
    opts: &ConditionOptions,
    rng: RngStream,
) -> Result<ConditionReport, ConditionError> {
    check_inputs(pairs.len(), horizon)?;
    let times = mixed_time_grid(horizon, opts.linear_points, opts.log_points);
    let model = sampler.model();
    let mut probes = Vec::with_capacity(pairs.len());
    for (p, (x0, y0)) in pairs.iter().enumerate() {
        let base = rng.child(p as u64);
        let parts = chunked(opts.ensemble, opts.chunk, |range| {
            let mut acc = Acc::new(times.len());
            for i in range {
                let s = base.child(i as u64);
                let x = sampler.trajectory(*x0, horizon, &mut s.child(0).rng())?;
                let y = sampler.trajectory(*y0, horizon, &mut s.child(1).rng())?;
                let (values, running) = sweep(pair_pieces(&x, &y, |a, b| model.b(a, b)), &times);
                acc.push(&times, &values, running[times.len() - 1]);
            }
            Ok(acc)
        });
        let acc = reduce(parts, times.len())?;
        probes.push(probe_result(vec![*x0, *y0], &acc, &times, opts));
    }
    Ok(ConditionReport::assemble(
        "transience",
        horizon,
        opts.ensemble,
        times,
        probes,
        rng,
    ))
}

/// Sufficient form of the transience condition:
/// `∫_0^T sup_{x, y ∈ probe} E_x b(X(t), y) dt`, with one walker ensemble per
/// `x` and the supremum taken pointwise in time before integrating by the
/// trapezoid rule on the report grid.
pub fn estimate_transience_sufficient(
    sampler: &JumpSampler<'_>,
    probe: &[Point],
    horizon: f64,
    opts: &ConditionOptions,
    rng: RngStream,
) -> Result<ConditionReport, ConditionError> {
    check_inputs(probe.len(), horizon)?;
    let times = mixed_time_grid(horizon, opts.linear_points, opts.log_points);
    let model = sampler.model();
    let np = probe.len();
    let mut sup = vec![0.0f64; times.len()];
    let mut sup_err = vec![0.0f64; times.len()];
    let mut probes = Vec::with_capacity(np * np);
    for (p, x0) in probe.iter().enumerate() {
        let base = rng.child(p as u64);
        let parts = chunked(opts.ensemble, opts.chunk, |range| {
            let mut accs = vec![Acc::new(times.len()); np];
            for i in range {
                let traj = sampler.trajectory(*x0, horizon, &mut base.child(i as u64).rng())?;
                for (acc, y) in accs.iter_mut().zip(probe) {
                    let pieces = traj
                        .segments
                        .iter()
                        .map(|s| (model.b(&s.state, y), s.holding));
                    let (values, _) = sweep(pieces, &times);
                    acc.push(&times, &values, trapezoid(&times, &values));
                }
            }
            Ok(accs)
        });
        let mut merged = vec![Acc::new(times.len()); np];
        for part in parts {
            let part: Vec<Acc> = part.map_err(ConditionError::Jump)?;
            for (m, a) in merged.iter_mut().zip(&part) {
                *m = m.clone().merge(a);
            }
        }
        for (acc, y) in merged.iter().zip(probe) {
            let r = probe_result(vec![*x0, *y], acc, &times, opts);
            for k in 0..sup.len() {
                if r.integrand[k] > sup[k] {
                    sup[k] = r.integrand[k];
                    sup_err[k] = r.errors[k];
                }
            }
            probes.push(r);
        }
    }
    let mut report = ConditionReport::assemble(
        "transience-sufficient",
        horizon,
        opts.ensemble,
        times,
        probes,
        rng,
    );
    let fit = fit_tail(
        &report.times,
        &sup,
        &DecadeMasses::bounded(&report.times, &sup, &sup_err),
        opts.tail_tolerance,
    );
    report.constant = trapezoid(&report.times, &sup);
    report.tail_slope = fit.slope;
    report.tail_mass = fit.tail_mass;
    report.verdict = report.verdict.combine(fit.verdict);
    report.integrand = sup;
    Ok(report)
}

/// `L̂`: the probe maximum of `∫_0^T E_x W(X(t)) dt`, integrated exactly
/// along each path (zero after an exit).
pub fn estimate_w_integrability(
    sampler: &JumpSampler<'_>,
    probe: &[Point],
    horizon: f64,
    opts: &ConditionOptions,
    rng: RngStream,
) -> Result<ConditionReport, ConditionError> {
    check_inputs(probe.len(), horizon)?;
    let times = mixed_time_grid(horizon, opts.linear_points, opts.log_points);
    let model = sampler.model();
    let mut probes = Vec::with_capacity(probe.len());
    for (p, x0) in probe.iter().enumerate() {
        let base = rng.child(p as u64);
        let parts = chunked(opts.ensemble, opts.chunk, |range| {
            let mut acc = Acc::new(times.len());
            for i in range {
                let mut pieces = Vec::new();
                sampler.walk(
                    *x0,
                    horizon,
                    &mut base.child(i as u64).rng(),
                    |seg| pieces.push((model.w_at(&seg.state), seg.holding)),
                    || {},
                )?;
                let (values, running) = sweep(pieces, &times);
                acc.push(&times, &values, running[times.len() - 1]);
            }
            Ok(acc)
        });
        let acc = reduce(parts, times.len())?;
        probes.push(probe_result(vec![*x0], &acc, &times, opts));
    }
    Ok(ConditionReport::assemble(
        "w-integrability",
        horizon,
        opts.ensemble,
        times,
        probes,
        rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_reads_values_and_running_integrals() {
        let grid = [0.0, 0.5, 1.0, 2.5, 4.0];
        let (v, r) = sweep([(2.0, 1.0), (1.0, 2.0)], &grid);
        assert_eq!(v, vec![2.0, 2.0, 1.0, 1.0, 0.0]);
        assert_eq!(r, vec![0.0, 1.0, 2.0, 3.5, 4.0]);
    }

    #[test]
    fn power_tails_are_classified_by_slope() {
        let times = mixed_time_grid(1e4, 40, 80);
        let exact = vec![0.0; times.len()];
        let classify = |y: &[f64], tolerance: f64| {
            fit_tail(
                &times,
                y,
                &DecadeMasses::bounded(&times, y, &exact),
                tolerance,
            )
        };
        let steep: Vec<f64> = times.iter().map(|t| (1.0 + t).powf(-1.5)).collect();
        let fit = classify(&steep, 1.0);
        assert!((fit.slope + 1.5).abs() < 0.05, "{fit:?}");
        assert_eq!(fit.verdict, Verdict::Converged);
        // exact tail beyond 1e4 is 2 / sqrt(1e4) = 0.02
        assert!(fit.tail_mass > 0.015 && fit.tail_mass < 0.03, "{fit:?}");
        assert_eq!(classify(&steep, 1e-6).verdict, Verdict::Inconclusive);

        let slow: Vec<f64> = times.iter().map(|t| (1.0 + t).powf(-0.5)).collect();
        assert_eq!(classify(&slow, 1.0).verdict, Verdict::Diverging);

        let flat: Vec<f64> = times.iter().map(|t| 0.3 + (-t).exp()).collect();
        assert_eq!(classify(&flat, 1.0).verdict, Verdict::Diverging);

        let fast: Vec<f64> = times.iter().map(|t| (-t / 50.0).exp()).collect();
        let f = classify(&fast, 1e-6);
        assert_eq!(f.verdict, Verdict::Converged, "{f:?}");

        let zero = vec![0.0; times.len()];
        let z = classify(&zero, 0.0);
        assert_eq!((z.verdict, z.tail_mass), (Verdict::Converged, 0.0));
    }

    #[test]
    fn unresolved_noise_never_diverges() {
        let masses = DecadeMasses {
            m1: 1e-3,
            se1: 4e-4,
            m2: 1e-3,
            se2: 5e-4,
        };
        let times = mixed_time_grid(100.0, 40, 60);
        let y: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let fit = fit_tail(&times, &y, &masses, 1.0);
        assert_eq!(fit.verdict, Verdict::Inconclusive, "{fit:?}");
        assert!(fit.tail_mass.is_infinite());
    }

    #[test]
    fn verdicts_combine_pessimistically() {
        use Verdict::*;
        assert_eq!(Converged.combine(Converged), Converged);
        assert_eq!(Converged.combine(Inconclusive), Inconclusive);
        assert_eq!(Inconclusive.combine(Diverging), Diverging);
    }
}
