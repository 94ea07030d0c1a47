//! Convergence of the Cauchy problem from Poisson data `k_0^(n) = ρ^n`
//! to the stationary correlation functions.
//!
//! Small backends evolve the full `N x N` field. On large grids the `n = 2`
//! distance is tracked at probe pairs `(p, q)` only, through the
//! decomposition `k²_t = k¹_t ⊗ k¹_t + Z_t` with `∂Z = S_2 Z + f(k¹_t)`,
//! `Z_0 = 0` (the inflow is carried entirely by the product term). By
//! variation of parameters and the Kronecker structure of `S_2`,
//!
//! ```text
//! Z_t(p, q) = ∫_0^t Σ_y c_pq(τ, y) k¹_{t-τ}(y) dτ,
//! c_pq(τ) = h_p(τ) g_q(τ) + h_q(τ) g_p(τ),
//! g_p(τ) = e^{τ S_1^T} δ_p,   h_p(y) = Σ_x b(x, y) g_p(τ, x),
//! ```
//!
//! so only `N`-vectors are ever formed. The stationary `v²(p, q)` uses the
//! same quadrature with `k¹ = Φ`, which keeps the measured distance
//! consistent as `t` grows.

use serde::{Deserialize, Serialize};

use super::solve::{stationary_k1, stationary_v2, SolveOptions};
use super::{evolve_with, rk4, EvolveOptions, HierarchyError, OperatorBundle};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorMode {
    FullField,
    ProbePairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorOptions {
    /// Spacing of the recorded distances; 0 picks `horizon / 100`.
    pub record_step: f64,
    /// Time step of the probe-pair quadrature; 0 picks
    /// `min(0.5 / ‖S_1‖, horizon / 500)`.
    pub quadrature_step: f64,
    /// Node pairs tracked in probe-pair mode (also reported in full mode).
    pub probe_pairs: Vec<(usize, usize)>,
    /// Largest `N²` evolved as a full field.
    pub full_field_limit: usize,
    /// Overrides the automatic mode choice.
    pub mode: Option<MonitorMode>,
    pub solve: SolveOptions,
    /// The final `n = 1` distance must be below `tolerance · ρ`.
    pub tolerance: f64,
    /// Distances below `floor · ρ^n` sit at rounding level and count as
    /// converged in the monotonicity check.
    pub floor: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            record_step: 0.0,
            quadrature_step: 0.0,
            probe_pairs: Vec::new(),
            full_field_limit: 1 << 22,
            mode: None,
            solve: SolveOptions::default(),
            tolerance: 1e-6,
            floor: 1e-12,
        }
    }
}

/// Stationary and final values at a probe pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub i: usize,
    pub j: usize,
    /// `k²_ρ(x_i, x_j)`.
    pub k2: f64,
    /// `v²(x_i, x_j)`.
    pub v2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mode: MonitorMode,
    pub rho: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    /// `‖k¹_t - Φ‖_sup` over all nodes.
    pub dist1: Vec<f64>,
    /// `‖k²_t - k²_ρ‖_sup` over all node pairs (full mode) or the probe
    /// pairs; empty for `n = 1`.
    pub dist2: Vec<f64>,
    pub stationary_k1: Field,
    /// Full stationary `k²_ρ` (full mode with `n = 2`).
    pub stationary_k2: Option<Field>,
    pub pairs: Vec<PairValue>,
    pub solve_residual1: f64,
    pub solve_residual2: Option<f64>,
    pub decreasing1: bool,
    pub decreasing2: Option<bool>,
    /// Final `n = 1` distance below `tolerance · ρ` with a decreasing tail,
    /// and (for `n = 2`) a decreasing `n = 2` tail.
    pub converged: bool,
}

/// Non-increasing over the final decade `[T/10, T]` and smaller at the end
/// than at its start, treating values below `floor` as converged.
pub fn decreasing_tail(times: &[f64], dist: &[f64], floor: f64) -> bool {
    let Some(&end) = times.last() else {
        return false;
    };
    let tail: Vec<f64> = times
        .iter()
        .zip(dist)
        .filter(|(t, _)| **t >= end / 10.0)
        .map(|(_, d)| *d)
        .collect();
    if tail.len() < 2 {
        return false;
    }
    let steps = tail
        .windows(2)
        .all(|w| w[1] <= floor || w[1] <= w[0] * (1.0 + 1e-9));
    let last = tail[tail.len() - 1];
    steps && (last <= floor || last < tail[0])
}

fn record_times(horizon: f64, step: f64) -> Vec<f64> {
    let m = (horizon / step).round().max(1.0) as usize;
    (0..=m).map(|k| horizon * k as f64 / m as f64).collect()
}

/// Runs the Cauchy problem to `horizon` and records the distances to the
/// stationary solution of order `bundle.n`.
pub fn convergence_monitor(
    bundle: &OperatorBundle<'_>,
    rho: f64,
    horizon: f64,
    opts: &MonitorOptions,
) -> Result<ConvergenceReport, HierarchyError> {
    if !(rho > 0.0 && rho.is_finite() && horizon > 0.0 && horizon.is_finite()) {
        return Err(HierarchyError::Invalid(format!(
            "need rho > 0 and horizon > 0, got {rho}, {horizon}"
        )));
    }
    let n = bundle.len();
    let b1 = bundle.with_order(1)?;
    for &(i, j) in &opts.probe_pairs {
        if i >= n || j >= n {
            return Err(HierarchyError::Invalid(format!(
                "probe pair ({i}, {j}) outside {n} nodes"
            )));
        }
    }
    let k1 = stationary_k1(bundle, rho, &opts.solve)?;
    let (phi, residual1) = (k1.field.values, k1.residual);
    let mode = opts
        .mode
        .unwrap_or(if bundle.n == 2 && n * n > opts.full_field_limit {
            MonitorMode::ProbePairs
        } else {
            MonitorMode::FullField
        });
    let record = if opts.record_step > 0.0 {
        opts.record_step
    } else {
        horizon / 100.0
    };
    let floor1 = opts.floor * rho;
    let floor2 = opts.floor * rho * rho;

    let mut report = ConvergenceReport {
        mode,
        rho,
        horizon,
        times: Vec::new(),
        dist1: Vec::new(),
        dist2: Vec::new(),
        stationary_k1: Field::nodes(1, n, phi.clone()),
        stationary_k2: None,
        pairs: Vec::new(),
        solve_residual1: residual1,
        solve_residual2: None,
        decreasing1: false,
        decreasing2: None,
        converged: false,
    };

    match (bundle.n, mode) {
        (1, _) => {
            let times = record_times(horizon, record);
            let mut dist1 = Vec::with_capacity(times.len());
            evolve_with(&b1, rho, &times, &EvolveOptions::default(), |_, k1, _| {
                dist1.push(max_diff(k1, &phi));
            })?;
            report.times = times;
            report.dist1 = dist1;
        }
        (_, MonitorMode::FullField) => {
            let b2 = bundle.with_order(2)?;
            let v2 = stationary_v2(bundle, rho, &Field::nodes(1, n, phi.clone()), &opts.solve)?;
            let product = Field::tensor_square(&Field::nodes(1, n, phi.clone()));
            let k2s: Vec<f64> = v2
                .field
                .values
                .iter()
                .zip(&product.values)
                .map(|(a, b)| a + b)
                .collect();
            let times = record_times(horizon, record);
            let (mut dist1, mut dist2) = (Vec::new(), Vec::new());
            evolve_with(&b2, rho, &times, &EvolveOptions::default(), |_, k1, k2| {
                dist1.push(max_diff(k1, &phi));
                dist2.push(max_diff(k2.expect("pair field"), &k2s));
            })?;
            report.pairs = opts
                .probe_pairs
                .iter()
                .map(|&(i, j)| PairValue {
                    i,
                    j,
                    k2: k2s[i * n + j],
                    v2: v2.field.values[i * n + j],
                })
                .collect();
            report.times = times;
            report.dist1 = dist1;
            report.dist2 = dist2;
            report.solve_residual2 = Some(v2.residual);
            report.stationary_k2 = Some(Field::nodes(2, n, k2s));
        }
        (_, MonitorMode::ProbePairs) => {
            if opts.probe_pairs.is_empty() {
                return Err(HierarchyError::Invalid(
                    "probe-pair mode needs probe pairs".into(),
                ));
            }
            let run = ProbePairRun::new(&b1, rho, &phi, horizon, record, opts)?;
            report.times = run.times;
            report.dist1 = run.dist1;
            report.dist2 = run.dist2;
            report.pairs = run.pairs;
        }
    }

    report.decreasing1 = decreasing_tail(&report.times, &report.dist1, floor1);
    let final1 = report.dist1.last().copied().unwrap_or(f64::INFINITY);
    let mut converged = report.decreasing1 && final1 <= opts.tolerance * rho;
    if bundle.n == 2 {
        let d2 = decreasing_tail(&report.times, &report.dist2, floor2);
        report.decreasing2 = Some(d2);
        converged &= d2;
    }
    report.converged = converged;
    Ok(report)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct ProbePairRun {
    times: Vec<f64>,
    dist1: Vec<f64>,
    dist2: Vec<f64>,
    pairs: Vec<PairValue>,
}

impl ProbePairRun {
    fn new(
        b1: &OperatorBundle<'_>,
        rho: f64,
        phi: &[f64],
        horizon: f64,
        record: f64,
        opts: &MonitorOptions,
    ) -> Result<Self, HierarchyError> {
        let n = b1.len();
        let disc = b1.discrete();
        let delta_target = if opts.quadrature_step > 0.0 {
            opts.quadrature_step
        } else {
            b1.max_step().min(horizon / 500.0)
        };
        let steps = (horizon / delta_target).ceil().max(1.0) as usize;
        let delta = horizon / steps as f64;
        let sub = (delta / b1.max_step()).ceil().max(1.0) as usize;
        let h = delta / sub as f64;
        let integrate = |start: Vec<f64>, rhs: &dyn Fn(&[f64]) -> Vec<f64>| -> Vec<Vec<f64>> {
            let mut path = Vec::with_capacity(steps + 1);
            let mut y = start;
            path.push(y.clone());
            for _ in 0..steps {
                for _ in 0..sub {
                    y = rk4(&y, h, rhs);
                }
                path.push(y.clone());
            }
            path
        };

        let u = integrate(vec![rho; n], &|y: &[f64]| {
            let mut r = b1.s1(y);
            for (o, e) in r.iter_mut().zip(&disc.exit) {
                *o += rho * e;
            }
            r
        });
        if u.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(HierarchyError::Unstable {
                time: horizon,
                norm: f64::INFINITY,
                bound: rho,
            });
        }

        let mut nodes: Vec<usize> = opts.probe_pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let slot = |p: usize| nodes.binary_search(&p).expect("probe node");
        let mut g = Vec::with_capacity(nodes.len());
        let mut hb = Vec::with_capacity(nodes.len());
        for &p in &nodes {
            let mut delta_p = vec![0.0; n];
            delta_p[p] = 1.0;
            let gp = integrate(delta_p, &|y: &[f64]| b1.s1_t(y));
            hb.push(gp.iter().map(|v| disc.apply_b_raw_t(v)).collect::<Vec<_>>());
            g.push(gp);
        }

        // Σ_y c_pq(τ_j, y) w(y)
        let cdot = |a: usize, b: usize, j: usize, w: &[f64]| -> f64 {
            let (ga, gb, ha, hbb) = (&g[a][j], &g[b][j], &hb[a][j], &hb[b][j]);
            (0..n)
                .map(|y| (ha[y] * gb[y] + hbb[y] * ga[y]) * w[y])
                .sum()
        };
        let trapezoid = |k: usize, weight_of: &dyn Fn(usize) -> f64| -> f64 {
            if k == 0 {
                return 0.0;
            }
            let inner: f64 = (1..k).map(weight_of).sum();
            delta * (0.5 * weight_of(0) + inner + 0.5 * weight_of(k))
        };

        let index: Vec<(usize, usize)> = opts
            .probe_pairs
            .iter()
            .map(|&(i, j)| (slot(i), slot(j)))
            .collect();
        let z_inf: Vec<f64> = index
            .iter()
            .map(|&(a, b)| trapezoid(steps, &|j| cdot(a, b, j, phi)))
            .collect();
        let pairs: Vec<PairValue> = opts
            .probe_pairs
            .iter()
            .zip(&z_inf)
            .map(|(&(i, j), z)| PairValue {
                i,
                j,
                k2: phi[i] * phi[j] + z,
                v2: *z,
            })
            .collect();

        let stride = ((record / delta).round() as usize).max(1);
        let mut recorded: Vec<usize> = (0..=steps).step_by(stride).collect();
        if recorded.last() != Some(&steps) {
            recorded.push(steps);
        }
        let mut times = Vec::with_capacity(recorded.len());
        let mut dist1 = Vec::with_capacity(recorded.len());
        let mut dist2 = Vec::with_capacity(recorded.len());
        for &k in &recorded {
            times.push(k as f64 * delta);
            dist1.push(max_diff(&u[k], phi));
            let mut worst = 0.0f64;
            for (((a, b), pv), &(i, j)) in index.iter().zip(&pairs).zip(&opts.probe_pairs) {
                let z = trapezoid(k, &|m| cdot(*a, *b, m, &u[k - m]));
                let k2t = u[k][i] * u[k][j] + z;
                worst = worst.max((k2t - pv.k2).abs());
            }
            dist2.push(worst);
        }
        Ok(Self {
            times,
            dist1,
            dist2,
            pairs,
        })
    }
}
