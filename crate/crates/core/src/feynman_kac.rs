//! Feynman-Kac estimates of the density `u_ρ(x, t) = ρ E_x exp(-∫_0^t W)`
//! and of its stationary limit `Φ_ρ(x)`.
//!
//! The stationary estimate truncates the time integral at an adaptive
//! horizon `T`. The truncation bound `ε_T` is the probe supremum of the
//! extrapolated `E_x ∫_T^∞ W(X(t)) dt` from a pilot W-integrability run;
//! since `1 ≥ E exp(-∫_T^∞ W) ≥ 1 - E ∫_T^∞ W`, the truncated estimate is
//! within `ρ ε_T` of `Φ_ρ` up to Monte Carlo error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{
    estimate_w_integrability, ConditionError, ConditionOptions, ConditionReport, Verdict,
};
use crate::field::{Base, Field};
use crate::jump::{JumpError, JumpSampler};
use crate::model::Point;
use crate::rng::RngStream;
use crate::stats::{chunked, MeanVar};

/// Monte Carlo estimate at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkEstimate {
    pub point: Point,
    pub rho: f64,
    pub horizon: f64,
    pub value: f64,
    pub standard_error: f64,
    /// `ε_T`: bound on `|Φ - Φ_T| / ρ` (zero for finite-horizon estimates).
    pub truncation_bound: f64,
    pub ensemble: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// W-integrability holds on the probe: `Φ_ρ ≥ ρ e^{-L̂} > 0`.
    Persistent,
    /// `∫ E W` diverges: the stationary density is `Φ ≡ 0`.
    Extinct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FkOptions {
    /// Trajectories per probe point in the main run.
    pub ensemble: usize,
    /// Horizon of the pilot W-integrability run (0 picks `100 / V_min`).
    pub pilot_horizon: f64,
    /// Upper limit for the adaptive horizon.
    pub max_horizon: f64,
    pub pilot: ConditionOptions,
    pub chunk: usize,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self {
            ensemble: 10_000,
            pilot_horizon: 0.0,
            max_horizon: 1e5,
            pilot: ConditionOptions::default(),
            chunk: 256,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FkError {
    #[error("rho must be positive and finite, got {0}")]
    BadRho(f64),
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error("W-integrability tail could not be bounded (slope {slope})")]
    Inconclusive { slope: f64 },
}

/// `ρ E_x exp(-∫_0^t W(X(s)) ds)` over `ensemble` trajectories.
pub fn fk_finite_horizon(
    sampler: &JumpSampler<'_>,
    x: Point,
    t: f64,
    rho: f64,
    ensemble: usize,
    rng: RngStream,
) -> Result<FkEstimate, FkError> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(FkError::BadRho(rho));
    }
    let acc = survival(sampler, x, t, ensemble, 256, rng)?;
    Ok(FkEstimate {
        point: x,
        rho,
        horizon: t,
        value: rho * acc.mean(),
        standard_error: rho * acc.std_error(),
        truncation_bound: 0.0,
        ensemble,
    })
}

/// Per-path `exp(-∫_0^t W)` accumulated over stream children `0..ensemble`.
fn survival(
    sampler: &JumpSampler<'_>,
    x: Point,
    t: f64,
    ensemble: usize,
    chunk: usize,
    rng: RngStream,
) -> Result<MeanVar, JumpError> {
    let model = sampler.model();
    let parts = chunked(ensemble, chunk, |range| {
        let mut acc = MeanVar::new();
        for i in range {
            let integral =
                sampler.integrate(x, t, &mut rng.child(i as u64).rng(), |p| model.w_at(p))?;
            acc.push((-integral).exp());
        }
        Ok::<_, JumpError>(acc)
    });
    let mut total = MeanVar::new();
    for part in parts {
        total.merge(&part?);
    }
    Ok(total)
}

/// Stationary densities over a probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkField {
    pub regime: Regime,
    /// `Φ̂_ρ` on the probe (identically zero when extinct).
    pub field: Field,
    pub estimates: Vec<FkEstimate>,
    pub horizon: f64,
    pub truncation_bound: f64,
    pub pilot: ConditionReport,
}

/// Adaptive horizon and truncation bound from a pilot report: the smallest
/// `T ≥ T_0` at which every probe's extrapolated tail mass is within
/// `tolerance`, capped at `max_horizon`.
fn choose_horizon(
    pilot: &ConditionReport,
    tolerance: f64,
    max_horizon: f64,
) -> Result<(f64, f64), FkError> {
    let t0 = pilot.horizon;
    let mut horizon = t0;
    for p in &pilot.probes {
        let (s, mass) = (p.fit.slope, p.fit.tail_mass);
        if mass == 0.0 {
            continue;
        }
        if !(s < -1.0) || !mass.is_finite() {
            return Err(FkError::Inconclusive { slope: s });
        }
        if mass > tolerance {
            // mass(T) = mass(T0) (T / T0)^(s + 1)
            horizon = horizon.max(t0 * (tolerance / mass).powf(1.0 / (s + 1.0)));
        }
    }
    let horizon = horizon.min(max_horizon.max(t0));
    let eps = pilot
        .probes
        .iter()
        .map(|p| {
            if p.fit.tail_mass == 0.0 {
                0.0
            } else {
                p.fit.tail_mass * (horizon / t0).powf(p.fit.slope + 1.0)
            }
        })
        .fold(0.0, f64::max);
    Ok((horizon, eps))
}

/// `Φ̂_ρ` on every probe point, sharing one pilot run and one adaptive
/// horizon. A diverging pilot reports extinction (`Φ ≡ 0`).
pub fn fk_field(
    sampler: &JumpSampler<'_>,
    probe: &[Point],
    rho: f64,
    tolerance: f64,
    opts: &FkOptions,
    rng: RngStream,
) -> Result<FkField, FkError> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(FkError::BadRho(rho));
    }
    let pilot_horizon = if opts.pilot_horizon > 0.0 {
        opts.pilot_horizon
    } else {
        100.0 / sampler.model().v_min()
    };
    let pilot = estimate_w_integrability(
        sampler,
        probe,
        pilot_horizon,
        &opts.pilot,
        rng.labeled("pilot"),
    )?;
    let base = Base::Probe(probe.to_vec());
    if pilot.verdict == Verdict::Diverging {
        return Ok(FkField {
            regime: Regime::Extinct,
            field: Field::constant(1, base, 0.0),
            estimates: Vec::new(),
            horizon: pilot_horizon,
            truncation_bound: f64::INFINITY,
            pilot,
        });
    }
    let (horizon, eps) = choose_horizon(&pilot, tolerance, opts.max_horizon)?;
    let main = rng.labeled("main");
    let mut estimates = Vec::with_capacity(probe.len());
    for (p, x) in probe.iter().enumerate() {
        let acc = survival(
            sampler,
            *x,
            horizon,
            opts.ensemble,
            opts.chunk,
            main.child(p as u64),
        )?;
        estimates.push(FkEstimate {
            point: *x,
            rho,
            horizon,
            value: rho * acc.mean(),
            standard_error: rho * acc.std_error(),
            truncation_bound: eps,
            ensemble: opts.ensemble,
        });
    }
    let values = estimates.iter().map(|e| e.value).collect();
    Ok(FkField {
        regime: Regime::Persistent,
        field: Field::new(1, base, values),
        estimates,
        horizon,
        truncation_bound: eps,
        pilot,
    })
}

/// `Φ̂_ρ(x)` at a single point; see [`fk_field`].
pub fn fk_stationary(
    sampler: &JumpSampler<'_>,
    x: Point,
    rho: f64,
    tolerance: f64,
    opts: &FkOptions,
    rng: RngStream,
) -> Result<FkField, FkError> {
    fk_field(sampler, &[x], rho, tolerance, opts, rng)
}
