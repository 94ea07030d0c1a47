//! Cross-validation battery: each check compares an estimator against an
//! independent oracle (dense matrix exponentials, direct linear solves,
//! exact identities) and reports pass/fail with a result table.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use contact_core::conditions::{
    estimate_transience, estimate_w_integrability, ConditionOptions, Verdict,
};
use contact_core::feynman_kac::{fk_field, fk_finite_horizon, FkOptions, Regime};
use contact_core::field::Field;
use contact_core::fixtures::random_graph;
use contact_core::hierarchy::{
    assemble, comparison_checks, convergence_monitor, evolve, stationary_k1, stationary_v2,
    step_evolution, EvolveOptions, LedgerOptions, MonitorOptions, OperatorBundle, Scheme,
    SolveOptions,
};
use contact_core::jump::{JumpSampler, SamplerOptions};
use contact_core::model::{derive, DerivedModel, Discrete, ModelSpec, Point};
use contact_core::particles::{bin_fields, run_ensemble, Binning, SimOptions};
use contact_core::rng::RngStream;

use crate::manifest::num;
use crate::CliError;

/// Result of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub summary: String,
    pub details: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CheckOutcome {
    fn new(id: &str, title: &str) -> Self {
        Self {
            id: id.to_string(),
            title: title.to_string(),
            passed: true,
            summary: String::new(),
            details: serde_json::Value::Null,
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn columns(mut self, cols: &[&str]) -> Self {
        self.columns = cols.iter().map(|c| c.to_string()).collect();
        self
    }

    /// One-line verdict, e.g. `PASS fk-exact: ...`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.summary
        )
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::numerical(e)
}

fn discrete(model: &DerivedModel) -> Result<&Discrete, CliError> {
    model
        .discrete()
        .ok_or_else(|| CliError::Config("this check needs a graph or grid backend".into()))
}

/// `B - diag(V + W)` with `B_ij = b(x_i, x_j) m̄_j`, built entry by entry.
fn dense_generator(d: &Discrete, with_w: bool) -> DMatrix<f64> {
    DMatrix::from_fn(d.n, d.n, |i, j| {
        let diag = if i == j {
            d.v[i] + if with_w { d.w[i] } else { 0.0 }
        } else {
            0.0
        };
        d.b_raw(i, j) * d.mbar[j] - diag
    })
}

fn v_min(d: &Discrete) -> f64 {
    d.v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Finite-horizon Feynman-Kac estimates at every node against
/// `e^{t(B - V - W)} ρ` at `t = c / V_min` for each multiplier `c`.
pub fn fk_vs_exact(
    model: &DerivedModel,
    rho: f64,
    multipliers: &[f64],
    ensemble: usize,
    rng: RngStream,
) -> Result<CheckOutcome, CliError> {
    let d = discrete(model)?;
    let sampler = JumpSampler::new(model, SamplerOptions::default()).map_err(numerical)?;
    let s = dense_generator(d, true);
    let mut out = CheckOutcome::new("fk-exact", "Feynman-Kac vs matrix exponential")
        .columns(&["t", "x", "estimate", "se", "exact", "z"]);
    let mut worst_z: f64 = 0.0;
    let mut failures = 0;
    for (k, c) in multipliers.iter().enumerate() {
        let t = c / v_min(d);
        let exact = (&s * t).exp() * DVector::from_element(d.n, rho);
        for x in 0..d.n {
            let est = fk_finite_horizon(
                &sampler,
                Point::Node(x),
                t,
                rho,
                ensemble,
                rng.child(k as u64).child(x as u64),
            )
            .map_err(numerical)?;
            let diff = (est.value - exact[x]).abs();
            let ok = diff <= 3.0 * est.standard_error + 1e-12 * rho;
            let z = if est.standard_error > 0.0 {
                diff / est.standard_error
            } else {
                0.0
            };
            worst_z = worst_z.max(z);
            failures += usize::from(!ok);
            out.rows.push(vec![
                num(t),
                x.to_string(),
                num(est.value),
                num(est.standard_error),
                num(exact[x]),
                num(z),
            ]);
        }
    }
    out.passed = failures == 0;
    out.summary = format!(
        "{} nodes x {} times, ensemble {ensemble}, worst |diff|/se = {worst_z:.2}, {failures} beyond 3 se",
        d.n,
        multipliers.len()
    );
    out.details =
        json!({ "nodes": d.n, "ensemble": ensemble, "worst_z": worst_z, "failures": failures });
    Ok(out)
}

/// Stationary Feynman-Kac values at `probe` (ordered along a ray leaving
/// the support of `W`) against the direct solve of the stationary equation
/// (`fk-solve`), and the bounds `ρ e^{-L̂} - 3 se ≤ Φ̂ ≤ ρ` with `Φ̂ → ρ`
/// along the ray (`fk-bounds`).
pub fn fk_vs_solve(
    model: &DerivedModel,
    rho: f64,
    probe: &[usize],
    tolerance: f64,
    opts: &FkOptions,
    rng: RngStream,
) -> Result<(CheckOutcome, CheckOutcome), CliError> {
    let bundle = OperatorBundle::new(model, 1).map_err(numerical)?;
    let solved = stationary_k1(&bundle, rho, &SolveOptions::default()).map_err(numerical)?;
    let points: Vec<Point> = probe.iter().map(|&i| Point::Node(i)).collect();
    let sampler = JumpSampler::new(model, SamplerOptions::default()).map_err(numerical)?;
    let fk = fk_field(&sampler, &points, rho, tolerance, opts, rng).map_err(numerical)?;

    let mut solve = CheckOutcome::new("fk-solve", "stationary Feynman-Kac vs direct solve")
        .columns(&["x", "estimate", "se", "eps_T", "solve", "allowed"]);
    let (bounds, lower) = fk_bounds_check(&fk, rho);
    if fk.regime == Regime::Extinct {
        solve.passed = false;
        solve.summary = "W-integrability diverged; no stationary estimate".into();
        return Ok((solve, bounds));
    }
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for (e, &i) in fk.estimates.iter().zip(probe) {
        let exact = solved.field.values[i];
        let allowed = 3.0 * e.standard_error + rho * e.truncation_bound;
        let diff = (e.value - exact).abs();
        failures += usize::from(diff > allowed);
        worst = worst.max(diff / allowed.max(f64::MIN_POSITIVE));
        solve.rows.push(vec![
            i.to_string(),
            num(e.value),
            num(e.standard_error),
            num(e.truncation_bound),
            num(exact),
            num(allowed),
        ]);
    }
    solve.passed = failures == 0;
    solve.summary = format!(
        "{} probes, horizon {:.1}, eps_T = {:.2e}, solve residual {:.1e}, worst diff/allowed = {worst:.2}",
        probe.len(),
        fk.horizon,
        fk.truncation_bound,
        solved.residual
    );
    solve.details = json!({
        "horizon": fk.horizon,
        "truncation_bound": fk.truncation_bound,
        "solve_residual": solved.residual,
        "lower_bound": lower,
        "failures": failures,
    });
    Ok((solve, bounds))
}

/// Jensen bounds and the approach to `ρ` along the probe ray.
pub fn fk_bounds_check(fk: &contact_core::feynman_kac::FkField, rho: f64) -> (CheckOutcome, f64) {
    let mut out = CheckOutcome::new(
        "fk-bounds",
        "rho e^{-L} <= Phi <= rho and Phi -> rho along a ray",
    )
    .columns(&["x", "estimate", "se", "lower", "upper"]);
    if fk.regime == Regime::Extinct {
        out.passed = false;
        out.summary = "extinct regime: no converged values".into();
        return (out, 0.0);
    }
    let l_hat = fk
        .pilot
        .probes
        .iter()
        .map(|p| p.integral + p.fit.tail_mass)
        .fold(0.0, f64::max);
    let lower = rho * (-l_hat).exp();
    let est = &fk.estimates;
    let mut failures = 0;
    for e in est {
        let ok = e.value >= lower - 3.0 * e.standard_error && e.value <= rho;
        failures += usize::from(!ok);
        out.rows.push(vec![
            format!("{:?}", e.point),
            num(e.value),
            num(e.standard_error),
            num(lower),
            num(rho),
        ]);
    }
    let mut ray_ok = true;
    if est.len() >= 3 {
        let tail = &est[est.len() - 3..];
        for w in tail.windows(2) {
            let slack = 3.0 * (w[0].standard_error.powi(2) + w[1].standard_error.powi(2)).sqrt();
            ray_ok &= w[1].value >= w[0].value - slack;
        }
        ray_ok &= rho - est[est.len() - 1].value < rho - est[0].value;
    }
    out.passed = failures == 0 && ray_ok;
    out.summary = format!(
        "L = {l_hat:.4}, lower bound {lower:.4}, {failures} bound violations, ray {}",
        if est.len() < 3 {
            "not checked (fewer than 3 probes)"
        } else if ray_ok {
            "monotone toward rho"
        } else {
            "not monotone"
        }
    );
    out.details = json!({ "l_hat": l_hat, "lower": lower, "failures": failures, "ray_ok": ray_ok });
    (out, lower)
}

/// Positivity, domination and Trotter-type lower bound of the hierarchy
/// semigroups on `models` random graphs of 2..=6 nodes, `n ∈ {1, 2}`.
pub fn comparison_suite(
    models: usize,
    fields: usize,
    times: &[f64],
    rng: RngStream,
) -> Result<CheckOutcome, CliError> {
    let mut out = CheckOutcome::new("comparison", "positivity, domination and Trotter bounds")
        .columns(&[
            "model",
            "nodes",
            "n",
            "checks",
            "violations",
            "worst_positivity",
            "worst_domination",
            "worst_trotter",
        ]);
    let (mut checks, mut violations) = (0, 0);
    let mut worst: f64 = f64::NEG_INFINITY;
    for m in 0..models {
        let nodes = 2 + m % 5;
        // every fifth model has W ≡ 0
        let w_scale = if m % 5 == 4 { 0.0 } else { 2.0 };
        let spec = random_graph(
            nodes,
            w_scale,
            &mut rng.child(m as u64).labeled("model").rng(),
        );
        let model = derive(&spec).map_err(numerical)?;
        for n in 1..=2 {
            let bundle = OperatorBundle::new(&model, n).map_err(numerical)?;
            let r = comparison_checks(&bundle, fields, times, rng.child(m as u64).child(n as u64))
                .map_err(numerical)?;
            checks += r.checks;
            violations += r.violations;
            worst = worst
                .max(r.worst_positivity)
                .max(r.worst_domination)
                .max(r.worst_trotter);
            out.rows.push(vec![
                m.to_string(),
                nodes.to_string(),
                n.to_string(),
                r.checks.to_string(),
                r.violations.to_string(),
                num(r.worst_positivity),
                num(r.worst_domination),
                num(r.worst_trotter),
            ]);
        }
    }
    out.passed = violations == 0;
    out.summary = format!("{models} models, {checks} entrywise checks, {violations} violations, worst scaled deficit {worst:.2e}");
    out.details =
        json!({ "models": models, "checks": checks, "violations": violations, "worst": worst });
    Ok(out)
}

/// On critical models with `W ≡ 0`: repeated `step_evolution` keeps the
/// constants `ρ` (`n = 1`) and `ρ²` (`n = 2`, no source) to `1e-10` up to
/// `t = 100 / V_min`; on graphs the rows of `e^{t(B - V)}` sum to one to
/// `1e-12`.
pub fn criticality_conservation(specs: &[ModelSpec], rho: f64) -> Result<CheckOutcome, CliError> {
    let mut out = CheckOutcome::new("criticality", "conservation of constants at criticality")
        .columns(&["model", "quantity", "t", "deviation", "tolerance"]);
    let mut failures = 0;
    for (k, spec) in specs.iter().enumerate() {
        let model = derive(spec).map_err(numerical)?;
        let d = discrete(&model)?;
        if !model.w_is_zero() {
            return Err(CliError::Config(format!(
                "model {k}: conservation needs W = 0"
            )));
        }
        let horizon = 100.0 / v_min(d);
        for n in 1..=2 {
            let bundle = OperatorBundle::new(&model, n).map_err(numerical)?;
            let c = rho.powi(n as i32);
            let mut field = Field::nodes(n, d.n, vec![c; bundle.field_len()]);
            let zero = Field::nodes(n, d.n, vec![0.0; bundle.field_len()]);
            let dt_max = bundle.max_step();
            let mut t = 0.0;
            while t < horizon {
                let dt = dt_max.min(horizon - t);
                field =
                    step_evolution(&bundle, &field, &zero, dt, Scheme::Rk4).map_err(numerical)?;
                t += dt;
            }
            let dev = field
                .values
                .iter()
                .map(|v| (v - c).abs())
                .fold(0.0, f64::max)
                / c;
            failures += usize::from(dev > 1e-10);
            out.rows.push(vec![
                k.to_string(),
                format!("constant n={n}"),
                num(t),
                num(dev),
                num(1e-10),
            ]);
        }
        if d.lattice.is_none() {
            let l = dense_generator(d, false);
            for c in [0.1, 1.0, 10.0] {
                let t = c / v_min(d);
                let e = (&l * t).exp();
                let dev = e
                    .row_iter()
                    .map(|r| (r.sum() - 1.0).abs())
                    .fold(0.0, f64::max);
                failures += usize::from(dev > 1e-12);
                out.rows.push(vec![
                    k.to_string(),
                    "row sums".into(),
                    num(t),
                    num(dev),
                    num(1e-12),
                ]);
            }
        }
    }
    out.passed = failures == 0;
    let worst = out
        .rows
        .iter()
        .map(|r| r[3].parse::<f64>().unwrap_or(f64::NAN))
        .fold(0.0, f64::max);
    out.summary = format!(
        "{} models, worst deviation {worst:.2e}, {failures} beyond tolerance",
        specs.len()
    );
    out.details = json!({ "failures": failures, "worst": worst });
    Ok(out)
}

/// Bins of grid nodes by distance from the origin: `[0, r_1)`, `[r_1, r_2)`,
/// ..., `[r_last, ∞)`.
pub fn radial_shells(d: &Discrete, radii: &[f64]) -> Vec<Vec<usize>> {
    let lat = d.lattice.as_ref().expect("grid backend");
    let mut bins = vec![Vec::new(); radii.len() + 1];
    for i in 0..d.n {
        let c = lat.coords(i);
        let r = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let b = radii.iter().take_while(|&&edge| r >= edge).count();
        bins[b].push(i);
    }
    bins.retain(|b| !b.is_empty());
    bins
}

/// Ensemble estimates of binned `k¹_t`, `k²_t` from particle simulations
/// against the time-stepped hierarchy at `t = c / V_min`.
// bin indices address estimates, errors and predictions in lockstep
#[allow(clippy::needless_range_loop)]
pub fn particles_vs_hierarchy(
    model: &DerivedModel,
    label: &str,
    rho: f64,
    multipliers: &[f64],
    runs: usize,
    bins: &[Vec<usize>],
    rng: RngStream,
) -> Result<CheckOutcome, CliError> {
    let d = discrete(model)?;
    let times: Vec<f64> = multipliers.iter().map(|c| c / v_min(d)).collect();
    let bundle = OperatorBundle::new(model, 2).map_err(numerical)?;
    let grid = evolve(&bundle, rho, &times, &EvolveOptions::default()).map_err(numerical)?;
    let est = run_ensemble(
        model,
        rho,
        &times,
        runs,
        &Binning::Nodes {
            bins: bins.to_vec(),
        },
        2,
        SimOptions {
            record_events: false,
            ..SimOptions::default()
        },
        5.0,
        rng,
    )
    .map_err(numerical)?;
    let mut out = CheckOutcome::new(
        &format!("particles-{label}"),
        "particle ensemble vs time-stepped hierarchy",
    )
    .columns(&[
        "t",
        "order",
        "bin_i",
        "bin_j",
        "particles",
        "se",
        "hierarchy",
        "z",
        "allowed_z",
    ]);
    let nb = bins.len();
    let (mut failures, mut worst1, mut worst2) = (0, 0.0f64, 0.0f64);
    for (k, e) in est.iter().enumerate() {
        let (p1, p2) = bin_fields(d, bins, &grid.k1[k], Some(&grid.k2[k]));
        for b in 0..nb {
            let z = (e.k1[b] - p1[b]).abs() / e.k1_se[b].max(1e-300);
            worst1 = worst1.max(z);
            failures += usize::from(z > 3.0);
            out.rows.push(vec![
                num(times[k]),
                "1".into(),
                b.to_string(),
                String::new(),
                num(e.k1[b]),
                num(e.k1_se[b]),
                num(p1[b]),
                num(z),
                "3".into(),
            ]);
        }
        for idx in 0..nb * nb {
            let z = (e.k2[idx] - p2[idx]).abs() / e.k2_se[idx].max(1e-300);
            worst2 = worst2.max(z);
            failures += usize::from(z > 5.0);
            out.rows.push(vec![
                num(times[k]),
                "2".into(),
                (idx / nb).to_string(),
                (idx % nb).to_string(),
                num(e.k2[idx]),
                num(e.k2_se[idx]),
                num(p2[idx]),
                num(z),
                "5".into(),
            ]);
        }
    }
    let warnings: Vec<String> = est.iter().flat_map(|e| e.warnings.clone()).collect();
    out.passed = failures == 0;
    out.summary = format!(
        "{runs} runs, {nb} bins, worst z: k1 {worst1:.2} (limit 3), k2 {worst2:.2} (limit 5), {failures} failures"
    );
    out.details = json!({ "runs": runs, "bins": nb, "worst_k1": worst1, "worst_k2": worst2, "failures": failures, "warnings": warnings });
    Ok(out)
}

/// Convergence of `k¹_t` and `k²_t` to the stationary correlation
/// functions: decreasing distances over the final decade and a final
/// `n = 1` distance below `1e-6 ρ`.
pub fn convergence(
    model: &DerivedModel,
    rho: f64,
    horizon: f64,
    probe: &[usize],
) -> Result<CheckOutcome, CliError> {
    let bundle = OperatorBundle::new(model, 2).map_err(numerical)?;
    let pairs: Vec<(usize, usize)> = probe
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| probe[a..].iter().map(move |&j| (i, j)))
        .collect();
    let opts = MonitorOptions {
        probe_pairs: pairs,
        ..MonitorOptions::default()
    };
    let r = convergence_monitor(&bundle, rho, horizon, &opts).map_err(numerical)?;
    let last1 = *r.dist1.last().unwrap_or(&f64::NAN);
    let last2 = r.dist2.last().copied().unwrap_or(f64::NAN);
    let below = last1 < 1e-6 * rho;
    let dec2 = r.decreasing2.unwrap_or(false);
    let mut out = CheckOutcome::new("convergence", "k_t -> k_rho for n = 1, 2")
        .columns(&["t", "dist1", "dist2"]);
    out.rows = r
        .times
        .iter()
        .enumerate()
        .map(|(k, t)| {
            vec![
                num(*t),
                num(r.dist1[k]),
                r.dist2.get(k).map_or(String::new(), |v| num(*v)),
            ]
        })
        .collect();
    out.passed = r.decreasing1 && below && dec2;
    out.summary = format!(
        "{:?} mode, horizon {horizon}, final dist1 = {last1:.2e} (limit {:.0e}), dist1 decreasing {}, final dist2 = {last2:.2e}, dist2 decreasing {dec2}",
        r.mode,
        1e-6 * rho,
        r.decreasing1
    );
    out.details = json!({
        "mode": r.mode,
        "final_dist1": last1,
        "final_dist2": last2,
        "decreasing1": r.decreasing1,
        "decreasing2": dec2,
        "pairs": r.pairs,
    });
    Ok(out)
}

/// `K_1 = sup k¹_ρ`, `K_2 = sup k²_ρ` from the stationary solves against
/// `4 K_1 Ĥ + ρ²` with `Ĥ` twice the transience estimate over all probe
/// pairs, and the symbolic bound chain for `n ≤ 8`.
pub fn bound_ledger(
    model: &DerivedModel,
    rho: f64,
    probe: &[usize],
    horizon: f64,
    opts: &ConditionOptions,
    rng: RngStream,
) -> Result<CheckOutcome, CliError> {
    let bundle = OperatorBundle::new(model, 2).map_err(numerical)?;
    let solve = SolveOptions::default();
    let k1 = stationary_k1(&bundle, rho, &solve).map_err(numerical)?;
    let v2 = stationary_v2(&bundle, rho, &k1.field, &solve).map_err(numerical)?;
    let sampler = JumpSampler::new(model, SamplerOptions::default()).map_err(numerical)?;
    let pairs: Vec<(Point, Point)> = probe
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| {
            probe[a..]
                .iter()
                .map(move |&j| (Point::Node(i), Point::Node(j)))
        })
        .collect();
    let h = estimate_transience(&sampler, &pairs, horizon, opts, rng).map_err(numerical)?;
    let system = assemble(
        &bundle,
        rho,
        &k1.field,
        &v2.field,
        h.constant,
        1e-8 * rho * rho,
        &LedgerOptions::default(),
    )
    .map_err(numerical)?;
    let l = &system.ledger;
    let mut out =
        CheckOutcome::new("ledger", "K2 <= 4 K1 H + rho^2 and the bound chain").columns(&[
            "n",
            "K_n",
            "bound",
            "L_n",
            "partial_sum",
            "relative_error",
            "ok",
        ]);
    out.rows = l
        .chain
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                num(r.k_n),
                num(r.bound),
                num(r.l_n),
                num(r.partial_sum),
                num(r.relative_error),
                r.ok.to_string(),
            ]
        })
        .collect();
    let converged = h.verdict == Verdict::Converged;
    out.passed = l.ok() && converged;
    let worst_rel = l.chain.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    out.summary = format!(
        "K1 = {:.4}, K2 = {:.4} <= {:.4} (H = {:.4} x {}, transience {:?}), chain n <= {}: worst relative error {worst_rel:.1e}",
        l.k1,
        l.k2,
        l.k2_bound,
        l.h_estimate,
        l.safety,
        h.verdict,
        l.chain.len()
    );
    out.details =
        json!({ "ledger": l, "transience_verdict": h.verdict, "transience_se": h.standard_error });
    Ok(out)
}

/// On a recurrent backend with `W ≢ 0`: the W-integrability estimate
/// diverges and the stationary Feynman-Kac field is the extinct `Φ ≡ 0`.
pub fn divergence(
    model: &DerivedModel,
    rho: f64,
    horizon: f64,
    opts: &ConditionOptions,
    rng: RngStream,
) -> Result<CheckOutcome, CliError> {
    let d = discrete(model)?;
    let sampler = JumpSampler::new(model, SamplerOptions::default()).map_err(numerical)?;
    let probe: Vec<Point> = (0..d.n).map(Point::Node).collect();
    let report =
        estimate_w_integrability(&sampler, &probe, horizon, opts, rng.labeled("conditions"))
            .map_err(numerical)?;
    let fk_opts = FkOptions {
        pilot_horizon: horizon,
        pilot: opts.clone(),
        ..FkOptions::default()
    };
    let fk =
        fk_field(&sampler, &probe, rho, 1e-2, &fk_opts, rng.labeled("fk")).map_err(numerical)?;
    let mut out = CheckOutcome::new("divergence", "W-integrability diverges and Phi = 0")
        .columns(&["x", "integral", "slope", "verdict"]);
    out.rows = report
        .probes
        .iter()
        .map(|p| {
            vec![
                format!("{:?}", p.points[0]),
                num(p.integral),
                num(p.fit.slope),
                format!("{:?}", p.fit.verdict),
            ]
        })
        .collect();
    let zero = fk.field.values.iter().all(|&v| v == 0.0);
    out.passed = report.verdict == Verdict::Diverging && fk.regime == Regime::Extinct && zero;
    out.summary = format!(
        "verdict {:?}, tail slope {:.3}, regime {:?}",
        report.verdict, report.tail_slope, fk.regime
    );
    out.details =
        json!({ "verdict": report.verdict, "slope": report.tail_slope, "regime": fk.regime });
    Ok(out)
}
