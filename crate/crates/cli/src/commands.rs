//! The six subcommands. Each writes its artifacts through the run
//! directory and reports an exit code: 0 success, 3 when a condition
//! diverges (with the extinction regime reported), 4 on numerical failure.

use serde_json::json;

use contact_core::conditions::{
    estimate_transience, estimate_w_integrability, ConditionReport, Verdict,
};
use contact_core::config::Config;
use contact_core::feynman_kac::{fk_field, fk_finite_horizon, Regime};
use contact_core::field::Field;
use contact_core::hierarchy::{
    assemble, comparison_checks, convergence_monitor, evolve, stationary_k1, stationary_v2,
    BoundLedger, EvolveOptions, HierarchyError, MonitorMode, MonitorOptions, OperatorBundle,
};
use contact_core::jump::JumpSampler;
use contact_core::model::{DerivedModel, Discrete, Point, RateField, Repr, SpaceBackend};
use contact_core::particles::{
    run_ensemble, sample_poisson_initial, Binning, EventKind, ParticleSimulator,
};
use contact_core::rng::RngStream;

use crate::manifest::{num, RunDir};
use crate::verify::{self, CheckOutcome};
use crate::{CliError, CommandResult, EXIT_DIVERGENCE, EXIT_NUMERICAL, EXIT_OK};

fn hierarchy_err(e: HierarchyError) -> CliError {
    match e {
        HierarchyError::NotDiscrete => CliError::Config(e.to_string()),
        other => CliError::numerical(other),
    }
}

/// Node index on discrete backends, `x;y;z` coordinates in continuum.
fn label(model: &DerivedModel, p: &Point) -> String {
    match p {
        Point::Node(i) => i.to_string(),
        Point::Site(x) => x[..model.dim()]
            .iter()
            .map(|v| num(*v))
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn default_horizon(cfg: &Config, model: &DerivedModel) -> f64 {
    if cfg.run.horizon > 0.0 {
        cfg.run.horizon
    } else {
        100.0 / model.v_min()
    }
}

/// All unordered probe pairs (diagonal included) for up to 8 probes;
/// beyond that the diagonal plus pairs with the first probe.
fn probe_pairs(probe: &[Point]) -> Vec<(Point, Point)> {
    if probe.len() <= 8 {
        probe
            .iter()
            .enumerate()
            .flat_map(|(a, x)| probe[a..].iter().map(move |y| (*x, *y)))
            .collect()
    } else {
        let mut pairs: Vec<(Point, Point)> = probe.iter().map(|x| (*x, *x)).collect();
        pairs.extend(probe[1..].iter().map(|y| (probe[0], *y)));
        pairs
    }
}

fn node_pairs(probe: &[Point]) -> Vec<(usize, usize)> {
    probe_pairs(probe)
        .into_iter()
        .filter_map(|(x, y)| Some((x.node()?, y.node()?)))
        .collect()
}

/// Grid metadata lines for field CSVs.
fn field_header(d: &Discrete, what: &str, rho: f64) -> Vec<String> {
    let mut lines = vec![format!("field={what} rho={}", num(rho))];
    match &d.lattice {
        None => lines.push(format!("backend=graph nodes={}", d.n)),
        Some(l) => {
            let dim = l.dim;
            let join = |v: &[f64]| {
                v[..dim]
                    .iter()
                    .map(|x| num(*x))
                    .collect::<Vec<_>>()
                    .join("x")
            };
            lines.push(format!(
                "backend=grid dim={dim} shape={} lower={} spacing={} boundary={}",
                l.shape[..dim]
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join("x"),
                join(&l.lower),
                join(&l.spacing),
                if l.periodic { "periodic" } else { "absorbing" }
            ));
        }
    }
    lines
}

fn node_coords(d: &Discrete, i: usize) -> Vec<String> {
    match &d.lattice {
        None => Vec::new(),
        Some(l) => l.coords(i)[..l.dim].iter().map(|x| num(*x)).collect(),
    }
}

fn coord_columns(d: &Discrete) -> Vec<&'static str> {
    match &d.lattice {
        None => Vec::new(),
        Some(l) => ["x1", "x2", "x3"][..l.dim].to_vec(),
    }
}

fn curve_rows(a: &ConditionReport, b: &ConditionReport) -> Vec<Vec<String>> {
    a.times
        .iter()
        .enumerate()
        .map(|(k, t)| vec![num(*t), num(a.integrand[k]), num(b.integrand[k])])
        .collect()
}

fn sampler<'a>(cfg: &Config, model: &'a DerivedModel) -> Result<JumpSampler<'a>, CliError> {
    JumpSampler::new(model, cfg.sampler.clone()).map_err(|e| CliError::Config(e.to_string()))
}

/// `check`: the transience and W-integrability conditions on the probe.
pub fn check(
    cfg: &Config,
    model: &DerivedModel,
    dir: &mut RunDir,
) -> Result<CommandResult, CliError> {
    model.check_criticality()?;
    let root = RngStream::root(cfg.seed);
    let sampler = sampler(cfg, model)?;
    let probe = cfg.probe(model)?;
    let horizon = default_horizon(cfg, model);
    let pairs = probe_pairs(&probe);
    let h = estimate_transience(
        &sampler,
        &pairs,
        horizon,
        &cfg.conditions,
        root.labeled("transience"),
    )
    .map_err(CliError::numerical)?;
    let l = estimate_w_integrability(
        &sampler,
        &probe,
        horizon,
        &cfg.conditions,
        root.labeled("w-integrability"),
    )
    .map_err(CliError::numerical)?;
    let extinct = l.verdict == Verdict::Diverging;
    let regime = if extinct {
        Regime::Extinct
    } else {
        Regime::Persistent
    };
    dir.json(
        "conditions.json",
        "transience and W-integrability reports",
        &json!({
            "seed": cfg.seed,
            "horizon": horizon,
            "probe": probe,
            "regime": regime,
            "transience": h,
            "w_integrability": l,
        }),
    )?;
    dir.csv(
        "condition_curves.csv",
        "probe-sup integrands of both conditions",
        &[],
        &["t", "transience", "w_integrability"],
        curve_rows(&h, &l),
    )?;
    let summary = format!(
        "transience: H = {:.4} ± {:.1e} ({:?}, slope {:.2}); W-integrability: L = {:.4} ± {:.1e} ({:?}, slope {:.2})",
        h.constant, h.standard_error, h.verdict, h.tail_slope, l.constant, l.standard_error, l.verdict, l.tail_slope
    );
    let (exit_code, status) = if extinct {
        (
            EXIT_DIVERGENCE,
            format!("extinction regime: W-integrability diverges, Phi = 0; {summary}"),
        )
    } else if h.verdict == Verdict::Diverging {
        (
            EXIT_DIVERGENCE,
            format!("transience condition diverges; {summary}"),
        )
    } else {
        (EXIT_OK, summary)
    };
    Ok(CommandResult {
        exit_code,
        status,
        streams: vec!["transience".into(), "w-integrability".into()],
        warnings: Vec::new(),
    })
}

/// `fk`: finite-horizon values at `run.times`, or the stationary density.
pub fn fk(
    cfg: &Config,
    model: &DerivedModel,
    dump: usize,
    dir: &mut RunDir,
) -> Result<CommandResult, CliError> {
    let root = RngStream::root(cfg.seed);
    let sampler = sampler(cfg, model)?;
    let probe = cfg.probe(model)?;
    let rho = cfg.run.rho;
    let mut streams = vec!["fk".to_string()];
    let (exit_code, status) = if !cfg.run.times.is_empty() {
        let base = root.labeled("fk");
        let mut rows = Vec::new();
        for (k, &t) in cfg.run.times.iter().enumerate() {
            for (p, x) in probe.iter().enumerate() {
                let e = fk_finite_horizon(
                    &sampler,
                    *x,
                    t,
                    rho,
                    cfg.fk.ensemble,
                    base.child(k as u64).child(p as u64),
                )
                .map_err(CliError::numerical)?;
                rows.push(vec![
                    num(t),
                    label(model, x),
                    num(e.value),
                    num(e.standard_error),
                    num(0.0),
                ]);
            }
        }
        dir.csv(
            "fk_finite.csv",
            "finite-horizon Feynman-Kac estimates",
            &[],
            &["t", "x", "value", "se", "eps_T"],
            rows,
        )?;
        (
            EXIT_OK,
            format!(
                "{} finite-horizon estimates",
                cfg.run.times.len() * probe.len()
            ),
        )
    } else {
        let f = fk_field(
            &sampler,
            &probe,
            rho,
            cfg.run.tolerance,
            &cfg.fk,
            root.labeled("fk"),
        )
        .map_err(CliError::numerical)?;
        let rows: Vec<Vec<String>> = match f.regime {
            Regime::Extinct => probe
                .iter()
                .map(|x| vec![label(model, x), num(0.0), num(0.0), "inf".into()])
                .collect(),
            Regime::Persistent => f
                .estimates
                .iter()
                .map(|e| {
                    vec![
                        label(model, &e.point),
                        num(e.value),
                        num(e.standard_error),
                        num(e.truncation_bound),
                    ]
                })
                .collect(),
        };
        dir.csv(
            "fk.csv",
            "stationary Feynman-Kac density",
            &[],
            &["x", "value", "se", "eps_T"],
            rows,
        )?;
        dir.json(
            "fk.json",
            "regime, horizon and pilot W-integrability report",
            &json!({ "regime": f.regime, "horizon": f.horizon, "truncation_bound": f.truncation_bound, "pilot": f.pilot }),
        )?;
        match f.regime {
            Regime::Extinct => (
                EXIT_DIVERGENCE,
                format!(
                    "extinction regime: W-integrability diverges (slope {:.3}), Phi = 0",
                    f.pilot.tail_slope
                ),
            ),
            Regime::Persistent => (
                EXIT_OK,
                format!(
                    "stationary density at {} probes, horizon {:.1}, eps_T {:.2e}",
                    probe.len(),
                    f.horizon,
                    f.truncation_bound
                ),
            ),
        }
    };
    if dump > 0 {
        let horizon = default_horizon(cfg, model);
        let base = root.labeled("trajectories");
        let mut rows = Vec::new();
        for i in 0..dump {
            let s = base.child(i as u64);
            let traj = sampler
                .trajectory(probe[0], horizon, &mut s.rng())
                .map_err(CliError::numerical)?;
            for (step, seg) in traj.segments.iter().enumerate() {
                rows.push(vec![
                    s.stream.to_string(),
                    step.to_string(),
                    label(model, &seg.state),
                    num(seg.holding),
                ]);
            }
        }
        dir.csv(
            "trajectories.csv",
            "jump-process segments from the first probe point",
            &[],
            &["stream_id", "step", "state", "holding"],
            rows,
        )?;
        streams.push("trajectories".into());
    }
    Ok(CommandResult {
        exit_code,
        status,
        streams,
        warnings: Vec::new(),
    })
}

/// `hierarchy`: stationary `k¹`, `k²`, the bound ledger, and optionally
/// the time-stepped fields and the convergence monitor.
pub fn hierarchy(
    cfg: &Config,
    model: &DerivedModel,
    dir: &mut RunDir,
) -> Result<CommandResult, CliError> {
    let hc = &cfg.hierarchy;
    let rho = cfg.run.rho;
    let root = RngStream::root(cfg.seed);
    let bundle = OperatorBundle::new(model, hc.order).map_err(hierarchy_err)?;
    let d = bundle.discrete();
    let probe = cfg.probe(model)?;
    let pairs = node_pairs(&probe);
    let mut warnings = Vec::new();
    let mut streams = Vec::new();
    let mut exit_code = EXIT_OK;
    let mut status = Vec::new();

    let k1 = stationary_k1(&bundle, rho, &hc.solve).map_err(hierarchy_err)?;
    let mut header = vec!["node"];
    header.extend(coord_columns(d));
    header.push("k1");
    dir.csv(
        "k1.csv",
        "stationary first correlation function",
        &field_header(d, "k1", rho),
        &header,
        (0..d.n).map(|i| {
            let mut r = vec![i.to_string()];
            r.extend(node_coords(d, i));
            r.push(num(k1.field.values[i]));
            r
        }),
    )?;
    status.push(format!("k1 solved (residual {:.1e})", k1.residual));

    // K_2 from the full field when it fits, else at the probe pairs
    let mut k2_sup = None;
    let mut full_system = None;
    if hc.order == 2 {
        let n = d.n;
        if n * n <= hc.monitor.full_field_limit {
            match stationary_v2(&bundle, rho, &k1.field, &hc.solve) {
                Ok(v2) => {
                    let product = Field::tensor_square(&k1.field);
                    let rows: Box<dyn Iterator<Item = Vec<String>>> = if n * n <= 1 << 20 {
                        Box::new((0..n * n).map(|idx| {
                            vec![
                                (idx / n).to_string(),
                                (idx % n).to_string(),
                                num(product.values[idx] + v2.field.values[idx]),
                                num(v2.field.values[idx]),
                            ]
                        }))
                    } else {
                        warnings.push(
                            "k2.csv restricted to probe pairs (field too large to write)".into(),
                        );
                        Box::new(pairs.iter().map(|&(i, j)| {
                            let idx = i * n + j;
                            vec![
                                i.to_string(),
                                j.to_string(),
                                num(product.values[idx] + v2.field.values[idx]),
                                num(v2.field.values[idx]),
                            ]
                        }))
                    };
                    dir.csv(
                        "k2.csv",
                        "stationary second correlation function and its connected part",
                        &field_header(d, "k2", rho),
                        &["i", "j", "k2", "v2"],
                        rows,
                    )?;
                    status.push(format!("k2 solved (residual {:.1e})", v2.residual));
                    full_system = Some(v2.field);
                }
                Err(HierarchyError::Singular) => {
                    warnings.push("S_2 is singular (W = 0 on an exactly critical closed backend): no stationary k2".into());
                }
                Err(e) => return Err(hierarchy_err(e)),
            }
        } else {
            if pairs.is_empty() {
                return Err(CliError::Config(
                    "run.probe: large grids need node probes for k2".into(),
                ));
            }
            let horizon = if hc.monitor_horizon > 0.0 {
                hc.monitor_horizon
            } else {
                100.0 / model.v_min()
            };
            let opts = MonitorOptions {
                probe_pairs: pairs.clone(),
                mode: Some(MonitorMode::ProbePairs),
                ..hc.monitor.clone()
            };
            let r = convergence_monitor(&bundle, rho, horizon, &opts).map_err(hierarchy_err)?;
            dir.csv(
                "k2.csv",
                "stationary second correlation function at probe pairs",
                &field_header(d, "k2", rho),
                &["i", "j", "k2", "v2"],
                r.pairs
                    .iter()
                    .map(|p| vec![p.i.to_string(), p.j.to_string(), num(p.k2), num(p.v2)]),
            )?;
            warnings.push("K2 is the probe-pair maximum (field too large for a full solve)".into());
            k2_sup = Some(r.pairs.iter().map(|p| p.k2.abs()).fold(0.0, f64::max));
        }
    }

    if hc.order == 2 && (full_system.is_some() || k2_sup.is_some()) {
        let sampler = sampler(cfg, model)?;
        let horizon = default_horizon(cfg, model);
        let h = estimate_transience(
            &sampler,
            &probe_pairs(&probe),
            horizon,
            &cfg.conditions,
            root.labeled("transience"),
        )
        .map_err(CliError::numerical)?;
        streams.push("transience".to_string());
        let ledger = match (&full_system, k2_sup) {
            (Some(v2), _) => {
                assemble(
                    &bundle,
                    rho,
                    &k1.field,
                    v2,
                    h.constant,
                    1e-8 * rho * rho,
                    &hc.ledger,
                )
                .map_err(hierarchy_err)?
                .ledger
            }
            (None, Some(k2)) => {
                BoundLedger::new(rho, k1.field.sup_norm(), k2, h.constant, &hc.ledger)
            }
            _ => unreachable!(),
        };
        dir.json(
            "ledger.json",
            "bound ledger with the transience estimate",
            &json!({ "ledger": ledger, "transience": { "constant": h.constant, "standard_error": h.standard_error, "verdict": h.verdict, "slope": h.tail_slope } }),
        )?;
        status.push(format!(
            "ledger: K1 = {:.4}, K2 = {:.4} <= {:.4}: {}, chain {}",
            ledger.k1, ledger.k2, ledger.k2_bound, ledger.k2_ok, ledger.chain_ok
        ));
        if h.verdict == Verdict::Diverging {
            exit_code = EXIT_DIVERGENCE;
            status.push("transience condition diverges: the ledger bounds are vacuous".into());
        } else if !ledger.ok() {
            exit_code = EXIT_NUMERICAL;
            status.push("ledger inequality violated".into());
        }
    }

    if !hc.times.is_empty() {
        let ev =
            evolve(&bundle, rho, &hc.times, &EvolveOptions::default()).map_err(hierarchy_err)?;
        dir.csv(
            "evolution_k1.csv",
            "time-stepped k1 at every node",
            &field_header(d, "k1_t", rho),
            &["t", "node", "k1"],
            ev.times.iter().enumerate().flat_map(|(k, t)| {
                let f = &ev.k1[k];
                (0..d.n).map(move |i| vec![num(*t), i.to_string(), num(f.values[i])])
            }),
        )?;
        if !ev.k2.is_empty() {
            dir.csv(
                "evolution_k2.csv",
                "time-stepped k2 at the probe pairs",
                &field_header(d, "k2_t", rho),
                &["t", "i", "j", "k2"],
                ev.times.iter().enumerate().flat_map(|(k, t)| {
                    let f = &ev.k2[k];
                    pairs.iter().map(move |&(i, j)| {
                        vec![num(*t), i.to_string(), j.to_string(), num(f.get2(i, j))]
                    })
                }),
            )?;
        }
        status.push(format!(
            "evolved to t = {} (dt {:.2e})",
            hc.times.last().unwrap(),
            ev.dt
        ));
    }

    if hc.monitor_horizon > 0.0 {
        let opts = MonitorOptions {
            probe_pairs: if hc.monitor.probe_pairs.is_empty() {
                pairs.clone()
            } else {
                hc.monitor.probe_pairs.clone()
            },
            ..hc.monitor.clone()
        };
        match convergence_monitor(&bundle, rho, hc.monitor_horizon, &opts) {
            Ok(r) => {
                dir.csv(
                    "convergence.csv",
                    "distance of k_t to the stationary correlation functions",
                    &[],
                    &["t", "dist1", "dist2"],
                    r.times.iter().enumerate().map(|(k, t)| {
                        vec![
                            num(*t),
                            num(r.dist1[k]),
                            r.dist2.get(k).map_or(String::new(), |v| num(*v)),
                        ]
                    }),
                )?;
                dir.json(
                    "monitor.json",
                    "convergence verdicts",
                    &json!({
                        "mode": r.mode, "converged": r.converged, "decreasing1": r.decreasing1,
                        "decreasing2": r.decreasing2, "pairs": r.pairs,
                        "final_dist1": r.dist1.last(), "final_dist2": r.dist2.last(),
                    }),
                )?;
                status.push(format!("monitor converged: {}", r.converged));
            }
            Err(HierarchyError::Singular) => {
                warnings.push("monitor skipped: S_2 is singular".into())
            }
            Err(e) => return Err(hierarchy_err(e)),
        }
    }
    Ok(CommandResult {
        exit_code,
        status: status.join("; "),
        streams,
        warnings,
    })
}

fn default_bins(model: &DerivedModel) -> Binning {
    match model.repr() {
        Repr::Discrete(d) => Binning::Nodes {
            bins: (0..d.n).map(|i| vec![i]).collect(),
        },
        Repr::Continuum(c) => Binning::Cells {
            lower: c.window.lower.clone(),
            upper: c.window.upper.clone(),
            counts: vec![4; c.dim],
        },
    }
}

/// `simulate`: ensemble of particle runs from Poisson data with binned
/// correlation estimates at the snapshot times.
pub fn simulate(
    cfg: &Config,
    model: &DerivedModel,
    dir: &mut RunDir,
) -> Result<CommandResult, CliError> {
    let sc = &cfg.simulate;
    let rho = cfg.run.rho;
    let base = RngStream::root(cfg.seed).labeled("simulate");
    let bins = sc.bins.clone().unwrap_or_else(|| default_bins(model));
    let est = run_ensemble(
        model,
        rho,
        &sc.times,
        sc.ensemble,
        &bins,
        sc.order,
        sc.options,
        sc.min_expected,
        base,
    )
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    dir.csv(
        "k1.csv",
        "binned first correlation estimates",
        &[],
        &["t", "bin", "mass", "k1", "se"],
        est.iter().flat_map(|e| {
            (0..e.k1.len()).map(move |b| {
                vec![
                    num(e.time),
                    b.to_string(),
                    num(e.bin_mass[b]),
                    num(e.k1[b]),
                    num(e.k1_se[b]),
                ]
            })
        }),
    )?;
    if sc.order == 2 {
        dir.csv(
            "k2.csv",
            "binned second correlation estimates (factorial diagonal)",
            &[],
            &["t", "bin_i", "bin_j", "k2", "se"],
            est.iter().flat_map(|e| {
                let nb = e.k1.len();
                (0..nb * nb).map(move |idx| {
                    vec![
                        num(e.time),
                        (idx / nb).to_string(),
                        (idx % nb).to_string(),
                        num(e.k2[idx]),
                        num(e.k2_se[idx]),
                    ]
                })
            }),
        )?;
    }
    // replay the first runs on their ensemble streams for full snapshots
    let sim = ParticleSimulator::new(model, sc.options)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let (mut snaps, mut events) = (Vec::new(), Vec::new());
    for run in 0..sc.snapshot_runs.min(sc.ensemble) {
        let mut r = base.child(run as u64).rng();
        let start = sample_poisson_initial(model, rho, &mut r)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let (configs, log) = sim
            .run(&start, &sc.times, &mut r)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        for c in &configs {
            for (k, p) in c.points.iter().enumerate() {
                snaps.push(vec![
                    run.to_string(),
                    num(c.time),
                    k.to_string(),
                    label(model, p),
                ]);
            }
        }
        for e in &log.events {
            let kind = match e.kind {
                EventKind::Birth => "birth",
                EventKind::Death => "death",
            };
            events.push(vec![
                run.to_string(),
                num(e.time),
                kind.into(),
                label(model, &e.position),
            ]);
        }
    }
    dir.csv(
        "snapshots.csv",
        "particle positions of the first runs at the snapshot times",
        &[],
        &["run", "t", "particle", "position"],
        snaps,
    )?;
    if sc.options.record_events {
        dir.csv(
            "events.csv",
            "event logs of the first runs",
            &[],
            &["run", "t", "kind", "position"],
            events,
        )?;
    }
    let warnings: Vec<String> = est
        .iter()
        .flat_map(|e| {
            e.warnings
                .iter()
                .map(move |w| format!("t = {}: {w}", e.time))
        })
        .collect();
    let total: f64 = est.last().map_or(0.0, |e| {
        e.k1.iter().zip(&e.bin_mass).map(|(k, m)| k * m).sum()
    });
    Ok(CommandResult {
        exit_code: EXIT_OK,
        status: format!(
            "{} runs, {} snapshot times, mean binned population at the last time {:.3}",
            sc.ensemble,
            sc.times.len(),
            total
        ),
        streams: vec!["simulate".into()],
        warnings,
    })
}

fn write_check(dir: &mut RunDir, c: &CheckOutcome) -> Result<(), CliError> {
    let cols: Vec<&str> = c.columns.iter().map(|s| s.as_str()).collect();
    dir.csv(
        &format!("verify_{}.csv", c.id),
        &c.title,
        &[],
        &cols,
        c.rows.clone(),
    )
}

/// `verify`: the oracle checks that apply to the configured backend.
pub fn verify(
    cfg: &Config,
    model: &DerivedModel,
    dir: &mut RunDir,
) -> Result<CommandResult, CliError> {
    let root = RngStream::root(cfg.seed).labeled("verify");
    let rho = cfg.run.rho;
    let mut checks: Vec<CheckOutcome> = Vec::new();
    let probe = cfg.probe(model)?;
    let spec = model.spec().clone();
    match &spec.space {
        SpaceBackend::FiniteGraph { weights } => {
            let n = weights.len();
            checks.push(verify::fk_vs_exact(
                model,
                rho,
                &[0.5, 2.0, 10.0],
                cfg.fk.ensemble,
                root.labeled("fk-exact"),
            )?);
            let mut closed = spec.clone();
            closed.w = RateField::constant(0.0);
            checks.push(verify::criticality_conservation(&[closed], rho)?);
            if n * n <= 256 {
                let mut c = CheckOutcome {
                    id: "comparison".into(),
                    title: "positivity, domination and Trotter bounds".into(),
                    passed: true,
                    summary: String::new(),
                    details: serde_json::Value::Null,
                    columns: vec!["n".into(), "checks".into(), "violations".into()],
                    rows: Vec::new(),
                };
                let mut violations = 0;
                for order in 1..=2 {
                    let b = OperatorBundle::new(model, order).map_err(hierarchy_err)?;
                    let r = comparison_checks(
                        &b,
                        16,
                        &[0.1, 1.0, 10.0],
                        root.labeled("comparison").child(order as u64),
                    )
                    .map_err(hierarchy_err)?;
                    violations += r.violations;
                    c.rows.push(vec![
                        order.to_string(),
                        r.checks.to_string(),
                        r.violations.to_string(),
                    ]);
                }
                c.passed = violations == 0;
                c.summary = format!("{violations} violations");
                checks.push(c);
            }
            if !model.w_is_zero() {
                checks.push(verify::divergence(
                    model,
                    rho,
                    default_horizon(cfg, model),
                    &cfg.conditions,
                    root.labeled("divergence"),
                )?);
            }
        }
        SpaceBackend::BoxGrid(g) => {
            let d = model.discrete().expect("grid is discrete");
            let nodes: Vec<usize> = probe.iter().filter_map(|p| p.node()).collect();
            let periodic = g.boundary == contact_core::model::Boundary::Periodic;
            if periodic {
                // closed torus: recurrent, so W ≢ 0 forces extinction
                if model.w_is_zero() {
                    checks.push(verify::criticality_conservation(
                        std::slice::from_ref(&spec),
                        rho,
                    )?);
                } else {
                    checks.push(verify::divergence(
                        model,
                        rho,
                        default_horizon(cfg, model),
                        &cfg.conditions,
                        root.labeled("divergence"),
                    )?);
                }
                if d.n <= 1024 {
                    let shells = verify::radial_shells(d, &[2.0, 4.0]);
                    let mult: Vec<f64> = cfg
                        .simulate
                        .times
                        .iter()
                        .map(|t| t * model.v_min())
                        .collect();
                    checks.push(verify::particles_vs_hierarchy(
                        model,
                        "torus",
                        rho,
                        &mult,
                        cfg.simulate.ensemble,
                        &shells,
                        root.labeled("particles"),
                    )?);
                }
            } else {
                let (solve, bounds) = verify::fk_vs_solve(
                    model,
                    rho,
                    &nodes,
                    cfg.run.tolerance,
                    &cfg.fk,
                    root.labeled("fk-solve"),
                )?;
                checks.push(solve);
                checks.push(bounds);
                let horizon = if cfg.hierarchy.monitor_horizon > 0.0 {
                    cfg.hierarchy.monitor_horizon
                } else {
                    50.0 / model.v_min()
                };
                checks.push(verify::convergence(model, rho, horizon, &nodes)?);
                if d.n * d.n <= cfg.hierarchy.monitor.full_field_limit {
                    checks.push(verify::bound_ledger(
                        model,
                        rho,
                        &nodes,
                        default_horizon(cfg, model),
                        &cfg.conditions,
                        root.labeled("ledger"),
                    )?);
                }
            }
        }
        SpaceBackend::ContinuumWindow(_) => {
            let sampler = sampler(cfg, model)?;
            let f = fk_field(
                &sampler,
                &probe,
                rho,
                cfg.run.tolerance,
                &cfg.fk,
                root.labeled("fk-bounds"),
            )
            .map_err(CliError::numerical)?;
            checks.push(verify::fk_bounds_check(&f, rho).0);
        }
    }
    for c in &checks {
        println!("{}", c.line());
        write_check(dir, c)?;
    }
    dir.json("verify.json", "verification outcomes", &checks)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.id.as_str())
        .collect();
    let (exit_code, status) = if failed.is_empty() {
        (EXIT_OK, format!("all {} checks passed", checks.len()))
    } else {
        (EXIT_NUMERICAL, format!("failed: {}", failed.join(", ")))
    };
    Ok(CommandResult {
        exit_code,
        status,
        streams: vec!["verify".into()],
        warnings: Vec::new(),
    })
}

/// `report`: plot-ready curves — condition integrands, the stationary
/// profile and (on discrete backends) the `n = 1` convergence distance.
pub fn report(
    cfg: &Config,
    model: &DerivedModel,
    dir: &mut RunDir,
) -> Result<CommandResult, CliError> {
    let root = RngStream::root(cfg.seed).labeled("report");
    let rho = cfg.run.rho;
    let sampler = sampler(cfg, model)?;
    let probe = cfg.probe(model)?;
    let horizon = default_horizon(cfg, model);
    let h = estimate_transience(
        &sampler,
        &probe_pairs(&probe),
        horizon,
        &cfg.conditions,
        root.labeled("transience"),
    )
    .map_err(CliError::numerical)?;
    let l = estimate_w_integrability(
        &sampler,
        &probe,
        horizon,
        &cfg.conditions,
        root.labeled("w-integrability"),
    )
    .map_err(CliError::numerical)?;
    dir.csv(
        "condition_curves.csv",
        "probe-sup integrands of both conditions",
        &[],
        &["t", "transience", "w_integrability"],
        curve_rows(&h, &l),
    )?;
    let mut status = vec![format!(
        "H = {:.4} ({:?}), L = {:.4} ({:?})",
        h.constant, h.verdict, l.constant, l.verdict
    )];
    if let Some(d) = model.discrete() {
        let b1 = OperatorBundle::new(model, 1).map_err(hierarchy_err)?;
        let k1 = stationary_k1(&b1, rho, &cfg.hierarchy.solve).map_err(hierarchy_err)?;
        let mut header = vec!["node"];
        header.extend(coord_columns(d));
        header.extend(["k1", "w"]);
        dir.csv(
            "profile.csv",
            "stationary density and W at every node",
            &field_header(d, "k1", rho),
            &header,
            (0..d.n).map(|i| {
                let mut r = vec![i.to_string()];
                r.extend(node_coords(d, i));
                r.push(num(k1.field.values[i]));
                r.push(num(d.w[i]));
                r
            }),
        )?;
        let r = convergence_monitor(&b1, rho, horizon, &cfg.hierarchy.monitor)
            .map_err(hierarchy_err)?;
        dir.csv(
            "convergence.csv",
            "sup distance of k1_t to the stationary density",
            &[],
            &["t", "dist1"],
            r.times
                .iter()
                .zip(&r.dist1)
                .map(|(t, v)| vec![num(*t), num(*v)]),
        )?;
        status.push(format!(
            "final dist1 {:.2e}",
            r.dist1.last().copied().unwrap_or(f64::NAN)
        ));
    }
    Ok(CommandResult {
        exit_code: EXIT_OK,
        status: status.join("; "),
        streams: vec!["report".into()],
        warnings: Vec::new(),
    })
}
