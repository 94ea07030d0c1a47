//! TOML run configuration: the model sections `[space]`, `[kernel]`,
//! `[rates]`, `[psi]` plus per-command settings and one root seed.
//!
//! ```toml
//! seed = 7
//!
//! [space]
//! backend = "grid"          # "graph" | "grid" | "window"
//! dim = 3
//! lower = [-10.5, -10.5, -10.5]
//! upper = [10.5, 10.5, 10.5]
//! points = [21, 21, 21]
//! boundary = "absorbing"    # "periodic" | "absorbing" | "open"
//!
//! [kernel]
//! kind = "gaussian"
//! rate = 1.0
//! sigma = 4.0
//!
//! [rates]
//! v = { kind = "constant", value = 1.0 }
//! w = { kind = "indicator-ball", center = [0.0, 0.0, 0.0], radius = 3.0, value = 0.5 }
//!
//! [psi]
//! kind = "constant"
//! value = 1.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::ConditionOptions;
use crate::feynman_kac::FkOptions;
use crate::hierarchy::{LedgerOptions, MonitorOptions, SolveOptions};
use crate::jump::SamplerOptions;
use crate::model::{
    derive, Boundary, BoxGrid, DerivedModel, Kernel, ModelError, ModelOptions, ModelSpec, Point,
    RateField, SpaceBackend, Window, MAX_DIM,
};
use crate::particles::{Binning, SimOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceConfig {
    Graph {
        weights: Vec<f64>,
    },
    Grid {
        dim: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        points: Vec<usize>,
        boundary: Boundary,
    },
    Window {
        dim: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default = "periodic")]
        boundary: Boundary,
    },
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub v: RateField,
    #[serde(default = "zero_field")]
    pub w: RateField,
}

fn zero_field() -> RateField {
    RateField::constant(0.0)
}

fn unit_field() -> RateField {
    RateField::constant(1.0)
}

/// Probe locations: node indices on graphs and grids, coordinates on grids
/// and windows. Empty means a backend default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub nodes: Vec<usize>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rho: f64,
    /// Time horizon for finite-horizon and transience runs (0 picks
    /// `100 / V_min`).
    pub horizon: f64,
    /// Finite-horizon evaluation times for `fk`; empty means stationary.
    pub times: Vec<f64>,
    /// Target truncation bound `ε_T` for stationary estimates.
    pub tolerance: f64,
    pub probe: ProbeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            horizon: 0.0,
            times: Vec::new(),
            tolerance: 1e-2,
            probe: ProbeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    /// Highest correlation order computed (1 or 2).
    pub order: usize,
    /// Output times of the time-stepped fields; empty skips evolution.
    pub times: Vec<f64>,
    /// Horizon of the convergence monitor (0 skips it).
    pub monitor_horizon: f64,
    pub solve: SolveOptions,
    pub ledger: LedgerOptions,
    pub monitor: MonitorOptions,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            order: 2,
            times: Vec::new(),
            monitor_horizon: 0.0,
            solve: SolveOptions::default(),
            ledger: LedgerOptions::default(),
            monitor: MonitorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub ensemble: usize,
    /// Snapshot times; the last one is the horizon.
    pub times: Vec<f64>,
    /// Correlation order estimated (1 or 2).
    pub order: usize,
    /// Bins; `None` means one bin per node on discrete backends.
    pub bins: Option<Binning>,
    /// Bins expecting fewer points than this are flagged.
    pub min_expected: f64,
    pub options: SimOptions,
    /// Runs whose snapshots are written out in full.
    pub snapshot_runs: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            ensemble: 1000,
            times: vec![1.0],
            order: 2,
            bins: None,
            min_expected: 5.0,
            options: SimOptions {
                record_events: false,
                ..SimOptions::default()
            },
            snapshot_runs: 1,
        }
    }
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceConfig,
    pub kernel: Kernel,
    pub rates: RatesConfig,
    #[serde(default = "unit_field")]
    pub psi: RateField,
    #[serde(default)]
    pub options: ModelOptions,
    #[serde(default)]
    pub sampler: SamplerOptions,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub conditions: ConditionOptions,
    #[serde(default)]
    pub fk: FkOptions,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn model_spec(&self) -> ModelSpec {
        let space = match &self.space {
            SpaceConfig::Graph { weights } => SpaceBackend::FiniteGraph {
                weights: weights.clone(),
            },
            SpaceConfig::Grid {
                dim,
                lower,
                upper,
                points,
                boundary,
            } => SpaceBackend::BoxGrid(BoxGrid {
                dim: *dim,
                lower: lower.clone(),
                upper: upper.clone(),
                points: points.clone(),
                boundary: *boundary,
            }),
            SpaceConfig::Window {
                dim,
                lower,
                upper,
                boundary,
            } => SpaceBackend::ContinuumWindow(Window {
                dim: *dim,
                lower: lower.clone(),
                upper: upper.clone(),
                boundary: *boundary,
            }),
        };
        ModelSpec {
            space,
            kernel: self.kernel.clone(),
            v: self.rates.v.clone(),
            w: self.rates.w.clone(),
            psi: self.psi.clone(),
            options: self.options.clone(),
        }
    }

    /// Run-level checks plus full model validation.
    pub fn check(&self) -> Result<(), ConfigError> {
        let r = &self.run;
        if !(r.rho.is_finite() && r.rho > 0.0) {
            return Err(invalid(
                "run.rho",
                format!("must be positive and finite, got {}", r.rho),
            ));
        }
        if !(r.horizon.is_finite() && r.horizon >= 0.0) {
            return Err(invalid("run.horizon", "must be non-negative and finite"));
        }
        if !(r.tolerance > 0.0) {
            return Err(invalid("run.tolerance", "must be positive"));
        }
        if r.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid(
                "run.times",
                "times must be non-negative and finite",
            ));
        }
        if !(1..=2).contains(&self.hierarchy.order) {
            return Err(invalid("hierarchy.order", "must be 1 or 2"));
        }
        if !(1..=2).contains(&self.simulate.order) {
            return Err(invalid("simulate.order", "must be 1 or 2"));
        }
        let s = &self.simulate.times;
        if s.is_empty() || s.windows(2).any(|w| w[1] < w[0]) || s[0] < 0.0 {
            return Err(invalid(
                "simulate.times",
                "need sorted non-negative snapshot times",
            ));
        }
        self.model_spec().validate()?;
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedModel, ConfigError> {
        Ok(derive(&self.model_spec())?)
    }

    /// Resolved probe points on `model`. Without explicit probes: all nodes
    /// of graphs with at most 64 nodes (else the first 64), the node nearest
    /// the centre of a grid, and the centre of a window.
    pub fn probe(&self, model: &DerivedModel) -> Result<Vec<Point>, ConfigError> {
        let p = &self.run.probe;
        let mut out = Vec::new();
        match (model.discrete(), &self.space) {
            (Some(d), _) => {
                for &i in &p.nodes {
                    if i >= d.n {
                        return Err(invalid(
                            "run.probe.nodes",
                            format!("node {i} out of range 0..{}", d.n),
                        ));
                    }
                    out.push(Point::Node(i));
                }
                for (k, x) in p.points.iter().enumerate() {
                    let lat = d
                        .lattice
                        .as_ref()
                        .ok_or_else(|| invalid("run.probe.points", "graphs take node probes"))?;
                    let c = coords(x, lat.dim, k)?;
                    let node = lat.locate(&c).ok_or_else(|| {
                        invalid(&format!("run.probe.points[{k}]"), "outside the grid")
                    })?;
                    out.push(Point::Node(node));
                }
                if out.is_empty() {
                    match &d.lattice {
                        None => out.extend((0..d.n.min(64)).map(Point::Node)),
                        Some(lat) => {
                            let mut centre = [0.0; MAX_DIM];
                            for k in 0..lat.dim {
                                centre[k] = lat.lower[k] + 0.5 * lat.extent()[k];
                            }
                            out.push(Point::Node(lat.locate(&centre).unwrap_or(0)));
                        }
                    }
                }
            }
            (
                None,
                SpaceConfig::Window {
                    dim, lower, upper, ..
                },
            ) => {
                if !p.nodes.is_empty() {
                    return Err(invalid("run.probe.nodes", "windows take coordinate probes"));
                }
                for (k, x) in p.points.iter().enumerate() {
                    out.push(Point::Site(coords(x, *dim, k)?));
                }
                if out.is_empty() {
                    let c: Vec<f64> = lower
                        .iter()
                        .zip(upper)
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect();
                    out.push(Point::site(&c));
                }
            }
            (None, _) => unreachable!("continuum models come from window configs"),
        }
        Ok(out)
    }
}

fn coords(x: &[f64], dim: usize, k: usize) -> Result<[f64; MAX_DIM], ConfigError> {
    if x.len() != dim {
        return Err(invalid(
            &format!("run.probe.points[{k}]"),
            format!("need {dim} coordinates, got {}", x.len()),
        ));
    }
    let mut c = [0.0; MAX_DIM];
    c[..dim].copy_from_slice(x);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAPH: &str = r#"
seed = 3

[space]
backend = "graph"
weights = [1.0, 1.0]

[kernel]
kind = "tabulated"
matrix = [[0.0, 2.0], [1.0, 0.0]]

[rates]
v = { kind = "critical" }
w = { kind = "tabulated", values = [0.5, 0.0] }

[psi]
kind = "tabulated"
values = [1.0, 1.5]
"#;

    #[test]
    fn graph_config_round_trips() {
        let cfg = Config::from_toml(GRAPH).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(
            cfg.model_spec(),
            crate::fixtures::two_node_graph([0.5, 0.0])
        );
        let again = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        let model = cfg.derive().unwrap();
        assert_eq!(
            cfg.probe(&model).unwrap(),
            vec![Point::Node(0), Point::Node(1)]
        );
    }

    #[test]
    fn diagnostics_name_the_field() {
        let neg = GRAPH.replace(
            r#"v = { kind = "critical" }"#,
            r#"v = { kind = "constant", value = -1.0 }"#,
        );
        let err = Config::from_toml(&neg).unwrap_err().to_string();
        assert!(err.starts_with("rates.v"), "{err}");

        let typo = GRAPH.replace("weights =", "weigths =");
        let err = Config::from_toml(&typo).unwrap_err().to_string();
        assert!(err.contains("weigths"), "{err}");

        let rho = format!("{GRAPH}\n[run]\nrho = 0.0\n");
        let err = Config::from_toml(&rho).unwrap_err().to_string();
        assert!(err.starts_with("run.rho"), "{err}");
    }

    #[test]
    fn grid_probe_points_locate_nodes() {
        let text = r#"
[space]
backend = "grid"
dim = 1
lower = [0.0]
upper = [10.0]
points = [10]
boundary = "periodic"

[kernel]
kind = "gaussian"
rate = 1.0
sigma = 1.0

[rates]
v = { kind = "critical" }

[run.probe]
points = [[2.5], [9.9]]
"#;
        let cfg = Config::from_toml(text).unwrap();
        let model = cfg.derive().unwrap();
        assert_eq!(
            cfg.probe(&model).unwrap(),
            vec![Point::Node(2), Point::Node(9)]
        );
    }
}
