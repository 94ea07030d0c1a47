//! Model specification, space backends and the derived quantities `b`,
//! `m̄` and `U` that every other module consumes.
//!
//! A [`ModelSpec`] is validated once and turned into an immutable
//! [`DerivedModel`] by [`derive`]. Graphs and box grids are discretized
//! eagerly (node vectors plus a kernel operator); continuum windows are
//! evaluated lazily.

pub mod kernel;
pub mod lattice;
pub mod rates;

mod continuum;
mod discrete;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use continuum::Continuum;
pub use discrete::{Discrete, KernelOp};
pub use kernel::Kernel;
pub use lattice::{Lattice, Stencil};
pub use rates::RateField;

pub const MAX_DIM: usize = 3;
pub type Coords = [f64; MAX_DIM];

/// A location in a backend: a node of a graph or grid, or a continuum site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Node(usize),
    Site(Coords),
}

impl Point {
    pub fn site(x: &[f64]) -> Self {
        let mut c = [0.0; MAX_DIM];
        for (d, s) in c.iter_mut().zip(x) {
            *d = *s;
        }
        Point::Site(c)
    }

    pub fn node(&self) -> Option<usize> {
        match self {
            Point::Node(i) => Some(*i),
            Point::Site(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Box grids: the box is a window into the infinite lattice; mass that
    /// leaves it is lost (trajectories are marked as exited).
    Absorbing,
    /// Continuum windows: the process lives in all of R^d.
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub boundary: Boundary,
}

impl Window {
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn contains(&self, x: &Coords) -> bool {
        (0..self.dim).all(|k| x[k] >= self.lower[k] && x[k] < self.upper[k])
    }

    /// Periodic wrap into the window.
    pub fn wrap(&self, x: &mut Coords) {
        for k in 0..self.dim {
            let l = self.upper[k] - self.lower[k];
            x[k] = self.lower[k] + (x[k] - self.lower[k]).rem_euclid(l);
            if x[k] >= self.upper[k] {
                x[k] = self.lower[k];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceBackend {
    FiniteGraph { weights: Vec<f64> },
    BoxGrid(BoxGrid),
    ContinuumWindow(Window),
}

impl SpaceBackend {
    pub fn dim(&self) -> usize {
        match self {
            SpaceBackend::FiniteGraph { .. } => 0,
            SpaceBackend::BoxGrid(g) => g.dim,
            SpaceBackend::ContinuumWindow(w) => w.dim,
        }
    }
}

/// Numerical knobs attached to a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    /// Psi values below this floor are rejected.
    pub psi_floor: f64,
    /// Kernel mass discarded by stencil truncation, relative to its rate.
    pub stencil_eps: f64,
    /// Hard cap on the stencil half-width in cells.
    pub max_stencil_cells: usize,
    /// Criticality tolerance on graphs (rate units).
    pub graph_critical_tol: f64,
    /// Points per axis of the midpoint rule used for continuum integrals.
    pub quadrature_points: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            psi_floor: 1e-12,
            stencil_eps: 1e-12,
            max_stencil_cells: 64,
            graph_critical_tol: 1e-8,
            quadrature_points: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub space: SpaceBackend,
    pub kernel: Kernel,
    pub v: RateField,
    pub w: RateField,
    pub psi: RateField,
    #[serde(default)]
    pub options: ModelOptions,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(
        "criticality fails: max |jump rate - V| = {residual:.3e} exceeds tolerance {tolerance:.3e}"
    )]
    NotCritical { residual: f64, tolerance: f64 },
    #[error("non-finite {what} at {location}")]
    NonFinite { what: String, location: String },
}

pub(crate) fn invalid(field: &str, message: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ModelSpec {
    /// Checks the structural invariants: positive finite weights, bounded
    /// non-negative rates, a strictly positive Psi and a kernel that fits
    /// the backend.
    pub fn validate(&self) -> Result<(), ModelError> {
        let dim = self.space.dim();
        let node_count = match &self.space {
            SpaceBackend::FiniteGraph { weights } => {
                if weights.is_empty() {
                    return Err(invalid("space.weights", "graph needs at least one node"));
                }
                for (i, w) in weights.iter().enumerate() {
                    if !(w.is_finite() && *w > 0.0) {
                        return Err(invalid(
                            &format!("space.weights[{i}]"),
                            format!("must be positive and finite, got {w}"),
                        ));
                    }
                }
                Some(weights.len())
            }
            SpaceBackend::BoxGrid(g) => {
                check_box(dim, &g.lower, &g.upper)?;
                if g.points.len() != dim || g.points.contains(&0) {
                    return Err(invalid("space.points", "need one positive count per axis"));
                }
                if g.boundary == Boundary::Open {
                    return Err(invalid("space.boundary", "grids are periodic or absorbing"));
                }
                Some(g.points.iter().product())
            }
            SpaceBackend::ContinuumWindow(w) => {
                check_box(dim, &w.lower, &w.upper)?;
                if w.boundary == Boundary::Absorbing {
                    return Err(invalid("space.boundary", "windows are periodic or open"));
                }
                None
            }
        };

        match &self.kernel {
            Kernel::Gaussian { rate, sigma } => {
                check_nonneg("kernel.rate", *rate)?;
                check_pos("kernel.sigma", *sigma)?;
            }
            Kernel::ExponentialTail { rate, length } => {
                check_nonneg("kernel.rate", *rate)?;
                check_pos("kernel.length", *length)?;
            }
            Kernel::PowerTail {
                rate,
                length,
                exponent,
            } => {
                check_nonneg("kernel.rate", *rate)?;
                check_pos("kernel.length", *length)?;
                if !(exponent.is_finite() && *exponent > dim as f64) {
                    return Err(invalid(
                        "kernel.exponent",
                        format!(
                            "must exceed the dimension {dim} for integrability, got {exponent}"
                        ),
                    ));
                }
            }
            Kernel::IndicatorBall { rate, radius } => {
                check_nonneg("kernel.rate", *rate)?;
                check_pos("kernel.radius", *radius)?;
            }
            Kernel::Constant { value } => {
                check_nonneg("kernel.value", *value)?;
                if node_count.is_none() || !matches!(self.space, SpaceBackend::FiniteGraph { .. }) {
                    return Err(invalid(
                        "kernel.kind",
                        "constant kernels need a finite graph",
                    ));
                }
            }
            Kernel::Tabulated { matrix } => {
                let n = match &self.space {
                    SpaceBackend::FiniteGraph { weights } => weights.len(),
                    _ => {
                        return Err(invalid(
                            "kernel.kind",
                            "tabulated kernels need a finite graph",
                        ))
                    }
                };
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(invalid("kernel.matrix", format!("must be {n}x{n}")));
                }
                for (i, row) in matrix.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        check_nonneg(&format!("kernel.matrix[{i}][{j}]"), *v)?;
                    }
                }
            }
        }
        if self.kernel.is_radial() && matches!(self.space, SpaceBackend::FiniteGraph { .. }) {
            return Err(invalid(
                "kernel.kind",
                "radial kernels need a grid or continuum backend",
            ));
        }

        check_field(
            "rates.v",
            &self.v,
            node_count,
            dim,
            |lo, _| lo > 0.0,
            "must be strictly positive",
        )?;
        check_field(
            "rates.w",
            &self.w,
            node_count,
            dim,
            |lo, _| lo >= 0.0,
            "must be non-negative",
        )?;
        if matches!(self.w, RateField::Critical) {
            return Err(invalid("rates.w", "'critical' is only valid for V"));
        }
        let floor = self.options.psi_floor;
        check_field(
            "psi",
            &self.psi,
            node_count,
            dim,
            |lo, _| lo >= floor,
            "below the positivity floor",
        )?;
        if matches!(self.psi, RateField::Critical) {
            return Err(invalid("psi", "'critical' is only valid for V"));
        }
        Ok(())
    }
}

fn check_box(dim: usize, lower: &[f64], upper: &[f64]) -> Result<(), ModelError> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(invalid(
            "space.dim",
            format!("must be between 1 and {MAX_DIM}, got {dim}"),
        ));
    }
    if lower.len() != dim || upper.len() != dim {
        return Err(invalid("space.lower", "need one bound per axis"));
    }
    for k in 0..dim {
        if !(lower[k].is_finite() && upper[k].is_finite() && upper[k] > lower[k]) {
            return Err(invalid(
                "space.upper",
                format!("axis {k}: upper must exceed lower"),
            ));
        }
    }
    Ok(())
}

fn check_pos(field: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn check_nonneg(field: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

fn check_field(
    name: &str,
    f: &RateField,
    nodes: Option<usize>,
    dim: usize,
    ok: impl Fn(f64, f64) -> bool,
    msg: &str,
) -> Result<(), ModelError> {
    if let RateField::Tabulated { values } = f {
        match nodes {
            Some(n) if values.len() == n => {}
            Some(n) => {
                return Err(invalid(
                    name,
                    format!("needs {n} values, got {}", values.len()),
                ))
            }
            None => return Err(invalid(name, "tabulated fields need a graph or grid")),
        }
    }
    if f.is_geometric() {
        if dim == 0 {
            return Err(invalid(name, "geometric fields need spatial coordinates"));
        }
        let center = match f {
            RateField::IndicatorBall { center, radius, .. } => {
                check_pos(&format!("{name}.radius"), *radius)?;
                center
            }
            RateField::GaussianBump { center, width, .. } => {
                check_pos(&format!("{name}.width"), *width)?;
                center
            }
            _ => unreachable!(),
        };
        if center.len() != dim {
            return Err(invalid(
                &format!("{name}.center"),
                format!("needs {dim} coordinates"),
            ));
        }
    }
    if let Some((lo, hi)) = f.bounds() {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(invalid(name, "values must be finite"));
        }
        if !ok(lo, hi) {
            return Err(invalid(name, format!("{msg} (range {lo}..{hi})")));
        }
    }
    Ok(())
}

/// Discretized or lazily evaluated representation of a validated model.
#[derive(Debug, Clone)]
pub enum Repr {
    Discrete(Discrete),
    Continuum(Continuum),
}

/// The immutable model every sampler and solver reads from: `b`, `m̄` and
/// `U = V + W` on the chosen backend.
#[derive(Debug, Clone)]
pub struct DerivedModel {
    spec: ModelSpec,
    repr: Repr,
}

/// Validates a specification and computes `b(x,y) = a(x,y)/Psi(x)`,
/// `m̄ = Psi m` and `U = V + W`.
pub fn derive(spec: &ModelSpec) -> Result<DerivedModel, ModelError> {
    spec.validate()?;
    let repr = match &spec.space {
        SpaceBackend::FiniteGraph { .. } | SpaceBackend::BoxGrid(_) => {
            Repr::Discrete(Discrete::build(spec)?)
        }
        SpaceBackend::ContinuumWindow(_) => Repr::Continuum(Continuum::build(spec)?),
    };
    Ok(DerivedModel {
        spec: spec.clone(),
        repr,
    })
}

impl DerivedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn discrete(&self) -> Option<&Discrete> {
        match &self.repr {
            Repr::Discrete(d) => Some(d),
            Repr::Continuum(_) => None,
        }
    }

    pub fn continuum(&self) -> Option<&Continuum> {
        match &self.repr {
            Repr::Continuum(c) => Some(c),
            Repr::Discrete(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.spec.space.dim()
    }

    /// Lower bound of V over the discretization (or analytically).
    pub fn v_min(&self) -> f64 {
        match &self.repr {
            Repr::Discrete(d) => d.v.iter().copied().fold(f64::INFINITY, f64::min),
            Repr::Continuum(c) => c.v_bounds().0,
        }
    }

    pub fn v_max(&self) -> f64 {
        match &self.repr {
            Repr::Discrete(d) => d.v.iter().copied().fold(0.0, f64::max),
            Repr::Continuum(c) => c.v_bounds().1,
        }
    }

    pub fn w_max(&self) -> f64 {
        match &self.repr {
            Repr::Discrete(d) => d.w.iter().copied().fold(0.0, f64::max),
            Repr::Continuum(c) => c.w_bounds().1,
        }
    }

    pub fn u_max(&self) -> f64 {
        match &self.repr {
            Repr::Discrete(d) => d.u.iter().copied().fold(0.0, f64::max),
            Repr::Continuum(c) => c.v_bounds().1 + c.w_bounds().1,
        }
    }

    pub fn w_is_zero(&self) -> bool {
        match &self.repr {
            Repr::Discrete(d) => d.w.iter().all(|&w| w == 0.0),
            Repr::Continuum(_) => self.spec.w.is_zero(),
        }
    }

    /// `W` at a point; exited or unrepresentable points give zero.
    pub fn w_at(&self, x: &Point) -> f64 {
        match (&self.repr, x) {
            (Repr::Discrete(d), Point::Node(i)) => d.w[*i],
            (Repr::Continuum(c), Point::Site(s)) => c.w(s),
            _ => 0.0,
        }
    }

    pub fn v_at(&self, x: &Point) -> f64 {
        match (&self.repr, x) {
            (Repr::Discrete(d), Point::Node(i)) => d.v[*i],
            (Repr::Continuum(c), Point::Site(s)) => c.v(s),
            _ => f64::NAN,
        }
    }

    pub fn psi_at(&self, x: &Point) -> f64 {
        match (&self.repr, x) {
            (Repr::Discrete(d), Point::Node(i)) => d.psi[*i],
            (Repr::Continuum(c), Point::Site(s)) => c.psi(s),
            _ => f64::NAN,
        }
    }

    /// The transformed kernel `b(x, y)`.
    pub fn b(&self, x: &Point, y: &Point) -> f64 {
        match (&self.repr, x, y) {
            (Repr::Discrete(d), Point::Node(i), Point::Node(j)) => d.b_raw(*i, *j),
            (Repr::Continuum(c), Point::Site(s), Point::Site(t)) => c.b(s, t),
            _ => 0.0,
        }
    }

    /// `∫ b(x, y) m̄(dy)`, i.e. the total jump rate out of `x`.
    pub fn jump_rate(&self, x: &Point) -> f64 {
        match (&self.repr, x) {
            (Repr::Discrete(d), Point::Node(i)) => d.row_sum[*i] + d.exit[*i],
            (Repr::Continuum(c), Point::Site(s)) => c.birth_mass_b(s),
            _ => f64::NAN,
        }
    }

    /// Tolerance within which criticality is considered to hold.
    pub fn criticality_tolerance(&self) -> f64 {
        match &self.repr {
            Repr::Discrete(d) => d.critical_tolerance(&self.spec.options),
            Repr::Continuum(c) => c.critical_tolerance(),
        }
    }

    /// Fails unless the jump rate equals V within tolerance everywhere on a
    /// discrete backend, or on a probe lattice of the window in continuum.
    pub fn check_criticality(&self) -> Result<(), ModelError> {
        let tol = self.criticality_tolerance();
        let residual = match &self.repr {
            Repr::Discrete(d) => (0..d.n)
                .map(|i| (d.row_sum[i] + d.exit[i] - d.v[i]).abs())
                .fold(0.0, f64::max),
            Repr::Continuum(c) => c
                .probe_sites(5)
                .iter()
                .map(|s| (c.birth_mass_b(s) - c.v(s)).abs())
                .fold(0.0, f64::max),
        };
        if residual.is_finite() && residual <= tol {
            Ok(())
        } else {
            Err(ModelError::NotCritical {
                residual,
                tolerance: tol,
            })
        }
    }

    /// Re-expresses a derived graph model as a specification with kernel
    /// `b`, base weights `m̄` and `Psi ≡ 1`. Returns `None` off graphs.
    pub fn to_spec(&self) -> Option<ModelSpec> {
        let d = self.discrete()?;
        if !matches!(self.spec.space, SpaceBackend::FiniteGraph { .. }) {
            return None;
        }
        let matrix = (0..d.n)
            .map(|i| (0..d.n).map(|j| d.b_raw(i, j)).collect())
            .collect();
        Some(ModelSpec {
            space: SpaceBackend::FiniteGraph {
                weights: d.mbar.clone(),
            },
            kernel: Kernel::Tabulated { matrix },
            v: RateField::Tabulated {
                values: d.v.clone(),
            },
            w: RateField::Tabulated {
                values: d.w.clone(),
            },
            psi: RateField::constant(1.0),
            options: self.spec.options.clone(),
        })
    }
}

/// `∫ a(x, y) Psi(y) m(dy) - V(x) Psi(x)`: exact on graphs and lattices,
/// midpoint quadrature in continuum.
pub fn criticality_residual(derived: &DerivedModel, x: &Point) -> f64 {
    match (derived.repr(), x) {
        (Repr::Discrete(d), Point::Node(i)) => {
            d.psi[*i] * (d.row_sum[*i] + d.exit[*i]) - d.v[*i] * d.psi[*i]
        }
        (Repr::Continuum(c), Point::Site(s)) => c.psi(s) * (c.birth_mass_b(s) - c.v(s)),
        _ => f64::NAN,
    }
}

/// Empirical regularity constant: the largest `∫ a(y, x) m(dy)` over the
/// probe (integration over the first argument).
pub fn regularity_bound(derived: &DerivedModel, probe: &[Point]) -> f64 {
    match derived.repr() {
        Repr::Discrete(d) => {
            let masses = d.offspring_mass();
            let on_probe = probe
                .iter()
                .filter_map(|p| p.node())
                .map(|i| masses[i])
                .fold(0.0, f64::max);
            let global = masses.iter().copied().fold(0.0, f64::max);
            if global > on_probe * (1.0 + 1e-12) + 1e-300 {
                log::warn!(
                    "regularity probe misses nodes with larger offspring mass ({global:.4e} > {on_probe:.4e})"
                );
            }
            on_probe
        }
        Repr::Continuum(c) => probe
            .iter()
            .filter_map(|p| match p {
                Point::Site(s) => Some(c.offspring_mass(s)),
                Point::Node(_) => None,
            })
            .fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests;
