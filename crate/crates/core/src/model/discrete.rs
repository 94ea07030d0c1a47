//! Node-based discretization shared by finite graphs and box grids.

use super::lattice::{Lattice, Multi, Stencil};
use super::{
    invalid, Boundary, Kernel, ModelError, ModelOptions, ModelSpec, RateField, SpaceBackend,
    MAX_DIM,
};

/// Action of the raw kernel `a(x_i, x_j)` on node fields.
#[derive(Debug, Clone)]
pub enum KernelOp {
    /// Row-major `n x n` matrix of `a(x_i, x_j)`.
    Dense { a: Vec<f64> },
    /// Translation-invariant kernel on a lattice.
    Stencil(Stencil),
}

/// Discretized model on `n` nodes.
#[derive(Debug, Clone)]
pub struct Discrete {
    pub n: usize,
    pub lattice: Option<Lattice>,
    /// Base measure weights `m`.
    pub m: Vec<f64>,
    pub psi: Vec<f64>,
    /// `m̄ = Psi m`.
    pub mbar: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// `U = V + W`.
    pub u: Vec<f64>,
    /// In-space row sums `sum_j b(x_i, x_j) m̄_j`.
    pub row_sum: Vec<f64>,
    /// Rate at which `b m̄`-mass leaves an absorbing box (zero otherwise).
    pub exit: Vec<f64>,
    pub op: KernelOp,
    /// Relative discrepancy between the lattice mass of the kernel and its
    /// continuum mass (zero on graphs).
    pub quadrature_error: f64,
    pub psi_max: f64,
    psi_padded: Option<Vec<f64>>,
}

fn eval_field(
    name: &str,
    f: &RateField,
    node: Option<usize>,
    coords: Option<&super::Coords>,
    dim: usize,
) -> Result<f64, ModelError> {
    let v = f
        .eval(node, coords, dim)
        .ok_or_else(|| invalid(name, "cannot be evaluated at this location"))?;
    if !v.is_finite() {
        return Err(ModelError::NonFinite {
            what: name.to_string(),
            location: format!("{node:?} {coords:?}"),
        });
    }
    Ok(v)
}

impl Discrete {
    pub(crate) fn build(spec: &ModelSpec) -> Result<Self, ModelError> {
        match &spec.space {
            SpaceBackend::FiniteGraph { weights } => Self::build_graph(spec, weights),
            SpaceBackend::BoxGrid(g) => {
                let lattice = Lattice::new(
                    g.dim,
                    &g.lower,
                    &g.upper,
                    &g.points,
                    g.boundary == Boundary::Periodic,
                );
                Self::build_grid(spec, lattice)
            }
            SpaceBackend::ContinuumWindow(_) => unreachable!("continuum handled elsewhere"),
        }
    }

    fn build_graph(spec: &ModelSpec, weights: &[f64]) -> Result<Self, ModelError> {
        let n = weights.len();
        let a: Vec<f64> = match &spec.kernel {
            Kernel::Tabulated { matrix } => matrix.iter().flatten().copied().collect(),
            Kernel::Constant { value } => vec![*value; n * n],
            _ => {
                return Err(invalid(
                    "kernel.kind",
                    "graphs need a tabulated or constant kernel",
                ))
            }
        };
        let psi = (0..n)
            .map(|i| eval_field("psi", &spec.psi, Some(i), None, 0))
            .collect::<Result<Vec<_>, _>>()?;
        let m = weights.to_vec();
        let mbar: Vec<f64> = psi.iter().zip(&m).map(|(p, w)| p * w).collect();
        let row_sum: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * mbar[j]).sum::<f64>() / psi[i])
            .collect();
        let psi_max = psi.iter().copied().fold(0.0, f64::max);
        let mut d = Self {
            n,
            lattice: None,
            m,
            psi,
            mbar,
            v: Vec::new(),
            w: Vec::new(),
            u: Vec::new(),
            row_sum,
            exit: vec![0.0; n],
            op: KernelOp::Dense { a },
            quadrature_error: 0.0,
            psi_max,
            psi_padded: None,
        };
        d.fill_rates(spec)?;
        Ok(d)
    }

    fn build_grid(spec: &ModelSpec, lattice: Lattice) -> Result<Self, ModelError> {
        let opts = &spec.options;
        let dim = lattice.dim;
        let n = lattice.len();
        let stencil = Stencil::build(
            &spec.kernel,
            &lattice,
            opts.stencil_eps,
            opts.max_stencil_cells,
        );
        let radius = stencil.radius();
        let cell = lattice.cell_volume();

        let psi = (0..n)
            .map(|i| eval_field("psi", &spec.psi, Some(i), Some(&lattice.coords(i)), dim))
            .collect::<Result<Vec<_>, _>>()?;

        // Psi on the box plus a halo wide enough for every stencil target.
        let ps = lattice.padded_shape(&radius);
        let total: usize = ps.iter().product();
        let mut psi_pad = vec![0.0; total];
        for (p, slot) in psi_pad.iter_mut().enumerate() {
            let site = lattice.padded_site(p, &radius);
            *slot = match lattice.node(site) {
                Some(i) => psi[i],
                None => eval_field(
                    "psi",
                    &spec.psi,
                    None,
                    Some(&lattice.site_coords(site)),
                    dim,
                )
                .map_err(|_| {
                    invalid(
                        "psi",
                        "must be evaluable outside an absorbing box (tabulated psi is not)",
                    )
                })?,
            };
            if *slot < opts.psi_floor {
                return Err(invalid(
                    "psi",
                    format!("value {} below the positivity floor", *slot),
                ));
            }
        }

        let mass_in: Vec<f64> = psi.iter().map(|p| p * cell).collect();
        let in_box = stencil.apply_padded(&lattice.pad(&mass_in, &radius), &lattice);
        let row_sum: Vec<f64> = in_box.iter().zip(&psi).map(|(s, p)| s / p).collect();
        let exit = if lattice.periodic {
            vec![0.0; n]
        } else {
            let mut outside = psi_pad.clone();
            for (p, slot) in outside.iter_mut().enumerate() {
                let site = lattice.padded_site(p, &radius);
                if lattice.node(site).is_some() {
                    *slot = 0.0;
                } else {
                    *slot *= cell;
                }
            }
            stencil
                .apply_padded(&outside, &lattice)
                .iter()
                .zip(&psi)
                .map(|(s, p)| s / p)
                .collect()
        };

        let rate = spec.kernel.rate().unwrap_or(0.0);
        let quadrature_error = if rate > 0.0 {
            (stencil.total() * cell - rate).abs() / rate
        } else {
            0.0
        };
        let psi_max = psi_pad.iter().copied().fold(0.0, f64::max);
        let m = vec![cell; n];
        let mbar = psi.iter().map(|p| p * cell).collect();
        let mut d = Self {
            n,
            lattice: Some(lattice),
            m,
            psi,
            mbar,
            v: Vec::new(),
            w: Vec::new(),
            u: Vec::new(),
            row_sum,
            exit,
            op: KernelOp::Stencil(stencil),
            quadrature_error,
            psi_max,
            psi_padded: Some(psi_pad),
        };
        d.fill_rates(spec)?;
        Ok(d)
    }

    fn fill_rates(&mut self, spec: &ModelSpec) -> Result<(), ModelError> {
        let dim = spec.space.dim();
        let coords: Vec<Option<super::Coords>> = (0..self.n)
            .map(|i| self.lattice.as_ref().map(|l| l.coords(i)))
            .collect();
        self.v = match spec.v {
            RateField::Critical => (0..self.n)
                .map(|i| self.row_sum[i] + self.exit[i])
                .collect(),
            ref f => (0..self.n)
                .map(|i| eval_field("rates.v", f, Some(i), coords[i].as_ref(), dim))
                .collect::<Result<_, _>>()?,
        };
        if let Some(i) = self.v.iter().position(|&v| v <= 0.0) {
            return Err(invalid(
                "rates.v",
                format!("must be strictly positive, node {i} has {}", self.v[i]),
            ));
        }
        self.w = (0..self.n)
            .map(|i| eval_field("rates.w", &spec.w, Some(i), coords[i].as_ref(), dim))
            .collect::<Result<_, _>>()?;
        self.u = self.v.iter().zip(&self.w).map(|(v, w)| v + w).collect();
        Ok(())
    }

    pub(crate) fn critical_tolerance(&self, opts: &ModelOptions) -> f64 {
        let vmax = self.v.iter().copied().fold(0.0, f64::max);
        match self.lattice {
            None => opts.graph_critical_tol,
            Some(_) => (10.0 * self.quadrature_error * vmax).max(1e-12 * vmax),
        }
    }

    /// `out_i = sum_j a(x_i, x_j) u_j` over the nodes of the space.
    pub fn apply_a(&self, u: &[f64]) -> Vec<f64> {
        match &self.op {
            KernelOp::Dense { a } => (0..self.n)
                .map(|i| {
                    a[i * self.n..(i + 1) * self.n]
                        .iter()
                        .zip(u)
                        .map(|(x, y)| x * y)
                        .sum()
                })
                .collect(),
            KernelOp::Stencil(st) => {
                let lat = self.lattice.as_ref().expect("stencil needs a lattice");
                if !lat.periodic {
                    if let Some(out) = st.apply_box(u, lat) {
                        return out;
                    }
                }
                st.apply_padded(&lat.pad(u, &st.radius()), lat)
            }
        }
    }

    /// `out_i = sum_j a(x_j, x_i) u_j`.
    pub fn apply_a_t(&self, u: &[f64]) -> Vec<f64> {
        match &self.op {
            KernelOp::Dense { a } => {
                let mut out = vec![0.0; self.n];
                for j in 0..self.n {
                    let uj = u[j];
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += a[j * self.n + i] * uj;
                    }
                }
                out
            }
            // radial kernels are symmetric
            KernelOp::Stencil(_) => self.apply_a(u),
        }
    }

    /// Birth operator `(B u)_i = sum_j b(x_i, x_j) m̄_j u_j`.
    pub fn apply_b(&self, u: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = u.iter().zip(&self.mbar).map(|(x, w)| x * w).collect();
        let mut out = self.apply_a(&weighted);
        for (o, p) in out.iter_mut().zip(&self.psi) {
            *o /= p;
        }
        out
    }

    /// Transposed birth operator `(B^T u)_i = sum_j b(x_j, x_i) m̄_i u_j`.
    pub fn apply_bt(&self, u: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = u.iter().zip(&self.psi).map(|(x, p)| x / p).collect();
        let mut out = self.apply_a_t(&scaled);
        for (o, w) in out.iter_mut().zip(&self.mbar) {
            *o *= w;
        }
        out
    }

    /// `out_i = sum_j b(x_i, x_j) u_j` (no measure weights).
    pub fn apply_b_raw(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.apply_a(u);
        for (o, p) in out.iter_mut().zip(&self.psi) {
            *o /= p;
        }
        out
    }

    /// `out_j = sum_i b(x_i, x_j) u_i`.
    pub fn apply_b_raw_t(&self, u: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = u.iter().zip(&self.psi).map(|(x, p)| x / p).collect();
        self.apply_a_t(&scaled)
    }

    /// Raw kernel value `a(x_i, x_j)`, summing periodic images.
    pub fn a_raw(&self, i: usize, j: usize) -> f64 {
        match &self.op {
            KernelOp::Dense { a } => a[i * self.n + j],
            KernelOp::Stencil(st) => {
                let lat = self.lattice.as_ref().expect("stencil needs a lattice");
                let (mi, mj) = (lat.multi(i), lat.multi(j));
                let r = st.radius();
                let mut images: Vec<Vec<i64>> = Vec::with_capacity(MAX_DIM);
                for k in 0..MAX_DIM {
                    let base = mi[k] - mj[k];
                    let nk = lat.shape[k] as i64;
                    let rk = r[k] as i64;
                    if !lat.periodic || nk == 1 {
                        images.push(if base.abs() <= rk { vec![base] } else { vec![] });
                    } else {
                        let lo = (-rk - base).div_euclid(nk) - 1;
                        let hi = (rk - base).div_euclid(nk) + 1;
                        images.push(
                            (lo..=hi)
                                .map(|t| base + t * nk)
                                .filter(|o| o.abs() <= rk)
                                .collect(),
                        );
                    }
                }
                let mut acc = 0.0;
                for &a in &images[0] {
                    for &b in &images[1] {
                        for &c in &images[2] {
                            acc += st.value(&[a, b, c]);
                        }
                    }
                }
                acc
            }
        }
    }

    /// Transformed kernel `b(x_i, x_j) = a(x_i, x_j) / Psi(x_i)`.
    pub fn b_raw(&self, i: usize, j: usize) -> f64 {
        self.a_raw(i, j) / self.psi[i]
    }

    /// Per-node offspring mass `∫ a(y, x) m(dy)` over the whole space.
    pub fn offspring_mass(&self) -> Vec<f64> {
        match &self.op {
            KernelOp::Dense { .. } => self.apply_a_t(&self.m),
            KernelOp::Stencil(st) => {
                let cell = self
                    .lattice
                    .as_ref()
                    .map(|l| l.cell_volume())
                    .unwrap_or(1.0);
                vec![st.total() * cell; self.n]
            }
        }
    }

    /// Psi at an integer lattice site inside the padded halo.
    pub fn psi_at_site(&self, site: Multi) -> Option<f64> {
        let lat = self.lattice.as_ref()?;
        let pad = self.psi_padded.as_ref()?;
        let KernelOp::Stencil(st) = &self.op else {
            return None;
        };
        let r = st.radius();
        let ps = lat.padded_shape(&r);
        let mut idx = 0usize;
        for k in 0..MAX_DIM {
            let v = site[k] + r[k] as i64;
            if v < 0 || v as usize >= ps[k] {
                return lat.node(site).map(|i| self.psi[i]);
            }
            idx = idx * ps[k] + v as usize;
        }
        Some(pad[idx])
    }

    /// True when the space is closed (no mass leaves it).
    pub fn is_closed(&self) -> bool {
        self.exit.iter().all(|&e| e == 0.0)
    }

    pub fn psi_is_constant(&self) -> bool {
        let first = self.psi[0];
        self.psi.iter().all(|&p| p == first)
            && self
                .psi_padded
                .as_ref()
                .map(|pad| pad.iter().all(|&p| p == first))
                .unwrap_or(true)
    }
}
