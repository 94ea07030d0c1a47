//! Regular product lattices and stencil convolutions on them.

use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::{Coords, MAX_DIM};

pub type Multi = [i64; MAX_DIM];

/// Cell-centred product lattice over a box; axes beyond `dim` are trivial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub shape: [usize; MAX_DIM],
    pub spacing: [f64; MAX_DIM],
    pub lower: [f64; MAX_DIM],
    pub periodic: bool,
}

impl Lattice {
    pub fn new(dim: usize, lower: &[f64], upper: &[f64], points: &[usize], periodic: bool) -> Self {
        let mut shape = [1; MAX_DIM];
        let mut spacing = [1.0; MAX_DIM];
        let mut lo = [0.0; MAX_DIM];
        for k in 0..dim {
            shape[k] = points[k];
            spacing[k] = (upper[k] - lower[k]) / points[k] as f64;
            lo[k] = lower[k];
        }
        Self {
            dim,
            shape,
            spacing,
            lower: lo,
            periodic,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    /// Side lengths of the box.
    pub fn extent(&self) -> [f64; MAX_DIM] {
        let mut e = [0.0; MAX_DIM];
        for k in 0..self.dim {
            e[k] = self.shape[k] as f64 * self.spacing[k];
        }
        e
    }

    pub fn multi(&self, node: usize) -> Multi {
        let mut m = [0; MAX_DIM];
        let mut rest = node;
        for k in (0..MAX_DIM).rev() {
            m[k] = (rest % self.shape[k]) as i64;
            rest /= self.shape[k];
        }
        m
    }

    /// Node for an integer lattice site; wraps on periodic lattices and
    /// returns `None` outside the box otherwise.
    pub fn node(&self, m: Multi) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..MAX_DIM {
            let n = self.shape[k] as i64;
            let mut v = m[k];
            if self.periodic {
                v = v.rem_euclid(n);
            } else if v < 0 || v >= n {
                return None;
            }
            idx = idx * self.shape[k] + v as usize;
        }
        Some(idx)
    }

    /// Cell centre of an integer site (also outside the box).
    pub fn site_coords(&self, m: Multi) -> Coords {
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = self.lower[k] + (m[k] as f64 + 0.5) * self.spacing[k];
        }
        x
    }

    pub fn coords(&self, node: usize) -> Coords {
        self.site_coords(self.multi(node))
    }

    /// Cell containing `x`, if any.
    pub fn locate(&self, x: &Coords) -> Option<usize> {
        let mut m = [0; MAX_DIM];
        for k in 0..self.dim {
            m[k] = ((x[k] - self.lower[k]) / self.spacing[k]).floor() as i64;
        }
        self.node(m)
    }

    /// Shape of the box padded by `radius` cells on each side.
    pub fn padded_shape(&self, radius: &[usize; MAX_DIM]) -> [usize; MAX_DIM] {
        let mut s = self.shape;
        for k in 0..MAX_DIM {
            s[k] += 2 * radius[k];
        }
        s
    }

    /// Integer site of a padded-array index.
    pub fn padded_site(&self, pidx: usize, radius: &[usize; MAX_DIM]) -> Multi {
        let ps = self.padded_shape(radius);
        let mut m = [0; MAX_DIM];
        let mut rest = pidx;
        for k in (0..MAX_DIM).rev() {
            m[k] = (rest % ps[k]) as i64 - radius[k] as i64;
            rest /= ps[k];
        }
        m
    }

    /// Embeds a box field into the padded array: periodic lattices fill the
    /// halo with periodic images, absorbing ones with zeros.
    pub fn pad(&self, values: &[f64], radius: &[usize; MAX_DIM]) -> Vec<f64> {
        let ps = self.padded_shape(radius);
        let total: usize = ps.iter().product();
        let mut out = vec![0.0; total];
        for (p, slot) in out.iter_mut().enumerate() {
            let site = self.padded_site(p, radius);
            if let Some(node) = self.node(site) {
                *slot = values[node];
            }
        }
        out
    }
}

/// Kernel values on lattice displacements.
#[derive(Debug, Clone)]
pub enum Stencil {
    /// `a(o h) = rate * prod_k factors[k][o_k + radius_k]`.
    Separable {
        rate: f64,
        factors: Vec<Vec<f64>>,
        radius: [usize; MAX_DIM],
    },
    General {
        offsets: Vec<Multi>,
        weights: Vec<f64>,
        radius: [usize; MAX_DIM],
    },
}

impl Stencil {
    /// Builds the stencil of a radial kernel, truncated where the discarded
    /// continuum mass drops below `eps * rate`, and at `max_cells` per axis.
    pub fn build(kernel: &Kernel, lattice: &Lattice, eps: f64, max_cells: usize) -> Self {
        let dim = lattice.dim;
        let rate = kernel.rate().unwrap_or(0.0);
        if let (Some(f), Some(r)) = (kernel.separable_factor(), kernel.separable_radius(eps, dim)) {
            let mut radius = [0; MAX_DIM];
            let mut factors = Vec::with_capacity(MAX_DIM);
            for k in 0..MAX_DIM {
                if k < dim {
                    let h = lattice.spacing[k];
                    let rk = ((r / h).ceil() as usize).min(max_cells);
                    radius[k] = rk;
                    factors.push(
                        (0..=2 * rk)
                            .map(|o| f((o as f64 - rk as f64) * h))
                            .collect(),
                    );
                } else {
                    factors.push(vec![1.0]);
                }
            }
            return Stencil::Separable {
                rate,
                factors,
                radius,
            };
        }
        let r = kernel.tail_radius(eps, dim);
        let mut radius = [0; MAX_DIM];
        for k in 0..dim {
            radius[k] = ((r / lattice.spacing[k]).ceil() as usize).min(max_cells);
        }
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let r0 = radius[0] as i64;
        let r1 = radius[1] as i64;
        let r2 = radius[2] as i64;
        for a in -r0..=r0 {
            for b in -r1..=r1 {
                for c in -r2..=r2 {
                    let o = [a, b, c];
                    let mut z = [0.0; MAX_DIM];
                    for k in 0..dim {
                        z[k] = o[k] as f64 * lattice.spacing[k];
                    }
                    let w = kernel.profile(&z, dim);
                    if w > 0.0 {
                        offsets.push(o);
                        weights.push(w);
                    }
                }
            }
        }
        Stencil::General {
            offsets,
            weights,
            radius,
        }
    }

    pub fn radius(&self) -> [usize; MAX_DIM] {
        match self {
            Stencil::Separable { radius, .. } | Stencil::General { radius, .. } => *radius,
        }
    }

    /// Kernel value at an integer displacement.
    pub fn value(&self, o: &Multi) -> f64 {
        match self {
            Stencil::Separable {
                rate,
                factors,
                radius,
            } => {
                let mut v = *rate;
                for k in 0..MAX_DIM {
                    let idx = o[k] + radius[k] as i64;
                    if idx < 0 || idx as usize >= factors[k].len() {
                        return 0.0;
                    }
                    v *= factors[k][idx as usize];
                }
                v
            }
            Stencil::General {
                offsets, weights, ..
            } => offsets
                .iter()
                .position(|x| x == o)
                .map(|i| weights[i])
                .unwrap_or(0.0),
        }
    }

    /// Sum of all stencil values (the lattice mass of the kernel).
    pub fn total(&self) -> f64 {
        match self {
            Stencil::Separable { rate, factors, .. } => {
                factors
                    .iter()
                    .map(|f| f.iter().sum::<f64>())
                    .product::<f64>()
                    * rate
            }
            Stencil::General { weights, .. } => weights.iter().sum(),
        }
    }

    /// Separable correlation of a box field that vanishes outside the box
    /// (absorbing lattices): `out[i] = sum_o a(o) u[i + o]` over in-box
    /// `i + o`, without building the padded array. `None` for general
    /// stencils.
    pub fn apply_box(&self, u: &[f64], lattice: &Lattice) -> Option<Vec<f64>> {
        let Stencil::Separable {
            rate,
            factors,
            radius,
        } = self
        else {
            return None;
        };
        let shape = lattice.shape;
        let strides = [shape[1] * shape[2], shape[2], 1];
        let mut cur = u.to_vec();
        for k in 0..MAX_DIM {
            let f = &factors[k];
            let r = radius[k];
            let nk = shape[k];
            let mut next = vec![0.0; cur.len()];
            for (idx, o) in next.iter_mut().enumerate() {
                let i = (idx / strides[k]) % nk;
                let base = idx - i * strides[k];
                let lo = i.saturating_sub(r);
                let hi = (i + r).min(nk - 1);
                let mut acc = 0.0;
                for j in lo..=hi {
                    acc += f[j + r - i] * cur[base + j * strides[k]];
                }
                *o = acc;
            }
            cur = next;
        }
        for v in cur.iter_mut() {
            *v *= rate;
        }
        Some(cur)
    }

    /// "Valid" correlation of a padded array with the stencil: the result on
    /// the box is `out[i] = sum_o a(o) * padded[i + o]`.
    pub fn apply_padded(&self, padded: &[f64], lattice: &Lattice) -> Vec<f64> {
        let radius = self.radius();
        let mut shape = lattice.padded_shape(&radius);
        match self {
            Stencil::Separable { rate, factors, .. } => {
                let mut cur = padded.to_vec();
                for k in 0..MAX_DIM {
                    if radius[k] == 0 {
                        continue;
                    }
                    let (next, next_shape) = correlate_axis(&cur, shape, k, &factors[k]);
                    cur = next;
                    shape = next_shape;
                }
                for v in cur.iter_mut() {
                    *v *= rate;
                }
                cur
            }
            Stencil::General {
                offsets, weights, ..
            } => {
                let n = lattice.len();
                let s1 = shape[1] * shape[2];
                let s2 = shape[2];
                let flat: Vec<isize> = offsets
                    .iter()
                    .map(|o| {
                        (o[0] as isize) * s1 as isize
                            + (o[1] as isize) * s2 as isize
                            + o[2] as isize
                    })
                    .collect();
                let mut out = vec![0.0; n];
                for (node, slot) in out.iter_mut().enumerate() {
                    let m = lattice.multi(node);
                    let base = ((m[0] as usize + radius[0]) * s1
                        + (m[1] as usize + radius[1]) * s2
                        + (m[2] as usize + radius[2])) as isize;
                    let mut acc = 0.0;
                    for (d, w) in flat.iter().zip(weights) {
                        acc += w * padded[(base + d) as usize];
                    }
                    *slot = acc;
                }
                out
            }
        }
    }
}

/// Valid-mode correlation along one axis of a row-major 3-d array.
fn correlate_axis(
    input: &[f64],
    shape: [usize; MAX_DIM],
    axis: usize,
    filter: &[f64],
) -> (Vec<f64>, [usize; MAX_DIM]) {
    let width = filter.len();
    let mut out_shape = shape;
    out_shape[axis] = shape[axis] + 1 - width;
    let strides = [shape[1] * shape[2], shape[2], 1];
    let out_strides = [out_shape[1] * out_shape[2], out_shape[2], 1];
    let mut out = vec![0.0; out_shape.iter().product()];
    let step = strides[axis];
    for a in 0..out_shape[0] {
        for b in 0..out_shape[1] {
            let row_out = a * out_strides[0] + b * out_strides[1];
            let row_in = a * strides[0] + b * strides[1];
            for c in 0..out_shape[2] {
                let start = row_in + c;
                let mut acc = 0.0;
                for (o, w) in filter.iter().enumerate() {
                    acc += w * input[start + o * step];
                }
                out[row_out + c] = acc;
            }
        }
    }
    (out, out_shape)
}
