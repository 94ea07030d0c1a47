//! Lazily evaluated continuum window backend.

use super::{
    invalid, Boundary, Coords, Kernel, ModelError, ModelSpec, RateField, SpaceBackend, Window,
    MAX_DIM,
};

#[derive(Debug, Clone)]
pub struct Continuum {
    pub dim: usize,
    pub window: Window,
    pub kernel: Kernel,
    v: RateField,
    w: RateField,
    psi: RateField,
    psi_bounds: (f64, f64),
    /// Radius beyond which the kernel mass is below the stencil tolerance.
    pub tail_radius: f64,
    /// Periodic image shifts that can carry non-negligible kernel mass.
    images: Vec<Coords>,
    quadrature_points: usize,
    quadrature_error: f64,
}

impl Continuum {
    pub(crate) fn build(spec: &ModelSpec) -> Result<Self, ModelError> {
        let SpaceBackend::ContinuumWindow(window) = &spec.space else {
            unreachable!("continuum build on a discrete backend");
        };
        if !spec.kernel.is_radial() {
            return Err(invalid(
                "kernel.kind",
                "continuum windows need a radial kernel",
            ));
        }
        for (name, f) in [
            ("rates.v", &spec.v),
            ("rates.w", &spec.w),
            ("psi", &spec.psi),
        ] {
            if matches!(f, RateField::Tabulated { .. }) {
                return Err(invalid(name, "tabulated fields need a graph or grid"));
            }
        }
        let dim = window.dim;
        let tail_radius = spec.kernel.tail_radius(spec.options.stencil_eps, dim);
        let mut images = vec![[0.0; MAX_DIM]];
        if window.boundary == Boundary::Periodic {
            images.clear();
            let mut counts = [0i64; MAX_DIM];
            let mut len = [0.0; MAX_DIM];
            for k in 0..dim {
                len[k] = window.upper[k] - window.lower[k];
                counts[k] = (tail_radius / len[k]).ceil() as i64 + 1;
            }
            for a in -counts[0]..=counts[0] {
                for b in -counts[1]..=counts[1] {
                    for c in -counts[2]..=counts[2] {
                        let t = [a, b, c];
                        let mut s = [0.0; MAX_DIM];
                        for k in 0..dim {
                            s[k] = t[k] as f64 * len[k];
                        }
                        images.push(s);
                    }
                }
            }
        }
        let psi_bounds = spec.psi.bounds().unwrap_or((1.0, 1.0));
        let mut c = Self {
            dim,
            window: window.clone(),
            kernel: spec.kernel.clone(),
            v: spec.v.clone(),
            w: spec.w.clone(),
            psi: spec.psi.clone(),
            psi_bounds,
            tail_radius,
            images,
            quadrature_points: spec.options.quadrature_points.max(4),
            quadrature_error: 0.0,
        };
        if !c.psi.is_constant() {
            let rate = c.kernel.rate().unwrap_or(0.0);
            if rate > 0.0 {
                let q = c.quadrature(&[0.0; MAX_DIM], |_| 1.0);
                c.quadrature_error = (q - rate).abs() / rate;
            }
        }
        Ok(c)
    }

    fn wrapped(&self, x: &Coords) -> Coords {
        let mut y = *x;
        if self.window.boundary == Boundary::Periodic {
            self.window.wrap(&mut y);
        }
        y
    }

    pub fn psi(&self, x: &Coords) -> f64 {
        self.psi
            .eval(None, Some(&self.wrapped(x)), self.dim)
            .unwrap_or(f64::NAN)
    }

    pub fn w(&self, x: &Coords) -> f64 {
        self.w
            .eval(None, Some(&self.wrapped(x)), self.dim)
            .unwrap_or(0.0)
    }

    pub fn v(&self, x: &Coords) -> f64 {
        match self.v {
            RateField::Critical => self.birth_mass_b(x),
            ref f => f
                .eval(None, Some(&self.wrapped(x)), self.dim)
                .unwrap_or(f64::NAN),
        }
    }

    pub fn psi_max(&self) -> f64 {
        self.psi_bounds.1
    }

    pub fn psi_is_constant(&self) -> bool {
        self.psi.is_constant()
    }

    /// `a(x, y)`, summed over periodic images on a torus.
    pub fn a(&self, x: &Coords, y: &Coords) -> f64 {
        let mut acc = 0.0;
        for s in &self.images {
            let mut z = [0.0; MAX_DIM];
            for k in 0..self.dim {
                z[k] = x[k] - y[k] + s[k];
            }
            acc += self.kernel.profile(&z, self.dim);
        }
        acc
    }

    pub fn b(&self, x: &Coords, y: &Coords) -> f64 {
        self.a(x, y) / self.psi(x)
    }

    /// Midpoint rule for `∫ a(x, y) g(y) dy` over the kernel's support.
    fn quadrature(&self, x: &Coords, g: impl Fn(&Coords) -> f64) -> f64 {
        let q = self.quadrature_points;
        let r = self.tail_radius;
        let h = 2.0 * r / q as f64;
        let dim = self.dim;
        let total = q.pow(dim as u32);
        let mut acc = 0.0;
        for idx in 0..total {
            let mut rest = idx;
            let mut z = [0.0; MAX_DIM];
            for zk in z.iter_mut().take(dim) {
                *zk = -r + ((rest % q) as f64 + 0.5) * h;
                rest /= q;
            }
            let mut y = *x;
            for k in 0..dim {
                y[k] -= z[k];
            }
            acc += self.kernel.profile(&z, dim) * g(&y);
        }
        acc * h.powi(dim as i32)
    }

    /// `∫ b(x, y) m̄(dy)`: exact for constant Psi, quadrature otherwise.
    pub fn birth_mass_b(&self, x: &Coords) -> f64 {
        let rate = self.kernel.rate().unwrap_or(0.0);
        if self.psi.is_constant() {
            rate
        } else {
            self.quadrature(x, |y| self.psi(y)) / self.psi(x)
        }
    }

    /// `∫ a(y, x) m(dy)` over R^d.
    pub fn offspring_mass(&self, _x: &Coords) -> f64 {
        self.kernel.rate().unwrap_or(0.0)
    }

    pub(crate) fn critical_tolerance(&self) -> f64 {
        let (_, vmax) = self.v_bounds();
        (10.0 * self.quadrature_error * vmax).max(1e-10 * vmax)
    }

    /// `k^dim` evenly spread sites inside the window.
    pub fn probe_sites(&self, k: usize) -> Vec<Coords> {
        let total = k.pow(self.dim as u32);
        (0..total)
            .map(|idx| {
                let mut rest = idx;
                let mut x = [0.0; MAX_DIM];
                for (j, xj) in x.iter_mut().enumerate().take(self.dim) {
                    let frac = ((rest % k) as f64 + 0.5) / k as f64;
                    *xj =
                        self.window.lower[j] + frac * (self.window.upper[j] - self.window.lower[j]);
                    rest /= k;
                }
                x
            })
            .collect()
    }

    pub fn v_bounds(&self) -> (f64, f64) {
        match self.v {
            RateField::Critical => {
                if self.psi.is_constant() {
                    let r = self.kernel.rate().unwrap_or(0.0);
                    (r, r)
                } else {
                    self.probe_sites(5)
                        .iter()
                        .fold((f64::INFINITY, 0.0), |(lo, hi), s| {
                            let v = self.birth_mass_b(s);
                            (lo.min(v), hi.max(v))
                        })
                }
            }
            ref f => f.bounds().unwrap_or((f64::NAN, f64::NAN)),
        }
    }

    pub fn w_bounds(&self) -> (f64, f64) {
        self.w.bounds().unwrap_or((0.0, 0.0))
    }
}
