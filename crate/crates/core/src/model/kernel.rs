//! Built-in dispersal kernels.
//!
//! Radial kernels are normalized so that their integral over R^d equals
//! `rate`; `a(x, y) = rate * p(|x - y|)` with `p` a probability density.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use super::{Coords, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    /// `rate` times the centred normal density with covariance `sigma^2 I`.
    Gaussian { rate: f64, sigma: f64 },
    /// `rate` times a density proportional to `exp(-|z| / length)`.
    ExponentialTail { rate: f64, length: f64 },
    /// `rate` times a density proportional to `(1 + |z| / length)^(-exponent)`;
    /// needs `exponent > d`.
    PowerTail {
        rate: f64,
        length: f64,
        exponent: f64,
    },
    /// `rate` spread uniformly over the ball of the given radius.
    IndicatorBall { rate: f64, radius: f64 },
    /// `a(x, y) = value` for every pair of graph nodes.
    Constant { value: f64 },
    /// Explicit matrix `a[x][y]` over graph nodes.
    Tabulated { matrix: Vec<Vec<f64>> },
}

fn unit_sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * std::f64::consts::PI.powf(d / 2.0) / ln_gamma(d / 2.0).exp()
}

fn unit_ball_volume(dim: usize) -> f64 {
    let d = dim as f64;
    std::f64::consts::PI.powf(d / 2.0) / ln_gamma(d / 2.0 + 1.0).exp()
}

pub(crate) fn norm(z: &Coords, dim: usize) -> f64 {
    z[..dim].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Standard normal upper tail `P(Z > x)`.
pub(crate) fn normal_upper_tail(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

impl Kernel {
    /// True for kernels of the form `a(x, y) = rate * p(|x - y|)`.
    pub fn is_radial(&self) -> bool {
        !matches!(self, Kernel::Constant { .. } | Kernel::Tabulated { .. })
    }

    /// Total mass over R^d (radial kernels only).
    pub fn rate(&self) -> Option<f64> {
        match *self {
            Kernel::Gaussian { rate, .. }
            | Kernel::ExponentialTail { rate, .. }
            | Kernel::PowerTail { rate, .. }
            | Kernel::IndicatorBall { rate, .. } => Some(rate),
            _ => None,
        }
    }

    /// Radial profile value at distance `r` in dimension `dim`, including `rate`.
    pub fn radial(&self, r: f64, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            Kernel::Gaussian { rate, sigma } => {
                rate * (-(r * r) / (2.0 * sigma * sigma)).exp()
                    / (2.0 * std::f64::consts::PI * sigma * sigma).powf(d / 2.0)
            }
            Kernel::ExponentialTail { rate, length } => {
                let norm = unit_sphere_area(dim) * length.powf(d) * ln_gamma(d).exp();
                rate * (-r / length).exp() / norm
            }
            Kernel::PowerTail {
                rate,
                length,
                exponent,
            } => {
                let norm = unit_sphere_area(dim) * length.powf(d) * ln_beta(d, exponent - d).exp();
                rate * (1.0 + r / length).powf(-exponent) / norm
            }
            Kernel::IndicatorBall { rate, radius } => {
                if r <= radius {
                    rate / (unit_ball_volume(dim) * radius.powf(d))
                } else {
                    0.0
                }
            }
            Kernel::Constant { value } => value,
            Kernel::Tabulated { .. } => f64::NAN,
        }
    }

    /// `a` evaluated at the displacement `z = x - y`.
    pub fn profile(&self, z: &Coords, dim: usize) -> f64 {
        self.radial(norm(z, dim), dim)
    }

    /// Mass of the normalized profile outside the ball of radius `r`.
    pub fn tail_mass(&self, r: f64, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            Kernel::Gaussian { sigma, .. } => gamma_ur(d / 2.0, r * r / (2.0 * sigma * sigma)),
            Kernel::ExponentialTail { length, .. } => gamma_ur(d, r / length),
            Kernel::PowerTail {
                length, exponent, ..
            } => {
                let s = r / length;
                beta_reg(exponent - d, d, 1.0 / (1.0 + s))
            }
            Kernel::IndicatorBall { radius, .. } => {
                if r >= radius {
                    0.0
                } else {
                    1.0 - (r / radius).powf(d)
                }
            }
            _ => 0.0,
        }
    }

    /// Smallest radius (up to bisection accuracy) with tail mass below `eps`.
    pub fn tail_radius(&self, eps: f64, dim: usize) -> f64 {
        if let Kernel::IndicatorBall { radius, .. } = *self {
            return radius;
        }
        let mut hi = match *self {
            Kernel::Gaussian { sigma, .. } => sigma,
            Kernel::ExponentialTail { length, .. } | Kernel::PowerTail { length, .. } => length,
            _ => return 0.0,
        };
        let mut grow = 0;
        while self.tail_mass(hi, dim) > eps && grow < 200 {
            hi *= 2.0;
            grow += 1;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(mid, dim) > eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Draws a displacement from the normalized profile.
    pub fn sample_offset<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Coords {
        let mut z = [0.0; MAX_DIM];
        match *self {
            Kernel::Gaussian { sigma, .. } => {
                for v in z.iter_mut().take(dim) {
                    let n: f64 = StandardNormal.sample(rng);
                    *v = sigma * n;
                }
            }
            Kernel::ExponentialTail { length, .. } => {
                let r = Gamma::new(dim as f64, length)
                    .expect("valid gamma")
                    .sample(rng);
                z = scaled_direction(dim, r, rng);
            }
            Kernel::PowerTail {
                length, exponent, ..
            } => {
                let g1 = Gamma::new(dim as f64, 1.0)
                    .expect("valid gamma")
                    .sample(rng);
                let g2 = Gamma::new(exponent - dim as f64, 1.0)
                    .expect("valid gamma")
                    .sample(rng);
                z = scaled_direction(dim, length * g1 / g2, rng);
            }
            Kernel::IndicatorBall { radius, .. } => {
                let u: f64 = rng.random();
                z = scaled_direction(dim, radius * u.powf(1.0 / dim as f64), rng);
            }
            _ => {}
        }
        z
    }

    /// One-dimensional factor of a separable kernel (Gaussian only):
    /// `a(z) = rate * prod_k factor(z_k)`.
    pub fn separable_factor(&self) -> Option<impl Fn(f64) -> f64> {
        match *self {
            Kernel::Gaussian { sigma, .. } => Some(move |x: f64| {
                (-(x * x) / (2.0 * sigma * sigma)).exp()
                    / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt()
            }),
            _ => None,
        }
    }

    /// Per-axis truncation half-width for the separable factor so that the
    /// discarded mass stays below `eps`.
    pub fn separable_radius(&self, eps: f64, dim: usize) -> Option<f64> {
        match *self {
            Kernel::Gaussian { sigma, .. } => {
                let target = eps / dim as f64;
                let (mut lo, mut hi) = (0.0, 50.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if 2.0 * normal_upper_tail(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(hi * sigma)
            }
            _ => None,
        }
    }
}

fn scaled_direction<R: Rng + ?Sized>(dim: usize, r: f64, rng: &mut R) -> Coords {
    let mut z = [0.0; MAX_DIM];
    if dim == 1 {
        z[0] = if rng.random::<bool>() { r } else { -r };
        return z;
    }
    loop {
        for v in z.iter_mut().take(dim) {
            *v = StandardNormal.sample(rng);
        }
        let n = norm(&z, dim);
        if n > 1e-300 {
            for v in z.iter_mut().take(dim) {
                *v *= r / n;
            }
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    /// Radial integral of the profile by composite Simpson on [0, rmax].
    fn radial_mass(k: &Kernel, dim: usize, rmax: f64) -> f64 {
        let n = 200_000;
        let h = rmax / n as f64;
        let f = |r: f64| unit_sphere_area(dim) * r.powi(dim as i32 - 1) * k.radial(r, dim);
        let mut s = f(0.0) + f(rmax);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn radial_kernels_integrate_to_rate() {
        let cases = [
            Kernel::Gaussian {
                rate: 2.0,
                sigma: 1.5,
            },
            Kernel::ExponentialTail {
                rate: 1.0,
                length: 0.7,
            },
            Kernel::PowerTail {
                rate: 1.0,
                length: 1.0,
                exponent: 9.0,
            },
        ];
        for k in &cases {
            for dim in 1..=3 {
                let rmax = k.tail_radius(1e-13, dim);
                let m = radial_mass(k, dim, rmax);
                assert!((m - k.rate().unwrap()).abs() < 1e-6, "{k:?} d={dim}: {m}");
            }
        }
    }

    #[test]
    fn tail_radius_bounds_mass() {
        let k = Kernel::Gaussian {
            rate: 1.0,
            sigma: 2.0,
        };
        let r = k.tail_radius(1e-12, 3);
        assert!(k.tail_mass(r, 3) <= 1e-12);
        assert!(k.tail_mass(0.99 * r, 3) > 1e-12);
    }

    #[test]
    fn sampled_radii_match_tail_mass() {
        let mut rng = RngStream::root(11).rng();
        for k in [
            Kernel::ExponentialTail {
                rate: 1.0,
                length: 1.0,
            },
            Kernel::PowerTail {
                rate: 1.0,
                length: 1.0,
                exponent: 6.0,
            },
            Kernel::IndicatorBall {
                rate: 1.0,
                radius: 2.0,
            },
            Kernel::Gaussian {
                rate: 1.0,
                sigma: 1.0,
            },
        ] {
            let r0 = 1.3;
            let n = 40_000;
            let hits = (0..n)
                .filter(|_| norm(&k.sample_offset(3, &mut rng), 3) > r0)
                .count() as f64
                / n as f64;
            let p = k.tail_mass(r0, 3);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((hits - p).abs() < 4.0 * se + 1e-12, "{k:?}: {hits} vs {p}");
        }
    }
}
