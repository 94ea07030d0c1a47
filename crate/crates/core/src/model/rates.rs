//! Named scalar fields used for V, W and Psi.

use serde::{Deserialize, Serialize};

use super::{Coords, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateField {
    Constant {
        value: f64,
    },
    /// One value per node (graphs and grids).
    Tabulated {
        values: Vec<f64>,
    },
    /// `value` inside the closed ball, `outside` elsewhere.
    IndicatorBall {
        center: Vec<f64>,
        radius: f64,
        value: f64,
        #[serde(default)]
        outside: f64,
    },
    /// `base + amplitude * exp(-|x - center|^2 / (2 width^2))`.
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        base: f64,
    },
    /// Death rate fixed by the balance condition; only meaningful for V.
    Critical,
}

fn center_coords(center: &[f64]) -> Coords {
    let mut c = [0.0; MAX_DIM];
    for (dst, src) in c.iter_mut().zip(center) {
        *dst = *src;
    }
    c
}

impl RateField {
    pub fn constant(value: f64) -> Self {
        RateField::Constant { value }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RateField::Constant { .. })
    }

    /// True when evaluation needs spatial coordinates.
    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            RateField::IndicatorBall { .. } | RateField::GaussianBump { .. }
        )
    }

    /// Evaluates at a node index and/or coordinates. Returns `None` when the
    /// field cannot be evaluated at the given location.
    pub fn eval(&self, node: Option<usize>, coords: Option<&Coords>, dim: usize) -> Option<f64> {
        match self {
            RateField::Constant { value } => Some(*value),
            RateField::Tabulated { values } => node.and_then(|i| values.get(i).copied()),
            RateField::IndicatorBall {
                center,
                radius,
                value,
                outside,
            } => {
                let x = coords?;
                let c = center_coords(center);
                let r2: f64 = (0..dim).map(|k| (x[k] - c[k]).powi(2)).sum();
                Some(if r2 <= radius * radius {
                    *value
                } else {
                    *outside
                })
            }
            RateField::GaussianBump {
                center,
                width,
                amplitude,
                base,
            } => {
                let x = coords?;
                let c = center_coords(center);
                let r2: f64 = (0..dim).map(|k| (x[k] - c[k]).powi(2)).sum();
                Some(base + amplitude * (-r2 / (2.0 * width * width)).exp())
            }
            RateField::Critical => None,
        }
    }

    /// Analytic lower and upper bounds over the whole space.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            RateField::Constant { value } => Some((*value, *value)),
            RateField::Tabulated { values } => {
                if values.is_empty() {
                    return None;
                }
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
            RateField::IndicatorBall { value, outside, .. } => {
                Some((value.min(*outside), value.max(*outside)))
            }
            RateField::GaussianBump {
                amplitude, base, ..
            } => Some((base.min(base + amplitude), base.max(base + amplitude))),
            RateField::Critical => None,
        }
    }

    /// True when the field vanishes identically.
    pub fn is_zero(&self) -> bool {
        matches!(self.bounds(), Some((lo, hi)) if lo == 0.0 && hi == 0.0)
    }

    /// The same field shifted by a constant.
    pub fn shifted(&self, delta: f64) -> Self {
        match self.clone() {
            RateField::Constant { value } => RateField::Constant {
                value: value + delta,
            },
            RateField::Tabulated { values } => RateField::Tabulated {
                values: values.into_iter().map(|v| v + delta).collect(),
            },
            RateField::IndicatorBall {
                center,
                radius,
                value,
                outside,
            } => RateField::IndicatorBall {
                center,
                radius,
                value: value + delta,
                outside: outside + delta,
            },
            RateField::GaussianBump {
                center,
                width,
                amplitude,
                base,
            } => RateField::GaussianBump {
                center,
                width,
                amplitude,
                base: base + delta,
            },
            RateField::Critical => RateField::Critical,
        }
    }
}
