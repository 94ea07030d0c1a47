//! Discretized functions on `X^n` for `n = 1, 2`.

use serde::{Deserialize, Serialize};

use crate::model::Point;

/// Points a field is defined on: every node of a discrete backend, or an
/// explicit probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Base {
    Nodes(usize),
    Probe(Vec<Point>),
}

impl Base {
    pub fn len(&self) -> usize {
        match self {
            Base::Nodes(n) => *n,
            Base::Probe(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Point {
        match self {
            Base::Nodes(_) => Point::Node(i),
            Base::Probe(p) => p[i],
        }
    }
}

/// Real values on `base^arity`, row-major (`values[i * N + j]` for `n = 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub arity: usize,
    pub base: Base,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(arity: usize, base: Base, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            base.len().pow(arity as u32),
            "field size mismatch"
        );
        Self {
            arity,
            base,
            values,
        }
    }

    pub fn nodes(arity: usize, n: usize, values: Vec<f64>) -> Self {
        Self::new(arity, Base::Nodes(n), values)
    }

    pub fn constant(arity: usize, base: Base, value: f64) -> Self {
        let len = base.len().pow(arity as u32);
        Self::new(arity, base, vec![value; len])
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    /// `u ⊗ u` for a single-particle field.
    pub fn tensor_square(k1: &Field) -> Field {
        assert_eq!(k1.arity, 1);
        let values = k1
            .values
            .iter()
            .flat_map(|a| k1.values.iter().map(move |b| a * b))
            .collect();
        Field::new(2, k1.base.clone(), values)
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.base_len() + j]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|k(i, j) - k(j, i)|` of a two-point field.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.arity, 2);
        let n = self.base_len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get2(i, j) - self.get2(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
