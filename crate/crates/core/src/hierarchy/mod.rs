//! Correlation-function hierarchy on discrete backends.
//!
//! With `S_n = L̂*_n - W_n` the correlation functions evolve by
//! `∂k^(n)/∂t = S_n k^(n) + f^(n)`, where the source `f^(n)` is built from
//! `k^(n-1)`. This module discretizes `S_1` and the Kronecker sum
//! `S_2 = S_1 ⊗ I + I ⊗ S_1`, time-steps the coupled `n = 1, 2` system,
//! solves the stationary equations `S_n v = -f^(n)`, assembles
//! `k^(2) = v^(2) + Φ ⊗ Φ` with its bound ledger, and checks the
//! positivity/comparison properties of the semigroups.
//!
//! On an absorbing box the discrete space is a window of an infinite
//! lattice; outside it the density is frozen at its initial value `ρ`.
//! Offspring born outside and landing inside enter the equations as the
//! inflow `ρ · exit(x)` for `n = 1` and `ρ (exit ⊗ k¹ + k¹ ⊗ exit)` for
//! `n = 2`; on closed backends the inflow vanishes.

mod comparison;
pub(crate) mod dense;
mod ledger;
mod monitor;
mod solve;

pub use comparison::{comparison_checks, ComparisonReport};
pub use ledger::{bound_chain, series_d, BoundLedger, ChainRow, LedgerOptions};
pub use monitor::{convergence_monitor, ConvergenceReport, MonitorMode, MonitorOptions};
pub use solve::{
    stationary_k1, stationary_solve, stationary_solve_with, stationary_v2, SolveOptions,
    SolveReport,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Base, Field};
use crate::model::{DerivedModel, Discrete};

/// Largest node count for which the dense `N x N` kernel table is built.
const DENSE_KERNEL_LIMIT: usize = 4096;

/// Node counts up to this apply `S_1` as a dense matrix.
const DENSE_APPLY_LIMIT: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("the hierarchy needs a discrete backend (finite graph or box grid)")]
    NotDiscrete,
    #[error("particle number must be 1 or 2, got {0}")]
    BadOrder(usize),
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("field over {got} base points, operator over {expected}")]
    Size { expected: usize, got: usize },
    #[error("step {dt} exceeds the stability bound {max}")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("unstable evolution at t = {time}: sup-norm {norm} exceeds bound {bound}")]
    Unstable { time: f64, norm: f64, bound: f64 },
    #[error("S_n is singular: W vanishes and the closed backend is exactly critical")]
    Singular,
    #[error("linear solver stopped after {iterations} iterations with residual {residual}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("{what} needs {size} entries, beyond the dense limit")]
    TooLarge { what: &'static str, size: usize },
    #[error("k1 ⊗ k1 is not stationary for S_2 (residual {residual})")]
    NotStationary { residual: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// Discretized `S_n` on the nodes of a graph or grid.
#[derive(Debug, Clone)]
pub struct OperatorBundle<'a> {
    disc: &'a Discrete,
    /// Particle number (1 or 2).
    pub n: usize,
    norm1: f64,
    /// `B - diag U` on small backends.
    dense: Option<Arc<DMatrix<f64>>>,
}

impl<'a> OperatorBundle<'a> {
    pub fn new(model: &'a DerivedModel, n: usize) -> Result<Self, HierarchyError> {
        Self::from_discrete(model.discrete().ok_or(HierarchyError::NotDiscrete)?, n)
    }

    pub fn from_discrete(disc: &'a Discrete, n: usize) -> Result<Self, HierarchyError> {
        if !(1..=2).contains(&n) {
            return Err(HierarchyError::BadOrder(n));
        }
        // ‖B - diag U‖_∞ ≤ max_i (row_sum_i + U_i)
        let norm1 = disc
            .row_sum
            .iter()
            .zip(&disc.u)
            .fold(0.0f64, |m, (r, u)| m.max(r + u));
        let mut bundle = Self {
            disc,
            n,
            norm1,
            dense: None,
        };
        if disc.n <= DENSE_APPLY_LIMIT {
            bundle.dense = Some(Arc::new(dense::shifted(
                &dense::birth_matrix(&bundle),
                &disc.u,
            )));
        }
        Ok(bundle)
    }

    /// Same backend, other particle number.
    pub fn with_order(&self, n: usize) -> Result<Self, HierarchyError> {
        if !(1..=2).contains(&n) {
            return Err(HierarchyError::BadOrder(n));
        }
        Ok(Self { n, ..self.clone() })
    }

    pub fn discrete(&self) -> &'a Discrete {
        self.disc
    }

    /// Number of base nodes `N`.
    pub fn len(&self) -> usize {
        self.disc.n
    }

    pub fn is_empty(&self) -> bool {
        self.disc.n == 0
    }

    /// `N^n`.
    pub fn field_len(&self) -> usize {
        self.disc.n.pow(self.n as u32)
    }

    /// Row-sum bound on `‖S_n‖_∞`.
    pub fn norm_bound(&self) -> f64 {
        self.n as f64 * self.norm1
    }

    /// Largest explicit step: `0.5 / ‖S_n‖`.
    pub fn max_step(&self) -> f64 {
        if self.norm_bound() > 0.0 {
            0.5 / self.norm_bound()
        } else {
            f64::INFINITY
        }
    }

    pub fn u_max(&self) -> f64 {
        self.disc.u.iter().copied().fold(0.0, f64::max)
    }

    /// `(B - diag U) u`.
    pub fn s1(&self, u: &[f64]) -> Vec<f64> {
        if let Some(s) = &self.dense {
            return (s.as_ref() * DVector::from_column_slice(u)).data.into();
        }
        let mut out = self.disc.apply_b(u);
        for ((o, x), r) in out.iter_mut().zip(u).zip(&self.disc.u) {
            *o -= r * x;
        }
        out
    }

    /// `(B - diag U)^T u`.
    pub fn s1_t(&self, u: &[f64]) -> Vec<f64> {
        if let Some(s) = &self.dense {
            return s.tr_mul(&DVector::from_column_slice(u)).data.into();
        }
        let mut out = self.disc.apply_bt(u);
        for ((o, x), r) in out.iter_mut().zip(u).zip(&self.disc.u) {
            *o -= r * x;
        }
        out
    }

    /// `L̂*_1 u = (B - diag V) u`.
    pub fn l1(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.disc.apply_b(u);
        for ((o, x), r) in out.iter_mut().zip(u).zip(&self.disc.v) {
            *o -= r * x;
        }
        out
    }

    /// `S_2 K = S_1 K + K S_1^T` without forming the `N² x N²` operator.
    fn s2(&self, k: &[f64]) -> Vec<f64> {
        let n = self.len();
        if let Some(s) = &self.dense {
            // the row-major K read column-major is K^T, and
            // (S K + K S^T)^T = S K^T + K^T S^T
            let kt = DMatrix::from_column_slice(n, n, k);
            let out = s.as_ref() * &kt + &kt * s.transpose();
            return out.data.into();
        }
        let rows: Vec<f64> = k.par_chunks(n).flat_map_iter(|row| self.s1(row)).collect();
        let symmetric = (0..n).all(|i| (i + 1..n).all(|j| k[i * n + j] == k[j * n + i]));
        if symmetric {
            // the first-coordinate action is the transpose of the second
            let mut out = rows.clone();
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += rows[j * n + i];
                }
            }
            return out;
        }
        let kt = transpose(k, n);
        let cols: Vec<f64> = kt.par_chunks(n).flat_map_iter(|row| self.s1(row)).collect();
        let mut out = rows;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += cols[j * n + i];
            }
        }
        out
    }

    /// `S_n` on raw values of length `N^n`.
    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        match self.n {
            1 => self.s1(values),
            _ => self.s2(values),
        }
    }

    /// Inflow across the absorbing boundary for the equation of order `n`.
    /// `k1` is the current single-particle field (needed for `n = 2`).
    pub fn inflow(&self, rho: f64, k1: &[f64]) -> Vec<f64> {
        let e = &self.disc.exit;
        match self.n {
            1 => e.iter().map(|x| rho * x).collect(),
            _ => {
                let n = self.len();
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = rho * (e[i] * k1[j] + k1[i] * e[j]);
                    }
                }
                out
            }
        }
    }

    /// Whether `S_n` annihilates constants (W ≡ 0 on an exactly critical
    /// closed backend), making the stationary system singular.
    pub fn is_singular(&self) -> bool {
        let d = self.disc;
        let vmax = d.v.iter().copied().fold(0.0, f64::max);
        d.w.iter().all(|&w| w == 0.0)
            && d.is_closed()
            && d.row_sum
                .iter()
                .zip(&d.v)
                .all(|(r, v)| (r - v).abs() <= 1e-9 * vmax.max(1.0))
    }

    /// Row-major `b(x_i, x_j)` table.
    pub fn kernel_table(&self) -> Result<Vec<f64>, HierarchyError> {
        let n = self.len();
        if n > DENSE_KERNEL_LIMIT {
            return Err(HierarchyError::TooLarge {
                what: "kernel table",
                size: n * n,
            });
        }
        let mut table = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.disc.apply_b_raw(&e);
            e[j] = 0.0;
            for i in 0..n {
                table[i * n + j] = col[i];
            }
        }
        Ok(table)
    }

    fn check_field(&self, field: &Field) -> Result<(), HierarchyError> {
        if field.arity != self.n {
            return Err(HierarchyError::Arity {
                expected: self.n,
                got: field.arity,
            });
        }
        if field.base != Base::Nodes(self.len()) {
            return Err(HierarchyError::Size {
                expected: self.len(),
                got: field.base_len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn transpose(k: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = k[i * n + j];
        }
    }
    out
}

/// `S_n field`.
pub fn apply_s(bundle: &OperatorBundle<'_>, field: &Field) -> Result<Field, HierarchyError> {
    bundle.check_field(field)?;
    Ok(Field::new(
        field.arity,
        field.base.clone(),
        bundle.apply_values(&field.values),
    ))
}

/// Ordered index pairs `(i, j)`, `i ≠ j`, of the source of order `n`.
pub fn source_terms(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// `f^(n)(x_1..x_n) = Σ_{i≠j} k^(n-1)(.. x̌_i ..) b(x_i, x_j)`, the sum of the
/// ordered-pair terms in which coordinate `i` is removed from `k^(n-1)`.
pub fn build_source(
    k_lower: &Field,
    bundle: &OperatorBundle<'_>,
    n: usize,
) -> Result<Field, HierarchyError> {
    if n < 2 {
        return Err(HierarchyError::BadOrder(n));
    }
    if k_lower.arity != n - 1 {
        return Err(HierarchyError::Arity {
            expected: n - 1,
            got: k_lower.arity,
        });
    }
    let big_n = bundle.len();
    if k_lower.base != Base::Nodes(big_n) {
        return Err(HierarchyError::Size {
            expected: big_n,
            got: k_lower.base_len(),
        });
    }
    let b = bundle.kernel_table()?;
    Ok(Field::nodes(
        n,
        big_n,
        source_values(&k_lower.values, &b, big_n, n)?,
    ))
}

pub(crate) fn source_values(
    k_lower: &[f64],
    b: &[f64],
    big_n: usize,
    n: usize,
) -> Result<Vec<f64>, HierarchyError> {
    let size = big_n
        .checked_pow(n as u32)
        .filter(|&s| s <= 1 << 26)
        .ok_or(HierarchyError::TooLarge {
            what: "source field",
            size: usize::MAX,
        })?;
    if n == 2 {
        let mut out = vec![0.0; size];
        out.par_chunks_mut(big_n).enumerate().for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                *o = k_lower[j] * b[i * big_n + j] + k_lower[i] * b[j * big_n + i];
            }
        });
        return Ok(out);
    }
    let terms = source_terms(n);
    let mut out = vec![0.0; size];
    let mut idx = vec![0usize; n];
    for (flat, o) in out.iter_mut().enumerate() {
        let mut r = flat;
        for slot in idx.iter_mut().rev() {
            *slot = r % big_n;
            r /= big_n;
        }
        let mut acc = 0.0;
        for &(i, j) in &terms {
            let lower = idx
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != i)
                .fold(0usize, |a, (_, &x)| a * big_n + x);
            acc += k_lower[lower] * b[idx[i] * big_n + idx[j]];
        }
        *o = acc;
    }
    Ok(out)
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `Exact` on graphs of at most 64 nodes whose affine system fits the
    /// dense limit, `Rk4` otherwise.
    Auto,
    /// Classical fourth-order Runge-Kutta with `dt ≤ 0.5 / ‖S_n‖`.
    Rk4,
    /// Dense matrix exponential of the affine system (small graphs).
    Exact,
}

/// Largest affine system advanced by a dense matrix exponential.
const EXACT_LIMIT: usize = 400;

/// Largest graph on which `Auto` picks the dense exponential.
const EXACT_GRAPH_NODES: usize = 64;

impl Scheme {
    /// Concrete scheme for an affine system of `len` unknowns (plus the
    /// constant drive) on `disc`.
    fn resolve(self, disc: &Discrete, len: usize) -> Scheme {
        match self {
            Scheme::Auto
                if disc.lattice.is_none() && disc.n <= EXACT_GRAPH_NODES && len < EXACT_LIMIT =>
            {
                Scheme::Exact
            }
            Scheme::Auto => Scheme::Rk4,
            s => s,
        }
    }
}

fn rk4(y: &[f64], dt: f64, rhs: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let axpy =
        |a: &[f64], s: f64, b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
    let k1 = rhs(y);
    let k2 = rhs(&axpy(y, 0.5 * dt, &k1));
    let k3 = rhs(&axpy(y, 0.5 * dt, &k2));
    let k4 = rhs(&axpy(y, dt, &k3));
    y.iter()
        .enumerate()
        .map(|(i, x)| x + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Advances `∂k/∂t = S_n k + f` by `dt` with the source held fixed.
pub fn step_evolution(
    bundle: &OperatorBundle<'_>,
    field: &Field,
    source: &Field,
    dt: f64,
    scheme: Scheme,
) -> Result<Field, HierarchyError> {
    bundle.check_field(field)?;
    bundle.check_field(source)?;
    let f = &source.values;
    let next = match scheme.resolve(bundle.discrete(), field.values.len()) {
        Scheme::Auto => unreachable!("resolved above"),
        Scheme::Rk4 => {
            if dt > bundle.max_step() * (1.0 + 1e-12) {
                return Err(HierarchyError::StepTooLarge {
                    dt,
                    max: bundle.max_step(),
                });
            }
            rk4(&field.values, dt, |y| {
                let mut r = bundle.apply_values(y);
                for (a, b) in r.iter_mut().zip(f) {
                    *a += b;
                }
                r
            })
        }
        Scheme::Exact => {
            let s = dense::s_matrix(bundle, bundle.n, EXACT_LIMIT)?;
            dense::affine_exp_step(&s, &field.values, f, dt)
        }
    };
    let growth = (dt * bundle.norm_bound()).exp();
    let bound = growth * sup(&field.values) + dt * growth * sup(f);
    let norm = sup(&next);
    if !norm.is_finite() || norm > bound * (1.0 + 1e-9) + 1e-300 {
        return Err(HierarchyError::Unstable {
            time: dt,
            norm,
            bound,
        });
    }
    Ok(Field::new(field.arity, field.base.clone(), next))
}

/// Correlation functions of the Cauchy problem at the requested times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub k1: Vec<Field>,
    /// Empty when only `n = 1` was evolved.
    pub k2: Vec<Field>,
    pub dt: f64,
}

/// Options for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    pub scheme: Scheme,
    /// Step size; 0 picks the stability bound.
    pub dt: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Auto,
            dt: 0.0,
        }
    }
}

/// Runs the coupled hierarchy up to order `bundle.n` from Poisson data
/// `k_0^(n) = ρ^n` and records the fields at `times` (non-decreasing).
///
/// For `n = 2` the pair `(k¹, k²)` is advanced jointly, so the source
/// `f(k¹_t)` is integrated to the full order of the scheme.
pub fn evolve(
    bundle: &OperatorBundle<'_>,
    rho: f64,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Evolution, HierarchyError> {
    let n = bundle.len();
    let mut out = Evolution {
        times: times.to_vec(),
        k1: Vec::with_capacity(times.len()),
        k2: Vec::new(),
        dt: 0.0,
    };
    let dt = evolve_with(bundle, rho, times, opts, |_, k1, k2| {
        out.k1.push(Field::nodes(1, n, k1.to_vec()));
        if let Some(k2) = k2 {
            out.k2.push(Field::nodes(2, n, k2.to_vec()));
        }
    })?;
    out.dt = dt;
    Ok(out)
}

/// Like [`evolve`], handing `(t, k¹_t, k²_t)` to `visit` at each output
/// time instead of storing the fields. Returns the step size used.
pub fn evolve_with(
    bundle: &OperatorBundle<'_>,
    rho: f64,
    times: &[f64],
    opts: &EvolveOptions,
    mut visit: impl FnMut(f64, &[f64], Option<&[f64]>),
) -> Result<f64, HierarchyError> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(HierarchyError::Invalid(
            "output times must be non-negative and sorted".into(),
        ));
    }
    let n = bundle.len();
    let b1 = bundle.with_order(1)?;
    let b2 = bundle.with_order(2)?;
    let pairs = bundle.n == 2;
    let len = if pairs { n + n * n } else { n };
    let mut y = vec![rho; n];
    if pairs {
        y.extend(std::iter::repeat_n(rho * rho, n * n));
    }
    let table = if pairs {
        Some(bundle.kernel_table()?)
    } else {
        None
    };
    let rhs = |y: &[f64]| -> Vec<f64> {
        let (u, k) = y.split_at(n);
        let mut out = b1.s1(u);
        for (o, e) in out.iter_mut().zip(&b1.discrete().exit) {
            *o += rho * e;
        }
        if let Some(b) = &table {
            let mut s = b2.s2(k);
            let src = source_values(u, b, n, 2).expect("size checked by the kernel table");
            let inflow = b2.inflow(rho, u);
            for ((o, f), g) in s.iter_mut().zip(&src).zip(&inflow) {
                *o += f + g;
            }
            out.extend(s);
        }
        out
    };
    let max_dt = bundle.with_order(if pairs { 2 } else { 1 })?.max_step();
    let dt = if opts.dt > 0.0 { opts.dt } else { max_dt };
    let scheme = opts.scheme.resolve(b1.discrete(), len);
    if scheme == Scheme::Rk4 && dt > max_dt * (1.0 + 1e-12) {
        return Err(HierarchyError::StepTooLarge { dt, max: max_dt });
    }
    let generator = match scheme {
        Scheme::Auto => unreachable!("resolved above"),
        Scheme::Exact => {
            if len + 1 > EXACT_LIMIT {
                return Err(HierarchyError::TooLarge {
                    what: "dense hierarchy generator",
                    size: (len + 1) * (len + 1),
                });
            }
            Some(dense::affine_generator(len, rhs))
        }
        Scheme::Rk4 => None,
    };
    // ∞-norm of the joint affine generator y' = G y + c
    let exit_max = sup(&b1.discrete().exit);
    let (growth_rate, drive) = match &table {
        Some(b) => (
            b2.norm_bound() + 2.0 * sup(b) + 2.0 * rho * exit_max,
            rho * exit_max,
        ),
        None => (b1.norm_bound(), rho * exit_max),
    };
    let mut t = 0.0;
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let start_norm = sup(&y);
            y = match &generator {
                Some(g) => dense::apply_affine_exp(g, &y, span),
                None => {
                    let steps = (span / dt).ceil().max(1.0) as usize;
                    let h = span / steps as f64;
                    for _ in 0..steps {
                        y = rk4(&y, h, rhs);
                    }
                    y
                }
            };
            let bound = (span * growth_rate).exp() * (start_norm + span * drive) * (1.0 + 1e-9);
            let norm = sup(&y);
            if !norm.is_finite() || norm > bound {
                return Err(HierarchyError::Unstable {
                    time: target,
                    norm,
                    bound,
                });
            }
            t = target;
        }
        let (k1, k2) = y.split_at(n);
        visit(target, k1, pairs.then_some(k2));
    }
    Ok(dt)
}

/// Stationary correlation functions `k¹ = Φ`, `k² = v² + Φ ⊗ Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSystem {
    pub rho: f64,
    pub k1: Field,
    pub k2: Field,
    pub v2: Field,
    /// `sup |S_2 (k¹ ⊗ k¹) + inflow|`: how far the product term is from
    /// being annihilated.
    pub product_residual: f64,
    pub ledger: BoundLedger,
}

/// Builds `k² = v² + k¹ ⊗ k¹` and its bound ledger. `h_hat` is the
/// transience constant estimate before the ledger's safety factor.
pub fn assemble(
    bundle: &OperatorBundle<'_>,
    rho: f64,
    k1: &Field,
    v2: &Field,
    h_hat: f64,
    tolerance: f64,
    opts: &LedgerOptions,
) -> Result<CorrelationSystem, HierarchyError> {
    let b1 = bundle.with_order(1)?;
    let b2 = bundle.with_order(2)?;
    b1.check_field(k1)?;
    b2.check_field(v2)?;
    let product = Field::tensor_square(k1);
    let mut r = b2.apply_values(&product.values);
    for (o, g) in r.iter_mut().zip(b2.inflow(rho, &k1.values)) {
        *o += g;
    }
    let product_residual = sup(&r);
    if product_residual > tolerance {
        return Err(HierarchyError::NotStationary {
            residual: product_residual,
        });
    }
    let k2 = Field::new(
        2,
        v2.base.clone(),
        v2.values
            .iter()
            .zip(&product.values)
            .map(|(a, b)| a + b)
            .collect(),
    );
    let ledger = BoundLedger::new(rho, k1.sup_norm(), k2.sup_norm(), h_hat, opts);
    Ok(CorrelationSystem {
        rho,
        k1: k1.clone(),
        k2,
        v2: v2.clone(),
        product_residual,
        ledger,
    })
}

#[cfg(test)]
mod tests;
