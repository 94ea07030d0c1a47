//! Stationary equations `S_n v = -f` by Jacobi-preconditioned BiCGSTAB on
//! the matrix-free action of `-S_n`.

use serde::{Deserialize, Serialize};

use super::{build_source, sup, HierarchyError, OperatorBundle};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Bound on the sup-norm of the residual `S_n v + f`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub field: Field,
    /// Sup-norm of the true residual `S_n v + f`.
    pub residual: f64,
    pub iterations: usize,
}

/// `v` with `S_n v = -f` and residual sup-norm at most `tolerance`.
pub fn stationary_solve(
    bundle: &OperatorBundle<'_>,
    source: &Field,
    tolerance: f64,
) -> Result<Field, HierarchyError> {
    let opts = SolveOptions {
        tolerance,
        ..SolveOptions::default()
    };
    stationary_solve_with(bundle, source, &opts).map(|r| r.field)
}

pub fn stationary_solve_with(
    bundle: &OperatorBundle<'_>,
    source: &Field,
    opts: &SolveOptions,
) -> Result<SolveReport, HierarchyError> {
    bundle.check_field(source)?;
    if bundle.is_singular() {
        return Err(HierarchyError::Singular);
    }
    let diag = jacobi_diagonal(bundle);
    let apply =
        |x: &[f64]| -> Vec<f64> { bundle.apply_values(x).into_iter().map(|v| -v).collect() };
    let (x, residual, iterations) = bicgstab(apply, &diag, &source.values, opts)?;
    Ok(SolveReport {
        field: Field::new(source.arity, source.base.clone(), x),
        residual,
        iterations,
    })
}

/// Stationary `k¹_ρ`: the constant `ρ` when `S_1` annihilates constants,
/// otherwise the solution of `S_1 k = -ρ·exit` (residual tolerance scaled
/// by `ρ`).
pub fn stationary_k1(
    bundle: &OperatorBundle<'_>,
    rho: f64,
    opts: &SolveOptions,
) -> Result<SolveReport, HierarchyError> {
    let b1 = bundle.with_order(1)?;
    let n = b1.len();
    if b1.is_singular() {
        return Ok(SolveReport {
            field: Field::nodes(1, n, vec![rho; n]),
            residual: 0.0,
            iterations: 0,
        });
    }
    let source = Field::nodes(1, n, b1.inflow(rho, &[]));
    let so = SolveOptions {
        tolerance: opts.tolerance * rho,
        ..*opts
    };
    stationary_solve_with(&b1, &source, &so)
}

/// `v²` with `S_2 v² = -f²(k¹)`, so that `k²_ρ = k¹ ⊗ k¹ + v²`; the
/// residual tolerance is scaled by `ρ²`.
pub fn stationary_v2(
    bundle: &OperatorBundle<'_>,
    rho: f64,
    k1: &Field,
    opts: &SolveOptions,
) -> Result<SolveReport, HierarchyError> {
    let b2 = bundle.with_order(2)?;
    let f = build_source(k1, &b2, 2)?;
    let so = SolveOptions {
        tolerance: opts.tolerance * rho * rho,
        ..*opts
    };
    stationary_solve_with(&b2, &f, &so)
}

/// Diagonal of `-S_n`, floored away from zero.
fn jacobi_diagonal(bundle: &OperatorBundle<'_>) -> Vec<f64> {
    let d = bundle.discrete();
    let d1: Vec<f64> = (0..d.n)
        .map(|i| {
            let v = d.u[i] - d.b_raw(i, i) * d.mbar[i];
            if v.abs() > 1e-12 {
                v
            } else {
                1.0
            }
        })
        .collect();
    match bundle.n {
        1 => d1,
        _ => d1
            .iter()
            .flat_map(|a| d1.iter().map(move |b| a + b))
            .collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual_of(apply: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    apply(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

fn bicgstab(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    diag: &[f64],
    b: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, f64, usize), HierarchyError> {
    let len = b.len();
    let mut x = vec![0.0; len];
    if sup(b) <= opts.tolerance {
        return Ok((x, sup(b), 0));
    }
    let precondition = |v: &[f64]| v.iter().zip(diag).map(|(a, d)| a / d).collect::<Vec<_>>();
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; len];
    let mut p = vec![0.0; len];
    for it in 1..=opts.max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // breakdown: restart from the true residual
            r = residual_of(&apply, &x, b);
            r_hat = r.clone();
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..len {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precondition(&p);
        v = apply(&y);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            omega = 0.0;
            continue;
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        for i in 0..len {
            x[i] += alpha * y[i];
        }
        let mut converged = sup(&s) <= opts.tolerance;
        if !converged {
            let z = precondition(&s);
            let t = apply(&z);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..len {
                x[i] += omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            converged = sup(&r) <= opts.tolerance;
        }
        if converged {
            let true_r = residual_of(&apply, &x, b);
            let res = sup(&true_r);
            if res <= opts.tolerance {
                return Ok((x, res, it));
            }
            // recursive residual drifted; continue from the true one
            r = true_r;
            r_hat = r.clone();
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }
    }
    let res = sup(&residual_of(&apply, &x, b));
    Err(HierarchyError::NonConvergence {
        iterations: opts.max_iterations,
        residual: res,
    })
}
