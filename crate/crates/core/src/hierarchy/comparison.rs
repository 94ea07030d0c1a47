//! Positivity and comparison properties of the hierarchy semigroups,
//! checked with dense matrix exponentials on small backends:
//!
//! 1. `e^{tS_n} f ≥ 0`,
//! 2. `e^{tS_n} f ≤ e^{tL̂*_n} f`,
//! 3. `e^{tS^i} f ≥ e^{-t U_max} e^{tA^i} f` for each coordinate `i`,
//!
//! for non-negative `f`. `A^i` is the birth operator acting on coordinate
//! `i` alone and `S^i = A^i - U(x_i)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{birth_matrix, kron_sum, shifted};
use super::{HierarchyError, OperatorBundle};
use crate::rng::RngStream;

/// Largest dense operator the checks will exponentiate.
const COMPARISON_LIMIT: usize = 256;

/// Allowed deficit, relative to `max(1, sup of the compared vectors)`.
pub const COMPARISON_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n: usize,
    pub fields: usize,
    pub times: Vec<f64>,
    /// Entrywise inequalities evaluated.
    pub checks: usize,
    pub violations: usize,
    /// Largest scaled deficit seen for each property (≤ 0 means slack).
    pub worst_positivity: f64,
    pub worst_domination: f64,
    pub worst_trotter: f64,
    pub passed: bool,
}

struct Tally {
    checks: usize,
    violations: usize,
}

impl Tally {
    /// Records `lhs ≥ rhs` entrywise; returns the largest scaled deficit.
    fn ge(&mut self, lhs: &DVector<f64>, rhs: &DVector<f64>) -> f64 {
        let scale = lhs.amax().max(rhs.amax()).max(1.0);
        let mut worst = f64::NEG_INFINITY;
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            let deficit = (b - a) / scale;
            self.checks += 1;
            if deficit > COMPARISON_TOLERANCE {
                self.violations += 1;
            }
            worst = worst.max(deficit);
        }
        worst
    }
}

/// Shifted operator and birth matrix acting on one coordinate.
type Pair = (DMatrix<f64>, DMatrix<f64>);

/// Runs the three checks on `fields` random non-negative fields at every
/// time in `times`, for the bundle's particle number.
pub fn comparison_checks(
    bundle: &OperatorBundle<'_>,
    fields: usize,
    times: &[f64],
    rng: RngStream,
) -> Result<ComparisonReport, HierarchyError> {
    let n = bundle.n;
    let size = bundle.field_len();
    if size > COMPARISON_LIMIT {
        return Err(HierarchyError::TooLarge {
            what: "comparison checks",
            size: size * size,
        });
    }
    let d = bundle.discrete();
    let b = birth_matrix(bundle);
    let s1 = shifted(&b, &d.u);
    let l1 = shifted(&b, &d.v);
    let id = DMatrix::<f64>::identity(d.n, d.n);
    let (s, l, per_coordinate): (DMatrix<f64>, DMatrix<f64>, Vec<Pair>) = if n == 1 {
        (s1.clone(), l1, vec![(s1, b)])
    } else {
        (
            kron_sum(&s1),
            kron_sum(&l1),
            vec![
                (s1.kronecker(&id), b.kronecker(&id)),
                (id.kronecker(&s1), id.kronecker(&b)),
            ],
        )
    };
    let u_max = bundle.u_max();

    let mut draws = rng.rng();
    let samples: Vec<DVector<f64>> = (0..fields)
        .map(|k| {
            // every fourth field is a sparse point mass pattern
            if k % 4 == 3 {
                let mut v = DVector::zeros(size);
                v[draws.random_range(0..size)] = draws.random::<f64>() * 10.0;
                v
            } else {
                DVector::from_fn(size, |_, _| draws.random::<f64>())
            }
        })
        .collect();

    let mut tally = Tally {
        checks: 0,
        violations: 0,
    };
    let (mut worst_positivity, mut worst_domination, mut worst_trotter) =
        (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let zero = DVector::zeros(size);
    for &t in times {
        let es = (&s * t).exp();
        let el = (&l * t).exp();
        let coords: Vec<(DMatrix<f64>, DMatrix<f64>)> = per_coordinate
            .iter()
            .map(|(si, ai)| ((si * t).exp(), (ai * t).exp() * (-t * u_max).exp()))
            .collect();
        for f in &samples {
            let sf = &es * f;
            worst_positivity = worst_positivity.max(tally.ge(&sf, &zero));
            worst_domination = worst_domination.max(tally.ge(&(&el * f), &sf));
            for (esi, lower) in &coords {
                worst_trotter = worst_trotter.max(tally.ge(&(esi * f), &(lower * f)));
            }
        }
    }
    Ok(ComparisonReport {
        n,
        fields,
        times: times.to_vec(),
        checks: tally.checks,
        violations: tally.violations,
        worst_positivity,
        worst_domination,
        worst_trotter,
        passed: tally.violations == 0,
    })
}
