//! Dense matrices of the discretized operators, for small backends.

use nalgebra::{DMatrix, DVector};

use super::{HierarchyError, OperatorBundle};

/// `B_ij = b(x_i, x_j) m̄_j`.
pub(crate) fn birth_matrix(bundle: &OperatorBundle<'_>) -> DMatrix<f64> {
    let n = bundle.len();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = bundle.discrete().apply_b(&e);
        e[j] = 0.0;
        m.set_column(j, &DVector::from_vec(col));
    }
    m
}

/// `B - diag(r)` for a rate field `r`.
pub(crate) fn shifted(b: &DMatrix<f64>, r: &[f64]) -> DMatrix<f64> {
    let mut m = b.clone();
    for (i, x) in r.iter().enumerate() {
        m[(i, i)] -= x;
    }
    m
}

/// `A ⊗ I + I ⊗ A`.
pub(crate) fn kron_sum(a: &DMatrix<f64>) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(a.nrows(), a.ncols());
    a.kronecker(&id) + id.kronecker(a)
}

/// Dense `S_n` for `n = 1, 2`, refusing operators with more than `limit` rows.
pub(crate) fn s_matrix(
    bundle: &OperatorBundle<'_>,
    n: usize,
    limit: usize,
) -> Result<DMatrix<f64>, HierarchyError> {
    let size = bundle.len().pow(n as u32);
    if size > limit {
        return Err(HierarchyError::TooLarge {
            what: "dense S_n",
            size: size * size,
        });
    }
    let s1 = shifted(&birth_matrix(bundle), &bundle.discrete().u);
    Ok(if n == 1 { s1 } else { kron_sum(&s1) })
}

/// Exact step of `y' = S y + f` with constant `f`, via the exponential of
/// the augmented matrix `[[S, f], [0, 0]]`.
pub(crate) fn affine_exp_step(s: &DMatrix<f64>, y: &[f64], f: &[f64], dt: f64) -> Vec<f64> {
    let n = s.nrows();
    let mut g = DMatrix::zeros(n + 1, n + 1);
    g.view_mut((0, 0), (n, n)).copy_from(s);
    for (i, x) in f.iter().enumerate() {
        g[(i, n)] = *x;
    }
    apply_affine_exp(&g, y, dt)
}

/// Augmented generator `[[G, c], [0, 0]]` of an affine right-hand side.
pub(crate) fn affine_generator(len: usize, rhs: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(len + 1, len + 1);
    let zero = vec![0.0; len];
    let c = rhs(&zero);
    let mut e = zero.clone();
    for j in 0..len {
        e[j] = 1.0;
        let col = rhs(&e);
        e[j] = 0.0;
        for i in 0..len {
            g[(i, j)] = col[i] - c[i];
        }
    }
    for i in 0..len {
        g[(i, len)] = c[i];
    }
    g
}

/// `exp(t G) (y, 1)` restricted to the first `len` entries.
pub(crate) fn apply_affine_exp(g: &DMatrix<f64>, y: &[f64], t: f64) -> Vec<f64> {
    let n = g.nrows() - 1;
    let e = (g * t).exp();
    let mut aug = DVector::from_element(n + 1, 1.0);
    for (i, x) in y.iter().enumerate() {
        aug[i] = *x;
    }
    (e * aug).iter().take(n).copied().collect()
}
