//! Time-stepped correlation hierarchy against dense exponentials of the
//! coupled linear system, the Feynman-Kac estimator, and time rescaling.

use nalgebra::{DMatrix, DVector};

use contact_core::feynman_kac::fk_finite_horizon;
use contact_core::fixtures::{random_graph, two_node_graph};
use contact_core::hierarchy::{evolve, EvolveOptions, OperatorBundle};
use contact_core::jump::{JumpSampler, SamplerOptions};
use contact_core::model::{derive, Kernel, ModelSpec, Point, RateField};
use contact_core::rng::RngStream;

/// Generator of the joint `(k¹, k²)` system on a graph, written out entry
/// by entry: `k¹' = (B - U) k¹`, `k²' = (S⊗I + I⊗S) k² + f(k¹)` with
/// `f(i, j) = k¹_j b(i, j) + k¹_i b(j, i)`.
fn joint_generator(spec: &ModelSpec) -> DMatrix<f64> {
    let model = derive(spec).unwrap();
    let d = model.discrete().unwrap();
    let n = d.n;
    let b = |i: usize, j: usize| model.b(&Point::Node(i), &Point::Node(j));
    let s = DMatrix::from_fn(n, n, |i, j| {
        b(i, j) * d.mbar[j] - if i == j { d.u[i] } else { 0.0 }
    });
    let mut a = DMatrix::zeros(n + n * n, n + n * n);
    a.view_mut((0, 0), (n, n)).copy_from(&s);
    for i in 0..n {
        for j in 0..n {
            let row = n + i * n + j;
            for k in 0..n {
                a[(row, n + k * n + j)] += s[(i, k)];
                a[(row, n + i * n + k)] += s[(j, k)];
            }
            a[(row, j)] += b(i, j);
            a[(row, i)] += b(j, i);
        }
    }
    a
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[test]
fn coupled_evolution_matches_dense_exponential() {
    let mut rng = RngStream::root(8).rng();
    for (k, spec) in [two_node_graph([0.5, 0.0]), random_graph(4, 0.7, &mut rng)]
        .into_iter()
        .enumerate()
    {
        let model = derive(&spec).unwrap();
        let n = model.discrete().unwrap().n;
        let bundle = OperatorBundle::new(&model, 2).unwrap();
        let rho = 1.3;
        let times = [0.25, 1.0, 4.0];
        let evo = evolve(&bundle, rho, &times, &EvolveOptions::default()).unwrap();
        let a = joint_generator(&spec);
        let start = DVector::from_fn(n + n * n, |i, _| if i < n { rho } else { rho * rho });
        for (s, &t) in times.iter().enumerate() {
            let exact = (&a * t).exp() * &start;
            let e1 = max_rel_diff(&evo.k1[s].values, &exact.as_slice()[..n]);
            let e2 = max_rel_diff(&evo.k2[s].values, &exact.as_slice()[n..]);
            assert!(
                e1 < 1e-8 && e2 < 1e-8,
                "model {k}, t = {t}: {e1:.2e}, {e2:.2e}"
            );
        }
    }
}

#[test]
fn first_order_evolution_agrees_with_feynman_kac() {
    let model = derive(&two_node_graph([0.5, 0.0])).unwrap();
    let bundle = OperatorBundle::new(&model, 1).unwrap();
    let sampler = JumpSampler::new(&model, SamplerOptions::default()).unwrap();
    let times = [0.5, 2.0];
    let evo = evolve(&bundle, 2.0, &times, &EvolveOptions::default()).unwrap();
    for (s, &t) in times.iter().enumerate() {
        for x in 0..2 {
            let est = fk_finite_horizon(
                &sampler,
                Point::Node(x),
                t,
                2.0,
                20_000,
                RngStream::root(12).child(s as u64).child(x as u64),
            )
            .unwrap();
            let grid = evo.k1[s].values[x];
            assert!(
                (est.value - grid).abs() < 3.0 * est.standard_error,
                "t = {t}, x = {x}: {} ± {} vs {grid}",
                est.value,
                est.standard_error
            );
        }
    }
}

#[test]
fn doubling_all_rates_doubles_time() {
    let base = two_node_graph([0.5, 0.2]);
    let mut fast = base.clone();
    let Kernel::Tabulated { matrix } = &mut fast.kernel else {
        unreachable!("fixture kernel is tabulated")
    };
    matrix.iter_mut().flatten().for_each(|a| *a *= 2.0);
    fast.w = RateField::Tabulated {
        values: vec![1.0, 0.4],
    };
    let (mb, mf) = (derive(&base).unwrap(), derive(&fast).unwrap());
    let (bb, bf) = (
        OperatorBundle::new(&mb, 2).unwrap(),
        OperatorBundle::new(&mf, 2).unwrap(),
    );
    let opts = EvolveOptions::default();
    let slow = evolve(&bb, 1.0, &[1.0, 6.0], &opts).unwrap();
    let quick = evolve(&bf, 1.0, &[0.5, 3.0], &opts).unwrap();
    for s in 0..2 {
        assert!(max_rel_diff(&quick.k1[s].values, &slow.k1[s].values) < 1e-8);
        assert!(max_rel_diff(&quick.k2[s].values, &slow.k2[s].values) < 1e-8);
    }
}
