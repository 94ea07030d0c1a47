//! Feynman-Kac estimators against closed-form oracles and exact pathwise
//! identities.

use contact_core::conditions::{estimate_w_integrability, ConditionOptions, Verdict};
use contact_core::feynman_kac::{fk_field, fk_finite_horizon, FkOptions, Regime};
use contact_core::fixtures::two_node_graph;
use contact_core::jump::{JumpSampler, SamplerOptions};
use contact_core::model::{
    derive, Kernel, ModelOptions, ModelSpec, Point, RateField, SpaceBackend,
};
use contact_core::rng::RngStream;

/// `e^{tM} v` for a 2x2 matrix through the Cayley-Hamilton closed form
/// `e^{tM} = e^{tτ} (cosh(δt) I + sinh(δt)/δ (M - τI))`, `τ = tr/2`,
/// `δ² = τ² - det` (real here: the generator has positive off-diagonals).
fn expm2(m: [[f64; 2]; 2], t: f64, v: [f64; 2]) -> [f64; 2] {
    let tau = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let delta = (tau * tau - det).sqrt();
    let (c, s) = ((delta * t).cosh(), (delta * t).sinh() / delta);
    let e = (tau * t).exp();
    let apply = |i: usize| {
        let shifted = [
            m[i][0] - if i == 0 { tau } else { 0.0 },
            m[i][1] - if i == 1 { tau } else { 0.0 },
        ];
        e * (c * v[i] + s * (shifted[0] * v[0] + shifted[1] * v[1]))
    };
    [apply(0), apply(1)]
}

#[test]
fn two_node_finite_horizon_matches_closed_form_exponential() {
    let model = derive(&two_node_graph([0.5, 0.0])).unwrap();
    // critical V: V(x) Ψ(x) = Σ_y a(x, y) Ψ(y) m(y)
    let d = model.discrete().unwrap();
    assert!((d.v[0] - 3.0).abs() < 1e-12 && (d.v[1] - 2.0 / 3.0).abs() < 1e-12);
    // h-transformed generator B_ij = a_ij Ψ_j m_j / Ψ_i, minus diag(V + W)
    let m = [[-3.5, 3.0], [2.0 / 3.0, -2.0 / 3.0]];
    let sampler = JumpSampler::new(&model, SamplerOptions::default()).unwrap();
    let rho = 1.7;
    for (k, t) in [0.3, 1.5, 6.0].into_iter().enumerate() {
        let exact = expm2(m, t, [rho, rho]);
        for (x, &want) in exact.iter().enumerate() {
            let est = fk_finite_horizon(
                &sampler,
                Point::Node(x),
                t,
                rho,
                40_000,
                RngStream::root(11).child(k as u64).child(x as u64),
            )
            .unwrap();
            let z = (est.value - want).abs() / est.standard_error;
            assert!(
                z < 4.0,
                "t = {t}, x = {x}: {} vs {} (z = {z:.2})",
                est.value,
                want
            );
        }
    }
}

#[test]
fn common_random_numbers_order_estimates_by_w() {
    let weak = derive(&two_node_graph([0.2, 0.1])).unwrap();
    let strong = derive(&two_node_graph([0.6, 0.3])).unwrap();
    let (sw, ss) = (
        JumpSampler::new(&weak, SamplerOptions::default()).unwrap(),
        JumpSampler::new(&strong, SamplerOptions::default()).unwrap(),
    );
    let rng = RngStream::root(5);
    for t in [0.5, 2.0, 8.0] {
        let a = fk_finite_horizon(&sw, Point::Node(0), t, 1.0, 2_000, rng).unwrap();
        let b = fk_finite_horizon(&ss, Point::Node(0), t, 1.0, 2_000, rng).unwrap();
        // paths do not depend on W, so the ordering holds path by path
        assert!(b.value < a.value, "t = {t}: {} !< {}", b.value, a.value);
    }
}

#[test]
fn estimates_are_linear_in_rho() {
    let model = derive(&two_node_graph([0.5, 0.0])).unwrap();
    let sampler = JumpSampler::new(&model, SamplerOptions::default()).unwrap();
    let one = fk_finite_horizon(
        &sampler,
        Point::Node(1),
        2.0,
        1.0,
        3_000,
        RngStream::root(9),
    )
    .unwrap();
    let three = fk_finite_horizon(
        &sampler,
        Point::Node(1),
        2.0,
        3.0,
        3_000,
        RngStream::root(9),
    )
    .unwrap();
    assert!((three.value - 3.0 * one.value).abs() <= 1e-12 * three.value);
    assert!(
        (three.standard_error - 3.0 * one.standard_error).abs() <= 1e-12 * three.standard_error
    );
}

#[test]
fn zero_perturbation_keeps_rho_exactly() {
    let model = derive(&two_node_graph([0.0, 0.0])).unwrap();
    let sampler = JumpSampler::new(&model, SamplerOptions::default()).unwrap();
    let est =
        fk_finite_horizon(&sampler, Point::Node(0), 5.0, 2.5, 500, RngStream::root(1)).unwrap();
    assert_eq!((est.value, est.standard_error), (2.5, 0.0));
}

/// Symmetric two-node graph with `a = 2` both ways and `Ψ ≡ 1`, so `V ≡ 2`.
fn symmetric_pair(w: [f64; 2]) -> ModelSpec {
    ModelSpec {
        space: SpaceBackend::FiniteGraph {
            weights: vec![1.0, 1.0],
        },
        kernel: Kernel::Tabulated {
            matrix: vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        },
        v: RateField::Critical,
        w: RateField::Tabulated { values: w.to_vec() },
        psi: RateField::constant(1.0),
        options: ModelOptions::default(),
    }
}

#[test]
fn holding_times_are_exponential_with_rate_v() {
    let model = derive(&symmetric_pair([0.0, 0.0])).unwrap();
    let sampler = JumpSampler::new(&model, SamplerOptions::default()).unwrap();
    let mut rng = RngStream::root(3).rng();
    let n = 100_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| sampler.holding(&Point::Node(0), &mut rng).unwrap())
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} ± {se}");
    // exponential: variance equals the squared mean
    assert!((var / (mean * mean) - 1.0).abs() < 0.03, "var {var}");
}

#[test]
fn recurrent_graph_with_disaster_goes_extinct() {
    let model = derive(&symmetric_pair([0.3, 0.0])).unwrap();
    let sampler = JumpSampler::new(&model, SamplerOptions::default()).unwrap();
    let probe = [Point::Node(0), Point::Node(1)];
    let report = estimate_w_integrability(
        &sampler,
        &probe,
        50.0,
        &ConditionOptions::default(),
        RngStream::root(2),
    )
    .unwrap();
    assert_eq!(report.verdict, Verdict::Diverging);
    // the time average of W tends to its stationary mean 0.15
    let last = *report.integrand.last().unwrap();
    assert!((last - 0.15).abs() < 0.03, "{last}");

    let fk = fk_field(
        &sampler,
        &probe,
        1.0,
        1e-2,
        &FkOptions::default(),
        RngStream::root(4),
    )
    .unwrap();
    assert_eq!(fk.regime, Regime::Extinct);
    assert!(fk.field.values.iter().all(|&v| v == 0.0));
}
