use super::*;
use crate::fixtures::{ball_w, cubic_grid, planar_torus, random_graph, two_node_graph};
use crate::model::{derive, Boundary, RateField};
use crate::rng::RngStream;
use nalgebra::DMatrix;

fn two_node(w: [f64; 2]) -> DerivedModel {
    derive(&two_node_graph(w)).unwrap()
}

#[test]
fn critical_constants_are_annihilated() {
    let d = two_node([0.0, 0.0]);
    let b = OperatorBundle::new(&d, 1).unwrap();
    let out = apply_s(&b, &Field::nodes(1, 2, vec![3.0, 3.0])).unwrap();
    assert!(out.sup_norm() < 1e-15, "{out:?}");
    let b2 = b.with_order(2).unwrap();
    let out = apply_s(&b2, &Field::nodes(2, 2, vec![3.0; 4])).unwrap();
    assert!(out.sup_norm() < 1e-14);
    assert!(b.is_singular());
}

#[test]
fn two_node_action_by_hand() {
    // Ψ = (1, 1.5): b(0,1) = 2, b(1,0) = 1/1.5, m̄ = (1, 1.5),
    // V = (3, 2/3), W = (0.5, 0):
    // S_1 = [[-3.5, 3], [2/3, -2/3]]
    let d = two_node([0.5, 0.0]);
    let b = OperatorBundle::new(&d, 1).unwrap();
    let out = apply_s(&b, &Field::nodes(1, 2, vec![1.0, 3.0])).unwrap();
    assert!((out.values[0] - 5.5).abs() < 1e-14, "{:?}", out.values);
    assert!((out.values[1] - (2.0 / 3.0 - 2.0)).abs() < 1e-14);
    assert!(matches!(
        apply_s(&b, &Field::nodes(2, 2, vec![0.0; 4])),
        Err(HierarchyError::Arity {
            expected: 1,
            got: 2
        })
    ));
}

#[test]
fn pair_action_matches_dense_kronecker_sum() {
    let d = two_node([0.5, 0.2]);
    let b2 = OperatorBundle::new(&d, 2).unwrap();
    let s = dense::s_matrix(&b2, 2, 16).unwrap();
    let s1 = dense::s_matrix(&b2, 1, 16).unwrap();
    let id = DMatrix::<f64>::identity(2, 2);
    assert!((&s - (s1.kronecker(&id) + id.kronecker(&s1))).amax() == 0.0);
    for values in [vec![1.0, -2.0, 0.5, 4.0], vec![1.0, 2.0, 2.0, 3.0]] {
        let fast = apply_s(&b2, &Field::nodes(2, 2, values.clone())).unwrap();
        let slow = &s * nalgebra::DVector::from_vec(values);
        for i in 0..4 {
            assert!((fast.values[i] - slow[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn source_terms_and_values() {
    assert_eq!(source_terms(3).len(), 6);
    assert_eq!(source_terms(2), vec![(0, 1), (1, 0)]);
    let d = two_node([0.0, 0.0]);
    let b = OperatorBundle::new(&d, 2).unwrap();
    // b(0,1) = 2, b(1,0) = 2/3
    let f = build_source(&Field::nodes(1, 2, vec![1.0, 2.0]), &b, 2).unwrap();
    assert_eq!(f.get2(0, 0), 0.0);
    assert!((f.get2(0, 1) - (2.0 * 2.0 + 1.0 * 2.0 / 3.0)).abs() < 1e-15);
    assert!((f.get2(1, 0) - (1.0 * 2.0 / 3.0 + 2.0 * 2.0)).abs() < 1e-15);
    // third order with constant k² = c: f³ = c Σ_{i≠j} b(x_i, x_j)
    let f3 = build_source(&Field::nodes(2, 2, vec![0.5; 4]), &b, 3).unwrap();
    let bt = [[0.0, 2.0], [2.0 / 3.0, 0.0]];
    for flat in 0..8 {
        let x = [flat / 4, (flat / 2) % 2, flat % 2];
        let want: f64 = source_terms(3)
            .iter()
            .map(|&(i, j)| 0.5 * bt[x[i]][x[j]])
            .sum();
        assert!((f3.values[flat] - want).abs() < 1e-15);
    }
    assert!(build_source(&Field::nodes(2, 2, vec![0.0; 4]), &b, 2).is_err());
}

#[test]
fn symmetric_kernel_constant_source() {
    let d = derive(&planar_torus(4, 0.8, RateField::constant(0.0))).unwrap();
    let b = OperatorBundle::new(&d, 2).unwrap();
    let rho = 1.7;
    let f = build_source(&Field::nodes(1, 16, vec![rho; 16]), &b, 2).unwrap();
    let table = b.kernel_table().unwrap();
    for (v, bij) in f.values.iter().zip(&table) {
        assert!((v - 2.0 * rho * bij).abs() < 1e-14);
    }
    assert_eq!(f.asymmetry(), 0.0);
}

#[test]
fn constants_stay_put_under_critical_evolution() {
    let d = two_node([0.0, 0.0]);
    let b = OperatorBundle::new(&d, 1).unwrap();
    let zero = Field::nodes(1, 2, vec![0.0; 2]);
    let mut k = Field::nodes(1, 2, vec![2.0; 2]);
    let dt = b.max_step();
    let steps = (100.0 / d.v_min() / dt).ceil() as usize;
    for _ in 0..steps {
        k = step_evolution(&b, &k, &zero, dt, Scheme::Rk4).unwrap();
    }
    assert!(k.values.iter().all(|v| (v - 2.0).abs() < 1e-10));
    assert!(matches!(
        step_evolution(&b, &k, &zero, 2.0 * dt, Scheme::Rk4),
        Err(HierarchyError::StepTooLarge { .. })
    ));
}

#[test]
fn rk4_converges_at_fourth_order() {
    let d = two_node([0.7, 0.1]);
    let b = OperatorBundle::new(&d, 1).unwrap();
    let k0 = Field::nodes(1, 2, vec![1.0, 0.3]);
    let src = Field::nodes(1, 2, vec![0.2, 0.5]);
    let exact = step_evolution(&b, &k0, &src, 1.0, Scheme::Exact).unwrap();
    let run = |steps: usize| {
        let mut k = k0.clone();
        for _ in 0..steps {
            k = step_evolution(&b, &k, &src, 1.0 / steps as f64, Scheme::Rk4).unwrap();
        }
        k.max_abs_diff(&exact)
    };
    let (e1, e2) = (run(16), run(32));
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "{e1} {e2} {ratio}");
}

#[test]
fn coupled_evolution_matches_dense_exponential() {
    let d = two_node([0.7, 0.1]);
    let b = OperatorBundle::new(&d, 2).unwrap();
    let times = [0.5, 2.0];
    let fine = EvolveOptions {
        scheme: Scheme::Rk4,
        dt: b.max_step() / 8.0,
    };
    let rk = evolve(&b, 1.3, &times, &fine).unwrap();
    let ex = evolve(
        &b,
        1.3,
        &times,
        &EvolveOptions {
            scheme: Scheme::Exact,
            dt: 0.0,
        },
    )
    .unwrap();
    for i in 0..2 {
        assert!(rk.k1[i].max_abs_diff(&ex.k1[i]) < 1e-9);
        assert!(rk.k2[i].max_abs_diff(&ex.k2[i]) < 1e-9);
        assert!(rk.k2[i].asymmetry() < 1e-12);
    }
    // the product term alone would keep k² = k¹ ⊗ k¹; the source adds to it
    let prod = Field::tensor_square(&ex.k1[1]);
    assert!(ex.k2[1]
        .values
        .iter()
        .zip(&prod.values)
        .all(|(a, b)| a >= b));
}

#[test]
fn stationary_solve_basics() {
    let d = two_node([0.5, 0.0]);
    let b = OperatorBundle::new(&d, 1).unwrap();
    let v = stationary_solve(&b, &Field::nodes(1, 2, vec![0.0; 2]), 1e-12).unwrap();
    assert_eq!(v.values, vec![0.0; 2]);

    let f = Field::nodes(1, 2, vec![0.3, 1.0]);
    let v = stationary_solve(&b, &f, 1e-12).unwrap();
    let r = apply_s(&b, &v).unwrap();
    assert!(r
        .values
        .iter()
        .zip(&f.values)
        .all(|(a, g)| (a + g).abs() <= 1e-12));
    assert!(v.min() >= 0.0);
    // long-horizon evolution from zero approaches the same field
    let long = step_evolution(
        &b,
        &Field::nodes(1, 2, vec![0.0; 2]),
        &f,
        600.0,
        Scheme::Exact,
    )
    .unwrap();
    assert!(long.max_abs_diff(&v) < 1e-9);

    let closed = two_node([0.0, 0.0]);
    let bc = OperatorBundle::new(&closed, 2).unwrap();
    assert!(matches!(
        stationary_solve(&bc, &Field::nodes(2, 2, vec![1.0; 4]), 1e-10),
        Err(HierarchyError::Singular)
    ));
}

#[test]
fn pair_solve_is_nonnegative_and_symmetric() {
    let mut rng = RngStream::root(11).rng();
    let spec = random_graph(5, 0.5, &mut rng);
    let d = derive(&spec).unwrap();
    let b2 = OperatorBundle::new(&d, 2).unwrap();
    let k1 = Field::nodes(1, 5, vec![1.0; 5]);
    let f = build_source(&k1, &b2, 2).unwrap();
    let v = stationary_solve(&b2, &f, 1e-11).unwrap();
    assert!(v.min() >= 0.0);
    assert!(v.asymmetry() < 1e-9);
    let dense = dense::s_matrix(&b2, 2, 64).unwrap();
    let exact = dense
        .lu()
        .solve(&nalgebra::DVector::from_vec(f.values.clone()))
        .unwrap();
    for (a, e) in v.values.iter().zip(exact.iter()) {
        assert!((a + e).abs() < 1e-9);
    }
}

#[test]
fn markov_semigroup_has_unit_row_sums() {
    let mut rng = RngStream::root(3).rng();
    for _ in 0..10 {
        let d = derive(&random_graph(6, 0.0, &mut rng)).unwrap();
        let b = OperatorBundle::new(&d, 1).unwrap();
        let l = dense::shifted(&dense::birth_matrix(&b), &d.discrete().unwrap().v);
        for t in [0.1, 1.0, 10.0, 100.0] {
            let e = (&l * t).exp();
            for i in 0..6 {
                assert!((e.row(i).sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn comparison_suite_on_random_graph() {
    let mut rng = RngStream::root(5).rng();
    let d = derive(&random_graph(3, 0.8, &mut rng)).unwrap();
    for n in [1, 2] {
        let b = OperatorBundle::new(&d, n).unwrap();
        let r = comparison_checks(&b, 100, &[0.1, 1.0, 10.0], RngStream::root(9)).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checks, 100 * 3 * 3usize.pow(n as u32) * (2 + n));
    }
}

#[test]
fn comparison_equalities() {
    let d = two_node([0.0, 0.0]);
    let b = OperatorBundle::new(&d, 2).unwrap();
    let r = comparison_checks(&b, 20, &[1.0], RngStream::root(1)).unwrap();
    assert!(r.passed);
    assert!(r.worst_domination.abs() < 1e-14, "{}", r.worst_domination);
    let dw = two_node([0.4, 0.9]);
    let b = OperatorBundle::new(&dw, 1).unwrap();
    let r = comparison_checks(&b, 20, &[0.0], RngStream::root(1)).unwrap();
    assert!(
        r.worst_positivity
            .max(r.worst_domination)
            .max(r.worst_trotter)
            <= 0.0
    );
    assert!(r.worst_domination == 0.0 && r.worst_trotter == 0.0);
}

#[test]
fn assembled_pair_function_decorrelates_with_distance() {
    // absorbing 15 x 1 x 1 line, W ≡ 0: Φ = ρ and k² → ρ² at long range
    let mut spec = cubic_grid(15, 1.0, Boundary::Absorbing, RateField::constant(0.0));
    if let crate::model::SpaceBackend::BoxGrid(g) = &mut spec.space {
        g.points = vec![15, 1, 1];
        g.lower = vec![-7.5, -0.5, -0.5];
        g.upper = vec![7.5, 0.5, 0.5];
    }
    let d = derive(&spec).unwrap();
    let rho = 2.0;
    let b1 = OperatorBundle::new(&d, 1).unwrap();
    let b2 = b1.with_order(2).unwrap();
    let phi = stationary_solve(&b1, &Field::nodes(1, 15, b1.inflow(rho, &[])), 1e-12).unwrap();
    // V ≡ 1 is critical up to the lattice quadrature error
    assert!(phi.values.iter().all(|v| (v - rho).abs() < 1e-6));
    let f = build_source(&phi, &b2, 2).unwrap();
    let v2 = stationary_solve(&b2, &f, 1e-12).unwrap();
    let sys = assemble(&b2, rho, &phi, &v2, 5.0, 1e-9, &LedgerOptions::default()).unwrap();
    assert!(sys.k2.asymmetry() < 1e-10);
    let c = 7;
    let excess = |j: usize| sys.k2.get2(c, j) - rho * rho;
    assert!(excess(c) > excess(c + 1) && excess(c + 1) > excess(c + 4));
    assert!(excess(c + 7) < 0.1 * excess(c));
    assert!(sys.ledger.chain_ok);
}

#[test]
fn monitor_trivial_on_critical_torus() {
    let d = derive(&planar_torus(5, 0.7, RateField::constant(0.0))).unwrap();
    let b = OperatorBundle::new(&d, 1).unwrap();
    let r = convergence_monitor(&b, 1.5, 10.0, &MonitorOptions::default()).unwrap();
    assert!(r.dist1.iter().all(|&x| x < 1e-12), "{:?}", r.dist1);
    assert!(r.converged);
}

#[test]
fn probe_pairs_agree_with_full_field() {
    let spec = cubic_grid(5, 1.2, Boundary::Absorbing, ball_w(3, 1.0, 0.8));
    let d = derive(&spec).unwrap();
    let b = OperatorBundle::new(&d, 2).unwrap();
    let centre = d
        .discrete()
        .unwrap()
        .lattice
        .as_ref()
        .unwrap()
        .locate(&[0.0; 3])
        .unwrap();
    let pairs = vec![(centre, centre), (centre, centre + 1), (0, centre)];
    let base = MonitorOptions {
        probe_pairs: pairs.clone(),
        record_step: 0.5,
        quadrature_step: 0.02,
        ..MonitorOptions::default()
    };
    let full = convergence_monitor(&b, 1.0, 40.0, &base).unwrap();
    let probe = convergence_monitor(
        &b,
        1.0,
        40.0,
        &MonitorOptions {
            mode: Some(MonitorMode::ProbePairs),
            ..base
        },
    )
    .unwrap();
    assert_eq!(full.mode, MonitorMode::FullField);
    for (a, p) in full.pairs.iter().zip(&probe.pairs) {
        assert!((a.k2 - p.k2).abs() < 1e-4 * a.k2, "{a:?} {p:?}");
        assert!((a.v2 - p.v2).abs() < 1e-3 * a.v2.abs().max(1e-3));
    }
    assert!(full.converged && probe.converged, "{full:?}");
    assert!(probe.dist2.last().unwrap() < &1e-5);
}
