//! Particle simulator against exact single-particle event statistics.

use contact_core::model::{
    derive, Kernel, ModelOptions, ModelSpec, Point, RateField, SpaceBackend,
};
use contact_core::particles::{EventKind, ParticleConfiguration, ParticleSimulator, SimOptions};
use contact_core::rng::RngStream;

/// Symmetric two-node graph with `a = 2` both ways and `Ψ ≡ 1`: death rate
/// `V ≡ 2` and offspring mass 2 at each node.
fn symmetric_pair() -> ModelSpec {
    ModelSpec {
        space: SpaceBackend::FiniteGraph {
            weights: vec![1.0, 1.0],
        },
        kernel: Kernel::Tabulated {
            matrix: vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        },
        v: RateField::Critical,
        w: RateField::constant(0.0),
        psi: RateField::constant(1.0),
        options: ModelOptions::default(),
    }
}

/// First event of a lone particle: returns (time, kind, position).
fn first_events(opts: SimOptions, runs: usize, seed: u64) -> Vec<(f64, EventKind, Point)> {
    let model = derive(&symmetric_pair()).unwrap();
    let sim = ParticleSimulator::new(&model, opts).unwrap();
    let start = ParticleConfiguration {
        points: vec![Point::Node(0)],
        time: 0.0,
    };
    (0..runs)
        .map(|i| {
            let mut rng = RngStream::root(seed).child(i as u64).rng();
            let (_, log) = sim.run(&start, &[20.0], &mut rng).unwrap();
            let e = log.events.first().expect("an event before t = 20");
            (e.time, e.kind, e.position)
        })
        .collect()
}

fn mean_se(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt(), var)
}

#[test]
fn lone_particle_dies_after_an_exponential_lifetime() {
    let opts = SimOptions {
        pure_death: true,
        record_events: true,
        ..SimOptions::default()
    };
    let events = first_events(opts, 20_000, 1);
    assert!(events
        .iter()
        .all(|e| e.1 == EventKind::Death && e.2 == Point::Node(0)));
    let times: Vec<f64> = events.iter().map(|e| e.0).collect();
    let (mean, se, var) = mean_se(&times);
    assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean} ± {se}");
    assert!((var / (mean * mean) - 1.0).abs() < 0.06, "var {var}");
}

#[test]
fn first_event_gap_has_the_total_rate() {
    let opts = SimOptions {
        record_events: true,
        ..SimOptions::default()
    };
    let events = first_events(opts, 20_000, 2);
    // total rate V + offspring mass = 4: null events of the uniformized
    // clock must not show up in the gaps
    let times: Vec<f64> = events.iter().map(|e| e.0).collect();
    let (mean, se, var) = mean_se(&times);
    assert!((mean - 0.25).abs() < 3.0 * se, "mean {mean} ± {se}");
    assert!((var / (mean * mean) - 1.0).abs() < 0.06, "var {var}");
    // births and deaths are equally likely; offspring land on the other node
    let births: Vec<_> = events.iter().filter(|e| e.1 == EventKind::Birth).collect();
    let p = births.len() as f64 / events.len() as f64;
    let se_p = (0.25 / events.len() as f64).sqrt();
    assert!((p - 0.5).abs() < 3.0 * se_p, "birth fraction {p}");
    assert!(births.iter().all(|e| e.2 == Point::Node(1)));
}
