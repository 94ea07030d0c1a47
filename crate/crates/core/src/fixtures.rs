//! Model specifications shared by the tests, the acceptance suite and the
//! `verify` command.

use rand::Rng;

use crate::model::{Boundary, BoxGrid, Kernel, ModelOptions, ModelSpec, RateField, SpaceBackend};

/// Two nodes with unit weights, kernel `a = [[0, 2], [1, 0]]`,
/// `Ψ = (1, 1.5)`, critical `V` and the given `W`.
pub fn two_node_graph(w: [f64; 2]) -> ModelSpec {
    ModelSpec {
        space: SpaceBackend::FiniteGraph {
            weights: vec![1.0, 1.0],
        },
        kernel: Kernel::Tabulated {
            matrix: vec![vec![0.0, 2.0], vec![1.0, 0.0]],
        },
        v: RateField::Critical,
        w: RateField::Tabulated { values: w.to_vec() },
        psi: RateField::Tabulated {
            values: vec![1.0, 1.5],
        },
        options: ModelOptions::default(),
    }
}

/// Irreducible random graph with `nodes` nodes and critical `V`.
///
/// Weights and `Ψ` are uniform on `[0.5, 2]`; kernel entries are uniform on
/// `[0, 1]` with about a third set to zero, plus a positive directed ring
/// that keeps the graph irreducible. `W` is uniform on `[0, w_scale]` with
/// node 0 forced to `w_scale` (so `W ≢ 0` whenever `w_scale > 0`).
pub fn random_graph<R: Rng + ?Sized>(nodes: usize, w_scale: f64, rng: &mut R) -> ModelSpec {
    let mut matrix = vec![vec![0.0; nodes]; nodes];
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, a) in row.iter_mut().enumerate() {
            if i != j && rng.random::<f64>() > 1.0 / 3.0 {
                *a = rng.random::<f64>();
            }
        }
        if nodes > 1 {
            row[(i + 1) % nodes] = 0.2 + rng.random::<f64>();
        }
    }
    let mut draw = |lo: f64, hi: f64| -> Vec<f64> {
        (0..nodes)
            .map(|_| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    };
    let weights = draw(0.5, 2.0);
    let psi = draw(0.5, 2.0);
    let mut w = draw(0.0, w_scale);
    if w_scale > 0.0 {
        w[0] = w_scale;
    }
    ModelSpec {
        space: SpaceBackend::FiniteGraph { weights },
        kernel: Kernel::Tabulated { matrix },
        v: RateField::Critical,
        w: RateField::Tabulated { values: w },
        psi: RateField::Tabulated { values: psi },
        options: ModelOptions::default(),
    }
}

/// Cubic grid with `points` nodes per axis and unit spacing, centred at the
/// origin, Gaussian kernel of unit rate, `V ≡ 1`, `Ψ ≡ 1`.
pub fn cubic_grid(points: usize, sigma: f64, boundary: Boundary, w: RateField) -> ModelSpec {
    let half = points as f64 / 2.0;
    ModelSpec {
        space: SpaceBackend::BoxGrid(BoxGrid {
            dim: 3,
            lower: vec![-half; 3],
            upper: vec![half; 3],
            points: vec![points; 3],
            boundary,
        }),
        kernel: Kernel::Gaussian { rate: 1.0, sigma },
        v: RateField::constant(1.0),
        w,
        psi: RateField::constant(1.0),
        options: ModelOptions::default(),
    }
}

/// Two-dimensional periodic grid of `side x side` unit cells, Gaussian
/// kernel of unit rate, critical `V` and `Ψ ≡ 1`.
pub fn planar_torus(side: usize, sigma: f64, w: RateField) -> ModelSpec {
    let half = side as f64 / 2.0;
    ModelSpec {
        space: SpaceBackend::BoxGrid(BoxGrid {
            dim: 2,
            lower: vec![-half; 2],
            upper: vec![half; 2],
            points: vec![side; 2],
            boundary: Boundary::Periodic,
        }),
        kernel: Kernel::Gaussian { rate: 1.0, sigma },
        v: RateField::Critical,
        w,
        psi: RateField::constant(1.0),
        options: ModelOptions::default(),
    }
}

/// `c` on the closed ball of `radius` about the origin, zero outside.
pub fn ball_w(dim: usize, radius: f64, c: f64) -> RateField {
    RateField::IndicatorBall {
        center: vec![0.0; dim],
        radius,
        value: c,
        outside: 0.0,
    }
}
