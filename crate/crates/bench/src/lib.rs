//! Input builders shared by the benchmarks.

use cdrs_core::grids::{builtin_features, FeatureMap, ScalarMap};
use cdrs_core::mrf::{build_energy, EnergyParams};
use cdrs_core::scoring::DiscretePdf;
use cdrs_core::synth::{generate, SynthConfig};
use cdrs_core::{EnergyModel, FlowGraph, LabelField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A 4-connected `side`×`side` grid with random terminal and neighbor
/// capacities, the shape of one expansion move.
pub fn grid_graph(side: usize, seed: u64) -> FlowGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = side * side;
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::with_capacity(n + 2, s, t, 4 * n);
    for p in 0..n {
        let (y, x) = (p / side, p % side);
        g.add_arc(s, p, rng.random_range(0.0..10.0));
        g.add_arc(p, t, rng.random_range(0.0..10.0));
        if x + 1 < side {
            let c = rng.random_range(0.0..4.0);
            g.add_edge(p, p + 1, c, c);
        }
        if y + 1 < side {
            let c = rng.random_range(0.0..4.0);
            g.add_edge(p, p + side, c, c);
        }
    }
    g
}

/// Energy and ML initialization for one image of the synthetic scene,
/// with noisy label distributions.
pub fn scene_energy(size: usize, bins: usize, lambda: f64) -> (EnergyModel, LabelField) {
    let scene = generate(&SynthConfig {
        height: size,
        width: size,
        square: size / 5 - 2,
        ..SynthConfig::default()
    })
    .expect("synthetic scene");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pdfs: Vec<DiscretePdf> = scene.scores[0]
        .data()
        .iter()
        .map(|&s| {
            let mut p: Vec<f64> = (0..bins).map(|_| rng.random_range(0.0..0.2)).collect();
            let m = ((s as f64 * bins as f64).ceil() as usize).clamp(1, bins);
            p[m - 1] += 1.0;
            let sum: f64 = p.iter().sum();
            DiscretePdf::new(p.into_iter().map(|v| v / sum).collect()).expect("valid pdf")
        })
        .collect();
    let gray = cdrs_core::grids::to_gray(&scene.images[0]);
    let gray = ScalarMap::new(size, size, gray.data().iter().map(|v| v * 255.0).collect()).expect("gray");
    let params = EnergyParams {
        lambda,
        ..EnergyParams::default()
    };
    let model = build_energy(&pdfs, &gray, &params).expect("energy");
    let init = cdrs_core::mrf::ml_estimate(&pdfs, size, size).expect("ml");
    (model, init)
}

/// Built-in features of every image of the synthetic scene.
pub fn scene_features(size: usize) -> Vec<FeatureMap> {
    let scene = generate(&SynthConfig {
        height: size,
        width: size,
        square: size / 5 - 2,
        ..SynthConfig::default()
    })
    .expect("synthetic scene");
    scene.images.iter().map(|im| builtin_features(im, 3).expect("features")).collect()
}
