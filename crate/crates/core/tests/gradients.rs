//! Finite-difference checks of every deep detector's full training loss.

use graphod::detectors::deep::anomalydae::{AnomalyDae, AnomalyDaeParams};
use graphod::detectors::deep::autoencoder::AutoEncoder;
use graphod::detectors::deep::conad::{Conad, ConadParams};
use graphod::detectors::deep::dominant::Dominant;
use graphod::detectors::deep::done::{AdoneParams, Done};
use graphod::detectors::deep::gaan::{Gaan, GaanParams};
use graphod::detectors::deep::guide::{Guide, GuideParams};
use graphod::detectors::deep::{gradient_check, jitter_params, Alpha, DeepParams, Objective};
use graphod::rng::seeded;
use graphod::synth::{generate_partition_graph, inject_combined, InjectionParams, PartitionGraphConfig};
use graphod::AttributedGraph;

const TOL: f64 = 1e-4;
const SEEDS: u64 = 20;

fn small_graph(seed: u64) -> AttributedGraph {
    let cfg = PartitionGraphConfig {
        num_classes: 2,
        nodes_per_class: 12,
        homophily: 0.6,
        avg_degree: 4.0,
        num_channels: 5,
        seed,
    };
    let g = generate_partition_graph(&cfg).unwrap();
    let s = InjectionParams::new(4, 1, seed + 1);
    let c = InjectionParams::new(4, 2, seed + 2);
    inject_combined(&g, &s, &c, false).unwrap().graph
}

fn params(seed: u64) -> DeepParams {
    DeepParams {
        hid_dim: 6,
        epochs: 1,
        // Both terms of every dual objective carry weight.
        alpha: Alpha::Fixed(0.3 + 0.02 * seed as f64),
        ..DeepParams::default()
    }
}

fn models(g: &AttributedGraph, seed: u64) -> Vec<(&'static str, Box<dyn Objective>)> {
    let p = params(seed);
    let mut gaan = Gaan::new(g, &p, &GaanParams { noise_dim: 3 }, seed).unwrap();
    gaan.resample_noise(seed);
    let conad = ConadParams {
        aug_rate: 0.5,
        margin: 0.5,
        clique_size: 3,
    };
    let guide = GuideParams {
        struct_hid: 3,
        ..GuideParams::default()
    };
    let dae = AnomalyDaeParams { theta: 4.0, eta: 2.0 };
    vec![
        ("mlpae", Box::new(AutoEncoder::mlp(g, &p, seed).unwrap())),
        ("gcnae", Box::new(AutoEncoder::gcn(g, &p, seed).unwrap())),
        ("dominant", Box::new(Dominant::new(g, &p, seed).unwrap())),
        ("done", Box::new(Done::new(g, &p, seed).unwrap())),
        (
            "adone",
            Box::new(Done::adversarial(g, &p, &AdoneParams::default(), seed).unwrap()),
        ),
        ("anomalydae", Box::new(AnomalyDae::new(g, &p, &dae, seed).unwrap())),
        ("gaan", Box::new(gaan)),
        ("guide", Box::new(Guide::new(g, &p, &guide, seed).unwrap())),
        ("conad", Box::new(Conad::new(g, &p, &conad, seed).unwrap())),
    ]
}

#[test]
fn every_deep_loss_matches_finite_differences() {
    let mut worst = Vec::new();
    for seed in 0..SEEDS {
        let g = small_graph(100 + seed);
        let mut rng = seeded(seed);
        for (name, mut model) in models(&g, seed) {
            jitter_params(model.as_mut(), 0.1, &mut rng);
            let err = gradient_check(model.as_mut(), 6, 1e-6, &mut rng).unwrap();
            assert!(err < TOL, "{name} seed {seed}: relative error {err:.3e}");
            worst.push((name, err));
        }
    }
    assert_eq!(worst.len(), 9 * SEEDS as usize);
}

#[test]
fn conad_test_graph_has_augmentation() {
    let g = small_graph(7);
    let c = ConadParams {
        aug_rate: 0.5,
        margin: 0.5,
        clique_size: 3,
    };
    let m = Conad::new(&g, &params(0), &c, 7).unwrap();
    assert!(m.num_augmented() > 0);
}
