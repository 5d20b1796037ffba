use std::collections::BTreeSet;

use graphod::synth::{
    generate_partition_graph, inject_combined, inject_contextual, inject_structural,
    InjectionParams, PartitionGraphConfig, Recipe,
};
use graphod::{AttributedGraph, OutlierKind};
use proptest::prelude::*;

fn base(n: usize, seed: u64) -> AttributedGraph {
    generate_partition_graph(&PartitionGraphConfig::standard(n, seed)).unwrap()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[test]
fn gen_time_structural_and_contextual_counts() {
    let g = base(1000, 11);
    let s = inject_structural(&g, &InjectionParams::new(10, 10, 1)).unwrap();
    assert_eq!(s.labels.count(OutlierKind::Structural), 100);
    let c = inject_contextual(&g, &InjectionParams::new(10, 10, 2)).unwrap();
    assert_eq!(c.labels.count(OutlierKind::Contextual), 100);
}

#[test]
fn gen_time_mean_degree_near_reference() {
    // Reference dataset: 1000 nodes, 5,746 adjacency entries, degree 5.7.
    let mut degs = Vec::new();
    for seed in 0..5 {
        let (g, _) = Recipe::gen_time(seed).build().unwrap();
        degs.push(g.mean_degree());
    }
    let mean = degs.iter().sum::<f64>() / degs.len() as f64;
    assert!((mean - 5.7).abs() <= 0.5, "mean degree {mean}");
}

#[test]
fn cliques_are_complete_and_degrees_bounded() {
    for seed in 0..5 {
        let g = base(300, seed);
        let out = inject_structural(&g, &InjectionParams::new(8, 4, seed)).unwrap();
        let mut seen = BTreeSet::new();
        for group in &out.report.cliques {
            assert_eq!(group.len(), 8);
            let mut induced = 0;
            for (a, &u) in group.iter().enumerate() {
                assert!(seen.insert(u), "node {u} in two cliques");
                assert!(out.graph.degrees()[u] >= 7);
                for &v in &group[a + 1..] {
                    if out.graph.has_edge(u, v) {
                        induced += 1;
                    }
                }
            }
            assert_eq!(induced, 8 * 7 / 2);
        }
        assert_eq!(out.graph.features(), g.features());
    }
}

#[test]
fn contextual_replay_oracle() {
    let g = base(200, 4);
    let out = inject_contextual(&g, &InjectionParams::new(10, 5, 77)).unwrap();
    assert_eq!(out.report.swaps.len(), 50);
    let x = g.features();
    for swap in &out.report.swaps {
        let i = swap.target;
        assert_eq!(swap.pool.len(), 10);
        assert!(!swap.pool.contains(&i));
        let best = swap
            .pool
            .iter()
            .map(|&j| sq_dist(x.row(i), x.row(j)))
            .fold(f64::NEG_INFINITY, f64::max);
        let moved = sq_dist(out.graph.features().row(i), x.row(i));
        assert!((moved - best).abs() <= 1e-9 * best.max(1.0));
        assert_eq!(out.graph.features().row(i), x.row(swap.source));
    }
    assert_eq!(out.graph.edges(), g.edges());
}

#[test]
fn disjoint_combined_counts() {
    let g = base(1000, 3);
    let p = InjectionParams::new(10, 10, 5);
    let q = InjectionParams::new(10, 10, 6);
    let out = inject_combined(&g, &p, &q, false).unwrap();
    assert_eq!(out.labels.num_outliers(), 200);
    assert_eq!(out.labels.count(OutlierKind::Both), 0);
    let l = &out.labels;
    assert_eq!(
        l.count(OutlierKind::Structural) + l.count(OutlierKind::Contextual) + l.count(OutlierKind::Both),
        l.num_outliers()
    );
}

#[test]
fn zero_repetitions_reduce_to_single_type() {
    let g = base(200, 8);
    let s = InjectionParams::new(5, 3, 1);
    let none = InjectionParams::new(5, 0, 2);
    let a = inject_combined(&g, &s, &none, false).unwrap();
    let b = inject_structural(&g, &s).unwrap();
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.labels, b.labels);

    let c = InjectionParams::new(5, 3, 4);
    let a = inject_combined(&g, &InjectionParams::new(5, 0, 0), &c, true).unwrap();
    let b = inject_contextual(&g, &c).unwrap();
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.labels, b.labels);
}

#[test]
fn overlap_mode_on_small_graph() {
    // 100-node sweep graph: one 10-clique plus 10 contextual outliers.
    let mut totals = Vec::new();
    for seed in 0..20 {
        let (_, labels) = Recipe::gen_size(100, seed).build().unwrap();
        assert_eq!(labels.structural_mask().iter().filter(|&&b| b).count(), 10);
        assert_eq!(labels.contextual_mask().iter().filter(|&&b| b).count(), 10);
        totals.push(labels.num_outliers());
    }
    assert!(totals.iter().all(|&t| (10..=20).contains(&t)));
    assert!(totals.iter().any(|&t| t < 20));
}

#[test]
fn disjoint_mode_needs_room() {
    let g = base(30, 0);
    let p = InjectionParams::new(4, 4, 0);
    assert!(inject_combined(&g, &p, &p, false).is_err());
    assert!(inject_combined(&g, &p, &p, true).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn injection_is_deterministic_and_monotone(
        n in 20usize..120,
        seed in any::<u64>(),
        m in 2usize..6,
        reps in 1usize..4,
    ) {
        let g = base(n, seed);
        let p = InjectionParams::new(m, reps, seed ^ 1);
        let a = inject_structural(&g, &p).unwrap();
        let b = inject_structural(&g, &p).unwrap();
        prop_assert_eq!(&a.graph, &b.graph);
        prop_assert_eq!(&a.labels, &b.labels);
        for (u, v) in g.edges() {
            prop_assert!(a.graph.has_edge(u, v));
        }
        prop_assert_eq!(a.labels.count(OutlierKind::Structural), m * reps);

        let c = inject_contextual(&g, &p).unwrap();
        let d = inject_contextual(&g, &p).unwrap();
        prop_assert_eq!(&c.graph, &d.graph);
        prop_assert_eq!(c.graph.edges(), g.edges());
        prop_assert_eq!(c.labels.count(OutlierKind::Contextual), m * reps);
    }
}
