//! Synthetic attributed graphs and outlier injection.
//!
//! Graphs come from a random partition model with class-conditional Gaussian
//! features. Two injectors plant ground-truth outliers: dense cliques
//! (structural) and attribute swaps with a far-away node (contextual).

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, OutlierKind, OutlierLabels};
use crate::rng::{self, Rng};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionGraphConfig {
    pub num_classes: usize,
    pub nodes_per_class: usize,
    /// Expected fraction of a node's edges that stay inside its class.
    pub homophily: f64,
    pub avg_degree: f64,
    pub num_channels: usize,
    pub seed: u64,
}

impl PartitionGraphConfig {
    /// Two balanced classes, average degree 5, 64 channels, homophily 0.5.
    pub fn standard(num_nodes: usize, seed: u64) -> Self {
        Self {
            num_classes: 2,
            nodes_per_class: num_nodes.div_ceil(2),
            homophily: 0.5,
            avg_degree: 5.0,
            num_channels: 64,
            seed,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_classes * self.nodes_per_class
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.nodes_per_class == 0 {
            return Err(Error::param("partition graph needs at least one node"));
        }
        if self.num_classes.checked_mul(self.nodes_per_class).is_none() {
            return Err(Error::param("num_classes * nodes_per_class overflows"));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::param("homophily must lie in [0, 1]"));
        }
        if !(self.avg_degree.is_finite() && self.avg_degree > 0.0) {
            return Err(Error::param("avg_degree must be positive"));
        }
        Ok(())
    }
}

/// Clique size (or candidate pool size) `m` and repetition count `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionParams {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

impl InjectionParams {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self { m, n, seed }
    }

    /// Reads `n` as a total outlier count rather than a repetition count.
    pub fn from_total(m: usize, total: usize, seed: u64) -> Result<Self> {
        if m == 0 || !total.is_multiple_of(m) {
            return Err(Error::param(format!(
                "outlier total {total} is not a multiple of m = {m}"
            )));
        }
        Ok(Self::new(m, total / m, seed))
    }

    pub fn count(&self) -> usize {
        self.m * self.n
    }

    fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.m < 2 {
            return Err(Error::param("injection needs m >= 2"));
        }
        let needed = self
            .m
            .checked_mul(self.n)
            .ok_or_else(|| Error::param("m * n overflows"))?;
        if needed > num_nodes {
            return Err(Error::InsufficientNodes {
                needed,
                available: num_nodes,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSwap {
    pub target: usize,
    pub pool: Vec<usize>,
    pub source: usize,
}

/// What an injector changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectionReport {
    pub cliques: Vec<Vec<usize>>,
    pub swaps: Vec<AttributeSwap>,
}

#[derive(Debug, Clone)]
pub struct Injected {
    pub graph: AttributedGraph,
    pub labels: OutlierLabels,
    pub report: InjectionReport,
}

/// Samples a random partition graph.
///
/// Nodes `c * nodes_per_class .. (c + 1) * nodes_per_class` form class `c`.
/// Edge probabilities are set so a node expects `homophily * avg_degree`
/// neighbors inside its class and the rest outside.
pub fn generate_partition_graph(cfg: &PartitionGraphConfig) -> Result<AttributedGraph> {
    cfg.validate()?;
    let n = cfg.num_nodes();
    let npc = cfg.nodes_per_class;
    let mut rng = rng::seeded(rng::derive(cfg.seed, "edges"));

    let p_in = if npc > 1 {
        (cfg.homophily * cfg.avg_degree / (npc - 1) as f64).min(1.0)
    } else {
        0.0
    };
    let p_out = if n > npc {
        ((1.0 - cfg.homophily) * cfg.avg_degree / (n - npc) as f64).min(1.0)
    } else {
        0.0
    };

    let mut edges = Vec::with_capacity((n as f64 * cfg.avg_degree * 0.6) as usize);
    for i in 0..n {
        let ci = i / npc;
        for cb in ci..cfg.num_classes {
            let lo = (cb * npc).max(i + 1);
            let hi = (cb + 1) * npc;
            let p = if cb == ci { p_in } else { p_out };
            sample_range(&mut rng, lo, hi, p, |j| edges.push((i, j)));
        }
    }

    let mut frng = rng::seeded(rng::derive(cfg.seed, "features"));
    let d = cfg.num_channels;
    let means: Vec<f64> = (0..cfg.num_classes * d)
        .map(|_| frng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = i / npc;
        for k in 0..d {
            data.push(means[c * d + k] + frng.sample::<f64, _>(StandardNormal));
        }
    }
    let features = Matrix::from_vec(n, d, data)?;
    AttributedGraph::build(&edges, features, false)
}

/// Calls `emit` for each index in `lo..hi` kept with probability `p`, using
/// geometric skips between successes.
fn sample_range(rng: &mut Rng, lo: usize, hi: usize, p: f64, mut emit: impl FnMut(usize)) {
    if lo >= hi || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (lo..hi).for_each(emit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut j = lo;
    loop {
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if skip >= (hi - j) as f64 {
            return;
        }
        j += skip as usize;
        emit(j);
        j += 1;
    }
}

/// Plants `n` disjoint cliques of `m` nodes each.
pub fn inject_structural(graph: &AttributedGraph, params: &InjectionParams) -> Result<Injected> {
    params.validate(graph.num_nodes())?;
    let mut rng = rng::seeded(rng::derive(params.seed, "structural"));
    let chosen = index::sample(&mut rng, graph.num_nodes(), params.count()).into_vec();
    plant_cliques(graph, chosen, params.m)
}

fn plant_cliques(graph: &AttributedGraph, chosen: Vec<usize>, m: usize) -> Result<Injected> {
    let mut edges = graph.edges();
    let mut labels = OutlierLabels::none(graph.num_nodes());
    let mut cliques = Vec::new();
    for group in chosen.chunks(m) {
        for (a, &u) in group.iter().enumerate() {
            labels.mark(u, OutlierKind::Structural);
            for &v in &group[a + 1..] {
                edges.push((u, v));
                if graph.is_directed() {
                    edges.push((v, u));
                }
            }
        }
        cliques.push(group.to_vec());
    }
    Ok(Injected {
        graph: graph.with_edges(&edges)?,
        labels,
        report: InjectionReport {
            cliques,
            swaps: Vec::new(),
        },
    })
}

/// Replaces the features of `m * n` nodes with those of the farthest node
/// in a random pool of `m` others.
pub fn inject_contextual(graph: &AttributedGraph, params: &InjectionParams) -> Result<Injected> {
    params.validate(graph.num_nodes())?;
    let mut rng = rng::seeded(rng::derive(params.seed, "contextual"));
    let targets = index::sample(&mut rng, graph.num_nodes(), params.count()).into_vec();
    swap_attributes(graph, &targets, params.m, &mut rng)
}

fn swap_attributes(
    graph: &AttributedGraph,
    targets: &[usize],
    m: usize,
    rng: &mut Rng,
) -> Result<Injected> {
    let n = graph.num_nodes();
    if m > n - 1 {
        return Err(Error::InsufficientNodes {
            needed: m + 1,
            available: n,
        });
    }
    // Distances always use the original rows, so earlier swaps do not feed
    // into later ones.
    let original = graph.features();
    let mut features = original.clone();
    let mut labels = OutlierLabels::none(n);
    let mut swaps = Vec::with_capacity(targets.len());
    for &i in targets {
        let pool: Vec<usize> = index::sample(rng, n - 1, m)
            .into_iter()
            .map(|j| if j >= i { j + 1 } else { j })
            .collect();
        let xi = original.row(i);
        let mut best = pool[0];
        let mut best_dist = f64::NEG_INFINITY;
        for &j in &pool {
            let dist: f64 = xi
                .iter()
                .zip(original.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist > best_dist {
                best_dist = dist;
                best = j;
            }
        }
        features.row_mut(i).copy_from_slice(original.row(best));
        labels.mark(i, OutlierKind::Contextual);
        swaps.push(AttributeSwap {
            target: i,
            pool,
            source: best,
        });
    }
    Ok(Injected {
        graph: graph.with_features(features)?,
        labels,
        report: InjectionReport {
            cliques: Vec::new(),
            swaps,
        },
    })
}

/// Structural injection followed by contextual injection.
///
/// By default contextual targets are drawn from nodes outside the cliques so
/// the two label sets are disjoint. With `allow_overlap` both draws range over
/// all nodes and a node may end up labeled `both`.
pub fn inject_combined(
    graph: &AttributedGraph,
    structural: &InjectionParams,
    contextual: &InjectionParams,
    allow_overlap: bool,
) -> Result<Injected> {
    let n = graph.num_nodes();
    let active = |p: &InjectionParams| p.n > 0;
    if !allow_overlap && structural.count() + contextual.count() > n {
        return Err(Error::InsufficientNodes {
            needed: structural.count() + contextual.count(),
            available: n,
        });
    }
    let first = if active(structural) {
        inject_structural(graph, structural)?
    } else {
        Injected {
            graph: graph.clone(),
            labels: OutlierLabels::none(n),
            report: InjectionReport::default(),
        }
    };
    if !active(contextual) {
        return Ok(first);
    }
    contextual.validate(n)?;
    let mut rng = rng::seeded(rng::derive(contextual.seed, "contextual"));
    let targets: Vec<usize> = if allow_overlap {
        index::sample(&mut rng, n, contextual.count()).into_vec()
    } else {
        let taken: BTreeSet<usize> = first.report.cliques.iter().flatten().copied().collect();
        let free: Vec<usize> = (0..n).filter(|u| !taken.contains(u)).collect();
        index::sample(&mut rng, free.len(), contextual.count())
            .into_iter()
            .map(|k| free[k])
            .collect()
    };
    let second = swap_attributes(&first.graph, &targets, contextual.m, &mut rng)?;
    Ok(Injected {
        graph: second.graph,
        labels: first.labels.merged(&second.labels),
        report: InjectionReport {
            cliques: first.report.cliques,
            swaps: second.report.swaps,
        },
    })
}

/// One injection step of a [`Recipe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InjectionStep {
    Structural(InjectionParams),
    Contextual(InjectionParams),
    Combined {
        structural: InjectionParams,
        contextual: InjectionParams,
        #[serde(default)]
        allow_overlap: bool,
    },
}

impl InjectionStep {
    pub fn apply(&self, graph: &AttributedGraph) -> Result<Injected> {
        match self {
            InjectionStep::Structural(p) => inject_structural(graph, p),
            InjectionStep::Contextual(p) => inject_contextual(graph, p),
            InjectionStep::Combined {
                structural,
                contextual,
                allow_overlap,
            } => inject_combined(graph, structural, contextual, *allow_overlap),
        }
    }
}

/// Everything needed to rebuild a synthetic dataset from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub generator: PartitionGraphConfig,
    #[serde(default)]
    pub injections: Vec<InjectionStep>,
}

impl Recipe {
    /// Base graph of `num_nodes` with `m`-sized cliques and pools, `n` of each.
    pub fn combined(num_nodes: usize, m: usize, n: usize, allow_overlap: bool, seed: u64) -> Self {
        Self {
            generator: PartitionGraphConfig::standard(num_nodes, seed),
            injections: vec![InjectionStep::Combined {
                structural: InjectionParams::new(m, n, rng::derive(seed, "inject-s")),
                contextual: InjectionParams::new(m, n, rng::derive(seed, "inject-c")),
                allow_overlap,
            }],
        }
    }

    /// 1000-node benchmark graph with 100 structural and 100 contextual
    /// outliers, sampled independently.
    pub fn gen_time(seed: u64) -> Self {
        Self::combined(1000, 10, 10, true, seed)
    }

    /// Size-sweep graph: one clique of 10 and 10 contextual outliers.
    pub fn gen_size(num_nodes: usize, seed: u64) -> Self {
        Self::combined(num_nodes, 10, 1, true, seed)
    }

    pub fn build(&self) -> Result<(AttributedGraph, OutlierLabels)> {
        let mut graph = generate_partition_graph(&self.generator)?;
        let mut labels = OutlierLabels::none(graph.num_nodes());
        for step in &self.injections {
            let out = step.apply(&graph)?;
            graph = out.graph;
            labels = labels.merged(&out.labels);
        }
        Ok((graph, labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, d: usize) -> AttributedGraph {
        AttributedGraph::build(&[], Matrix::filled(n, d, 1.5), false).unwrap()
    }

    #[test]
    fn partition_graph_shape() {
        let g = generate_partition_graph(&PartitionGraphConfig::standard(1000, 1)).unwrap();
        assert_eq!(g.num_nodes(), 1000);
        assert_eq!(g.num_features(), 64);
        assert!(!g.is_directed());
    }

    #[test]
    fn full_homophily_has_no_cross_edges() {
        let cfg = PartitionGraphConfig {
            homophily: 1.0,
            ..PartitionGraphConfig::standard(400, 3)
        };
        let g = generate_partition_graph(&cfg).unwrap();
        assert!(g.num_edges() > 0);
        assert!(g.edges().iter().all(|&(u, v)| u / 200 == v / 200));
    }

    #[test]
    fn degenerate_config_rejected() {
        let cfg = PartitionGraphConfig {
            nodes_per_class: 0,
            ..PartitionGraphConfig::standard(10, 0)
        };
        assert!(generate_partition_graph(&cfg).is_err());
    }

    #[test]
    fn mean_degree_matches_target() {
        // Each node expects h*d intra-class and (1-h)*d inter-class edges.
        for seed in 0..10 {
            let g = generate_partition_graph(&PartitionGraphConfig::standard(1000, seed)).unwrap();
            let deg = g.mean_degree();
            assert!((4.5..=5.5).contains(&deg), "seed {seed}: mean degree {deg}");
        }
    }

    #[test]
    fn geometric_skipping_is_unbiased() {
        let mut rng = rng::seeded(5);
        let mut hits = vec![0usize; 50];
        for _ in 0..4000 {
            sample_range(&mut rng, 0, 50, 0.2, |j| hits[j] += 1);
        }
        for h in hits {
            let rate = h as f64 / 4000.0;
            assert!((rate - 0.2).abs() < 0.03, "rate {rate}");
        }
    }

    #[test]
    fn minimal_clique() {
        let g = flat(2, 1);
        let out = inject_structural(&g, &InjectionParams::new(2, 1, 0)).unwrap();
        assert_eq!(out.graph.num_edges(), 1);
        assert_eq!(out.labels.count(OutlierKind::Structural), 2);
    }

    #[test]
    fn injection_rejects_bad_params() {
        let g = flat(5, 1);
        assert!(matches!(
            inject_structural(&g, &InjectionParams::new(3, 2, 0)),
            Err(Error::InsufficientNodes { needed: 6, .. })
        ));
        assert!(inject_structural(&g, &InjectionParams::new(1, 2, 0)).is_err());
        assert!(inject_contextual(&g, &InjectionParams::new(5, 1, 0)).is_err());
    }

    #[test]
    fn identical_features_stay_identical() {
        let g = flat(30, 4);
        let out = inject_contextual(&g, &InjectionParams::new(5, 2, 9)).unwrap();
        assert_eq!(out.graph.features(), g.features());
        assert_eq!(out.labels.count(OutlierKind::Contextual), 10);
    }

    #[test]
    fn from_total_reinterprets_n() {
        let p = InjectionParams::from_total(10, 70, 0).unwrap();
        assert_eq!((p.m, p.n, p.count()), (10, 7, 70));
        assert!(InjectionParams::from_total(10, 75, 0).is_err());
    }

    #[test]
    fn gen_time_counts() {
        let (g, labels) = Recipe::gen_time(0).build().unwrap();
        assert_eq!(g.num_nodes(), 1000);
        let s = labels.structural_mask().iter().filter(|&&b| b).count();
        let c = labels.contextual_mask().iter().filter(|&&b| b).count();
        assert_eq!((s, c), (100, 100));
        assert!(labels.num_outliers() <= 200 && labels.num_outliers() >= 170);
    }
}
