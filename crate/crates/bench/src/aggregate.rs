//! Mean, population standard deviation and max over trials.

use std::collections::BTreeMap;

use graphod::detectors::DetectorKind;

use crate::trial::{TrialResult, TrialStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Population (1/N) standard deviation.
    pub std: f64,
    pub max: f64,
}

impl Stat {
    /// `None` for an empty slice. Values are sorted first, so the result does
    /// not depend on their order.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some(Self {
            mean: mean.clamp(v[0], v[v.len() - 1]),
            std: var.sqrt(),
            max: v[v.len() - 1],
        })
    }
}

/// Summary of one (dataset, detector) group. Statistics cover successful
/// trials only; a group where every trial failed has no statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub dataset: String,
    pub algorithm: DetectorKind,
    pub successes: usize,
    pub failures: usize,
    pub oom: usize,
    pub auc: Option<Stat>,
    pub ap: Option<Stat>,
    pub recall_at_k: Option<Stat>,
    pub auc_contextual: Option<Stat>,
    pub auc_structural: Option<Stat>,
    pub runtime_ms: Option<Stat>,
    pub peak_mem_bytes: Option<Stat>,
}

/// Groups by dataset then detector, both in sorted order.
pub fn aggregate(results: &[TrialResult]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(&str, DetectorKind), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.dataset.as_str(), r.algorithm)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((dataset, algorithm), rs)| {
            let ok: Vec<&TrialResult> = rs.iter().copied().filter(|r| r.is_ok()).collect();
            let stat = |f: &dyn Fn(&TrialResult) -> Option<f64>| {
                Stat::of(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            AggregateRow {
                dataset: dataset.to_string(),
                algorithm,
                successes: ok.len(),
                failures: rs.len() - ok.len(),
                oom: rs.iter().filter(|r| r.status == TrialStatus::Oom).count(),
                auc: stat(&|r| r.metrics.map(|m| m.auc)),
                ap: stat(&|r| r.metrics.map(|m| m.ap)),
                recall_at_k: stat(&|r| r.metrics.map(|m| m.recall_at_k)),
                auc_contextual: stat(&|r| r.metrics.and_then(|m| m.auc_contextual)),
                auc_structural: stat(&|r| r.metrics.and_then(|m| m.auc_structural)),
                runtime_ms: stat(&|r| Some(r.runtime_ms)),
                peak_mem_bytes: stat(&|r| Some(r.peak_mem_bytes as f64)),
            }
        })
        .collect()
}
