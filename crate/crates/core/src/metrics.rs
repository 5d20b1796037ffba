//! Detection quality metrics: ROC-AUC, average precision and Recall@k.
//!
//! All functions take raw score slices (higher means more outlying) and a
//! boolean outlier mask of the same length.

use crate::error::{Error, Result};
use crate::graph::{OutlierLabels, ScoreVector};

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "metric",
            left: (scores.len(), 1),
            right: (labels.len(), 1),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("scores must be finite"));
    }
    Ok(())
}

/// Indices sorted by descending score; equal scores stay in index order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Probability that a random outlier outscores a random inlier, counting
/// ties as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("roc_auc needs both classes"));
    }
    // Mann-Whitney U via tie-averaged ascending ranks.
    let mut order = descending(scores);
    order.reverse();
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += avg * group_pos as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * q))
}

/// Sum over distinct score thresholds of recall increment times precision.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(Error::UndefinedMetric("average_precision needs a positive"));
    }
    let order = descending(scores);
    let mut ap = 0.0;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            tp += usize::from(labels[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Fraction of the `k` top-scored nodes that are outliers. Ties at the
/// cut-off go to the lower node index.
pub fn recall_at_k(scores: &[f64], labels: &[bool], k: usize) -> Result<f64> {
    check_lengths(scores, labels)?;
    if k == 0 || k > scores.len() {
        return Err(Error::param(format!(
            "recall_at_k needs 1 <= k <= {}, got {k}",
            scores.len()
        )));
    }
    let hits = descending(scores)[..k].iter().filter(|&&i| labels[i]).count();
    Ok(hits as f64 / k as f64)
}

/// Ascending ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "spearman",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let (mut va, mut vb) = (0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedMetric("spearman needs non-constant inputs"));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Metrics of one score vector against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub auc: f64,
    pub ap: f64,
    pub recall_at_k: f64,
    /// Contextual (or `both`) nodes against every other node.
    pub auc_contextual: Option<f64>,
    /// Structural (or `both`) nodes against every other node.
    pub auc_structural: Option<f64>,
}

/// Evaluates with `k` set to the number of ground-truth outliers.
pub fn evaluate(scores: &ScoreVector, labels: &OutlierLabels) -> Result<Evaluation> {
    let s = scores.as_slice();
    let y = labels.binary();
    let k = labels.num_outliers();
    let per_type = |mask: Vec<bool>| roc_auc(s, &mask).ok();
    Ok(Evaluation {
        auc: roc_auc(s, &y)?,
        ap: average_precision(s, &y)?,
        recall_at_k: recall_at_k(s, &y, k)?,
        auc_contextual: per_type(labels.contextual_mask()),
        auc_structural: per_type(labels.structural_mask()),
    })
}
