use graphod::metrics::{average_precision, recall_at_k, roc_auc};
use graphod::rng;
use proptest::prelude::*;
use rand::Rng;

fn oracle_auc(s: &[f64], y: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in (0..s.len()).filter(|&i| y[i]) {
        for j in (0..s.len()).filter(|&j| !y[j]) {
            pairs += 1.0;
            num += if s[i] > s[j] {
                1.0
            } else if s[i] == s[j] {
                0.5
            } else {
                0.0
            };
        }
    }
    num / pairs
}

fn oracle_ap(s: &[f64], y: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = y.iter().filter(|&&b| b).count() as f64;
    let (mut ap, mut prev) = (0.0, 0.0);
    for t in thresholds {
        let sel: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t).collect();
        let tp = sel.iter().filter(|&&i| y[i]).count() as f64;
        let r = tp / pos;
        ap += (r - prev) * tp / sel.len() as f64;
        prev = r;
    }
    ap
}

fn oracle_recall(s: &[f64], y: &[bool], k: usize) -> f64 {
    // Selection by repeated arg-max, lowest index wins ties.
    let mut taken = vec![false; s.len()];
    let mut hits = 0;
    for _ in 0..k {
        let mut best = usize::MAX;
        for i in 0..s.len() {
            if !taken[i] && (best == usize::MAX || s[i] > s[best]) {
                best = i;
            }
        }
        taken[best] = true;
        hits += usize::from(y[best]);
    }
    hits as f64 / k as f64
}

fn instance(r: &mut impl Rng) -> (Vec<f64>, Vec<bool>, usize) {
    let n = r.random_range(2..=200);
    let levels = r.random_range(2..=n.max(3));
    let mut y: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
    y[0] = true;
    y[1] = false;
    let s = (0..n)
        .map(|_| r.random_range(0..levels) as f64 / levels as f64)
        .collect();
    let k = r.random_range(1..=n);
    (s, y, k)
}

#[test]
fn metrics_match_brute_force_oracles() {
    let mut r = rng::seeded(2024);
    for _ in 0..1000 {
        let (s, y, k) = instance(&mut r);
        assert!((roc_auc(&s, &y).unwrap() - oracle_auc(&s, &y)).abs() <= 1e-9);
        assert!((average_precision(&s, &y).unwrap() - oracle_ap(&s, &y)).abs() <= 1e-9);
        assert!((recall_at_k(&s, &y, k).unwrap() - oracle_recall(&s, &y, k)).abs() <= 1e-9);
    }
}

#[test]
fn random_scores_give_prevalence_ap() {
    let mut r = rng::seeded(9);
    let n = 400;
    let y: Vec<bool> = (0..n).map(|i| i % 5 == 0).collect();
    let mut total = 0.0;
    for _ in 0..1000 {
        let s: Vec<f64> = (0..n).map(|_| r.random()).collect();
        total += average_precision(&s, &y).unwrap();
    }
    assert!((total / 1000.0 - 0.2).abs() <= 0.05);
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..20).prop_map(f64::from), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn invariant_under_monotone_transform((s, mut y) in scored()) {
        y[0] = true;
        y[1] = false;
        let t: Vec<f64> = s.iter().map(|v| (0.3 * v).exp() * 2.0 - 7.0).collect();
        let k = y.iter().filter(|&&b| b).count();
        prop_assert_eq!(roc_auc(&s, &y).unwrap(), roc_auc(&t, &y).unwrap());
        prop_assert_eq!(average_precision(&s, &y).unwrap(), average_precision(&t, &y).unwrap());
        prop_assert_eq!(recall_at_k(&s, &y, k).unwrap(), recall_at_k(&t, &y, k).unwrap());
    }

    #[test]
    fn auc_of_negated_scores_is_complement((s, mut y) in scored()) {
        y[0] = true;
        y[1] = false;
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert_eq!(roc_auc(&s, &y).unwrap() + roc_auc(&neg, &y).unwrap(), 1.0);
    }
}
