//! Top-k metrics over binary relevance, aggregate performance and the
//! macro-level diagnostics used when comparing strategies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relevance::RelevanceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Acc,
    Map,
    Ndcg,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Acc, MetricKind::Map, MetricKind::Ndcg];

    /// `true` for metrics that depend on positions inside the top-k list.
    pub fn is_rank_based(self) -> bool {
        !matches!(self, MetricKind::Acc)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Acc => "ACC",
            MetricKind::Map => "MAP",
            MetricKind::Ndcg => "NDCG",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "acc" | "accuracy" => Ok(MetricKind::Acc),
            "map" | "ap" => Ok(MetricKind::Map),
            "ndcg" => Ok(MetricKind::Ndcg),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// A metric truncated at rank `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub k: usize,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(Self { kind, k })
    }

    /// Value for one user given the relevance flags of their ranked list.
    pub fn evaluate(&self, relevance: &[bool], relevant_count: usize) -> Result<f64> {
        match self.kind {
            MetricKind::Acc => Ok(acc_at_k(relevance, self.k)),
            MetricKind::Map => ap_at_k(relevance, self.k, relevant_count),
            MetricKind::Ndcg => ndcg_at_k(relevance, self.k, relevant_count),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.k)
    }
}

fn require_relevant(relevant_count: usize) -> Result<()> {
    if relevant_count == 0 {
        return Err(Error::Evaluation(
            "user has no relevant items; drop such users before evaluating".into(),
        ));
    }
    Ok(())
}

/// Fraction of the k slots holding a relevant item. Missing slots count as
/// irrelevant.
pub fn acc_at_k(relevance: &[bool], k: usize) -> f64 {
    let hits = relevance.iter().take(k).filter(|&&r| r).count();
    hits as f64 / k as f64
}

/// Average precision at k, normalized by `min(k, relevant_count)`.
pub fn ap_at_k(relevance: &[bool], k: usize, relevant_count: usize) -> Result<f64> {
    require_relevant(relevant_count)?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (p, &rel) in relevance.iter().take(k).enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (p + 1) as f64;
        }
    }
    Ok(sum / k.min(relevant_count) as f64)
}

/// Discount applied to rank position `p` (1-based).
#[inline]
pub fn discount(p: usize) -> f64 {
    1.0 / ((1 + p) as f64).ln()
}

/// DCG of the ideal list: every relevant item ranked first.
pub fn ideal_dcg(k: usize, relevant_count: usize) -> f64 {
    (1..=k.min(relevant_count)).map(discount).sum()
}

/// Normalized DCG at k over binary relevance (natural log discount).
pub fn ndcg_at_k(relevance: &[bool], k: usize, relevant_count: usize) -> Result<f64> {
    require_relevant(relevant_count)?;
    let dcg: f64 = relevance
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &rel)| rel)
        .map(|(p, _)| discount(p + 1))
        .sum();
    Ok(dcg / ideal_dcg(k, relevant_count))
}

/// Arithmetic mean of per-user values.
pub fn mean_perf(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Evaluation("no users to average over".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Relative improvement in percent; `None` when the baseline is not positive.
pub fn lift(perf: f64, baseline: f64) -> Option<f64> {
    if baseline > 0.0 {
        Some((perf / baseline - 1.0) * 100.0)
    } else {
        None
    }
}

/// Zero counts are replaced by this pseudo-count before normalizing.
pub const KL_SMOOTHING: f64 = 0.01;

/// KL divergence `D(p || q)` between two item-frequency vectors.
///
/// Works over the union of items with a nonzero count on either side; zero
/// counts inside that union become [`KL_SMOOTHING`] before both sides are
/// normalized. Natural log.
pub fn kl_divergence_smoothed(p_counts: &[f64], q_counts: &[f64]) -> Result<f64> {
    if p_counts.len() != q_counts.len() {
        return Err(Error::Evaluation(format!(
            "count vectors differ in length ({} vs {})",
            p_counts.len(),
            q_counts.len()
        )));
    }
    let support: Vec<usize> = (0..p_counts.len())
        .filter(|&i| p_counts[i] > 0.0 || q_counts[i] > 0.0)
        .collect();
    if support.is_empty() {
        return Err(Error::Evaluation("both frequency vectors are empty".into()));
    }
    let smooth = |c: f64| if c > 0.0 { c } else { KL_SMOOTHING };
    let p_total: f64 = support.iter().map(|&i| smooth(p_counts[i])).sum();
    let q_total: f64 = support.iter().map(|&i| smooth(q_counts[i])).sum();
    Ok(support
        .iter()
        .map(|&i| {
            let p = smooth(p_counts[i]) / p_total;
            let q = smooth(q_counts[i]) / q_total;
            p * (p / q).ln()
        })
        .sum())
}

/// One row of the top-popular coverage table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub level: usize,
    /// Level actually used after clamping to the universe size.
    pub effective_level: usize,
    pub overlap: usize,
}

fn popular_order(counts: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0.0).collect();
    order.sort_by(|&a, &b| counts[b].total_cmp(&counts[a]).then(a.cmp(&b)));
    order
}

/// How many of the `L` most frequent test items are also among the `L` most
/// frequently recommended items, for every requested level `L`.
///
/// Only items with a positive count are ranked on each side.
pub fn top_popular_overlap(
    test_counts: &[f64],
    prediction_counts: &[f64],
    levels: &[usize],
) -> Vec<OverlapRow> {
    let universe = test_counts.len().min(prediction_counts.len());
    let test_order = popular_order(&test_counts[..universe]);
    let pred_order = popular_order(&prediction_counts[..universe]);
    let mut in_pred = vec![false; universe];
    levels
        .iter()
        .map(|&level| {
            let effective_level = level.min(universe);
            in_pred.iter_mut().for_each(|f| *f = false);
            for &i in pred_order.iter().take(effective_level) {
                in_pred[i] = true;
            }
            let overlap = test_order
                .iter()
                .take(effective_level)
                .filter(|&&i| in_pred[i])
                .count();
            OverlapRow {
                level,
                effective_level,
                overlap,
            }
        })
        .collect()
}

/// Mean ACC/MAP/NDCG at one cutoff over a set of users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub n_users: usize,
    pub acc: f64,
    pub map: f64,
    pub ndcg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_user: Option<Vec<[f64; 3]>>,
}

impl EvalReport {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Acc => self.acc,
            MetricKind::Map => self.map,
            MetricKind::Ndcg => self.ndcg,
        }
    }
}

/// Evaluates recommendation lists against relevance.
///
/// `recommended(pos)` returns the ranked items for the relevance user at
/// position `pos`; lists shorter than k are padded with irrelevant slots.
pub fn evaluate<'a, F>(
    relevance: &RelevanceSet,
    k: usize,
    keep_per_user: bool,
    mut recommended: F,
) -> Result<EvalReport>
where
    F: FnMut(usize) -> &'a [u32],
{
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let n = relevance.n_users();
    if n == 0 {
        return Err(Error::Evaluation("relevance set has no users".into()));
    }
    let mut sums = [0.0f64; 3];
    let mut per_user = keep_per_user.then(|| Vec::with_capacity(n));
    let mut flags = Vec::with_capacity(k);
    for pos in 0..n {
        flags.clear();
        flags.extend(
            recommended(pos)
                .iter()
                .take(k)
                .map(|&i| relevance.is_relevant(pos, i)),
        );
        let count = relevance.relevant_count(pos);
        let values = [
            acc_at_k(&flags, k),
            ap_at_k(&flags, k, count)?,
            ndcg_at_k(&flags, k, count)?,
        ];
        for (s, v) in sums.iter_mut().zip(values) {
            *s += v;
        }
        if let Some(p) = per_user.as_mut() {
            p.push(values);
        }
    }
    Ok(EvalReport {
        k,
        n_users: n,
        acc: sums[0] / n as f64,
        map: sums[1] / n as f64,
        ndcg: sums[2] / n as f64,
        per_user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: bool = true;
    const F: bool = false;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn acc_examples() {
        assert_eq!(acc_at_k(&[T, T, T], 3), 1.0);
        assert_eq!(acc_at_k(&[F, F, F, F], 4), 0.0);
        assert!(close(acc_at_k(&[T, F, T], 3), 2.0 / 3.0));
        // short list is padded
        assert!(close(acc_at_k(&[T], 4), 0.25));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(ap_at_k(&[T, T], 2, 2).unwrap(), 1.0);
        assert_eq!(ap_at_k(&[F, F, F], 3, 5).unwrap(), 0.0);
        assert!(close(ap_at_k(&[T, F, T], 3, 2).unwrap(), 5.0 / 6.0));
        assert!(ap_at_k(&[T], 1, 0).is_err());
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[T], 1, 1).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&[F, F], 2, 1).unwrap(), 0.0);
        let v = ndcg_at_k(&[F, T], 2, 1).unwrap();
        assert!(close(v, 2f64.ln() / 3f64.ln()));
        assert!((v - 0.6309).abs() < 1e-4);
        assert!(ndcg_at_k(&[T], 1, 0).is_err());
    }

    #[test]
    fn rank_metrics_see_order_but_acc_does_not() {
        let a = [T, F, F];
        let b = [F, F, T];
        assert_eq!(acc_at_k(&a, 3), acc_at_k(&b, 3));
        assert!(ap_at_k(&a, 3, 1).unwrap() > ap_at_k(&b, 3, 1).unwrap());
        assert!(ndcg_at_k(&a, 3, 1).unwrap() > ndcg_at_k(&b, 3, 1).unwrap());
    }

    #[test]
    fn mean_and_lift() {
        assert_eq!(mean_perf(&[1.0]).unwrap(), 1.0);
        assert_eq!(mean_perf(&[0.0, 1.0]).unwrap(), 0.5);
        assert!(close(mean_perf(&[0.2, 0.4, 0.9]).unwrap(), 0.5));
        assert!(mean_perf(&[]).is_err());
        assert_eq!(lift(0.3, 0.3), Some(0.0));
        assert!(close(lift(1.05, 1.0).unwrap(), 5.0));
        assert!(close(lift(0.9, 1.0).unwrap(), -10.0));
        assert_eq!(lift(0.5, 0.0), None);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence_smoothed(&[3.0, 1.0], &[3.0, 1.0]).unwrap(), 0.0);
        assert_eq!(kl_divergence_smoothed(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        // p = (1, 0.01)/1.01, q = (0.01, 1)/1.01
        let p: [f64; 2] = [1.0 / 1.01, 0.01 / 1.01];
        let q: [f64; 2] = [0.01 / 1.01, 1.0 / 1.01];
        let oracle: f64 = (0..2).map(|i| p[i] * (p[i] / q[i]).ln()).sum();
        let got = kl_divergence_smoothed(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(close(got, oracle));
        assert!(kl_divergence_smoothed(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn overlap_examples() {
        let counts: Vec<f64> = (0..20).map(|i| (20 - i) as f64).collect();
        let rows = top_popular_overlap(&counts, &counts, &[10]);
        assert_eq!(rows[0].overlap, 10);
        let a: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
        let b: Vec<f64> = (0..10).map(|i| if i >= 5 { 1.0 } else { 0.0 }).collect();
        assert_eq!(top_popular_overlap(&a, &b, &[5])[0].overlap, 0);
        let clamped = top_popular_overlap(&a, &b, &[50]);
        assert_eq!(clamped[0].effective_level, 10);
    }

    proptest! {
        #[test]
        fn metrics_in_unit_interval(
            rel in proptest::collection::vec(any::<bool>(), 0..15),
            k in 1usize..15,
            extra in 0usize..10,
        ) {
            let count = (rel.iter().take(k).filter(|&&r| r).count() + extra).max(1);
            for v in [acc_at_k(&rel, k), ap_at_k(&rel, k, count).unwrap(), ndcg_at_k(&rel, k, count).unwrap()] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn relevant_first_is_perfect(k in 1usize..12, count in 1usize..12) {
            let top = k.min(count);
            let rel: Vec<bool> = (0..k).map(|p| p < top).collect();
            prop_assert!((ap_at_k(&rel, k, count).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((ndcg_at_k(&rel, k, count).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn acc_permutation_invariant(mut rel in proptest::collection::vec(any::<bool>(), 1..12), seed in any::<u64>()) {
            let k = rel.len();
            let before = acc_at_k(&rel, k);
            let n = rel.len();
            rel.rotate_left((seed as usize) % n);
            prop_assert_eq!(acc_at_k(&rel, k), before);
        }
    }
}
