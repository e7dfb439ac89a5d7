//! Candidate (threshold, utility change) pairs for a single item.
//!
//! For every user the item is compared against the ranking of all *other*
//! items (read from the maintained top-(k+1) list). Thresholds are add-on
//! biases relative to the item's reference bias: the item's current bias, or
//! 0 when it is currently excluded.

use crate::bias::BiasVector;
use crate::metrics::{discount, ideal_dcg, MetricKind, MetricSpec};
use crate::relevance::RelevanceSet;
use crate::scores::ScoreColumns;
use crate::topk::{Entry, TopKState};

/// A bias level at which the item crosses a ranking boundary for some user,
/// with the metric change that crossing causes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub threshold: f64,
    pub delta: f64,
}

impl CandidatePair {
    /// The "never recommended" reference point.
    pub const SENTINEL: CandidatePair = CandidatePair {
        threshold: f64::NEG_INFINITY,
        delta: 0.0,
    };

    pub fn is_sentinel(&self) -> bool {
        self.threshold == f64::NEG_INFINITY && self.delta == 0.0
    }
}

/// Output of pair generation for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    /// Summed per-user metric contribution of the item at its current bias,
    /// relative to the item being absent everywhere.
    pub current_utility: f64,
    /// Bias the thresholds are relative to.
    pub reference_bias: f64,
    pub pairs: Vec<CandidatePair>,
}

/// Read-only inputs for pair generation. Users are the relevance positions;
/// `topk` and `columns` must be built over the same user list.
#[derive(Clone, Copy)]
pub struct ItemView<'a> {
    pub columns: &'a ScoreColumns,
    pub relevance: &'a RelevanceSet,
    pub relevant_users: &'a [Vec<u32>],
    pub bias: &'a BiasVector,
    pub topk: &'a TopKState,
}

/// How the item enters one user's ranking.
#[derive(Clone, Copy)]
struct Placement {
    stored: Option<f64>,
    reference: f64,
}

impl Placement {
    /// Add-on bias above which the item outranks a competitor at `score`.
    #[inline]
    fn threshold(&self, score: f64) -> f64 {
        match self.stored {
            Some(f) => score - (f + self.reference),
            // unstored items only take part once their bias is positive
            None => score.max(0.0) - self.reference,
        }
    }

    /// Add-on bias above which the item enters a list with a free slot.
    #[inline]
    fn entry_threshold(&self) -> f64 {
        match self.stored {
            Some(_) => f64::NEG_INFINITY,
            None => -self.reference,
        }
    }
}

fn reference_bias(bias: f64) -> f64 {
    if crate::bias::is_excluded(bias) {
        0.0
    } else {
        bias
    }
}

/// Walks all users in position order with the item's stored score and
/// relevance for each.
fn for_each_user(view: &ItemView<'_>, item: u32, mut f: impl FnMut(usize, Option<f64>, bool)) {
    let stored = view.columns.item(item);
    let relevant = &view.relevant_users[item as usize];
    let (mut si, mut ri) = (0, 0);
    for pos in 0..view.topk.n_users() {
        let score = match stored.get(si) {
            Some(&(p, s)) if p as usize == pos => {
                si += 1;
                Some(s)
            }
            _ => None,
        };
        let rel = match relevant.get(ri) {
            Some(&p) if p as usize == pos => {
                ri += 1;
                true
            }
            _ => false,
        };
        f(pos, score, rel);
    }
}

/// Pairs under ACC@k: one boundary per user, the k-th slot.
pub fn candidate_pairs_acc(view: &ItemView<'_>, item: u32) -> PairSet {
    let k = view.topk.k();
    let reference = reference_bias(view.bias.get(item));
    let mut pairs = Vec::new();
    let mut current = 0.0;
    for_each_user(view, item, |pos, stored, y| {
        let ext = view.topk.extended(pos);
        let at = ext.iter().position(|e| e.item == item);
        let inside = at.is_some_and(|q| q < k);
        let kth = if inside { ext.get(k) } else { ext.get(k - 1) };
        let z = kth.is_some_and(|e| view.relevance.is_relevant(pos, e.item));
        if y == z {
            return;
        }
        let delta = (y as i32 - z as i32) as f64 / k as f64;
        let place = Placement { stored, reference };
        let threshold = match kth {
            Some(e) => place.threshold(e.score),
            None => place.entry_threshold(),
        };
        pairs.push(CandidatePair { threshold, delta });
        if inside {
            current += delta;
        }
    });
    pairs.push(CandidatePair::SENTINEL);
    PairSet {
        current_utility: current,
        reference_bias: reference,
        pairs,
    }
}

/// Pairs under MAP@k or NDCG@k: one boundary per position whose incumbent
/// differs in relevance from the item. Deltas along one user's positions
/// stack as the item climbs.
pub fn candidate_pairs_rank(view: &ItemView<'_>, item: u32, kind: MetricKind) -> PairSet {
    assert!(kind.is_rank_based(), "rank pairs requested for {kind}");
    let k = view.topk.k();
    let reference = reference_bias(view.bias.get(item));
    let mut pairs = Vec::new();
    let mut current = 0.0;
    let mut others: Vec<Entry> = Vec::with_capacity(k + 1);
    let mut flags: Vec<bool> = Vec::with_capacity(k + 1);
    for_each_user(view, item, |pos, stored, y| {
        let ext = view.topk.extended(pos);
        let at = ext.iter().position(|e| e.item == item);
        others.clear();
        others.extend(ext.iter().filter(|e| e.item != item).take(k).copied());
        flags.clear();
        flags.extend(others.iter().map(|e| view.relevance.is_relevant(pos, e.item)));
        let count = view.relevance.relevant_count(pos);
        let norm = match kind {
            MetricKind::Map => k.min(count) as f64,
            _ => ideal_dcg(k, count),
        };
        let place = Placement { stored, reference };
        // deepest position the item can occupy
        let entry = (others.len() + 1).min(k);
        // item currently sits at 1-based position `at + 1` if inside top-k
        let current_pos = at.filter(|&q| q < k).map(|q| q + 1);
        let mut above = 0usize;
        let mut prefix = Vec::with_capacity(entry);
        for z in flags.iter().take(entry) {
            prefix.push(above);
            above += *z as usize;
        }
        if prefix.len() < entry {
            prefix.push(above);
        }
        for p in (1..=entry).rev() {
            let z = flags.get(p - 1).copied().unwrap_or(false);
            if y == z {
                continue;
            }
            let sign = (y as i32 - z as i32) as f64;
            let step = match kind {
                MetricKind::Map => {
                    let next = if p < entry { 1.0 / (p + 1) as f64 } else { 0.0 };
                    (1 + prefix[p - 1]) as f64 * (1.0 / p as f64 - next)
                }
                _ => {
                    let next = if p < entry { discount(p + 1) } else { 0.0 };
                    discount(p) - next
                }
            };
            let delta = sign * step / norm;
            let threshold = match others.get(p - 1) {
                Some(e) => place.threshold(e.score),
                None => place.entry_threshold(),
            };
            pairs.push(CandidatePair { threshold, delta });
            if current_pos.is_some_and(|cp| cp <= p) {
                current += delta;
            }
        }
    });
    pairs.push(CandidatePair::SENTINEL);
    PairSet {
        current_utility: current,
        reference_bias: reference,
        pairs,
    }
}

/// Dispatches on the metric kind.
pub fn candidate_pairs(view: &ItemView<'_>, item: u32, metric: MetricSpec) -> PairSet {
    debug_assert_eq!(metric.k, view.topk.k());
    match metric.kind {
        MetricKind::Acc => candidate_pairs_acc(view, item),
        kind => candidate_pairs_rank(view, item, kind),
    }
}
