//! Strategy comparison on the test window: lift, KL divergence and
//! top-popular overlap for every strategy.

use log::info;
use serde::Serialize;

use crate::bias::BiasVector;
use crate::error::{Error, Result};
use crate::metrics::{self, kl_divergence_smoothed, top_popular_overlap, EvalReport, MetricKind, OverlapRow};
use crate::relevance::RelevanceSet;
use crate::scores::ScoreStore;
use crate::strategies::{relevance_from, run_strategy, Experiment, StrategyKind, StrategySpec};
use crate::topk::select_topk;

pub const DEFAULT_OVERLAP_LEVELS: [usize; 7] = [10, 20, 50, 100, 200, 500, 1000];

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub strategies: Vec<StrategyKind>,
    pub spec: StrategySpec,
    pub overlap_levels: Vec<usize>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            strategies: StrategyKind::ALL.to_vec(),
            spec: StrategySpec::default(),
            overlap_levels: DEFAULT_OVERLAP_LEVELS.to_vec(),
        }
    }
}

/// Top-k lists of every relevance user plus how often each item was shown.
#[derive(Debug, Clone)]
pub struct Recommendations {
    pub lists: Vec<Vec<u32>>,
    pub item_counts: Vec<f64>,
}

pub fn recommend(store: &ScoreStore, bias: &BiasVector, relevance: &RelevanceSet, k: usize) -> Recommendations {
    let mut item_counts = vec![0.0; relevance.n_items()];
    let lists: Vec<Vec<u32>> = relevance
        .users()
        .iter()
        .map(|&u| {
            let list = select_topk(store.user(u), bias, k);
            for &i in &list {
                item_counts[i as usize] += 1.0;
            }
            list
        })
        .collect();
    Recommendations { lists, item_counts }
}

pub fn evaluate_recommendations(
    recs: &Recommendations,
    relevance: &RelevanceSet,
    k: usize,
) -> Result<EvalReport> {
    metrics::evaluate(relevance, k, false, |pos| &recs.lists[pos])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lift {
    pub acc: Option<f64>,
    pub map: Option<f64>,
    pub ndcg: Option<f64>,
}

impl Lift {
    pub fn get(&self, kind: MetricKind) -> Option<f64> {
        match kind {
            MetricKind::Acc => self.acc,
            MetricKind::Map => self.map,
            MetricKind::Ndcg => self.ndcg,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRow {
    pub strategy: StrategyKind,
    pub report: EvalReport,
    pub lift: Lift,
    /// Smoothed KL divergence from test purchases to recommendations.
    pub kl: f64,
    pub overlap: Vec<OverlapRow>,
    pub nonzero_bias: usize,
    pub excluded_items: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub k: usize,
    pub n_test_users: usize,
    pub n_test_transactions: usize,
    pub baseline: StrategyKind,
    pub rows: Vec<StrategyRow>,
}

impl CompareReport {
    pub fn row(&self, kind: StrategyKind) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == kind)
    }
}

/// Runs every requested strategy (LONG always included as the baseline) and
/// evaluates it on the test window.
pub fn compare(exp: &Experiment<'_>, config: &CompareConfig) -> Result<CompareReport> {
    let k = config.spec.k();
    let relevance = relevance_from(exp.split.test, exp.n_items);
    if relevance.is_empty() {
        return Err(Error::Evaluation("test window has no purchases".into()));
    }
    let users = relevance.users().to_vec();
    let test_counts = crate::models::fit_popularity(exp.split.test, exp.n_items).counts;

    let mut kinds = vec![StrategyKind::Long];
    for &s in &config.strategies {
        if !kinds.contains(&s) {
            kinds.push(s);
        }
    }
    let mut rows: Vec<StrategyRow> = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let out = run_strategy(kind, &config.spec, exp, &users)?;
        let recs = recommend(&out.scores, &out.bias, &relevance, k);
        let report = evaluate_recommendations(&recs, &relevance, k)?;
        let kl = kl_divergence_smoothed(&test_counts, &recs.item_counts)?;
        let overlap = top_popular_overlap(&test_counts, &recs.item_counts, &config.overlap_levels);
        let lift = match rows.first() {
            Some(base) => Lift {
                acc: metrics::lift(report.acc, base.report.acc),
                map: metrics::lift(report.map, base.report.map),
                ndcg: metrics::lift(report.ndcg, base.report.ndcg),
            },
            None => Lift {
                acc: metrics::lift(report.acc, report.acc),
                map: metrics::lift(report.map, report.map),
                ndcg: metrics::lift(report.ndcg, report.ndcg),
            },
        };
        info!(
            "{kind}: ACC@{k} {:.5} MAP@{k} {:.5} NDCG@{k} {:.5} KL {:.4}",
            report.acc, report.map, report.ndcg, kl
        );
        rows.push(StrategyRow {
            strategy: kind,
            lift,
            kl,
            overlap,
            nonzero_bias: out.bias.non_zero(),
            excluded_items: out.bias.iter().filter(|&(i, _)| out.bias.is_excluded(i)).count(),
            report,
        });
    }
    Ok(CompareReport {
        k,
        n_test_users: relevance.n_users(),
        n_test_transactions: exp.split.test.len(),
        baseline: StrategyKind::Long,
        rows,
    })
}
