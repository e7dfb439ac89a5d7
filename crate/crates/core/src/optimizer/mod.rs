//! Coordinate ascent over per-item biases.
//!
//! Each step optimizes one item's bias exactly while every other bias is
//! held fixed: the item's utility is piecewise constant in its bias, so it is
//! enough to collect the boundary crossings per user ([`pairs`]) and sweep
//! them ([`sweep`]). Accepted moves update the maintained top-k lists in place.

mod candidates;
mod pairs;
mod sweep;

pub use candidates::{build_candidate_set, predicted_frequencies, prune_zero_relevance};
pub use pairs::{
    candidate_pairs, candidate_pairs_acc, candidate_pairs_rank, CandidatePair, ItemView, PairSet,
};
pub use sweep::{sweep_optimal_bias, BiasMove, BiasSearchResult};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::bias::{BiasVector, NEG_INF};
use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricSpec};
use crate::relevance::RelevanceSet;
use crate::scores::{ScoreColumns, ScoreStore};
use crate::topk::TopKState;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub metric: MetricSpec,
    pub max_cycles: usize,
    /// Stop once a cycle changes fewer than this fraction of candidates.
    /// 0 disables the rule.
    pub min_items_changed_fraction: f64,
    pub candidate_top_predicted: usize,
    pub candidate_top_recent: usize,
    pub tie_epsilon: f64,
    /// Smallest summed-utility improvement that counts as a gain.
    pub min_gain: f64,
    /// Exclude items with no recent relevance before the first cycle.
    pub prune: bool,
    pub warm_start: Option<BiasVector>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            metric: MetricSpec {
                kind: MetricKind::Acc,
                k: 10,
            },
            max_cycles: 2,
            min_items_changed_fraction: 0.0,
            candidate_top_predicted: 1000,
            candidate_top_recent: 1000,
            tie_epsilon: 1e-9,
            min_gain: 1e-12,
            prune: true,
            warm_start: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_metric(kind: MetricKind, k: usize) -> Self {
        Self {
            metric: MetricSpec { kind, k },
            ..Self::default()
        }
    }

    pub fn validate(&self, n_items: usize) -> Result<()> {
        if self.metric.k == 0 {
            return Err(Error::Config("metric.k must be at least 1".into()));
        }
        if !(self.tie_epsilon > 0.0 && self.tie_epsilon.is_finite()) {
            return Err(Error::Config("tie_epsilon must be positive".into()));
        }
        if self.min_gain.is_nan() || self.min_gain < 0.0 {
            return Err(Error::Config("min_gain must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.min_items_changed_fraction) {
            return Err(Error::Config(
                "min_items_changed_fraction must lie in [0, 1]".into(),
            ));
        }
        if let Some(warm) = &self.warm_start {
            if warm.len() != n_items {
                return Err(Error::Config(format!(
                    "warm_start has {} items, expected {n_items}",
                    warm.len()
                )));
            }
        }
        Ok(())
    }
}

/// One accepted bias change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasUpdate {
    pub item: u32,
    pub old_bias: f64,
    pub new_bias: f64,
    /// Improvement of the summed per-user metric.
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub cycle: usize,
    pub items_changed: usize,
    pub gain: f64,
    /// Mean metric over relevance users after the cycle.
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// A full cycle produced no gain.
    Converged,
    CycleCap,
    EarlyStop,
    EmptyCandidates,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub bias: BiasVector,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub cycles: Vec<CycleStats>,
    pub accepted_updates: usize,
    pub candidates: usize,
    pub pruned: usize,
    pub stop: StopReason,
}

/// The bias learning problem together with its mutable search state.
pub struct BiasLearner<'a> {
    scores: &'a ScoreStore,
    relevance: &'a RelevanceSet,
    config: OptimizerConfig,
    columns: ScoreColumns,
    relevant_users: Vec<Vec<u32>>,
    bias: BiasVector,
    state: TopKState,
    candidates: Vec<u32>,
    pruned: Vec<u32>,
    utility: f64,
    accepted: usize,
}

impl<'a> BiasLearner<'a> {
    pub fn new(
        scores: &'a ScoreStore,
        relevance: &'a RelevanceSet,
        config: OptimizerConfig,
    ) -> Result<Self> {
        let m = relevance.n_items();
        if scores.n_items() != m {
            return Err(Error::Config(format!(
                "score store covers {} items but relevance covers {m}",
                scores.n_items()
            )));
        }
        config.validate(m)?;
        let k = config.metric.k;
        let mut bias = config
            .warm_start
            .clone()
            .unwrap_or_else(|| BiasVector::zeros(m));
        let pruned = if config.prune {
            prune_zero_relevance(relevance)
        } else {
            Vec::new()
        };
        for &i in &pruned {
            bias.exclude(i);
        }
        let candidates = build_candidate_set(
            scores,
            relevance,
            k,
            config.candidate_top_predicted,
            config.candidate_top_recent,
            &pruned,
        );
        let users = relevance.users().to_vec();
        let columns = scores.columns(&users);
        let state = TopKState::build(scores, &bias, k, users);
        let mut learner = Self {
            scores,
            relevance,
            columns,
            relevant_users: relevance.columns(),
            bias,
            state,
            candidates,
            pruned,
            utility: 0.0,
            accepted: 0,
            config,
        };
        learner.utility = learner.summed_metric();
        Ok(learner)
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn bias(&self) -> &BiasVector {
        &self.bias
    }

    pub fn state(&self) -> &TopKState {
        &self.state
    }

    pub fn candidates(&self) -> &[u32] {
        &self.candidates
    }

    pub fn pruned(&self) -> &[u32] {
        &self.pruned
    }

    pub fn accepted_updates(&self) -> usize {
        self.accepted
    }

    /// Mean metric over relevance users, tracked through accepted gains.
    pub fn objective(&self) -> f64 {
        if self.relevance.n_users() == 0 {
            0.0
        } else {
            self.utility / self.relevance.n_users() as f64
        }
    }

    /// Summed per-user metric recomputed from the maintained lists.
    fn summed_metric(&self) -> f64 {
        let metric = self.config.metric;
        let mut flags = Vec::with_capacity(metric.k);
        let mut total = 0.0;
        for pos in 0..self.state.n_users() {
            flags.clear();
            flags.extend(
                self.state
                    .topk(pos)
                    .iter()
                    .map(|e| self.relevance.is_relevant(pos, e.item)),
            );
            total += metric
                .evaluate(&flags, self.relevance.relevant_count(pos))
                .expect("relevance users have at least one relevant item");
        }
        total
    }

    pub fn view(&self) -> ItemView<'_> {
        ItemView {
            columns: &self.columns,
            relevance: self.relevance,
            relevant_users: &self.relevant_users,
            bias: &self.bias,
            topk: &self.state,
        }
    }

    /// Candidate pairs of `item` under the configured metric.
    pub fn pairs(&self, item: u32) -> PairSet {
        candidate_pairs(&self.view(), item, self.config.metric)
    }

    /// Best bias for `item` with every other bias fixed, as an absolute value.
    pub fn search_item(&self, item: u32) -> (f64, BiasSearchResult) {
        let mut set = self.pairs(item);
        let result = sweep_optimal_bias(
            set.current_utility,
            &mut set.pairs,
            self.config.tie_epsilon,
            self.config.min_gain,
        );
        let new_bias = match result.adjustment {
            BiasMove::Keep => self.bias.get(item),
            BiasMove::Shift(a) => set.reference_bias + a,
            BiasMove::Exclude => NEG_INF,
        };
        (new_bias, result)
    }

    /// Sets `item`'s bias directly, keeping the top-k lists consistent.
    pub fn set_bias(&mut self, item: u32, new_bias: f64) {
        let old = self.bias.get(item);
        self.bias.set(item, new_bias);
        self.state
            .apply_bias_update(self.scores, &self.columns, &self.bias, item, old);
        self.utility = self.summed_metric();
    }

    /// Runs the single-item search and applies the result if it gains.
    pub fn optimize_item(&mut self, item: u32) -> Option<BiasUpdate> {
        let (new_bias, result) = self.search_item(item);
        if result.adjustment == BiasMove::Keep {
            return None;
        }
        let old_bias = self.bias.get(item);
        self.bias.set(item, new_bias);
        self.state
            .apply_bias_update(self.scores, &self.columns, &self.bias, item, old_bias);
        self.utility += result.utility_gain;
        self.accepted += 1;
        Some(BiasUpdate {
            item,
            old_bias,
            new_bias: self.bias.get(item),
            gain: result.utility_gain,
        })
    }

    /// One pass over the candidate set; `observe` sees every accepted update.
    pub fn run_cycle_with<F>(&mut self, cycle: usize, observe: &mut F) -> CycleStats
    where
        F: FnMut(&BiasUpdate, &BiasLearner<'a>),
    {
        let mut items_changed = 0;
        let mut gain = 0.0;
        for idx in 0..self.candidates.len() {
            let item = self.candidates[idx];
            if let Some(update) = self.optimize_item(item) {
                items_changed += 1;
                gain += update.gain;
                observe(&update, self);
            }
        }
        let stats = CycleStats {
            cycle,
            items_changed,
            gain,
            objective: self.objective(),
        };
        debug!(
            "cycle {cycle}: {items_changed} items changed, objective {:.6}",
            stats.objective
        );
        stats
    }

    /// Cycles until no gain, the cycle cap, or the early-stop fraction.
    pub fn run_with<F>(mut self, mut observe: F) -> LearnOutcome
    where
        F: FnMut(&BiasUpdate, &BiasLearner<'a>),
    {
        let initial_objective = self.objective();
        let mut cycles = Vec::new();
        if self.candidates.is_empty() {
            warn!("empty candidate set; returning initial biases unchanged");
            let bias = self
                .config
                .warm_start
                .clone()
                .unwrap_or_else(|| BiasVector::zeros(self.relevance.n_items()));
            return LearnOutcome {
                bias,
                initial_objective,
                final_objective: initial_objective,
                cycles,
                accepted_updates: 0,
                candidates: 0,
                pruned: self.pruned.len(),
                stop: StopReason::EmptyCandidates,
            };
        }
        let stop = loop {
            if cycles.len() >= self.config.max_cycles {
                // only reached with max_cycles = 0: pruning alone
                break StopReason::CycleCap;
            }
            let cycle = cycles.len() + 1;
            let stats = self.run_cycle_with(cycle, &mut observe);
            cycles.push(stats);
            if stats.items_changed == 0 {
                break StopReason::Converged;
            }
            if cycle >= self.config.max_cycles {
                break StopReason::CycleCap;
            }
            let fraction = stats.items_changed as f64 / self.candidates.len() as f64;
            if fraction < self.config.min_items_changed_fraction {
                break StopReason::EarlyStop;
            }
        };
        LearnOutcome {
            initial_objective,
            final_objective: self.objective(),
            accepted_updates: self.accepted,
            candidates: self.candidates.len(),
            pruned: self.pruned.len(),
            cycles,
            stop,
            bias: self.bias,
        }
    }

    pub fn run(self) -> LearnOutcome {
        self.run_with(|_, _| {})
    }
}

/// Learns per-item biases maximizing the configured metric on `relevance`.
pub fn learn_biases(
    scores: &ScoreStore,
    relevance: &RelevanceSet,
    config: OptimizerConfig,
) -> Result<LearnOutcome> {
    Ok(BiasLearner::new(scores, relevance, config)?.run())
}

/// Mean of `metric` over the relevance users when recommending
/// `select_topk(scores, bias, k)`, computed from scratch.
pub fn objective(
    scores: &ScoreStore,
    bias: &BiasVector,
    relevance: &RelevanceSet,
    metric: MetricSpec,
) -> f64 {
    if relevance.n_users() == 0 {
        return 0.0;
    }
    let mut flags = Vec::with_capacity(metric.k);
    let mut total = 0.0;
    for (pos, &user) in relevance.users().iter().enumerate() {
        let list = crate::topk::select_topk(scores.user(user), bias, metric.k);
        flags.clear();
        flags.extend(list.iter().map(|&i| relevance.is_relevant(pos, i)));
        total += metric
            .evaluate(&flags, relevance.relevant_count(pos))
            .expect("relevance users have at least one relevant item");
    }
    total / relevance.n_users() as f64
}
