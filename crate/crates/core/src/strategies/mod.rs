//! The comparison pipelines: long-history baseline, learned biases,
//! truncation to recently sold items, distribution difference and decay.

use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::bias::BiasVector;
use crate::data::{TemporalSplit, Transaction};
use crate::error::{Error, Result};
use crate::models::{
    fit_category, fit_markov, fit_popularity, predict_category, predict_markov, predict_popularity,
    user_sequences, Decay, PredictConfig, Taxonomy,
};
use crate::optimizer::{learn_biases, LearnOutcome, OptimizerConfig};
use crate::relevance::RelevanceSet;
use crate::scores::{build_score_store, ScoreStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StrategyKind {
    Long,
    Bias,
    Truncate,
    Distrdiff,
    Decay,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Long,
        StrategyKind::Bias,
        StrategyKind::Truncate,
        StrategyKind::Distrdiff,
        StrategyKind::Decay,
    ];

    fn needs_recent(self) -> bool {
        matches!(
            self,
            StrategyKind::Bias | StrategyKind::Truncate | StrategyKind::Distrdiff
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::Long => "LONG",
            StrategyKind::Bias => "BIAS",
            StrategyKind::Truncate => "TRUNCATE",
            StrategyKind::Distrdiff => "DISTRDIFF",
            StrategyKind::Decay => "DECAY",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Base scorer used by every strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseModel {
    Markov(PredictConfig),
    Category,
    Popularity,
}

impl Default for BaseModel {
    fn default() -> Self {
        BaseModel::Markov(PredictConfig::default())
    }
}

impl FromStr for BaseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markov" => Ok(BaseModel::default()),
            "category" => Ok(BaseModel::Category),
            "popularity" => Ok(BaseModel::Popularity),
            _ => Err(Error::Config(format!("unknown base model `{s}`"))),
        }
    }
}

/// Everything shared by the strategies of one experiment.
#[derive(Debug, Clone)]
pub struct StrategySpec {
    pub base: BaseModel,
    /// Per-user score capacity N.
    pub capacity: usize,
    /// Decay time constant in days.
    pub beta: f64,
    /// Bias learning settings; `metric.k` is the recommendation cutoff.
    pub optimizer: OptimizerConfig,
}

impl Default for StrategySpec {
    fn default() -> Self {
        let optimizer = OptimizerConfig::default();
        Self {
            base: BaseModel::default(),
            capacity: crate::scores::DEFAULT_CAPACITY_MULTIPLIER * optimizer.metric.k,
            beta: 60.0,
            optimizer,
        }
    }
}

impl StrategySpec {
    pub fn k(&self) -> usize {
        self.optimizer.metric.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity < self.k() {
            return Err(Error::Config(format!(
                "capacity {} is smaller than k={}",
                self.capacity,
                self.k()
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Inputs of one experiment: a split log over a fixed id space.
#[derive(Debug, Clone, Copy)]
pub struct Experiment<'a> {
    pub split: TemporalSplit<'a>,
    pub n_users: usize,
    pub n_items: usize,
    pub taxonomy: Option<&'a Taxonomy>,
}

/// Scores and biases one strategy recommends with.
#[derive(Debug, Clone)]
pub struct StrategyOutput {
    pub kind: StrategyKind,
    pub scores: ScoreStore,
    pub bias: BiasVector,
    pub learn: Option<LearnOutcome>,
}

pub fn relevance_from(records: &[Transaction], n_items: usize) -> RelevanceSet {
    RelevanceSet::from_pairs(n_items, records.iter().map(|r| (r.user, r.item)))
}

/// Fits the base model on `fit`, which ends at `fit_end`, and predicts
/// `users` from their purchases in `history`. Markov users without usable
/// history fall back to popularity. The category model takes within-category
/// popularity from the last recent-window span of `fit`.
#[allow(clippy::too_many_arguments)]
pub fn base_predictions(
    base: &BaseModel,
    exp: &Experiment<'_>,
    fit: &[Transaction],
    fit_end: i64,
    history: &[Transaction],
    users: &[u32],
    n: usize,
    decay: Option<Decay>,
) -> Result<Vec<Vec<(u32, f64)>>> {
    let mut preds = vec![Vec::new(); exp.n_users];
    match base {
        BaseModel::Markov(cfg) => {
            let model = fit_markov(fit, exp.n_items, decay);
            let popularity = fit_popularity(fit, exp.n_items);
            let seqs = user_sequences(history, exp.n_users);
            for &u in users {
                let seq = &seqs[u as usize];
                let mut p = predict_markov(&model, seq, n, cfg);
                if p.is_empty() {
                    p = predict_popularity(&popularity, seq, n);
                }
                preds[u as usize] = p;
            }
        }
        BaseModel::Category => {
            let taxonomy = exp
                .taxonomy
                .ok_or_else(|| Error::Strategy("category model needs a taxonomy".into()))?;
            let span = exp.split.split_time - exp.split.recent_start;
            let cut = fit.partition_point(|r| r.time < fit_end - span);
            let model = fit_category(history, &fit[cut..], taxonomy, exp.n_users);
            for &u in users {
                preds[u as usize] = predict_category(&model, u, n);
            }
        }
        BaseModel::Popularity => {
            let popularity = fit_popularity(fit, exp.n_items);
            let top = predict_popularity(&popularity, &[], n);
            for &u in users {
                preds[u as usize] = top.clone();
            }
        }
    }
    Ok(preds)
}

fn long_scores(spec: &StrategySpec, exp: &Experiment<'_>, users: &[u32]) -> Result<ScoreStore> {
    let h = exp.split.history;
    let end = exp.split.split_time;
    let preds = base_predictions(&spec.base, exp, h, end, h, users, spec.capacity, None)?;
    build_score_store(&preds, exp.n_items, spec.capacity, spec.k())
}

/// Learns biases on the recent window: the base model is fitted on the train
/// window only and asked to predict what recent buyers purchased.
pub fn learn_recent_bias(spec: &StrategySpec, exp: &Experiment<'_>) -> Result<LearnOutcome> {
    let split = &exp.split;
    let relevance = relevance_from(split.recent, exp.n_items);
    let preds = base_predictions(
        &spec.base,
        exp,
        split.train,
        split.recent_start,
        split.train,
        relevance.users(),
        spec.capacity,
        None,
    )?;
    let scores = build_score_store(&preds, exp.n_items, spec.capacity, spec.k())?;
    let outcome = learn_biases(&scores, &relevance, spec.optimizer.clone())?;
    info!(
        "bias learning: {} users, {} candidates, objective {:.6} -> {:.6} in {} cycles",
        relevance.n_users(),
        outcome.candidates,
        outcome.initial_objective,
        outcome.final_objective,
        outcome.cycles.len()
    );
    Ok(outcome)
}

/// Bias excluding every item nobody bought in the recent window.
pub fn truncation_bias(recent: &[Transaction], n_items: usize) -> BiasVector {
    let mut sold = vec![false; n_items];
    for r in recent {
        sold[r.item as usize] = true;
    }
    let mut bias = BiasVector::zeros(n_items);
    for (i, s) in sold.iter().enumerate() {
        if !s {
            bias.exclude(i as u32);
        }
    }
    bias
}

/// Purchase-frequency distribution of `records` over all items.
pub fn frequency_distribution(records: &[Transaction], n_items: usize) -> Vec<f64> {
    fit_popularity(records, n_items).distribution()
}

/// Rescales every user's stored scores to sum to 1.
pub fn normalize_per_user(store: &ScoreStore, k: usize) -> Result<ScoreStore> {
    let preds: Vec<Vec<(u32, f64)>> = (0..store.n_users() as u32)
        .map(|u| {
            let ranked = store.user(u).ranked();
            let total: f64 = ranked.iter().map(|e| e.1).sum();
            if total > 0.0 {
                ranked.iter().map(|&(i, s)| (i, s / total)).collect()
            } else {
                ranked.to_vec()
            }
        })
        .collect();
    build_score_store(&preds, store.n_items(), store.capacity(), k)
}

/// Runs one strategy and returns the scores and biases for `users`.
pub fn run_strategy(
    kind: StrategyKind,
    spec: &StrategySpec,
    exp: &Experiment<'_>,
    users: &[u32],
) -> Result<StrategyOutput> {
    spec.validate()?;
    if kind.needs_recent() && exp.split.recent.is_empty() {
        return Err(Error::Strategy(format!("{kind} needs a non-empty recent window")));
    }
    let m = exp.n_items;
    let output = |scores, bias, learn| StrategyOutput {
        kind,
        scores,
        bias,
        learn,
    };
    Ok(match kind {
        StrategyKind::Long => output(long_scores(spec, exp, users)?, BiasVector::zeros(m), None),
        StrategyKind::Bias => {
            let learned = learn_recent_bias(spec, exp)?;
            output(long_scores(spec, exp, users)?, learned.bias.clone(), Some(learned))
        }
        StrategyKind::Truncate => output(
            long_scores(spec, exp, users)?,
            truncation_bias(exp.split.recent, m),
            None,
        ),
        StrategyKind::Distrdiff => {
            let scores = normalize_per_user(&long_scores(spec, exp, users)?, spec.k())?;
            let short = frequency_distribution(exp.split.recent, m);
            let long = frequency_distribution(exp.split.history, m);
            let bias = BiasVector::from_values(short.iter().zip(&long).map(|(s, l)| s - l).collect());
            output(scores, bias, None)
        }
        StrategyKind::Decay => {
            if !matches!(spec.base, BaseModel::Markov(_)) {
                return Err(Error::Strategy("DECAY requires the markov base model".into()));
            }
            let h = exp.split.history;
            let decay = Decay {
                beta: spec.beta,
                as_of: exp.split.split_time,
            };
            let end = exp.split.split_time;
            let preds =
                base_predictions(&spec.base, exp, h, end, h, users, spec.capacity, Some(decay))?;
            let scores = build_score_store(&preds, m, spec.capacity, spec.k())?;
            output(scores, BiasVector::zeros(m), None)
        }
    })
}
