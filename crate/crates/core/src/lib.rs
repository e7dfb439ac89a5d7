//! Learning per-item additive biases on top of an arbitrary base recommender
//! so that a top-k ranking metric is maximized on recent relevance data.

pub mod bias;
pub mod data;
pub mod error;
pub mod experiment;
pub mod ids;
pub mod io;
pub mod metrics;
pub mod models;
pub mod optimizer;
pub mod relevance;
pub mod scores;
pub mod strategies;
pub mod topk;

pub use bias::{BiasVector, NEG_INF};
pub use error::{Error, Result};
pub use ids::IdMap;
pub use metrics::{EvalReport, MetricKind, MetricSpec};
pub use optimizer::{learn_biases, BiasLearner, LearnOutcome, OptimizerConfig};
pub use relevance::RelevanceSet;
pub use scores::{build_score_store, ScoreStore};
pub use topk::{select_topk, TopKState};
