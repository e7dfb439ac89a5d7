//! Run configuration: TOML file, then command-line overrides, then validation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trendbias::data::{parse_timestamp, DriftConfig, SECONDS_PER_DAY};
use trendbias::experiment::DEFAULT_OVERLAP_LEVELS;
use trendbias::models::{Combine, PredictConfig};
use trendbias::strategies::{BaseModel, StrategyKind, StrategySpec};
use trendbias::{MetricKind, MetricSpec, OptimizerConfig};

pub const OUT_ENV: &str = "TRENDBIAS_OUT";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Not part of the config hash.
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub input: InputConfig,
    pub split: SplitConfig,
    pub metric: MetricConfig,
    pub optimizer: OptimizerSection,
    pub strategies: StrategySection,
    pub generate: DriftConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub transactions: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub strict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Start of the test window. Defaults to the last `test_days` whole days
    /// of the log.
    pub split_date: Option<String>,
    pub recent_days: u32,
    pub test_days: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            split_date: None,
            recent_days: 3,
            test_days: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub kind: MetricKind,
    pub k: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kind: MetricKind::Acc,
            k: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_cycles: usize,
    pub min_items_changed_fraction: f64,
    pub candidate_top_predicted: usize,
    pub candidate_top_recent: usize,
    pub tie_epsilon: f64,
    pub prune: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            max_cycles: d.max_cycles,
            min_items_changed_fraction: d.min_items_changed_fraction,
            candidate_top_predicted: d.candidate_top_predicted,
            candidate_top_recent: d.candidate_top_recent,
            tie_epsilon: d.tie_epsilon,
            prune: d.prune,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Markov,
    Category,
    Popularity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySection {
    pub kinds: Vec<StrategyKind>,
    pub base: BaseKind,
    pub combine: Combine,
    pub history: usize,
    pub use_pairs: bool,
    /// Per-user score capacity N; 5k when unset.
    pub capacity: Option<usize>,
    pub beta: f64,
    pub overlap_levels: Vec<usize>,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            kinds: StrategyKind::ALL.to_vec(),
            base: BaseKind::Markov,
            combine: Combine::Max,
            history: 3,
            use_pairs: true,
            capacity: None,
            beta: 60.0,
            overlap_levels: DEFAULT_OVERLAP_LEVELS.to_vec(),
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: $TRENDBIAS_OUT, then the current directory]
    #[arg(long, short = 'o', global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Transaction log (user, item, timestamp; tab separated)
    #[arg(long, global = true, value_name = "FILE")]
    pub transactions: Option<PathBuf>,
    /// Item taxonomy (item, category; tab separated)
    #[arg(long, global = true, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    /// Abort on the first malformed input line
    #[arg(long, global = true)]
    pub strict: bool,
    /// First day of the test window (date or RFC 3339 timestamp)
    #[arg(long, global = true)]
    pub split_date: Option<String>,
    #[arg(long, global = true)]
    pub recent_days: Option<u32>,
    #[arg(long, global = true)]
    pub test_days: Option<u32>,
    /// Metric to optimize: acc, map or ndcg
    #[arg(long, global = true)]
    pub metric: Option<MetricKind>,
    #[arg(long, short = 'k', global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub max_cycles: Option<usize>,
    #[arg(long, global = true)]
    pub min_items_changed: Option<f64>,
    #[arg(long, global = true)]
    pub candidates_predicted: Option<usize>,
    #[arg(long, global = true)]
    pub candidates_recent: Option<usize>,
    #[arg(long, global = true)]
    pub tie_epsilon: Option<f64>,
    /// Keep items without recent purchases in the search
    #[arg(long, global = true)]
    pub no_prune: bool,
    /// Comma separated: LONG,BIAS,TRUNCATE,DISTRDIFF,DECAY
    #[arg(long, global = true, value_delimiter = ',')]
    pub strategies: Option<Vec<StrategyKind>>,
    #[arg(long, global = true, value_enum)]
    pub base: Option<BaseKind>,
    /// Markov combine rule: max or sum
    #[arg(long, global = true)]
    pub combine: Option<Combine>,
    /// Distinct recent items used as Markov contexts
    #[arg(long, global = true)]
    pub history: Option<usize>,
    /// First-order Markov contexts only
    #[arg(long, global = true)]
    pub no_pairs: bool,
    /// Scores kept per user
    #[arg(long, global = true)]
    pub capacity: Option<usize>,
    /// Decay time constant in days
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub overlap_levels: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Reads the config file named in `o` (if any) and applies the flags.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        set(&mut c.output_dir, o.out.clone());
        set(&mut c.seed, o.seed);
        set(&mut c.input.transactions, o.transactions.clone());
        set(&mut c.input.taxonomy, o.taxonomy.clone());
        c.input.strict |= o.strict;
        set(&mut c.split.split_date, o.split_date.clone());
        replace(&mut c.split.recent_days, o.recent_days);
        replace(&mut c.split.test_days, o.test_days);
        replace(&mut c.metric.kind, o.metric);
        replace(&mut c.metric.k, o.k);
        let opt = &mut c.optimizer;
        replace(&mut opt.max_cycles, o.max_cycles);
        replace(&mut opt.min_items_changed_fraction, o.min_items_changed);
        replace(&mut opt.candidate_top_predicted, o.candidates_predicted);
        replace(&mut opt.candidate_top_recent, o.candidates_recent);
        replace(&mut opt.tie_epsilon, o.tie_epsilon);
        if o.no_prune {
            opt.prune = false;
        }
        let s = &mut c.strategies;
        replace(&mut s.kinds, o.strategies.clone());
        replace(&mut s.base, o.base);
        replace(&mut s.combine, o.combine);
        replace(&mut s.history, o.history);
        if o.no_pairs {
            s.use_pairs = false;
        }
        set(&mut s.capacity, o.capacity);
        replace(&mut s.beta, o.beta);
        replace(&mut s.overlap_levels, o.overlap_levels.clone());
        if let Some(seed) = c.seed {
            c.generate.seed = seed;
        }
        Ok(c)
    }

    /// Checks every field used by the pipeline. Errors name the field.
    pub fn validate(&self) -> Result<()> {
        if self.split.recent_days == 0 {
            bail!("invalid config: split.recent_days must be positive");
        }
        if self.split.test_days == 0 {
            bail!("invalid config: split.test_days must be positive");
        }
        if let Some(d) = &self.split.split_date {
            if parse_timestamp(d).is_none() {
                bail!("invalid config: split.split_date `{d}` is not a date or timestamp");
            }
        }
        if self.metric.k == 0 {
            bail!("invalid config: metric.k must be at least 1");
        }
        let opt = &self.optimizer;
        if !(opt.tie_epsilon.is_finite() && opt.tie_epsilon > 0.0) {
            bail!("invalid config: optimizer.tie_epsilon must be positive");
        }
        if !(0.0..=1.0).contains(&opt.min_items_changed_fraction) {
            bail!("invalid config: optimizer.min_items_changed_fraction must lie in [0, 1]");
        }
        let s = &self.strategies;
        if s.kinds.is_empty() {
            bail!("invalid config: strategies.kinds must not be empty");
        }
        if s.history == 0 {
            bail!("invalid config: strategies.history must be positive");
        }
        if self.capacity() < self.metric.k {
            bail!(
                "invalid config: strategies.capacity ({}) must be at least metric.k ({})",
                self.capacity(),
                self.metric.k
            );
        }
        if !(s.beta.is_finite() && s.beta > 0.0) {
            bail!("invalid config: strategies.beta must be positive");
        }
        if s.overlap_levels.contains(&0) {
            bail!("invalid config: strategies.overlap_levels must be positive");
        }
        if s.kinds.contains(&StrategyKind::Decay) && s.base != BaseKind::Markov {
            bail!("invalid config: strategies.kinds contains DECAY, which needs strategies.base = markov");
        }
        if s.base == BaseKind::Category && self.input.taxonomy.is_none() {
            bail!("invalid config: input.taxonomy is required by strategies.base = category");
        }
        self.generate
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid config: generate.{}", strip_prefix(&e.to_string())))?;
        Ok(())
    }

    /// Input files named in the config must exist. Not checked for `generate`, which writes them.
    pub fn check_inputs(&self) -> Result<()> {
        for (field, path) in [
            ("input.transactions", &self.input.transactions),
            ("input.taxonomy", &self.input.taxonomy),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    bail!("invalid config: {field}: no such file {}", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn transactions(&self) -> Result<&Path> {
        match &self.input.transactions {
            Some(p) => Ok(p),
            None => bail!("invalid config: input.transactions is required (--transactions)"),
        }
    }

    /// Flag, then config file, then the environment, then `.`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn capacity(&self) -> usize {
        self.strategies
            .capacity
            .unwrap_or(trendbias::scores::DEFAULT_CAPACITY_MULTIPLIER * self.metric.k)
    }

    pub fn metric_spec(&self) -> MetricSpec {
        MetricSpec {
            kind: self.metric.kind,
            k: self.metric.k,
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            metric: self.metric_spec(),
            max_cycles: o.max_cycles,
            min_items_changed_fraction: o.min_items_changed_fraction,
            candidate_top_predicted: o.candidate_top_predicted,
            candidate_top_recent: o.candidate_top_recent,
            tie_epsilon: o.tie_epsilon,
            prune: o.prune,
            ..OptimizerConfig::default()
        }
    }

    pub fn base_model(&self) -> BaseModel {
        let s = &self.strategies;
        match s.base {
            BaseKind::Markov => BaseModel::Markov(PredictConfig {
                history: s.history,
                combine: s.combine,
                use_pairs: s.use_pairs,
            }),
            BaseKind::Category => BaseModel::Category,
            BaseKind::Popularity => BaseModel::Popularity,
        }
    }

    pub fn strategy_spec(&self) -> StrategySpec {
        StrategySpec {
            base: self.base_model(),
            capacity: self.capacity(),
            beta: self.strategies.beta,
            optimizer: self.optimizer_config(),
        }
    }

    /// Start of the test window for a log whose last record is at `last`.
    pub fn split_time(&self, last: Option<i64>) -> i64 {
        if let Some(t) = self.split.split_date.as_deref().and_then(parse_timestamp) {
            return t;
        }
        let last = last.unwrap_or(0);
        let next_midnight = (last.div_euclid(SECONDS_PER_DAY) + 1) * SECONDS_PER_DAY;
        next_midnight - self.split.test_days as i64 * SECONDS_PER_DAY
    }

    /// SHA-256 over the canonical JSON form, output directory left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn replace<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn strip_prefix(msg: &str) -> &str {
    msg.strip_prefix("configuration error: ").unwrap_or(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[metric]\nkind = \"map\"\nk = 5\n[split]\nrecent_days = 4\n").unwrap();
        let o = Overrides {
            config: Some(path),
            k: Some(7),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(&o).unwrap();
        assert_eq!(c.metric.kind, MetricKind::Map);
        assert_eq!(c.metric.k, 7);
        assert_eq!(c.split.recent_days, 4);
        assert_eq!(c.split.test_days, 7);
    }

    #[test]
    fn unknown_field_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[optimizer]\nmax_cycle = 3\n").unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(format!("{err:#}").contains("max_cycle"), "{err:#}");
    }

    #[test]
    fn validation_names_field() {
        let mut c = RunConfig::default();
        c.split.test_days = 0;
        assert!(c.validate().unwrap_err().to_string().contains("split.test_days"));
        let mut c = RunConfig::default();
        c.strategies.capacity = Some(3);
        assert!(c.validate().unwrap_err().to_string().contains("strategies.capacity"));
        let mut c = RunConfig::default();
        c.generate.churn_rate = 2.0;
        assert!(c.validate().unwrap_err().to_string().contains("generate.churn_rate"));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        a.output_dir = Some("x".into());
        b.output_dir = Some("y".into());
        assert_eq!(a.hash(), b.hash());
        b.metric.k = 20;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn default_split_is_last_test_days() {
        let c = RunConfig::default();
        // 2024-01-10T12:00:00Z
        let last = parse_timestamp("2024-01-10T12:00:00Z").unwrap();
        assert_eq!(c.split_time(Some(last)), parse_timestamp("2024-01-04").unwrap());
    }
}
