use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::IdMap;
use crate::models::Taxonomy;

use super::log::{Transaction, TransactionLog, SECONDS_PER_DAY};

/// Parameters of the synthetic drifting purchase log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub n_users: usize,
    pub m_items: usize,
    pub n_days: usize,
    /// Probability that an item's base popularity is redrawn on a given day.
    pub churn_rate: f64,
    /// Multiplier applied to the popularity of trending items.
    pub trend_spike: f64,
    pub n_categories: usize,
    pub seed: u64,
    /// Size of the trending set.
    pub trending_size: usize,
    /// Daily probability that a trending slot is handed to another item.
    pub trend_turnover: f64,
    /// Mean purchases per user per day.
    pub purchase_rate: f64,
    /// Probability that a purchase is drawn from the user's favourite categories.
    pub category_affinity: f64,
    /// Log-space spread of base popularity.
    pub popularity_sigma: f64,
    pub start_date: NaiveDate,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            n_users: 2_000,
            m_items: 200,
            n_days: 120,
            churn_rate: 0.2,
            trend_spike: 10.0,
            n_categories: 10,
            seed: 42,
            trending_size: 10,
            trend_turnover: 1.0 / 14.0,
            purchase_rate: 0.25,
            category_affinity: 0.5,
            popularity_sigma: 1.0,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_users", self.n_users),
            ("m_items", self.m_items),
            ("n_days", self.n_days),
            ("n_categories", self.n_categories),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let probabilities = [
            ("churn_rate", self.churn_rate),
            ("trend_turnover", self.trend_turnover),
            ("category_affinity", self.category_affinity),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.trend_spike.is_finite() && self.trend_spike >= 1.0) {
            return Err(Error::Config(format!(
                "trend_spike must be finite and >= 1, got {}",
                self.trend_spike
            )));
        }
        if !(self.purchase_rate.is_finite() && self.purchase_rate > 0.0) {
            return Err(Error::Config("purchase_rate must be positive".into()));
        }
        if !(self.popularity_sigma.is_finite() && self.popularity_sigma >= 0.0) {
            return Err(Error::Config("popularity_sigma must be non-negative".into()));
        }
        if self.trending_size > self.m_items {
            return Err(Error::Config(format!(
                "trending_size {} exceeds m_items {}",
                self.trending_size, self.m_items
            )));
        }
        Ok(())
    }

    /// Midnight UTC of the first generated day, in seconds.
    pub fn start_time(&self) -> i64 {
        self.start_date
            .and_hms_opt(0, 0, 0)
            .expect("midnight exists")
            .and_utc()
            .timestamp()
    }

    /// Midnight UTC just after the last generated day.
    pub fn end_time(&self) -> i64 {
        self.start_time() + self.n_days as i64 * SECONDS_PER_DAY
    }
}

/// Generated log plus the item taxonomy used to draw it.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftData {
    pub log: TransactionLog,
    pub taxonomy: Taxonomy,
}

fn weighted(weights: &[f64]) -> Option<WeightedIndex<f64>> {
    WeightedIndex::new(weights).ok()
}

pub fn generate_drift(config: &DriftConfig) -> Result<DriftData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = config.m_items;
    let n_cat = config.n_categories;

    let users: IdMap = (0..config.n_users).map(|u| format!("u{u:05}")).collect();
    let items: IdMap = (0..m).map(|i| format!("i{i:04}")).collect();
    let category_names: Vec<String> = (0..n_cat).map(|c| format!("c{c:02}")).collect();
    let item_category: Vec<usize> = (0..m).map(|_| rng.random_range(0..n_cat)).collect();

    let popularity = LogNormal::new(0.0, config.popularity_sigma)
        .map_err(|e| Error::Config(format!("popularity_sigma: {e}")))?;
    let mut base: Vec<f64> = (0..m).map(|_| popularity.sample(&mut rng)).collect();
    let mut trending: Vec<usize> = sample(&mut rng, m, config.trending_size).into_vec();
    let mut is_trending = vec![false; m];
    for &i in &trending {
        is_trending[i] = true;
    }

    // two favourite categories per user, weighted 0.7 / 0.3
    let favourites: Vec<[usize; 2]> = (0..config.n_users)
        .map(|_| {
            let a = rng.random_range(0..n_cat);
            let b = rng.random_range(0..n_cat);
            [a, b]
        })
        .collect();
    let members: Vec<Vec<usize>> = (0..n_cat)
        .map(|c| (0..m).filter(|&i| item_category[i] == c).collect())
        .collect();
    let purchases = Poisson::new(config.purchase_rate)
        .map_err(|e| Error::Config(format!("purchase_rate: {e}")))?;

    let start = config.start_time();
    let mut records = Vec::new();
    let mut weights = vec![0.0; m];
    for day in 0..config.n_days {
        if day > 0 {
            for b in base.iter_mut() {
                if rng.random_bool(config.churn_rate) {
                    *b = popularity.sample(&mut rng);
                }
            }
            for slot in 0..trending.len() {
                if rng.random_bool(config.trend_turnover) && trending.len() < m {
                    let next = loop {
                        let i = rng.random_range(0..m);
                        if !is_trending[i] {
                            break i;
                        }
                    };
                    is_trending[trending[slot]] = false;
                    is_trending[next] = true;
                    trending[slot] = next;
                }
            }
        }
        for i in 0..m {
            weights[i] = base[i] * if is_trending[i] { config.trend_spike } else { 1.0 };
        }
        let global = weighted(&weights);
        let per_category: Vec<Option<WeightedIndex<f64>>> = members
            .iter()
            .map(|ids| weighted(&ids.iter().map(|&i| weights[i]).collect::<Vec<_>>()))
            .collect();
        let day_start = start + day as i64 * SECONDS_PER_DAY;
        for (user, fav) in favourites.iter().enumerate() {
            let count = purchases.sample(&mut rng) as usize;
            for _ in 0..count {
                let from_category = rng.random_bool(config.category_affinity);
                let cat = if rng.random_bool(0.7) { fav[0] } else { fav[1] };
                let item = match (&per_category[cat], &global) {
                    (Some(dist), _) if from_category => members[cat][dist.sample(&mut rng)],
                    (_, Some(dist)) => dist.sample(&mut rng),
                    _ => rng.random_range(0..m),
                };
                records.push(Transaction {
                    user: user as u32,
                    item: item as u32,
                    time: day_start + rng.random_range(0..SECONDS_PER_DAY),
                });
            }
        }
    }

    let log = TransactionLog::new(users, items, records);
    let taxonomy = Taxonomy::from_assignments(
        &log.items,
        (0..m).map(|i| (format!("i{i:04}"), category_names[item_category[i]].clone())),
    );
    Ok(DriftData { log, taxonomy })
}
