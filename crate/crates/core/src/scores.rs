use crate::error::{Error, Result};
use crate::topk::outranks;

/// Default per-user capacity multiplier: keep `5 * k` scores per user.
pub const DEFAULT_CAPACITY_MULTIPLIER: usize = 5;

/// Sparse per-user base-model scores. Anything not stored reads as 0.
///
/// Each user's entries are kept in ranking order (score descending, item
/// index ascending) and truncated to the configured capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStore {
    n_items: usize,
    capacity: usize,
    offsets: Vec<usize>,
    ranked: Vec<(u32, f64)>,
    by_item: Vec<(u32, f64)>,
}

/// Borrowed view of one user's stored scores in ranking order.
#[derive(Debug, Clone, Copy)]
pub struct UserScores<'a> {
    ranked: &'a [(u32, f64)],
    by_item: &'a [(u32, f64)],
}

impl<'a> UserScores<'a> {
    pub fn ranked(&self) -> &'a [(u32, f64)] {
        self.ranked
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn get(&self, item: u32) -> Option<f64> {
        self.by_item
            .binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| self.by_item[pos].1)
    }

    pub fn contains(&self, item: u32) -> bool {
        self.get(item).is_some()
    }
}

/// Builds a store keeping the `capacity` best entries of every user.
///
/// `predictions[u]` holds user `u`'s (item, score) pairs in any order. When
/// an item is listed twice for a user the higher score wins.
pub fn build_score_store(
    predictions: &[Vec<(u32, f64)>],
    n_items: usize,
    capacity: usize,
    k: usize,
) -> Result<ScoreStore> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if capacity < k {
        return Err(Error::Config(format!(
            "score capacity N={capacity} is smaller than k={k}"
        )));
    }
    let mut offsets = Vec::with_capacity(predictions.len() + 1);
    let mut ranked = Vec::new();
    let mut by_item = Vec::new();
    offsets.push(0);
    let mut buf: Vec<(u32, f64)> = Vec::new();
    for (user, preds) in predictions.iter().enumerate() {
        buf.clear();
        for &(item, score) in preds {
            if !score.is_finite() {
                return Err(Error::NonFiniteScore {
                    user: user as u32,
                    item,
                    score,
                });
            }
            if item as usize >= n_items {
                return Err(Error::Config(format!(
                    "item index {item} outside universe of {n_items} items"
                )));
            }
            buf.push((item, score));
        }
        // collapse duplicates, keeping the best score
        buf.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
        buf.dedup_by_key(|e| e.0);
        buf.sort_by(|a, b| {
            if outranks(a.1, a.0, b.1, b.0) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        buf.truncate(capacity);
        ranked.extend_from_slice(&buf);
        buf.sort_by_key(|e| e.0);
        by_item.extend_from_slice(&buf);
        offsets.push(ranked.len());
    }
    Ok(ScoreStore {
        n_items,
        capacity,
        offsets,
        ranked,
        by_item,
    })
}

impl ScoreStore {
    pub fn n_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn user(&self, user: u32) -> UserScores<'_> {
        let u = user as usize;
        if u + 1 >= self.offsets.len() {
            return UserScores {
                ranked: &[],
                by_item: &[],
            };
        }
        let range = self.offsets[u]..self.offsets[u + 1];
        UserScores {
            ranked: &self.ranked[range.clone()],
            by_item: &self.by_item[range],
        }
    }

    /// Score of `item` for `user`, reading absent entries as 0.
    pub fn score(&self, user: u32, item: u32) -> f64 {
        self.user(user).get(item).unwrap_or(0.0)
    }

    pub fn total_entries(&self) -> usize {
        self.ranked.len()
    }

    /// Item-major view restricted to `users`: for each item, the positions
    /// (into `users`) that store it together with the stored score.
    pub fn columns(&self, users: &[u32]) -> ScoreColumns {
        let mut counts = vec![0usize; self.n_items + 1];
        for &u in users {
            for &(item, _) in self.user(u).ranked() {
                counts[item as usize + 1] += 1;
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut entries = vec![(0u32, 0.0f64); *offsets.last().unwrap()];
        for (pos, &u) in users.iter().enumerate() {
            for &(item, score) in self.user(u).ranked() {
                let slot = &mut fill[item as usize];
                entries[*slot] = (pos as u32, score);
                *slot += 1;
            }
        }
        ScoreColumns { offsets, entries }
    }
}

/// Item-major score view; entries within an item are ordered by user position.
#[derive(Debug, Clone)]
pub struct ScoreColumns {
    offsets: Vec<usize>,
    entries: Vec<(u32, f64)>,
}

impl ScoreColumns {
    pub fn item(&self, item: u32) -> &[(u32, f64)] {
        let i = item as usize;
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }
}
