//! Base scorers producing per-user candidate lists: a first/second-order
//! Markov co-purchase chain, a category model and global popularity.

mod category;
mod markov;
mod popularity;

pub use category::{fit_category, predict_category, CategoryModel, Taxonomy, OTHER_CATEGORY};
pub use markov::{
    fit_markov, predict_markov, Combine, Context, Decay, MarkovModel, PredictConfig, Successor,
};
pub use popularity::{fit_popularity, predict_popularity, Popularity};

use crate::data::Transaction;

/// Exponential time decay `exp(-delta_t / beta)` with `delta_t` in days.
pub fn decay_weight(delta_t: f64, beta: f64) -> f64 {
    debug_assert!(beta > 0.0, "beta must be positive");
    debug_assert!(delta_t >= 0.0, "delta_t must be non-negative");
    (-delta_t / beta).exp()
}

/// Items bought by each user in time order, indexed by dense user id.
pub fn user_sequences(records: &[Transaction], n_users: usize) -> Vec<Vec<u32>> {
    let mut seqs = vec![Vec::new(); n_users];
    for r in records {
        if let Some(seq) = seqs.get_mut(r.user as usize) {
            seq.push(r.item);
        }
    }
    seqs
}

/// Up to `h` distinct items from the end of a purchase sequence, oldest first.
pub fn recent_distinct(sequence: &[u32], h: usize) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(h);
    for &item in sequence.iter().rev() {
        if out.len() == h {
            break;
        }
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out.reverse();
    out
}

/// Sorts by score descending then item ascending and keeps `n`.
pub(crate) fn top_n(mut scored: Vec<(u32, f64)>, n: usize) -> Vec<(u32, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);
    scored
}
