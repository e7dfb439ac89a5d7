use crate::data::Transaction;

use super::top_n;

/// Purchase share of every item over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Popularity {
    pub counts: Vec<f64>,
    pub total: f64,
}

impl Popularity {
    pub fn probability(&self, item: u32) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.counts.get(item as usize).copied().unwrap_or(0.0) / self.total
        }
    }

    /// Purchase-frequency distribution over all items (all zeros when empty).
    pub fn distribution(&self) -> Vec<f64> {
        (0..self.counts.len() as u32).map(|i| self.probability(i)).collect()
    }
}

pub fn fit_popularity(records: &[Transaction], n_items: usize) -> Popularity {
    let mut counts = vec![0.0; n_items];
    for r in records {
        if let Some(c) = counts.get_mut(r.item as usize) {
            *c += 1.0;
        }
    }
    let total = counts.iter().sum();
    Popularity { counts, total }
}

/// Most popular items with positive count, skipping `exclude`.
pub fn predict_popularity(model: &Popularity, exclude: &[u32], n: usize) -> Vec<(u32, f64)> {
    let scored = (0..model.counts.len() as u32)
        .filter(|i| model.counts[*i as usize] > 0.0 && !exclude.contains(i))
        .map(|i| (i, model.probability(i)))
        .collect();
    top_n(scored, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_and_ranking() {
        let recs: Vec<Transaction> = [2, 0, 2, 1, 2, 0]
            .iter()
            .map(|&item| Transaction { user: 0, item, time: 0 })
            .collect();
        let pop = fit_popularity(&recs, 4);
        assert_eq!(pop.probability(2), 0.5);
        assert_eq!(pop.probability(3), 0.0);
        assert_eq!(predict_popularity(&pop, &[], 10), vec![(2, 0.5), (0, 2.0 / 6.0), (1, 1.0 / 6.0)]);
        assert_eq!(predict_popularity(&pop, &[2], 1), vec![(0, 2.0 / 6.0)]);
        assert_eq!(fit_popularity(&[], 2).distribution(), vec![0.0, 0.0]);
    }
}
