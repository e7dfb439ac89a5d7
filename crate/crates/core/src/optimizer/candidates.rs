use crate::relevance::RelevanceSet;
use crate::scores::ScoreStore;

/// Items that no user finds relevant. Excluding them from every list never
/// lowers ACC@k.
pub fn prune_zero_relevance(relevance: &RelevanceSet) -> Vec<u32> {
    relevance
        .item_frequencies()
        .iter()
        .enumerate()
        .filter(|(_, &f)| f == 0)
        .map(|(i, _)| i as u32)
        .collect()
}

fn top_by_frequency(freq: &[u32], limit: usize) -> Vec<u32> {
    let mut items: Vec<u32> = (0..freq.len() as u32)
        .filter(|&i| freq[i as usize] > 0)
        .collect();
    items.sort_by(|&a, &b| freq[b as usize].cmp(&freq[a as usize]).then(a.cmp(&b)));
    items.truncate(limit);
    items
}

/// How often each item appears in the unbiased top-k of the relevance users.
pub fn predicted_frequencies(scores: &ScoreStore, relevance: &RelevanceSet, k: usize) -> Vec<u32> {
    let mut freq = vec![0u32; relevance.n_items()];
    for &user in relevance.users() {
        for &(item, _) in scores.user(user).ranked().iter().take(k) {
            freq[item as usize] += 1;
        }
    }
    freq
}

/// Items whose bias is worth tuning: the most frequently recommended ones
/// (past popular, likely to need a negative bias) together with the most
/// frequently relevant ones (recently popular), minus `pruned`.
///
/// Ordered by recent frequency descending, then item index.
pub fn build_candidate_set(
    scores: &ScoreStore,
    relevance: &RelevanceSet,
    k: usize,
    top_predicted: usize,
    top_recent: usize,
    pruned: &[u32],
) -> Vec<u32> {
    let m = relevance.n_items();
    let recent = relevance.item_frequencies();
    let predicted = predicted_frequencies(scores, relevance, k);
    let mut chosen = vec![false; m];
    for i in top_by_frequency(&predicted, top_predicted) {
        chosen[i as usize] = true;
    }
    for i in top_by_frequency(&recent, top_recent) {
        chosen[i as usize] = true;
    }
    for &i in pruned {
        chosen[i as usize] = false;
    }
    let mut items: Vec<u32> = (0..m as u32).filter(|&i| chosen[i as usize]).collect();
    items.sort_by(|&a, &b| recent[b as usize].cmp(&recent[a as usize]).then(a.cmp(&b)));
    items
}
