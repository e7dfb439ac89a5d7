/// Sparse binary relevance: for every listed user, the sorted set of
/// relevant item indices. Users without any relevant item are never listed.
///
/// Users are addressed by *position* (`0..n_users()`), which maps to the
/// dense user index through [`RelevanceSet::users`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceSet {
    n_items: usize,
    users: Vec<u32>,
    offsets: Vec<usize>,
    items: Vec<u32>,
}

impl RelevanceSet {
    /// Builds the set from (user, item) pairs in any order; duplicates collapse.
    pub fn from_pairs(n_items: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut pairs: Vec<(u32, u32)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut users = Vec::new();
        let mut offsets = vec![0];
        let mut items = Vec::with_capacity(pairs.len());
        for (user, item) in pairs {
            assert!((item as usize) < n_items, "item {item} outside universe");
            if users.last() != Some(&user) {
                if !users.is_empty() {
                    offsets.push(items.len());
                }
                users.push(user);
            }
            items.push(item);
        }
        if !users.is_empty() {
            offsets.push(items.len());
        }
        Self {
            n_items,
            users,
            offsets,
            items,
        }
    }

    /// Builds the set from per-user lists indexed by dense user id.
    pub fn from_lists(n_items: usize, lists: &[Vec<u32>]) -> Self {
        Self::from_pairs(
            n_items,
            lists
                .iter()
                .enumerate()
                .flat_map(|(u, items)| items.iter().map(move |&i| (u as u32, i))),
        )
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Dense user indices, ascending.
    pub fn users(&self) -> &[u32] {
        &self.users
    }

    pub fn position(&self, user: u32) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub fn relevant(&self, pos: usize) -> &[u32] {
        &self.items[self.offsets[pos]..self.offsets[pos + 1]]
    }

    pub fn relevant_count(&self, pos: usize) -> usize {
        self.offsets[pos + 1] - self.offsets[pos]
    }

    pub fn is_relevant(&self, pos: usize, item: u32) -> bool {
        self.relevant(pos).binary_search(&item).is_ok()
    }

    /// Number of users each item is relevant for.
    pub fn item_frequencies(&self) -> Vec<u32> {
        let mut freq = vec![0u32; self.n_items];
        for &item in &self.items {
            freq[item as usize] += 1;
        }
        freq
    }

    /// For each item, the ascending user positions it is relevant for.
    pub fn columns(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n_items];
        for pos in 0..self.n_users() {
            for &item in self.relevant(pos) {
                cols[item as usize].push(pos as u32);
            }
        }
        cols
    }

    pub fn total_pairs(&self) -> usize {
        self.items.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_empty_users_and_duplicates() {
        let rel = RelevanceSet::from_lists(5, &[vec![3, 1, 3], vec![], vec![4]]);
        assert_eq!(rel.users(), &[0, 2]);
        assert_eq!(rel.relevant(0), &[1, 3]);
        assert_eq!(rel.relevant_count(1), 1);
        assert!(rel.is_relevant(1, 4));
        assert!(!rel.is_relevant(0, 4));
        assert_eq!(rel.position(2), Some(1));
        assert_eq!(rel.position(1), None);
        assert_eq!(rel.item_frequencies(), vec![0, 1, 0, 1, 1]);
        assert_eq!(rel.columns()[3], vec![0]);
    }

    #[test]
    fn empty() {
        let rel = RelevanceSet::from_pairs(3, std::iter::empty());
        assert!(rel.is_empty());
        assert_eq!(rel.n_users(), 0);
    }
}
