use std::collections::HashMap;

/// Bijection between external string ids and dense indices `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    forward: HashMap<String, u32>,
    backward: Vec<String>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the dense index for `id`, assigning the next free one if unseen.
    pub fn intern(&mut self, id: &str) -> u32 {
        if let Some(&idx) = self.forward.get(id) {
            return idx;
        }
        let idx = self.backward.len() as u32;
        self.forward.insert(id.to_owned(), idx);
        self.backward.push(id.to_owned());
        idx
    }

    pub fn get(&self, id: &str) -> Option<u32> {
        self.forward.get(id).copied()
    }

    pub fn name(&self, idx: u32) -> &str {
        &self.backward[idx as usize]
    }

    pub fn len(&self) -> usize {
        self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backward.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backward.iter().map(String::as_str)
    }
}

impl<S: AsRef<str>> FromIterator<S> for IdMap {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        let mut map = IdMap::new();
        for id in iter {
            map.intern(id.as_ref());
        }
        map
    }
}
