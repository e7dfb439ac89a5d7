use std::io::BufRead;
use std::path::Path;

use crate::data::Transaction;
use crate::error::{Error, Result};
use crate::ids::IdMap;

use super::top_n;

/// Category assigned to items missing from the taxonomy.
pub const OTHER_CATEGORY: &str = "__other__";

/// Item to category assignment over a log's dense item ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Taxonomy {
    categories: IdMap,
    item_category: Vec<u32>,
}

impl Taxonomy {
    /// Maps every item of `items`; pairs naming unknown items are ignored and
    /// items left unmapped fall into [`OTHER_CATEGORY`].
    pub fn from_assignments<I, C>(items: &IdMap, pairs: impl IntoIterator<Item = (I, C)>) -> Self
    where
        I: AsRef<str>,
        C: AsRef<str>,
    {
        let mut categories = IdMap::new();
        let mut assigned: Vec<Option<u32>> = vec![None; items.len()];
        for (item, cat) in pairs {
            if let Some(i) = items.get(item.as_ref()) {
                assigned[i as usize] = Some(categories.intern(cat.as_ref()));
            }
        }
        let item_category = assigned
            .into_iter()
            .map(|c| c.unwrap_or_else(|| categories.intern(OTHER_CATEGORY)))
            .collect();
        Self {
            categories,
            item_category,
        }
    }

    /// Reads `item<TAB>category` lines; `#` lines are comments.
    pub fn read<R: BufRead>(reader: R, path: &Path, items: &IdMap) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((item, cat)) if !item.trim().is_empty() && !cat.trim().is_empty() => {
                    pairs.push((item.trim().to_owned(), cat.trim().to_owned()))
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line: idx + 1,
                        message: "expected `item<TAB>category`".into(),
                    })
                }
            }
        }
        Ok(Self::from_assignments(items, pairs))
    }

    pub fn n_items(&self) -> usize {
        self.item_category.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn category(&self, item: u32) -> u32 {
        self.item_category[item as usize]
    }

    pub fn category_name(&self, category: u32) -> &str {
        self.categories.name(category)
    }

    /// `(item name, category name)` rows in item index order.
    pub fn rows<'a>(&'a self, items: &'a IdMap) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.item_category
            .iter()
            .enumerate()
            .map(move |(i, &c)| (items.name(i as u32), self.categories.name(c)))
    }
}

/// Category-based scorer: P(i | u) = P(i | cat(i)) * P(cat(i) | u).
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryModel {
    pub taxonomy: Taxonomy,
    /// Sparse per-user interest over categories, sorted by category.
    pub interest: Vec<Vec<(u32, f64)>>,
    /// Interest used for users without purchases in the interest window.
    pub fallback: Vec<(u32, f64)>,
    /// P(i | cat(i)) from the popularity window.
    pub item_probability: Vec<f64>,
    /// Items with positive probability per category, best first.
    category_items: Vec<Vec<(u32, f64)>>,
}

impl CategoryModel {
    pub fn user_interest(&self, user: u32) -> &[(u32, f64)] {
        match self.interest.get(user as usize) {
            Some(v) if !v.is_empty() => v,
            _ => &self.fallback,
        }
    }
}

fn normalize(counts: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    let total: f64 = counts.iter().map(|c| c.1).sum();
    counts.into_iter().map(|(c, v)| (c, v / total)).collect()
}

/// Fits user interest on `interest_window` and within-category popularity on
/// `popularity_window`.
pub fn fit_category(
    interest_window: &[Transaction],
    popularity_window: &[Transaction],
    taxonomy: &Taxonomy,
    n_users: usize,
) -> CategoryModel {
    let n_cat = taxonomy.n_categories();
    let n_items = taxonomy.n_items();

    let mut per_user: Vec<Vec<f64>> = vec![Vec::new(); n_users];
    for r in interest_window {
        if (r.item as usize) >= n_items {
            continue;
        }
        if let Some(row) = per_user.get_mut(r.user as usize) {
            if row.is_empty() {
                row.resize(n_cat, 0.0);
            }
            row[taxonomy.category(r.item) as usize] += 1.0;
        }
    }
    let interest = per_user
        .into_iter()
        .map(|row| {
            let sparse = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(c, &v)| (c as u32, v))
                .collect();
            normalize(sparse)
        })
        .collect();

    let mut item_counts = vec![0.0; n_items];
    let mut cat_totals = vec![0.0; n_cat];
    for r in popularity_window {
        if (r.item as usize) < n_items {
            item_counts[r.item as usize] += 1.0;
            cat_totals[taxonomy.category(r.item) as usize] += 1.0;
        }
    }
    let item_probability: Vec<f64> = (0..n_items)
        .map(|i| {
            let total = cat_totals[taxonomy.category(i as u32) as usize];
            if total > 0.0 {
                item_counts[i] / total
            } else {
                0.0
            }
        })
        .collect();
    let mut category_items: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_cat];
    for (i, &p) in item_probability.iter().enumerate() {
        if p > 0.0 {
            category_items[taxonomy.category(i as u32) as usize].push((i as u32, p));
        }
    }
    for list in &mut category_items {
        *list = top_n(std::mem::take(list), usize::MAX);
    }
    let observed: Vec<u32> = (0..n_cat as u32).filter(|&c| cat_totals[c as usize] > 0.0).collect();
    let fallback = observed
        .iter()
        .map(|&c| (c, 1.0 / observed.len() as f64))
        .collect();

    CategoryModel {
        taxonomy: taxonomy.clone(),
        interest,
        fallback,
        item_probability,
        category_items,
    }
}

pub fn predict_category(model: &CategoryModel, user: u32, n: usize) -> Vec<(u32, f64)> {
    let mut scored = Vec::new();
    for &(cat, weight) in model.user_interest(user) {
        for &(item, p) in &model.category_items[cat as usize] {
            scored.push((item, p * weight));
        }
    }
    top_n(scored, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(user: u32, item: u32) -> Transaction {
        Transaction { user, item, time: 0 }
    }

    fn taxonomy(cats: &[&str]) -> (IdMap, Taxonomy) {
        let items: IdMap = (0..cats.len()).map(|i| format!("i{i}")).collect();
        let tax = Taxonomy::from_assignments(
            &items,
            cats.iter().enumerate().map(|(i, c)| (format!("i{i}"), c.to_string())),
        );
        (items, tax)
    }

    #[test]
    fn interest_is_normalized_counts() {
        let (_, tax) = taxonomy(&["elec", "elec", "toy"]);
        let hist = vec![tx(0, 0), tx(0, 1), tx(0, 0), tx(0, 2)];
        let m = fit_category(&hist, &hist, &tax, 1);
        let elec = tax.categories.get("elec").unwrap();
        let toy = tax.categories.get("toy").unwrap();
        assert_eq!(m.user_interest(0), &[(elec, 0.75), (toy, 0.25)]);
    }

    #[test]
    fn product_rule_and_truncation() {
        let (_, tax) = taxonomy(&["a", "a", "b", "b", "b"]);
        // interest 0.5 / 0.5
        let interest = vec![tx(0, 0), tx(0, 2)];
        // within a: item0 0.4 item1 0.6 ; within b: item2 only, item3/4 absent
        let mut pop = vec![];
        pop.extend(std::iter::repeat_n(tx(1, 0), 2));
        pop.extend(std::iter::repeat_n(tx(1, 1), 3));
        pop.push(tx(1, 2));
        let m = fit_category(&interest, &pop, &tax, 2);
        let scores = predict_category(&m, 0, 10);
        assert_eq!(scores.len(), 3);
        assert!((scores[0].1 - 0.5).abs() < 1e-15 && scores[0].0 == 2);
        assert!((scores[1].1 - 0.3).abs() < 1e-15 && scores[1].0 == 1);
        assert!((scores[2].1 - 0.2).abs() < 1e-15 && scores[2].0 == 0);
        assert_eq!(m.item_probability[3], 0.0);
        assert_eq!(m.item_probability[2], 1.0);
    }

    #[test]
    fn distributions_sum_to_one() {
        let (_, tax) = taxonomy(&["a", "b", "a", "c", "b", "a"]);
        let recs: Vec<Transaction> = (0..40).map(|x| tx(x % 3, x * 7 % 6)).collect();
        let m = fit_category(&recs, &recs, &tax, 4);
        for u in 0..4 {
            let s: f64 = m.user_interest(u).iter().map(|c| c.1).sum();
            assert!((s - 1.0).abs() < 1e-9);
            let total: f64 = predict_category(&m, u, usize::MAX).iter().map(|c| c.1).sum();
            assert!(total <= 1.0 + 1e-9);
        }
        for list in &m.category_items {
            if !list.is_empty() {
                let s: f64 = list.iter().map(|c| c.1).sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unmapped_items_go_to_other() {
        let items: IdMap = ["x", "y"].into_iter().collect();
        let tax = Taxonomy::from_assignments(&items, [("x", "c1"), ("zz", "c2")]);
        assert_eq!(tax.category_name(tax.category(1)), OTHER_CATEGORY);
        assert_eq!(tax.n_categories(), 2);
    }

    #[test]
    fn taxonomy_file_parsing() {
        let items: IdMap = ["x", "y"].into_iter().collect();
        let tax = Taxonomy::read("# c\nx\tc1\ny\tc2\n".as_bytes(), Path::new("t"), &items).unwrap();
        assert_eq!(tax.category_name(tax.category(1)), "c2");
        assert!(Taxonomy::read("x c1\n".as_bytes(), Path::new("t"), &items).is_err());
        let rows: Vec<_> = tax.rows(&items).collect();
        assert_eq!(rows, [("x", "c1"), ("y", "c2")]);
    }
}
