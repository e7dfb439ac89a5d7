use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::data::{Transaction, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::ids::IdMap;

use super::{decay_weight, recent_distinct, top_n};

const DUMP_HEADER: &str = "#trendbias-markov\tv1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Successor {
    /// Users who bought the context and later this item.
    pub count: u32,
    /// Sum of the same contributions after decay weighting (equals `count`
    /// when fitted without decay).
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Context {
    /// Users who bought every item of the context.
    pub count: u32,
    pub successors: HashMap<u32, Successor>,
}

impl Context {
    fn add(&mut self, item: u32, weight: f64) {
        let s = self.successors.entry(item).or_insert(Successor {
            count: 0,
            weight: 0.0,
        });
        s.count += 1;
        s.weight += weight;
    }

    pub fn probability(&self, item: u32) -> f64 {
        match self.successors.get(&item) {
            Some(s) if self.count > 0 => s.weight / self.count as f64,
            _ => 0.0,
        }
    }
}

/// Time decay for successor contributions, measured back from `as_of`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay {
    pub beta: f64,
    pub as_of: i64,
}

/// User-level co-purchase counts for single-item and item-pair contexts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkovModel {
    pub n_items: usize,
    pub unigram: HashMap<u32, Context>,
    /// Keyed by the pair with the smaller index first.
    pub pairs: HashMap<(u32, u32), Context>,
}

fn pair_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl MarkovModel {
    pub fn is_empty(&self) -> bool {
        self.unigram.is_empty()
    }

    /// P(i | j) estimated from user counts.
    pub fn unigram_probability(&self, j: u32, i: u32) -> f64 {
        self.unigram.get(&j).map_or(0.0, |c| c.probability(i))
    }

    /// P(i | j1, j2) estimated from user counts.
    pub fn pair_probability(&self, j1: u32, j2: u32, i: u32) -> f64 {
        self.pairs
            .get(&pair_key(j1, j2))
            .map_or(0.0, |c| c.probability(i))
    }

    pub fn n_transitions(&self) -> usize {
        self.unigram.values().map(|c| c.successors.len()).sum()
    }

    pub fn n_pair_transitions(&self) -> usize {
        self.pairs.values().map(|c| c.successors.len()).sum()
    }

    /// Writes the versioned tab-separated dump, rows in index order.
    pub fn write_dump<W: Write>(&self, mut out: W, items: &IdMap) -> Result<()> {
        let name = |i: u32| items.name(i);
        writeln!(out, "{DUMP_HEADER}")?;
        let mut uni: Vec<_> = self.unigram.iter().collect();
        uni.sort_by_key(|(j, _)| **j);
        let mut pairs: Vec<_> = self.pairs.iter().collect();
        pairs.sort_by_key(|(k, _)| **k);
        for (&j, ctx) in &uni {
            writeln!(out, "C\t{}\t\t{}", name(j), ctx.count)?;
        }
        for (&(a, b), ctx) in &pairs {
            writeln!(out, "C\t{}\t{}\t{}", name(a), name(b), ctx.count)?;
        }
        for (&j, ctx) in &uni {
            for (i, s) in sorted_successors(ctx) {
                writeln!(out, "S\t{}\t\t{}\t{}\t{}", name(j), name(i), s.count, s.weight)?;
            }
        }
        for (&(a, b), ctx) in &pairs {
            for (i, s) in sorted_successors(ctx) {
                writeln!(
                    out,
                    "S\t{}\t{}\t{}\t{}\t{}",
                    name(a),
                    name(b),
                    name(i),
                    s.count,
                    s.weight
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a dump, interning unseen item ids into `items`.
    pub fn read_dump<R: BufRead>(reader: R, items: &mut IdMap) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: "<markov model>".into(),
            line,
            message,
        };
        let mut model = MarkovModel::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let n = idx + 1;
            if idx == 0 {
                if line.trim_end() != DUMP_HEADER {
                    return Err(err(n, format!("expected header `{DUMP_HEADER}`")));
                }
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| s.parse::<u32>().map_err(|e| err(n, format!("bad count `{s}`: {e}")));
            match (f[0], f.len()) {
                ("C", 4) => {
                    let count = num(f[3])?;
                    let j = items.intern(f[1]);
                    let ctx = if f[2].is_empty() {
                        model.unigram.entry(j).or_default()
                    } else {
                        let j2 = items.intern(f[2]);
                        model.pairs.entry(pair_key(j, j2)).or_default()
                    };
                    ctx.count = count;
                }
                ("S", 6) => {
                    let count = num(f[4])?;
                    let weight: f64 = f[5]
                        .parse()
                        .map_err(|e| err(n, format!("bad weight `{}`: {e}", f[5])))?;
                    let j = items.intern(f[1]);
                    let i = items.intern(f[3]);
                    let ctx = if f[2].is_empty() {
                        model.unigram.entry(j).or_default()
                    } else {
                        let j2 = items.intern(f[2]);
                        model.pairs.entry(pair_key(j, j2)).or_default()
                    };
                    ctx.successors.insert(i, Successor { count, weight });
                }
                _ => return Err(err(n, "unrecognised row".into())),
            }
        }
        model.n_items = items.len();
        Ok(model)
    }
}

fn sorted_successors(ctx: &Context) -> Vec<(u32, Successor)> {
    let mut v: Vec<(u32, Successor)> = ctx.successors.iter().map(|(&i, &s)| (i, s)).collect();
    v.sort_by_key(|(i, _)| *i);
    v
}

/// One user's distinct items with first and last purchase times.
struct Bought {
    item: u32,
    first: i64,
    last: i64,
}

/// Counts ordered co-purchases in `records`, each user contributing at most
/// once to any (context, successor) cell.
///
/// Item `j` precedes `i` for a user when the first purchase of `j` is strictly
/// earlier than the last purchase of `i`. With `decay`, a contribution weighs
/// `exp(-age/beta)` where `age` is the time in days from that last purchase
/// of `i` to `as_of`.
pub fn fit_markov(records: &[Transaction], n_items: usize, decay: Option<Decay>) -> MarkovModel {
    let mut model = MarkovModel {
        n_items,
        ..MarkovModel::default()
    };
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&ix| (records[ix].user, records[ix].time));
    let mut bought: Vec<Bought> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let user = records[order[start]].user;
        let mut end = start;
        bought.clear();
        while end < order.len() && records[order[end]].user == user {
            let r = &records[order[end]];
            match bought.iter_mut().find(|b| b.item == r.item) {
                Some(b) => b.last = b.last.max(r.time),
                None => bought.push(Bought {
                    item: r.item,
                    first: r.time,
                    last: r.time,
                }),
            }
            end += 1;
        }
        add_user(&mut model, &mut bought, decay);
        start = end;
    }
    model
}

fn add_user(model: &mut MarkovModel, bought: &mut [Bought], decay: Option<Decay>) {
    bought.sort_by_key(|b| (b.first, b.item));
    for (x, a) in bought.iter().enumerate() {
        model.unigram.entry(a.item).or_default().count += 1;
        for b in &bought[x + 1..] {
            model.pairs.entry(pair_key(a.item, b.item)).or_default().count += 1;
        }
    }
    for succ in bought.iter() {
        let weight = match decay {
            Some(d) => {
                let age = (d.as_of - succ.last).max(0) as f64 / SECONDS_PER_DAY as f64;
                decay_weight(age, d.beta)
            }
            None => 1.0,
        };
        // items first bought strictly before this item's last purchase
        let prefix = bought.partition_point(|b| b.first < succ.last);
        let earlier = &bought[..prefix];
        for (x, a) in earlier.iter().enumerate() {
            if a.item == succ.item {
                continue;
            }
            model.unigram.get_mut(&a.item).expect("context counted").add(succ.item, weight);
            for b in &earlier[x + 1..] {
                if b.item == succ.item {
                    continue;
                }
                model
                    .pairs
                    .get_mut(&pair_key(a.item, b.item))
                    .expect("pair counted")
                    .add(succ.item, weight);
            }
        }
    }
}

/// How scores from several contexts are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    #[default]
    Max,
    Sum,
}

impl std::str::FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Combine::Max),
            "sum" => Ok(Combine::Sum),
            _ => Err(Error::Config(format!("unknown combine rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    /// Distinct recent items used as conditioning contexts.
    pub history: usize,
    pub combine: Combine,
    pub use_pairs: bool,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            history: 3,
            combine: Combine::Max,
            use_pairs: true,
        }
    }
}

/// Scores successors of the user's last few distinct items.
///
/// `sequence` is the user's purchase history in time order. Items in the
/// conditioning history are never returned.
pub fn predict_markov(
    model: &MarkovModel,
    sequence: &[u32],
    n: usize,
    config: &PredictConfig,
) -> Vec<(u32, f64)> {
    let context = recent_distinct(sequence, config.history);
    if context.is_empty() || n == 0 {
        return Vec::new();
    }
    let mut scores: HashMap<u32, f64> = HashMap::new();
    let mut merge = |ctx: &Context| {
        for (&i, s) in &ctx.successors {
            if context.contains(&i) || ctx.count == 0 {
                continue;
            }
            let p = s.weight / ctx.count as f64;
            let e = scores.entry(i).or_insert(0.0);
            *e = match config.combine {
                Combine::Max => e.max(p),
                Combine::Sum => *e + p,
            };
        }
    };
    for &j in &context {
        if let Some(ctx) = model.unigram.get(&j) {
            merge(ctx);
        }
    }
    if config.use_pairs {
        for (x, &a) in context.iter().enumerate() {
            for &b in &context[x + 1..] {
                if let Some(ctx) = model.pairs.get(&pair_key(a, b)) {
                    merge(ctx);
                }
            }
        }
    }
    top_n(scores.into_iter().filter(|&(_, s)| s > 0.0).collect(), n)
}
