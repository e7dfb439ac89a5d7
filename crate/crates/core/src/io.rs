//! Text formats for scores, biases, taxonomies and comparison reports.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::bias::{BiasVector, NEG_INF};
use crate::error::{Error, Result};
use crate::experiment::CompareReport;
use crate::ids::IdMap;
use crate::metrics::MetricKind;
use crate::models::Taxonomy;
use crate::scores::ScoreStore;

/// Token used for an excluded item in bias files.
pub const EXCLUDED_TOKEN: &str = "-inf";

/// Rounds to 9 significant digits and prints the shortest form of the result.
pub fn format_score(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn format_bias(b: f64) -> String {
    if crate::bias::is_excluded(b) {
        EXCLUDED_TOKEN.to_owned()
    } else {
        format!("{b}")
    }
}

pub fn parse_bias(s: &str) -> Option<f64> {
    let s = s.trim();
    if s == EXCLUDED_TOKEN {
        return Some(NEG_INF);
    }
    s.parse::<f64>().ok().filter(|b| b.is_finite())
}

/// Writes `user<TAB>item<TAB>score` for every stored entry, users in index
/// order and each user's entries in ranking order.
pub fn write_scores<W: Write>(mut out: W, store: &ScoreStore, users: &IdMap, items: &IdMap) -> Result<()> {
    for u in 0..store.n_users() as u32 {
        for &(i, s) in store.user(u).ranked() {
            writeln!(out, "{}\t{}\t{}", users.name(u), items.name(i), format_score(s))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

/// Reads a score file into per-user prediction lists indexed by the dense
/// ids of `users` and `items`. Ids missing from either map are an error.
pub fn read_scores<R: BufRead>(
    reader: R,
    path: &Path,
    users: &IdMap,
    items: &IdMap,
) -> Result<Vec<Vec<(u32, f64)>>> {
    let mut preds = vec![Vec::new(); users.len()];
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(parse_error(path, idx + 1, "expected `user<TAB>item<TAB>score`"));
        }
        let user = users.get(f[0].trim()).ok_or_else(|| Error::UnknownId {
            kind: "user",
            id: f[0].trim().to_owned(),
        })?;
        let item = items.get(f[1].trim()).ok_or_else(|| Error::UnknownId {
            kind: "item",
            id: f[1].trim().to_owned(),
        })?;
        let score: f64 = f[2]
            .trim()
            .parse()
            .map_err(|e| parse_error(path, idx + 1, format!("bad score `{}`: {e}", f[2].trim())))?;
        preds[user as usize].push((item, score));
    }
    Ok(preds)
}

/// Writes `item<TAB>bias` for every item in index order.
pub fn write_bias<W: Write>(mut out: W, bias: &BiasVector, items: &IdMap) -> Result<()> {
    for (i, b) in bias.iter() {
        writeln!(out, "{}\t{}", items.name(i), format_bias(b))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a bias file over `items`; items not listed keep bias 0.
pub fn read_bias<R: BufRead>(reader: R, path: &Path, items: &IdMap) -> Result<BiasVector> {
    let mut bias = BiasVector::zeros(items.len());
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((item, value)) = line.split_once('\t') else {
            return Err(parse_error(path, idx + 1, "expected `item<TAB>bias`"));
        };
        let i = items.get(item.trim()).ok_or_else(|| Error::UnknownId {
            kind: "item",
            id: item.trim().to_owned(),
        })?;
        let b = parse_bias(value)
            .ok_or_else(|| parse_error(path, idx + 1, format!("bad bias `{}`", value.trim())))?;
        bias.set(i, b);
    }
    Ok(bias)
}

pub fn write_taxonomy<W: Write>(mut out: W, taxonomy: &Taxonomy, items: &IdMap) -> Result<()> {
    for (item, cat) in taxonomy.rows(items) {
        writeln!(out, "{item}\t{cat}")?;
    }
    out.flush()?;
    Ok(())
}

/// Provenance written at the top of every report.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ReportHeader {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl ReportHeader {
    fn line(&self) -> String {
        match self.seed {
            Some(seed) => format!("# config_hash={}\tseed={seed}", self.config_hash),
            None => format!("# config_hash={}\tseed=none", self.config_hash),
        }
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_lift(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.3}"))
}

/// Lift table: one row per strategy with metric values, lifts in percent
/// over the baseline and the KL diagnostic.
pub fn write_lift_table<W: Write>(mut out: W, report: &CompareReport, header: &ReportHeader) -> Result<()> {
    let k = report.k;
    writeln!(out, "{}", header.line())?;
    write!(out, "strategy\tusers")?;
    for kind in MetricKind::ALL {
        write!(out, "\t{kind}@{k}")?;
    }
    for kind in MetricKind::ALL {
        write!(out, "\tlift_{kind}@{k}_pct")?;
    }
    writeln!(out, "\tkl")?;
    for row in &report.rows {
        write!(out, "{}\t{}", row.strategy, row.report.n_users)?;
        for kind in MetricKind::ALL {
            write!(out, "\t{}", fmt_value(row.report.get(kind)))?;
        }
        for kind in MetricKind::ALL {
            write!(out, "\t{}", fmt_lift(row.lift.get(kind)))?;
        }
        writeln!(out, "\t{}", fmt_value(row.kl))?;
    }
    out.flush()?;
    Ok(())
}

/// Coverage table: overlap of the L most purchased and most recommended items.
pub fn write_overlap_table<W: Write>(mut out: W, report: &CompareReport, header: &ReportHeader) -> Result<()> {
    writeln!(out, "{}", header.line())?;
    writeln!(out, "strategy\tlevel\teffective_level\toverlap")?;
    for row in &report.rows {
        for o in &row.overlap {
            writeln!(out, "{}\t{}\t{}\t{}", row.strategy, o.level, o.effective_level, o.overlap)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Long-format table for plotting: metric, strategy, value, lift.
pub fn write_plot_table<W: Write>(mut out: W, report: &CompareReport, header: &ReportHeader) -> Result<()> {
    writeln!(out, "{}", header.line())?;
    writeln!(out, "metric\tstrategy\tvalue\tlift_pct")?;
    for kind in MetricKind::ALL {
        for row in &report.rows {
            writeln!(
                out,
                "{kind}@{}\t{}\t{}\t{}",
                report.k,
                row.strategy,
                fmt_value(row.report.get(kind)),
                fmt_lift(row.lift.get(kind))
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::build_score_store;

    #[test]
    fn score_formatting_keeps_nine_digits() {
        assert_eq!(format_score(0.123456789123), "0.123456789");
        assert_eq!(format_score(1.0), "1");
        assert_eq!(format_score(2.0 / 3.0), "0.666666667");
        assert_eq!(format_score(-1234567891.0), "-1234567890");
        assert_eq!(format_score(1.5e-12), "0.0000000000015");
    }

    #[test]
    fn scores_round_trip() {
        let users: IdMap = ["u1", "u2"].into_iter().collect();
        let items: IdMap = ["a", "b", "c"].into_iter().collect();
        let store = build_score_store(&[vec![(0, 0.5), (2, 0.25)], vec![(1, 1.0 / 3.0)]], 3, 5, 1).unwrap();
        let mut buf = Vec::new();
        write_scores(&mut buf, &store, &users, &items).unwrap();
        assert_eq!(std::str::from_utf8(&buf).unwrap(), "u1\ta\t0.5\nu1\tc\t0.25\nu2\tb\t0.333333333\n");
        let preds = read_scores(buf.as_slice(), Path::new("s"), &users, &items).unwrap();
        assert_eq!(preds[0], vec![(0, 0.5), (2, 0.25)]);
        assert_eq!(preds[1], vec![(1, 0.333333333)]);
    }

    #[test]
    fn unknown_ids_are_named() {
        let users: IdMap = ["u1"].into_iter().collect();
        let items: IdMap = ["a"].into_iter().collect();
        match read_scores("u1\tzz\t0.5\n".as_bytes(), Path::new("s"), &users, &items) {
            Err(Error::UnknownId { kind, id }) => assert_eq!((kind, id.as_str()), ("item", "zz")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_bias("q\t1\n".as_bytes(), Path::new("b"), &items).is_err());
    }

    #[test]
    fn bias_round_trip_with_sentinel() {
        let items: IdMap = ["a", "b", "c"].into_iter().collect();
        let bias = BiasVector::from_values(vec![0.1 + 0.2, NEG_INF, -3.5e-7]);
        let mut buf = Vec::new();
        write_bias(&mut buf, &bias, &items).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("b\t-inf\n"));
        let back = read_bias(buf.as_slice(), Path::new("b"), &items).unwrap();
        assert_eq!(back, bias);
    }
}
