use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::ids::IdMap;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One purchase event with dense ids and a UTC timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub user: u32,
    pub item: u32,
    pub time: i64,
}

/// Purchase events sorted by time, ties kept in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransactionLog {
    pub users: IdMap,
    pub items: IdMap,
    records: Vec<Transaction>,
}

impl TransactionLog {
    pub fn new(users: IdMap, items: IdMap, mut records: Vec<Transaction>) -> Self {
        records.sort_by_key(|r| r.time);
        Self {
            users,
            items,
            records,
        }
    }

    /// Builds a log from external ids, interning them in first-seen order.
    pub fn from_events<U, I>(events: impl IntoIterator<Item = (U, I, i64)>) -> Self
    where
        U: AsRef<str>,
        I: AsRef<str>,
    {
        let mut users = IdMap::new();
        let mut items = IdMap::new();
        let records = events
            .into_iter()
            .map(|(u, i, time)| Transaction {
                user: users.intern(u.as_ref()),
                item: items.intern(i.as_ref()),
                time,
            })
            .collect();
        Self::new(users, items, records)
    }

    pub fn records(&self) -> &[Transaction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Records with `start <= time < end`.
    pub fn window(&self, start: i64, end: i64) -> &[Transaction] {
        let lo = self.records.partition_point(|r| r.time < start);
        let hi = self.records.partition_point(|r| r.time < end).max(lo);
        &self.records[lo..hi]
    }

    pub fn first_time(&self) -> Option<i64> {
        self.records.first().map(|r| r.time)
    }

    pub fn last_time(&self) -> Option<i64> {
        self.records.last().map(|r| r.time)
    }
}

/// Accepts RFC 3339, a naive `YYYY-MM-DDTHH:MM:SS` (read as UTC) or a bare date.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

pub fn format_timestamp(secs: i64) -> String {
    DateTime::<Utc>::from_timestamp(secs, 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| secs.to_string())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub records: usize,
    pub comments: usize,
    pub malformed: usize,
}

fn parse_line(line: &str) -> std::result::Result<(&str, &str, i64), String> {
    let mut fields = line.split('\t');
    let (Some(user), Some(item), Some(ts)) = (fields.next(), fields.next(), fields.next()) else {
        return Err("expected 3 tab-separated fields".into());
    };
    if fields.next().is_some() {
        return Err("expected 3 tab-separated fields".into());
    }
    let (user, item) = (user.trim(), item.trim());
    if user.is_empty() || item.is_empty() {
        return Err("empty user or item id".into());
    }
    let time = parse_timestamp(ts).ok_or_else(|| format!("bad timestamp `{}`", ts.trim()))?;
    Ok((user, item, time))
}

/// Reads `user<TAB>item<TAB>timestamp` lines. Blank lines and lines starting
/// with `#` are skipped. Malformed lines are counted and skipped, or abort the
/// read when `strict` is set.
pub fn read_transactions<R: BufRead>(
    reader: R,
    path: &Path,
    strict: bool,
) -> Result<(TransactionLog, ParseStats)> {
    let mut stats = ParseStats::default();
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            stats.comments += 1;
            continue;
        }
        match parse_line(line) {
            Ok((u, i, time)) => records.push(Transaction {
                user: users.intern(u),
                item: items.intern(i),
                time,
            }),
            Err(message) => {
                if strict {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line: idx + 1,
                        message,
                    });
                }
                log::warn!("{}:{}: skipping malformed line: {message}", path.display(), idx + 1);
                stats.malformed += 1;
            }
        }
    }
    stats.records = records.len();
    Ok((TransactionLog::new(users, items, records), stats))
}

pub fn parse_transactions(path: &Path, strict: bool) -> Result<(TransactionLog, ParseStats)> {
    let file = File::open(path)?;
    read_transactions(BufReader::new(file), path, strict)
}

pub fn write_transactions<W: Write>(mut out: W, log: &TransactionLog) -> Result<()> {
    for r in log.records() {
        writeln!(
            out,
            "{}\t{}\t{}",
            log.users.name(r.user),
            log.items.name(r.item),
            format_timestamp(r.time)
        )?;
    }
    out.flush()?;
    Ok(())
}
