use crate::error::{Error, Result};

use super::log::{Transaction, TransactionLog, SECONDS_PER_DAY};

/// Train, recent and test windows of one log. All intervals are half-open:
/// train `[.., recent_start)`, recent `[recent_start, split_time)`, test
/// `[split_time, test_end)`.
#[derive(Debug, Clone, Copy)]
pub struct TemporalSplit<'a> {
    pub train: &'a [Transaction],
    pub recent: &'a [Transaction],
    pub test: &'a [Transaction],
    /// Train followed by recent.
    pub history: &'a [Transaction],
    pub recent_start: i64,
    pub split_time: i64,
    pub test_end: i64,
}

pub fn temporal_split(
    log: &TransactionLog,
    split_time: i64,
    recent_days: u32,
    test_days: u32,
) -> Result<TemporalSplit<'_>> {
    if recent_days == 0 {
        return Err(Error::Config("recent_days must be positive".into()));
    }
    if test_days == 0 {
        return Err(Error::Config("test_days must be positive".into()));
    }
    if log.is_empty() {
        return Err(Error::Split("transaction log is empty".into()));
    }
    let recent_start = split_time - recent_days as i64 * SECONDS_PER_DAY;
    let test_end = split_time + test_days as i64 * SECONDS_PER_DAY;
    let history = log.window(i64::MIN, split_time);
    let cut = history.partition_point(|r| r.time < recent_start);
    let test = log.window(split_time, test_end);
    if test.is_empty() {
        return Err(Error::Split(format!(
            "test window [{}, {}) contains no transactions",
            super::format_timestamp(split_time),
            super::format_timestamp(test_end)
        )));
    }
    Ok(TemporalSplit {
        train: &history[..cut],
        recent: &history[cut..],
        test,
        history,
        recent_start,
        split_time,
        test_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: i64 = SECONDS_PER_DAY;

    #[test]
    fn everything_before_split_is_an_error() {
        let log = TransactionLog::from_events([("u", "a", 0), ("u", "b", DAY)]);
        assert!(matches!(temporal_split(&log, 10 * DAY, 3, 7), Err(Error::Split(_))));
    }

    #[test]
    fn boundaries_are_half_open() {
        let split = 10 * DAY;
        let times = [
            split - 3 * DAY - 1,
            split - 3 * DAY,
            split - 1,
            split,
            split + 7 * DAY - 1,
            split + 7 * DAY,
        ];
        let log = TransactionLog::from_events(times.iter().map(|&t| ("u", "a", t)));
        let s = temporal_split(&log, split, 3, 7).unwrap();
        assert_eq!(s.train.iter().map(|r| r.time).collect::<Vec<_>>(), [times[0]]);
        assert_eq!(s.recent.iter().map(|r| r.time).collect::<Vec<_>>(), [times[1], times[2]]);
        assert_eq!(s.test.iter().map(|r| r.time).collect::<Vec<_>>(), [times[3], times[4]]);
        assert_eq!(s.history.len(), 3);
        for r in s.train {
            assert!(r.time < s.recent_start);
        }
        for r in s.recent {
            assert!(r.time >= s.recent_start && r.time < s.split_time);
        }
        for r in s.test {
            assert!(r.time >= s.split_time && r.time < s.test_end);
        }
    }

    #[test]
    fn zero_windows_rejected() {
        let log = TransactionLog::from_events([("u", "a", 0)]);
        assert!(matches!(temporal_split(&log, 0, 0, 7), Err(Error::Config(_))));
        assert!(matches!(temporal_split(&log, 0, 3, 0), Err(Error::Config(_))));
        assert!(matches!(
            temporal_split(&TransactionLog::default(), 0, 3, 7),
            Err(Error::Split(_))
        ));
    }
}
