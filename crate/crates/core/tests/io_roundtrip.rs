use std::path::Path;

use proptest::prelude::*;

use trendbias::data::{read_transactions, write_transactions, TransactionLog};
use trendbias::io::{format_score, read_bias, read_scores, write_bias, write_scores};
use trendbias::models::{fit_markov, MarkovModel};
use trendbias::{build_score_store, BiasVector, IdMap, NEG_INF};

fn ids(prefix: &str, n: usize) -> IdMap {
    let mut map = IdMap::new();
    for i in 0..n {
        map.intern(&format!("{prefix}{i}"));
    }
    map
}

fn bias_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(NEG_INF), -10.0f64..10.0, 1e-12f64..1e-6]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bias_files_round_trip_exactly(values in prop::collection::vec(bias_value(), 1..40)) {
        let items = ids("i", values.len());
        let bias = BiasVector::from_values(values);
        let mut buf = Vec::new();
        write_bias(&mut buf, &bias, &items).unwrap();
        let back = read_bias(buf.as_slice(), Path::new("b"), &items).unwrap();
        prop_assert_eq!(back, bias);
    }

    #[test]
    fn score_files_round_trip_to_nine_digits(
        rows in prop::collection::vec(prop::collection::vec((0u32..30, -1e3f64..1e3), 0..12), 1..10)
    ) {
        let users = ids("u", rows.len());
        let items = ids("i", 30);
        let store = build_score_store(&rows, 30, 12, 1).unwrap();
        let mut buf = Vec::new();
        write_scores(&mut buf, &store, &users, &items).unwrap();
        let back = read_scores(buf.as_slice(), Path::new("s"), &users, &items).unwrap();
        for (u, preds) in back.iter().enumerate() {
            let orig = store.user(u as u32).ranked();
            prop_assert_eq!(preds.len(), orig.len());
            for (a, b) in preds.iter().zip(orig) {
                prop_assert_eq!(a.0, b.0);
                prop_assert_eq!(format_score(a.1), format_score(b.1));
                prop_assert!((a.1 - b.1).abs() <= 1e-8 * b.1.abs().max(1e-300));
            }
        }
        // rewriting what was read gives the same bytes
        let again = build_score_store(&back, 30, 12, 1).unwrap();
        let mut buf2 = Vec::new();
        write_scores(&mut buf2, &again, &users, &items).unwrap();
        prop_assert_eq!(buf, buf2);
    }

    #[test]
    fn transaction_logs_round_trip(
        events in prop::collection::vec((0usize..8, 0usize..12, 0i64..5_000_000_000), 0..60)
    ) {
        let log = TransactionLog::from_events(
            events.iter().map(|&(u, i, t)| (format!("u{u}"), format!("i{i}"), t)),
        );
        let mut buf = Vec::new();
        write_transactions(&mut buf, &log).unwrap();
        let (back, stats) = read_transactions(buf.as_slice(), Path::new("t"), true).unwrap();
        prop_assert_eq!(stats.records, log.len());
        prop_assert_eq!(stats.malformed, 0);
        for (a, b) in back.records().iter().zip(log.records()) {
            prop_assert_eq!(a.time, b.time);
            prop_assert_eq!(back.users.name(a.user), log.users.name(b.user));
            prop_assert_eq!(back.items.name(a.item), log.items.name(b.item));
        }
    }

    #[test]
    fn markov_dumps_round_trip(
        events in prop::collection::vec((0u32..6, 0u32..8, 0i64..20), 0..50)
    ) {
        let log = TransactionLog::from_events(
            events.iter().map(|&(u, i, d)| (format!("u{u}"), format!("i{i}"), d * 86_400)),
        );
        let model = fit_markov(log.records(), log.n_items(), None);
        let mut buf = Vec::new();
        model.write_dump(&mut buf, &log.items).unwrap();
        let mut items = log.items.clone();
        let back = MarkovModel::read_dump(buf.as_slice(), &mut items).unwrap();
        prop_assert_eq!(items.len(), log.items.len());
        prop_assert_eq!(back.unigram, model.unigram);
        prop_assert_eq!(back.pairs, model.pairs);
    }
}

#[test]
fn malformed_lines_are_counted_or_fatal() {
    let text = "u1\ti1\t2024-01-02\n# comment\nu2\ti2\n\nu3\ti3\tnot-a-date\nu1\ti2\t2024-01-01T10:00:00Z\n";
    let (log, stats) = read_transactions(text.as_bytes(), Path::new("t"), false).unwrap();
    assert_eq!(log.len(), 2);
    assert_eq!(stats.malformed, 2);
    // sorted by time
    assert_eq!(log.items.name(log.records()[0].item), "i2");
    assert!(read_transactions(text.as_bytes(), Path::new("t"), true).is_err());
}

#[test]
fn unknown_ids_are_named() {
    let users = ids("u", 2);
    let items = ids("i", 2);
    let err = read_scores("u0\tzz\t1.0\n".as_bytes(), Path::new("s"), &users, &items).unwrap_err();
    assert!(err.to_string().contains("zz"));
    let err = read_bias("q\t0.5\n".as_bytes(), Path::new("b"), &items).unwrap_err();
    assert!(err.to_string().contains("`q`"));
}
