use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trendbias::bias::is_excluded;
use trendbias::data::{temporal_split, TransactionLog, SECONDS_PER_DAY};
use trendbias::experiment::recommend;
use trendbias::metrics::MetricKind;
use trendbias::optimizer::objective;
use trendbias::strategies::{
    base_predictions, learn_recent_bias, normalize_per_user, relevance_from, run_strategy,
    truncation_bias, BaseModel, Experiment, StrategyKind, StrategySpec,
};
use trendbias::{build_score_store, learn_biases, select_topk, BiasVector, Error, OptimizerConfig, RelevanceSet};

const DAY: i64 = SECONDS_PER_DAY;

/// Random log over `days` days; user `u` buys 0..=2 items a day.
fn random_log(seed: u64, users: usize, items: usize, days: i64) -> TransactionLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for d in 0..days {
        for u in 0..users {
            for _ in 0..rng.random_range(0..=2) {
                // skewed towards low item indices
                let i = (rng.random::<f64>().powi(2) * items as f64) as usize;
                let t = d * DAY + rng.random_range(0..DAY);
                events.push((format!("u{u:03}"), format!("i{i:03}"), t));
            }
        }
    }
    TransactionLog::from_events(events)
}

fn spec(kind: MetricKind) -> StrategySpec {
    let mut spec = StrategySpec {
        capacity: 25,
        optimizer: OptimizerConfig::with_metric(kind, 5),
        ..StrategySpec::default()
    };
    spec.optimizer.max_cycles = 5;
    spec
}

fn experiment(log: &TransactionLog, split_day: i64) -> Experiment<'_> {
    Experiment {
        split: temporal_split(log, split_day * DAY, 3, 7).unwrap(),
        n_users: log.n_users(),
        n_items: log.n_items(),
        taxonomy: None,
    }
}

fn test_users(exp: &Experiment<'_>) -> Vec<u32> {
    relevance_from(exp.split.test, exp.n_items).users().to_vec()
}

#[test]
fn truncate_equals_long_when_every_item_sold_recently() {
    // 40 items, every one of them bought in the recent window
    let mut events = Vec::new();
    for u in 0..30 {
        for d in 0..20 {
            events.push((format!("u{u}"), format!("i{}", (u * 7 + d * 3) % 40), d * DAY + u));
        }
    }
    for i in 0..40 {
        events.push((format!("u{}", i % 30), format!("i{i}"), 17 * DAY + i));
        events.push((format!("u{}", i % 30), format!("i{}", (i + 1) % 40), 21 * DAY + i));
    }
    let log = TransactionLog::from_events(events);
    let exp = experiment(&log, 20);
    assert!(is_all_sold(&exp));
    let users = test_users(&exp);
    let s = spec(MetricKind::Acc);
    let long = run_strategy(StrategyKind::Long, &s, &exp, &users).unwrap();
    let trunc = run_strategy(StrategyKind::Truncate, &s, &exp, &users).unwrap();
    assert_eq!(trunc.bias, BiasVector::zeros(exp.n_items));
    assert_eq!(trunc.scores, long.scores);
    for &u in &users {
        assert_eq!(
            select_topk(long.scores.user(u), &long.bias, 5),
            select_topk(trunc.scores.user(u), &trunc.bias, 5)
        );
    }
}

fn is_all_sold(exp: &Experiment<'_>) -> bool {
    let mut sold = vec![false; exp.n_items];
    exp.split.recent.iter().for_each(|r| sold[r.item as usize] = true);
    sold.into_iter().all(|s| s)
}

#[test]
fn distrdiff_with_identical_windows_has_zero_bias() {
    // the recent 3 days repeat the same purchases as the 3 days before
    let mut events = Vec::new();
    for d in [14, 17] {
        for u in 0..12 {
            for j in 0..3 {
                events.push((format!("u{u}"), format!("i{}", (u + j * 5) % 9), (d + j) * DAY + u));
            }
        }
    }
    for u in 0..12 {
        events.push((format!("u{u}"), format!("i{}", u % 9), 21 * DAY));
    }
    let log = TransactionLog::from_events(events);
    let exp = experiment(&log, 20);
    let users = test_users(&exp);
    let s = spec(MetricKind::Acc);
    let out = run_strategy(StrategyKind::Distrdiff, &s, &exp, &users).unwrap();
    assert!(out.bias.as_slice().iter().all(|&b| b == 0.0), "{:?}", out.bias);
    let long = run_strategy(StrategyKind::Long, &s, &exp, &users).unwrap();
    assert_eq!(out.scores, normalize_per_user(&long.scores, 5).unwrap());
    for &u in &users {
        let total: f64 = out.scores.user(u).ranked().iter().map(|e| e.1).sum();
        if !out.scores.user(u).is_empty() {
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn bias_on_own_topk_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, m, k) = (40, 30, 4);
    let mut preds: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for row in preds.iter_mut() {
        for i in 0..m as u32 {
            if rng.random_bool(0.5) {
                row.push((i, rng.random()));
            }
        }
    }
    let store = build_score_store(&preds, m, 20, k).unwrap();
    let zero = BiasVector::zeros(m);
    let lists: Vec<Vec<u32>> = (0..n as u32).map(|u| select_topk(store.user(u), &zero, k)).collect();
    let relevance = RelevanceSet::from_lists(m, &lists);
    for kind in MetricKind::ALL {
        let outcome = learn_biases(&store, &relevance, OptimizerConfig::with_metric(kind, k)).unwrap();
        assert_eq!(outcome.accepted_updates, 0, "{kind}");
        for (i, b) in outcome.bias.iter() {
            assert!(b == 0.0 || is_excluded(b), "{kind}: item {i} got bias {b}");
        }
        let recs = recommend(&store, &outcome.bias, &relevance, k);
        assert_eq!(recs.lists, recommend(&store, &zero, &relevance, k).lists);
    }
}

#[test]
fn bias_objective_never_below_long_on_recent_relevance() {
    for seed in 0..4 {
        let log = random_log(seed, 60, 40, 30);
        let exp = experiment(&log, 23);
        let relevance = relevance_from(exp.split.recent, exp.n_items);
        for kind in MetricKind::ALL {
            let s = spec(kind);
            let outcome = learn_recent_bias(&s, &exp).unwrap();
            assert!(outcome.final_objective >= outcome.initial_objective, "{kind}");
            let split = &exp.split;
            let preds = base_predictions(
                &s.base,
                &exp,
                split.train,
                split.recent_start,
                split.train,
                relevance.users(),
                s.capacity,
                None,
            )
            .unwrap();
            let store = build_score_store(&preds, exp.n_items, s.capacity, s.k()).unwrap();
            let metric = s.optimizer.metric;
            let before = objective(&store, &BiasVector::zeros(exp.n_items), &relevance, metric);
            let after = objective(&store, &outcome.bias, &relevance, metric);
            assert!(after >= before, "seed {seed} {kind}: {after} < {before}");
            // the learner starts after pruning, which never lowers the metric
            assert!(before <= outcome.initial_objective + 1e-12);
            assert!((after - outcome.final_objective).abs() < 1e-9);
        }
    }
}

#[test]
fn truncate_is_bias_learning_with_zero_cycles() {
    for seed in 10..14 {
        let log = random_log(seed, 50, 60, 30);
        let exp = experiment(&log, 23);
        let mut s = spec(MetricKind::Acc);
        s.optimizer.max_cycles = 0;
        let outcome = learn_recent_bias(&s, &exp).unwrap();
        assert!(outcome.cycles.is_empty());
        assert_eq!(outcome.bias, truncation_bias(exp.split.recent, exp.n_items), "seed {seed}");
        let users = test_users(&exp);
        let trunc = run_strategy(StrategyKind::Truncate, &s, &exp, &users).unwrap();
        assert_eq!(trunc.bias, outcome.bias);
    }
}

#[test]
fn strategies_needing_recent_data_reject_empty_window() {
    let mut events = Vec::new();
    for u in 0..5 {
        events.push((format!("u{u}"), format!("i{u}"), DAY + u));
        events.push((format!("u{u}"), format!("i{}", u + 1), 30 * DAY + u));
    }
    let log = TransactionLog::from_events(events);
    let exp = experiment(&log, 30);
    assert!(exp.split.recent.is_empty());
    let users = test_users(&exp);
    let s = spec(MetricKind::Acc);
    for kind in [StrategyKind::Bias, StrategyKind::Truncate, StrategyKind::Distrdiff] {
        let err = run_strategy(kind, &s, &exp, &users).unwrap_err();
        assert!(matches!(err, Error::Strategy(_)), "{kind}: {err}");
    }
    assert!(run_strategy(StrategyKind::Long, &s, &exp, &users).is_ok());
}

#[test]
fn decay_requires_markov_base() {
    let log = random_log(3, 20, 15, 25);
    let exp = experiment(&log, 20);
    let users = test_users(&exp);
    let s = StrategySpec {
        base: BaseModel::Popularity,
        ..spec(MetricKind::Acc)
    };
    assert!(matches!(
        run_strategy(StrategyKind::Decay, &s, &exp, &users),
        Err(Error::Strategy(_))
    ));
}

#[test]
fn decay_with_huge_beta_matches_long() {
    let log = random_log(8, 40, 30, 25);
    let exp = experiment(&log, 20);
    let users = test_users(&exp);
    let s = StrategySpec {
        beta: 1e12,
        capacity: 100,
        ..spec(MetricKind::Acc)
    };
    let long = run_strategy(StrategyKind::Long, &s, &exp, &users).unwrap();
    let decay = run_strategy(StrategyKind::Decay, &s, &exp, &users).unwrap();
    for &u in &users {
        // near-ties may reorder, so compare by item
        let mut a = long.scores.user(u).ranked().to_vec();
        let mut b = decay.scores.user(u).ranked().to_vec();
        assert!(a.len() < s.capacity);
        a.sort_by_key(|e| e.0);
        b.sort_by_key(|e| e.0);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-9);
        }
    }
}
