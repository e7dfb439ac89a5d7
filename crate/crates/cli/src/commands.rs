use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;
use trendbias::data::{
    generate_drift, parse_transactions, temporal_split, write_transactions, TemporalSplit,
    TransactionLog, SECONDS_PER_DAY,
};
use trendbias::experiment::{self, CompareConfig, CompareReport};
use trendbias::io::{self, ReportHeader};
use trendbias::metrics::{kl_divergence_smoothed, top_popular_overlap, MetricKind};
use trendbias::models::{fit_category, fit_markov, fit_popularity, Decay, Taxonomy};
use trendbias::strategies::{base_predictions, relevance_from, BaseModel, Experiment};
use trendbias::{build_score_store, BiasLearner, BiasVector};

use crate::config::{BaseKind, RunConfig};
use crate::{EvaluateArgs, FitArgs, FitWindow, GenerateArgs, LearnBiasArgs, PredictArgs, Target};

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn out_path(cfg: &RunConfig, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| cfg.output_dir().join(name))
}

fn header(cfg: &RunConfig) -> ReportHeader {
    ReportHeader {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

fn load_log(cfg: &RunConfig) -> Result<TransactionLog> {
    let path = cfg.transactions()?;
    let (log, stats) = parse_transactions(path, cfg.input.strict)
        .with_context(|| format!("reading transactions {}", path.display()))?;
    if stats.malformed > 0 {
        warn!("{}: skipped {} malformed lines", path.display(), stats.malformed);
    }
    info!(
        "{} transactions, {} users, {} items",
        log.len(),
        log.n_users(),
        log.n_items()
    );
    Ok(log)
}

fn load_taxonomy(cfg: &RunConfig, log: &TransactionLog) -> Result<Option<Taxonomy>> {
    match &cfg.input.taxonomy {
        Some(p) => Ok(Some(
            Taxonomy::read(open(p)?, p, &log.items)
                .with_context(|| format!("reading taxonomy {}", p.display()))?,
        )),
        None => Ok(None),
    }
}

/// Train, recent and test windows. The test window may only be empty when
/// `require_test` is off.
fn windows<'a>(cfg: &RunConfig, log: &'a TransactionLog, require_test: bool) -> Result<TemporalSplit<'a>> {
    let split_time = cfg.split_time(log.last_time());
    let (recent_days, test_days) = (cfg.split.recent_days, cfg.split.test_days);
    if require_test {
        return Ok(temporal_split(log, split_time, recent_days, test_days)?);
    }
    let recent_start = split_time - recent_days as i64 * SECONDS_PER_DAY;
    let test_end = split_time + test_days as i64 * SECONDS_PER_DAY;
    let history = log.window(i64::MIN, split_time);
    let cut = history.partition_point(|r| r.time < recent_start);
    Ok(TemporalSplit {
        train: &history[..cut],
        recent: &history[cut..],
        test: log.window(split_time, test_end),
        history,
        recent_start,
        split_time,
        test_end,
    })
}

fn require_markov(cfg: &RunConfig, flag: &str) -> Result<()> {
    if cfg.strategies.base != BaseKind::Markov {
        bail!("{flag} needs strategies.base = markov");
    }
    Ok(())
}

pub fn apply_generate_flags(cfg: &mut RunConfig, a: &GenerateArgs) {
    let g = &mut cfg.generate;
    let fields = [
        (&mut g.n_users, a.users),
        (&mut g.m_items, a.items),
        (&mut g.n_days, a.days),
        (&mut g.n_categories, a.categories),
    ];
    for (slot, v) in fields {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(v) = a.churn_rate {
        g.churn_rate = v;
    }
    if let Some(v) = a.trend_spike {
        g.trend_spike = v;
    }
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let data = generate_drift(&cfg.generate)?;
    let out = cfg.output_dir();
    let log_path = out.join("transactions.tsv");
    let tax_path = out.join("taxonomy.tsv");
    write_transactions(create(&log_path)?, &data.log)?;
    io::write_taxonomy(create(&tax_path)?, &data.taxonomy, &data.log.items)?;
    println!("transactions\t{}", data.log.len());
    println!("users\t{}", data.log.n_users());
    println!("items\t{}", data.log.n_items());
    println!("log\t{}", log_path.display());
    println!("taxonomy\t{}", tax_path.display());
    Ok(())
}

pub fn fit(cfg: &RunConfig, a: &FitArgs) -> Result<()> {
    let log = load_log(cfg)?;
    let split = windows(cfg, &log, false)?;
    let (records, end) = match a.window {
        FitWindow::Train => (split.train, split.recent_start),
        FitWindow::History => (split.history, split.split_time),
    };
    if records.is_empty() {
        warn!("fit window is empty; writing an empty model");
    }
    if a.decay {
        require_markov(cfg, "--decay")?;
    }
    let m = log.n_items();
    let base = cfg.strategies.base;
    let name = match base {
        BaseKind::Markov => "model.markov",
        BaseKind::Popularity => "model.popularity",
        BaseKind::Category => "model.category",
    };
    let path = out_path(cfg, &a.output, name);
    let mut out = create(&path)?;
    println!("transactions\t{}", records.len());
    match base {
        BaseKind::Markov => {
            let decay = a.decay.then_some(Decay {
                beta: cfg.strategies.beta,
                as_of: end,
            });
            let model = fit_markov(records, m, decay);
            model.write_dump(&mut out, &log.items)?;
            println!("contexts\t{}", model.unigram.len());
            println!("pair_contexts\t{}", model.pairs.len());
            println!("transitions\t{}", model.n_transitions());
            println!("pair_transitions\t{}", model.n_pair_transitions());
        }
        BaseKind::Popularity => {
            let model = fit_popularity(records, m);
            writeln!(out, "item\tcount\tprobability")?;
            let mut sold = 0;
            for i in 0..m as u32 {
                let c = model.counts[i as usize];
                if c > 0.0 {
                    sold += 1;
                    writeln!(out, "{}\t{c}\t{}", log.items.name(i), model.probability(i))?;
                }
            }
            println!("items_sold\t{sold}");
        }
        BaseKind::Category => {
            let taxonomy = load_taxonomy(cfg, &log)?.expect("validated: taxonomy present");
            let model = fit_category(records, records, &taxonomy, log.n_users());
            writeln!(out, "item\tcategory\tprobability")?;
            for i in 0..m as u32 {
                let p = model.item_probability[i as usize];
                if p > 0.0 {
                    let c = taxonomy.category_name(taxonomy.category(i));
                    writeln!(out, "{}\t{c}\t{p}", log.items.name(i))?;
                }
            }
            let with_interest = model.interest.iter().filter(|v| !v.is_empty()).count();
            println!("categories\t{}", taxonomy.n_categories());
            println!("users_with_interest\t{with_interest}");
        }
    }
    out.flush()?;
    println!("model\t{}", path.display());
    Ok(())
}

pub fn predict(cfg: &RunConfig, a: &PredictArgs) -> Result<()> {
    let log = load_log(cfg)?;
    let taxonomy = load_taxonomy(cfg, &log)?;
    let split = windows(cfg, &log, a.target == Target::Test)?;
    let exp = Experiment {
        split,
        n_users: log.n_users(),
        n_items: log.n_items(),
        taxonomy: taxonomy.as_ref(),
    };
    let (fit, end, targets) = match a.target {
        Target::Test => (split.history, split.split_time, split.test),
        Target::Recent => (split.train, split.recent_start, split.recent),
    };
    if targets.is_empty() {
        bail!("the {:?} window has no purchases to predict for", a.target);
    }
    if a.decay {
        require_markov(cfg, "--decay")?;
    }
    let decay = a.decay.then_some(Decay {
        beta: cfg.strategies.beta,
        as_of: end,
    });
    let users = relevance_from(targets, exp.n_items).users().to_vec();
    let base: BaseModel = cfg.base_model();
    let capacity = cfg.capacity();
    let preds = base_predictions(&base, &exp, fit, end, fit, &users, capacity, decay)?;
    let store = build_score_store(&preds, exp.n_items, capacity, cfg.metric.k)?;
    let path = out_path(cfg, &a.output, "scores.tsv");
    io::write_scores(create(&path)?, &store, &log.users, &log.items)?;
    println!("users\t{}", users.len());
    println!("entries\t{}", store.total_entries());
    println!("scores\t{}", path.display());
    Ok(())
}

fn read_store(cfg: &RunConfig, log: &TransactionLog, path: &Path) -> Result<trendbias::ScoreStore> {
    let preds = io::read_scores(open(path)?, path, &log.users, &log.items)
        .with_context(|| format!("reading scores {}", path.display()))?;
    Ok(build_score_store(&preds, log.n_items(), cfg.capacity(), cfg.metric.k)?)
}

pub fn learn_bias(cfg: &RunConfig, a: &LearnBiasArgs) -> Result<()> {
    let log = load_log(cfg)?;
    let split = windows(cfg, &log, false)?;
    let relevance = relevance_from(split.recent, log.n_items());
    if relevance.is_empty() {
        bail!("the recent window has no purchases");
    }
    let store = read_store(cfg, &log, &a.scores)?;
    let mut opt = cfg.optimizer_config();
    if let Some(p) = &a.warm_start {
        let warm = io::read_bias(open(p)?, p, &log.items)
            .with_context(|| format!("reading warm start {}", p.display()))?;
        opt.warm_start = Some(warm);
    }
    let metric = opt.metric;
    let search = if metric.kind.is_rank_based() { "rank" } else { "acc" };
    let learner = BiasLearner::new(&store, &relevance, opt)?;
    let outcome = learner.run();
    for c in &outcome.cycles {
        info!(
            "cycle {}: {} items changed, objective {:.6}",
            c.cycle, c.items_changed, c.objective
        );
    }

    let meta = format!(
        "# metric={}@{}\tsearch={search}\twarm_start={}\tusers={}\tcandidates={}\tpruned={}",
        metric.kind,
        metric.k,
        a.warm_start.as_ref().map_or("none".into(), |p| p.display().to_string()),
        relevance.n_users(),
        outcome.candidates,
        outcome.pruned
    );
    let h = header(cfg);
    let hash_line = format!(
        "# config_hash={}\tseed={}",
        h.config_hash,
        h.seed.map_or("none".into(), |s| s.to_string())
    );

    let bias_path = out_path(cfg, &a.output, "bias.tsv");
    let mut out = create(&bias_path)?;
    writeln!(out, "{hash_line}")?;
    writeln!(out, "{meta}")?;
    io::write_bias(&mut out, &outcome.bias, &log.items)?;

    let progress_path = bias_path.with_file_name(format!(
        "{}.progress.tsv",
        bias_path.file_stem().and_then(|s| s.to_str()).unwrap_or("bias")
    ));
    let mut progress = create(&progress_path)?;
    writeln!(progress, "{hash_line}")?;
    writeln!(progress, "{meta}")?;
    writeln!(progress, "cycle\titems_changed\tgain\tobjective")?;
    writeln!(progress, "0\t0\t0\t{:.9}", outcome.initial_objective)?;
    for c in &outcome.cycles {
        writeln!(progress, "{}\t{}\t{:.9}\t{:.9}", c.cycle, c.items_changed, c.gain, c.objective)?;
    }
    progress.flush()?;

    let excluded = outcome.bias.iter().filter(|&(_, b)| trendbias::bias::is_excluded(b)).count();
    println!("metric\t{}@{}", metric.kind, metric.k);
    println!("search\t{search}");
    println!("initial_objective\t{:.6}", outcome.initial_objective);
    println!("final_objective\t{:.6}", outcome.final_objective);
    println!("cycles\t{}", outcome.cycles.len());
    println!("accepted_updates\t{}", outcome.accepted_updates);
    println!("nonzero_bias\t{}", outcome.bias.non_zero());
    println!("excluded\t{excluded}");
    println!("stop\t{:?}", outcome.stop);
    println!("bias\t{}", bias_path.display());
    println!("progress\t{}", progress_path.display());
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, a: &EvaluateArgs) -> Result<()> {
    let log = load_log(cfg)?;
    let split = windows(cfg, &log, true)?;
    let relevance = relevance_from(split.test, log.n_items());
    let store = read_store(cfg, &log, &a.scores)?;
    let bias = match &a.bias {
        Some(p) => io::read_bias(open(p)?, p, &log.items)
            .with_context(|| format!("reading bias {}", p.display()))?,
        None => BiasVector::zeros(log.n_items()),
    };
    let k = cfg.metric.k;
    let recs = experiment::recommend(&store, &bias, &relevance, k);
    let report = experiment::evaluate_recommendations(&recs, &relevance, k)?;
    let test_counts = fit_popularity(split.test, log.n_items()).counts;
    let kl = kl_divergence_smoothed(&test_counts, &recs.item_counts)?;
    let overlap = top_popular_overlap(&test_counts, &recs.item_counts, &cfg.strategies.overlap_levels);

    let path = cfg.output_dir().join("eval.tsv");
    let mut out = create(&path)?;
    let h = header(cfg);
    writeln!(
        out,
        "# config_hash={}\tseed={}",
        h.config_hash,
        h.seed.map_or("none".into(), |s| s.to_string())
    )?;
    writeln!(out, "measure\tvalue")?;
    let mut rows = vec![("users".to_owned(), report.n_users.to_string())];
    for kind in MetricKind::ALL {
        rows.push((format!("{kind}@{k}"), format!("{:.6}", report.get(kind))));
    }
    rows.push(("kl".into(), format!("{kl:.6}")));
    for o in &overlap {
        rows.push((format!("overlap@{}", o.level), o.overlap.to_string()));
    }
    for (name, value) in &rows {
        writeln!(out, "{name}\t{value}")?;
        println!("{name}\t{value}");
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    header: ReportHeader,
    config: &'a RunConfig,
    report: &'a CompareReport,
}

pub fn compare(cfg: &RunConfig) -> Result<()> {
    let log = load_log(cfg)?;
    let taxonomy = load_taxonomy(cfg, &log)?;
    let split = windows(cfg, &log, true)?;
    let exp = Experiment {
        split,
        n_users: log.n_users(),
        n_items: log.n_items(),
        taxonomy: taxonomy.as_ref(),
    };
    let config = CompareConfig {
        strategies: cfg.strategies.kinds.clone(),
        spec: cfg.strategy_spec(),
        overlap_levels: cfg.strategies.overlap_levels.clone(),
    };
    let report = experiment::compare(&exp, &config)?;
    let h = header(cfg);
    let out = cfg.output_dir();
    io::write_lift_table(create(&out.join("lift.tsv"))?, &report, &h)?;
    io::write_overlap_table(create(&out.join("overlap.tsv"))?, &report, &h)?;
    io::write_plot_table(create(&out.join("plot.tsv"))?, &report, &h)?;
    let mut json = create(&out.join("report.json"))?;
    let mut portable = cfg.clone();
    portable.output_dir = None;
    serde_json::to_writer_pretty(
        &mut json,
        &JsonReport {
            header: h.clone(),
            config: &portable,
            report: &report,
        },
    )?;
    writeln!(json)?;
    json.flush()?;
    io::write_lift_table(std::io::stdout().lock(), &report, &h)?;
    Ok(())
}
