use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use hopcheck::baselines::{random_predict, TfidfNb};
use hopcheck::corpus::{
    self, compute_stats, load_canonical, load_records, make_dev_split, read_jsonl, split_chains,
    validate_chain_instance, validate_dataset, write_jsonl, AdapterConfig, ArticleInstance,
    ChainInstance, Example, Records, SourceFormat,
};
use hopcheck::evaluate::{
    agreement, attention_ratios, bucketed_report, js_divergence, sweep_top_k, welch_ttest,
    with_top_k, AnnotationRecord, BucketRule, GraphAttention, MetricsReport,
};
use hopcheck::manifest::RunManifest;
use hopcheck::perturb::{
    apply_setting, ne_overlap, CapitalizationRecognizer, ReplacementPool, Setting,
};
use hopcheck::reasoner::{Model, Prediction, PredictionRecord, DEFAULT_TOP_K};
use hopcheck::rng::seeded;
use hopcheck::train::{run_regime, ExperimentConfig, StageData};

use crate::report;
use crate::{
    AgreementArgs, AnalyzeArgs, BaselineArgs, Command, DivergenceArgs, EvaluateArgs, ImportArgs,
    PerturbArgs, SettingArgs, SourceArgs, SplitArgs, StatsArgs, SweepArgs, TrainArgs, ValidateArgs,
};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Import(a) => import(a),
        Command::Validate(a) => validate(a),
        Command::Stats(a) => stats(a),
        Command::SplitChains(a) => split(a),
        Command::EvenSplit(a) => perturb("even-split", Setting::Even, a),
        Command::Adversarial(a) => perturb("adversarial", Setting::Adversarial, a),
        Command::Baseline(a) => baseline(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::SweepK(a) => sweep(a),
        Command::Analyze(a) => analyze(a),
        Command::Divergence(a) => divergence(a),
        Command::Agreement(a) => agree(a),
    }
}

fn manifest(command: &str, seed: u64) -> RunManifest {
    RunManifest::start(command, std::env::args().skip(1).collect(), seed)
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(m: &mut RunManifest, path: PathBuf, value: &T) -> Result<()> {
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    m.add_output(path);
    Ok(())
}

fn write_records<T: Serialize>(m: &mut RunManifest, path: PathBuf, records: &[T]) -> Result<()> {
    write_jsonl(&path, records)?;
    m.add_output(path);
    Ok(())
}

fn load_pool(path: &Path) -> Result<ReplacementPool> {
    let recognizer = CapitalizationRecognizer;
    if path.extension().is_some_and(|e| e == "jsonl") {
        Ok(ReplacementPool::from_articles(
            &load_canonical(path)?,
            &recognizer,
        ))
    } else {
        Ok(ReplacementPool::load(path, &recognizer)?)
    }
}

/// Loads `path` and applies the dataset setting.
fn load_with_setting(
    m: &mut RunManifest,
    path: &Path,
    setting: &SettingArgs,
    seed: u64,
) -> Result<Vec<Example>> {
    m.add_input(path)?;
    let records = load_records(path)?;
    let pool = match &setting.pool {
        Some(p) => {
            m.add_input(p)?;
            Some(load_pool(p)?)
        }
        None => None,
    };
    let (records, fallbacks) = apply_setting(
        &records,
        setting.setting,
        seed,
        pool.as_ref(),
        &CapitalizationRecognizer,
    )?;
    if !fallbacks.is_empty() {
        log::warn!(
            "{}: {} adversarial fallback(s)",
            path.display(),
            fallbacks.len()
        );
    }
    Ok(records.examples())
}

fn import(a: ImportArgs) -> Result<()> {
    let format: SourceFormat = a.format.parse()?;
    let mut m = manifest("import", hopcheck::DEFAULT_SEED);
    m.add_input(&a.input)?;
    let cfg = match &a.mapping {
        Some(p) => {
            m.add_input(p)?;
            AdapterConfig::load(p)?
        }
        None => AdapterConfig::preset(format),
    };
    out_dir(&a.out)?;
    let dataset = a.out.join("dataset.jsonl");
    let rep = corpus::import_dataset(format, &a.input, &cfg, &dataset)?;
    m.add_output(dataset);
    write_json(&mut m, a.out.join("import_report.json"), &rep)?;
    println!(
        "read {} records, wrote {} instances ({} merged, {} without evidence)",
        rep.records_read,
        rep.instances_written,
        rep.merged_rows,
        rep.skipped_without_evidence.len()
    );
    m.finish(&a.out)?;
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let raw: Vec<serde_json::Value> = read_jsonl(&a.dataset)?;
    let is_chain = raw.first().is_some_and(|v| v.get("chain_id").is_some());
    let violations = if is_chain {
        let chains: Vec<ChainInstance> = read_jsonl(&a.dataset)?;
        chains
            .iter()
            .flat_map(validate_chain_instance)
            .collect::<Vec<_>>()
    } else {
        let articles: Vec<ArticleInstance> = read_jsonl(&a.dataset)?;
        validate_dataset(&articles)
    };
    for v in &violations {
        println!("{v}");
    }
    if let Some(out) = &a.out {
        let mut m = manifest("validate", hopcheck::DEFAULT_SEED);
        m.add_input(&a.dataset)?;
        out_dir(out)?;
        write_json(&mut m, out.join("violations.json"), &violations)?;
        m.finish(out)?;
    }
    if !violations.is_empty() {
        bail!(
            "{} violation(s) in {}",
            violations.len(),
            a.dataset.display()
        );
    }
    println!("{} records, no violations", raw.len());
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let dataset = load_canonical(&a.dataset)?;
    let s = compute_stats(&dataset)?;
    report::print_stats(&s);
    if let Some(out) = &a.out {
        let mut m = manifest("stats", hopcheck::DEFAULT_SEED);
        m.add_input(&a.dataset)?;
        out_dir(out)?;
        write_json(&mut m, out.join("stats.json"), &s)?;
        m.finish(out)?;
    }
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let mut m = manifest("split-chains", a.seed);
    m.add_input(&a.dataset)?;
    let chains = split_chains(&load_canonical(&a.dataset)?);
    out_dir(&a.out)?;
    match a.dev_count {
        Some(n) => {
            let (train, dev) = make_dev_split(&chains, n, a.seed)?;
            println!(
                "{} train and {} dev chain instances",
                train.len(),
                dev.len()
            );
            write_records(&mut m, a.out.join("train.jsonl"), &train)?;
            write_records(&mut m, a.out.join("dev.jsonl"), &dev)?;
        }
        None => {
            println!("{} chain instances", chains.len());
            write_records(&mut m, a.out.join("chains.jsonl"), &chains)?;
        }
    }
    m.finish(&a.out)?;
    Ok(())
}

fn perturb(command: &str, setting: Setting, a: PerturbArgs) -> Result<()> {
    let mut m = manifest(command, a.seed);
    m.add_input(&a.dataset)?;
    let records = load_records(&a.dataset)?;
    let pool = match &a.pool {
        Some(p) => {
            m.add_input(p)?;
            Some(load_pool(p)?)
        }
        None if setting == Setting::Adversarial => bail!("adversarial needs --pool"),
        None => None,
    };
    let (out, fallbacks) = apply_setting(
        &records,
        setting,
        a.seed,
        pool.as_ref(),
        &CapitalizationRecognizer,
    )?;
    out_dir(&a.out)?;
    let path = a.out.join("dataset.jsonl");
    out.write(&path)?;
    m.add_output(path);
    if setting == Setting::Adversarial {
        write_json(&mut m, a.out.join("fallbacks.json"), &fallbacks)?;
        println!("{} instances, {} fallback(s)", out.len(), fallbacks.len());
    } else {
        println!("{} instances", out.len());
    }
    m.finish(&a.out)?;
    Ok(())
}

fn write_predictions(
    m: &mut RunManifest,
    out: &Path,
    gold: &[Example],
    preds: &[Prediction],
) -> Result<()> {
    let records: Vec<PredictionRecord> = gold
        .iter()
        .zip(preds)
        .map(|(g, p)| PredictionRecord::new(&g.id, p))
        .collect();
    write_records(m, out.join("predictions.jsonl"), &records)
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let mut m = manifest("baseline", a.seed);
    let gold = load_with_setting(&mut m, &a.dataset, &a.setting, a.seed)?;
    out_dir(&a.out)?;
    let preds: Vec<Prediction> = match a.kind.as_str() {
        "random" => {
            let mut rng = seeded(a.seed);
            gold.iter()
                .map(|g| random_predict(g.sentences.len(), &mut rng))
                .collect()
        }
        "tfidf-nb" => {
            let train_path = a.train.as_ref().context("tfidf-nb needs --train")?;
            let train = load_with_setting(&mut m, train_path, &a.setting, a.seed)?;
            let nb = TfidfNb::fit(&train)?;
            let space = a.out.join("tfidf_space.json");
            nb.space.save(&space)?;
            m.add_output(space);
            gold.iter().map(|g| nb.predict(g)).collect()
        }
        other => bail!("unknown baseline {other:?} (expected random or tfidf-nb)"),
    };
    let metrics = MetricsReport::compute(&preds, &gold, None)?;
    report::print_metrics(&a.kind, &metrics);
    write_predictions(&mut m, &a.out, &gold, &preds)?;
    write_json(&mut m, a.out.join("metrics.json"), &metrics)?;
    m.finish(&a.out)?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(p) = a.preset {
        cfg.preset = Some(p);
        cfg.stages.clear();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(h) = a.hops {
        cfg.hops = h;
    }
    if let Some(k) = a.topk {
        cfg.top_k = k;
    }
    if let Some(l) = a.loss {
        cfg.loss_mode = l;
    }
    if let Some(b) = a.backend {
        cfg.backend = b;
    }
    if a.sentence_ids {
        cfg.sentence_ids = true;
    }
    if let Some(s) = a.setting {
        cfg.setting = s;
    }
    cfg.validate()?;

    let mut m = manifest("train", cfg.seed);
    m.add_input(&a.config)?;
    m.config_hash = Some(cfg.hash());
    m.deviations = cfg.deviations();
    for d in &m.deviations {
        log::warn!("deviation: {d}");
    }
    let setting = SettingArgs {
        setting: cfg.setting,
        pool: a.pool.clone(),
    };
    let mut datasets = BTreeMap::new();
    for (name, paths) in &cfg.datasets {
        let train = load_with_setting(&mut m, &paths.train, &setting, cfg.seed)?;
        let dev = match &paths.dev {
            Some(p) => load_with_setting(&mut m, p, &setting, cfg.seed)?,
            None => Vec::new(),
        };
        log::info!("{name}: {} train, {} dev instances", train.len(), dev.len());
        datasets.insert(name.clone(), StageData { train, dev });
    }

    let outcome = run_regime(&cfg, &datasets)?;
    out_dir(&a.out)?;
    let ckpt = a.out.join("checkpoint");
    outcome.model.save(&ckpt)?;
    m.add_output(ckpt);
    write_records(&mut m, a.out.join("history.jsonl"), &outcome.history)?;
    let cfg_path = a.out.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml())?;
    m.add_output(cfg_path);
    let best = &outcome.history[outcome.best_global_epoch - 1];
    report::print_metrics(
        &format!("best epoch {} (dev)", best.global_epoch),
        &best.dev,
    );
    m.finish(&a.out)?;
    Ok(())
}

/// Predictions aligned with the gold examples, plus whether they were
/// produced here (and should be written out).
fn predictions(
    m: &mut RunManifest,
    s: &SourceArgs,
    topk: Option<usize>,
) -> Result<(Vec<Example>, Vec<Prediction>, bool)> {
    let gold = load_with_setting(m, &s.dataset, &s.setting, s.seed)?;
    if let Some(dir) = &s.checkpoint {
        let model = Model::load(dir)?;
        m.add_input(&dir.join("params.bin"))?;
        let k = topk.unwrap_or(DEFAULT_TOP_K);
        let preds = gold
            .iter()
            .map(|g| model.predict(g, k))
            .collect::<hopcheck::Result<Vec<_>>>()?;
        return Ok((gold, preds, true));
    }
    let path = s.predictions.as_ref().expect("clap enforces a source");
    m.add_input(path)?;
    let records: Vec<PredictionRecord> = read_jsonl(path)?;
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for r in &records {
        if by_id.insert(&r.id, r).is_some() {
            bail!("{}: duplicate prediction for {}", path.display(), r.id);
        }
    }
    let mut preds = Vec::with_capacity(gold.len());
    for g in &gold {
        let r = by_id
            .get(g.id.as_str())
            .with_context(|| format!("{}: no prediction for {}", path.display(), g.id))?;
        if r.importance.len() != g.sentences.len() {
            bail!(
                "{}: prediction for {} covers {} sentences, gold has {}",
                path.display(),
                g.id,
                r.importance.len(),
                g.sentences.len()
            );
        }
        preds.push(r.prediction());
    }
    if records.len() != gold.len() {
        log::warn!(
            "{} predictions without a gold instance ignored",
            records.len() - gold.len()
        );
    }
    let preds = match topk {
        Some(k) => with_top_k(&preds, k),
        None => preds,
    };
    Ok((gold, preds, false))
}

fn ne_overlaps(gold: &[Example]) -> Vec<f64> {
    gold.iter()
        .map(|g| {
            let ev = g.gold_evidence();
            let (mut evi, mut other) = (Vec::new(), Vec::new());
            for (i, s) in g.sentences.iter().enumerate() {
                if ev.contains(&i) {
                    evi.push(s.as_str())
                } else {
                    other.push(s.as_str())
                }
            }
            ne_overlap(&evi, &other, &CapitalizationRecognizer)
        })
        .collect()
}

fn buckets(
    rules: &[BucketRule],
    preds: &[Prediction],
    gold: &[Example],
    k: Option<usize>,
) -> Result<Vec<hopcheck::evaluate::BucketReport>> {
    let overlap = rules
        .contains(&BucketRule::NeOverlapLt40VsGe40)
        .then(|| ne_overlaps(gold));
    let mut out = Vec::new();
    for &rule in rules {
        out.extend(bucketed_report(rule, preds, gold, overlap.as_deref(), k)?);
    }
    Ok(out)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut m = manifest("evaluate", a.source.seed);
    let (gold, preds, fresh) = predictions(&mut m, &a.source, a.topk)?;
    let k = a.topk.or(fresh.then_some(DEFAULT_TOP_K));
    let mut metrics = MetricsReport::compute(&preds, &gold, k)?;
    metrics.buckets = buckets(&a.bucket, &preds, &gold, k)?;
    report::print_metrics("evaluation", &metrics);
    out_dir(&a.out)?;
    if fresh {
        write_predictions(&mut m, &a.out, &gold, &preds)?;
    }
    write_json(&mut m, a.out.join("metrics.json"), &metrics)?;
    m.finish(&a.out)?;
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.k_min == 0 || a.k_min > a.k_max {
        bail!("invalid k range {}..={}", a.k_min, a.k_max);
    }
    let mut m = manifest("sweep-k", a.source.seed);
    let (gold, preds, _) = predictions(&mut m, &a.source, None)?;
    let ks: Vec<usize> = (a.k_min..=a.k_max).collect();
    let rows = sweep_top_k(&preds, &gold, &ks)?;
    report::print_sweep(&rows);
    out_dir(&a.out)?;
    write_json(&mut m, a.out.join("sweep.json"), &rows)?;
    m.finish(&a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct WelchResult {
    n_a: usize,
    n_b: usize,
    mean_a: f64,
    mean_b: f64,
    t: f64,
    p: f64,
}

#[derive(Serialize)]
struct Analysis {
    metrics: MetricsReport,
    attention: Option<hopcheck::evaluate::AttentionRatios>,
    welch: Option<WelchResult>,
}

fn read_sample(m: &mut RunManifest, path: &Path) -> Result<Vec<f64>> {
    m.add_input(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .with_context(|| format!("{}: not a number: {l:?}", path.display()))
        })
        .collect()
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut m = manifest("analyze", a.source.seed);
    let (gold, preds, _) = predictions(&mut m, &a.source, a.topk)?;
    let mut metrics = MetricsReport::compute(&preds, &gold, a.topk)?;
    let rules = [
        BucketRule::ChainLength1or2Vs3plus,
        BucketRule::NeOverlapLt40VsGe40,
        BucketRule::ConfidenceLt90VsGe90,
    ];
    metrics.buckets = buckets(&rules, &preds, &gold, a.topk)?;
    report::print_metrics("analysis", &metrics);

    let graphs: Vec<GraphAttention> = preds
        .iter()
        .zip(&gold)
        .filter_map(|(p, g)| {
            let last = p.hop_attention.as_ref()?.last()?.clone();
            let ev = g.gold_evidence();
            Some(GraphAttention {
                evidence: (0..last.len()).map(|i| ev.contains(&i)).collect(),
                attention: last,
            })
        })
        .collect();
    let attention = if graphs.is_empty() {
        None
    } else {
        let r = attention_ratios(&graphs)?;
        report::print_attention(&r);
        Some(r)
    };

    let welch = match (&a.sample_a, &a.sample_b) {
        (Some(pa), Some(pb)) => {
            let (sa, sb) = (read_sample(&mut m, pa)?, read_sample(&mut m, pb)?);
            let (t, p) = welch_ttest(&sa, &sb)?;
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            println!("Welch t = {t:.4}, p = {p:.4}");
            Some(WelchResult {
                n_a: sa.len(),
                n_b: sb.len(),
                mean_a: mean(&sa),
                mean_b: mean(&sb),
                t,
                p,
            })
        }
        _ => None,
    };
    out_dir(&a.out)?;
    write_json(
        &mut m,
        a.out.join("analysis.json"),
        &Analysis {
            metrics,
            attention,
            welch,
        },
    )?;
    m.finish(&a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct DivergenceRow {
    a: PathBuf,
    b: PathBuf,
    jsd: f64,
}

fn corpus_texts(records: &Records, fields: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for ex in records.examples() {
        match fields {
            "sentences" => out.extend(ex.sentences),
            "claims" => out.push(ex.claim),
            "all" => {
                out.push(ex.claim);
                out.extend(ex.sentences);
            }
            other => bail!("unknown text fields {other:?} (expected sentences, claims or all)"),
        }
    }
    Ok(out)
}

fn divergence(a: DivergenceArgs) -> Result<()> {
    if a.datasets.len() < 2 {
        bail!("divergence needs at least two --dataset files");
    }
    let mut m = manifest("divergence", hopcheck::DEFAULT_SEED);
    let mut corpora = Vec::new();
    for p in &a.datasets {
        m.add_input(p)?;
        corpora.push(corpus_texts(&load_records(p)?, &a.fields)?);
    }
    let mut rows = Vec::new();
    for i in 0..corpora.len() {
        for j in i + 1..corpora.len() {
            let jsd = js_divergence(&corpora[i], &corpora[j])?;
            println!(
                "{}\t{}\t{jsd:.4}",
                a.datasets[i].display(),
                a.datasets[j].display()
            );
            rows.push(DivergenceRow {
                a: a.datasets[i].clone(),
                b: a.datasets[j].clone(),
                jsd,
            });
        }
    }
    out_dir(&a.out)?;
    write_json(&mut m, a.out.join("divergence.json"), &rows)?;
    m.finish(&a.out)?;
    Ok(())
}

fn agree(a: AgreementArgs) -> Result<()> {
    let mut m = manifest("agreement", hopcheck::DEFAULT_SEED);
    m.add_input(&a.annotations)?;
    let records: Vec<AnnotationRecord> = read_jsonl(&a.annotations)?;
    let result = agreement(&records, a.mode)?;
    let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.3}"));
    println!(
        "items {}: Fleiss kappa {}, Krippendorff alpha {}",
        result.items,
        show(result.fleiss_kappa),
        show(result.krippendorff_alpha)
    );
    out_dir(&a.out)?;
    write_json(&mut m, a.out.join("agreement.json"), &result)?;
    m.finish(&a.out)?;
    Ok(())
}
