use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use newsrep::engine::{
    ingest_edge_online, pin_item, read_seed_urls, run_fixpoint_with, select_training_labels,
    write_seed_urls, EngineConfig, Execution, SeedUrls,
};
use newsrep::eval::{
    correlation_matrix, cross_list_detection, read_classifications, recall_report, replay_records,
    site_flag_rates, url_site_map, write_agreement_csv, write_correlation_csv, RecallReport,
    ReplayOptions, TweetCounts,
};
use newsrep::graph::{
    read_snapshot, write_snapshot, Edge, EdgeInsert, EdgeKind, NodeKind, Polarity, ReputationGraph,
};
use newsrep::ingest::{
    build_graph, bundle_records, canonicalize_url, day_of, day_start, load_records, load_seed_list,
    normalize_domain, temporal_split, AliasTable, GraphOptions, ParsePolicy, SeedSiteList,
    ShareRecord, SplitSpec,
};
use newsrep::logistic::{featurize, predict, train, LabeledExample};
use newsrep::synth::{generate, read_truth, GeneratorSpec};
use newsrep::{Error, Label, Result};
use serde_json::json;

use crate::args::*;
use crate::meta::RunMeta;

const DAY: i64 = 86_400;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

/// Creates `dir/name`, hands a buffered writer to `fill`, and records it.
fn write_output(
    meta: &mut RunMeta,
    dir: &Path,
    name: &str,
    fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    fill(&mut out)?;
    out.flush().map_err(io_err(&path))?;
    meta.output(&path);
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn policy(args: &RecordArgs) -> Result<ParsePolicy> {
    if !(0.0..=1.0).contains(&args.max_malformed) {
        return Err(Error::InvalidInput(format!(
            "--max-malformed must lie in [0, 1], got {}",
            args.max_malformed
        )));
    }
    Ok(ParsePolicy {
        max_malformed_fraction: args.max_malformed,
    })
}

fn records(path: &Path, args: &RecordArgs, meta: &mut RunMeta) -> Result<Vec<ShareRecord>> {
    let (records, _) = load_records(path, &policy(args)?)?;
    meta.input(path);
    Ok(records)
}

fn site_list(path: &Path, args: &RecordArgs, meta: &mut RunMeta) -> Result<SeedSiteList> {
    let (list, _) = load_seed_list(path, &policy(args)?)?;
    meta.input(path);
    Ok(list)
}

fn seed_urls(path: &Path, meta: &mut RunMeta) -> Result<SeedUrls> {
    let seeds = read_seed_urls(open(path)?)?;
    meta.input(path);
    Ok(seeds)
}

fn load_graph(path: &Path, meta: &mut RunMeta) -> Result<ReputationGraph> {
    let graph = read_snapshot(open(path)?)?;
    meta.input(path);
    Ok(graph)
}

fn graph_writer(graph: &ReputationGraph) -> impl FnOnce(&mut BufWriter<File>) -> Result<()> + '_ {
    move |out| write_snapshot(graph, out).map_err(io_err(Path::new("graph.snap")))
}

fn text(s: String) -> impl FnOnce(&mut BufWriter<File>) -> Result<()> {
    move |out| {
        out.write_all(s.as_bytes())
            .map_err(io_err(Path::new("summary")))
    }
}

fn execution(threads: usize) -> Execution {
    if threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn engine_config(args: &EngineArgs, meta: &mut RunMeta) -> Result<EngineConfig> {
    let config = args.resolve()?;
    if let Some(path) = &args.config {
        meta.input(path);
    }
    meta.config = serde_json::to_value(&config).expect("config serializes");
    Ok(config)
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let mut meta = RunMeta::new("ingest");
    ensure_dir(&args.out.out_dir)?;
    let (records, parse) = load_records(&args.records, &policy(&args.input)?)?;
    meta.input(&args.records);
    let aggregators = match &args.aggregators {
        Some(path) => site_list(path, &args.input, &mut meta)?.domains,
        None => Default::default(),
    };
    let options = GraphOptions {
        c: args.c,
        editorial: args.editorial,
        aggregators,
    };
    let (graph, report) = build_graph(&records, &options)?;
    meta.config = json!({ "c": args.c, "editorial": args.editorial });
    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "graph.snap", graph_writer(&graph))?;
    let summary = json!({
        "lines": parse.lines,
        "accepted": parse.accepted,
        "malformed": parse.malformed,
        "malformed_samples": parse.samples,
        "invalid_urls": report.invalid_urls,
        "duplicate_tweets": report.duplicate_tweets,
        "items": graph.item_count(),
        "sources": graph.source_count(),
        "edges": graph.edge_count(),
    });
    write_output(&mut meta, dir, "ingest.json", |out| {
        serde_json::to_writer_pretty(&mut *out, &summary)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        out.write_all(b"\n")
            .map_err(io_err(Path::new("ingest.json")))
    })?;
    meta.write(dir)?;
    Ok(())
}

pub fn train_harmonic(args: &TrainHarmonicArgs, threads: usize) -> Result<()> {
    let mut meta = RunMeta::new("train-harmonic");
    ensure_dir(&args.out.out_dir)?;
    let config = engine_config(&args.engine, &mut meta)?;
    let mut graph = match (&args.graph, &args.records) {
        (Some(path), _) => load_graph(path, &mut meta)?,
        (None, Some(path)) => {
            let records = records(path, &args.input, &mut meta)?;
            let options = GraphOptions {
                c: config.c,
                editorial: args.editorial,
                ..GraphOptions::default()
            };
            build_graph(&records, &options)?.0
        }
        (None, None) => unreachable!("clap requires --graph or --records"),
    };
    let (labels, seeds) = match (&args.seeds, &args.fake_sites) {
        (Some(path), _) => {
            let seeds = seed_urls(path, &mut meta)?;
            (seeds.resolve(&graph), seeds)
        }
        (None, Some(path)) => {
            let list = site_list(path, &args.input, &mut meta)?;
            let labels = select_training_labels(&graph, &list, args.multiplier, args.rng_seed)?;
            meta.rng_seeds = json!({ "seed_sampling": args.rng_seed });
            let seeds = SeedUrls::from_labels(&graph, &labels);
            (labels, seeds)
        }
        (None, None) => unreachable!("clap requires --seeds or --fake-sites"),
    };
    let table = run_fixpoint_with(&mut graph, &labels, &config, execution(threads))?;
    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "classifications.csv", |out| {
        table
            .write_csv(out)
            .map_err(io_err(Path::new("classifications.csv")))
    })?;
    write_output(&mut meta, dir, "seeds.csv", |out| {
        write_seed_urls(&seeds, out).map_err(io_err(Path::new("seeds.csv")))
    })?;
    write_output(&mut meta, dir, "graph.snap", graph_writer(&graph))?;
    meta.write(dir)?;
    Ok(())
}

pub fn train_logistic(args: &TrainLogisticArgs) -> Result<()> {
    let mut meta = RunMeta::new("train-logistic");
    ensure_dir(&args.out.out_dir)?;
    let hyper = args.hyperparams()?;
    if let Some(path) = &args.params {
        meta.input(path);
    }
    meta.config = json!({ "mode": args.mode.to_string(), "hyperparams": hyper });
    meta.rng_seeds = json!({ "shuffle": hyper.rng_seed });
    let records = records(&args.records, &args.input, &mut meta)?;
    let fake_sites = site_list(&args.fake_sites, &args.input, &mut meta)?;
    let aliases = match &args.aliases {
        Some(path) => {
            meta.input(path);
            AliasTable::read_csv(open(path)?)?
        }
        None => AliasTable::default(),
    };
    let (train_set, test_set) = match &args.split {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            let spec: SplitSpec =
                toml::from_str(&text).map_err(|e| Error::InvalidSpec(e.message().to_owned()))?;
            meta.input(path);
            let split = temporal_split(records, &spec)?;
            (split.train, split.test)
        }
        None => {
            let all: Vec<_> = bundle_records(records).by_url.into_values().collect();
            (all.clone(), all)
        }
    };
    let truth = |site: &str| {
        if fake_sites.contains(site) {
            Label::Fake
        } else {
            Label::Reliable
        }
    };
    let examples: Vec<LabeledExample> = train_set
        .iter()
        .map(|b| LabeledExample {
            features: featurize(b, args.mode, &aliases),
            label: truth(&b.site),
        })
        .collect();
    let model = train(&examples, args.mode, &hyper)?;

    let mut pairs = Vec::with_capacity(test_set.len());
    let mut rows = Vec::with_capacity(test_set.len());
    for b in &test_set {
        let (score, label) = predict(&model, &featurize(b, args.mode, &aliases));
        pairs.push((truth(&b.site), label));
        rows.push((b.url.clone(), score, label));
    }
    let recall = RecallReport::from_pairs(pairs);

    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "model.tsv", |out| {
        model.write(out).map_err(io_err(Path::new("model.tsv")))
    })?;
    write_output(&mut meta, dir, "predictions.csv", |out| {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["url", "score", "label"]).map_err(err)?;
        for (url, score, label) in &rows {
            w.write_record([url.as_str(), &score.to_string(), label.as_str()])
                .map_err(err)?;
        }
        w.flush().map_err(io_err(Path::new("predictions.csv")))
    })?;
    write_output(&mut meta, dir, "recall.csv", |out| recall.write_csv(out))?;
    write_output(&mut meta, dir, "recall.txt", text(recall.summary()))?;
    meta.write(dir)?;
    Ok(())
}

pub fn classify(args: &ClassifyArgs) -> Result<()> {
    let mut meta = RunMeta::new("classify");
    ensure_dir(&args.out.out_dir)?;
    let graph = load_graph(&args.graph, &mut meta)?;
    let mut rows = Vec::new();
    for raw in &args.urls {
        let url = canonicalize_url(raw)?;
        let c = newsrep::engine::reputation(&graph, &url)?;
        rows.push((url, c));
    }
    let stdout = io::stdout();
    let mut w = csv::Writer::from_writer(stdout.lock());
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(["url", "q", "label"]).map_err(err)?;
    for (url, c) in &rows {
        w.write_record([url.as_str(), &c.reputation.to_string(), c.label.as_str()])
            .map_err(err)?;
    }
    w.flush().map_err(io_err(Path::new("stdout")))?;
    meta.write(&args.out.out_dir)?;
    Ok(())
}

pub fn stream(args: &StreamArgs) -> Result<()> {
    let mut meta = RunMeta::new("stream");
    ensure_dir(&args.out.out_dir)?;
    let config = engine_config(&args.engine, &mut meta)?;
    let mut graph = load_graph(&args.graph, &mut meta)?;
    config.check_graph(&graph)?;
    let seeds = match &args.seeds {
        Some(path) => seed_urls(path, &mut meta)?,
        None => SeedUrls::default(),
    };
    let records = records(&args.records, &args.input, &mut meta)?;
    if let Some(k) = records.windows(2).position(|w| w[1].ts < w[0].ts) {
        return Err(Error::InvalidStream(format!(
            "record {} at {} precedes record {} at {}",
            k + 1,
            records[k + 1].ts,
            k,
            records[k].ts
        )));
    }

    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let Ok(url) = canonicalize_url(&r.url) else {
            continue;
        };
        let known = graph.item_count();
        let item = graph.add_item(&url)?;
        if graph.item_count() > known {
            if let Some(label) = seeds.label_of(&url) {
                pin_item(&mut graph, item, label)?;
            }
        }
        let user = graph.add_source(&r.user, NodeKind::User)?;
        let flipped = match graph.add_edge(item, user, Polarity::Positive, EdgeKind::Tweet, r.ts)? {
            EdgeInsert::Inserted => {
                let edge = Edge {
                    item,
                    source: user,
                    polarity: Polarity::Positive,
                    kind: EdgeKind::Tweet,
                    timestamp: r.ts,
                };
                ingest_edge_online(&mut graph, &edge, &config)?
                    .flipped
                    .len()
            }
            EdgeInsert::Duplicate => 0,
        };
        let q = graph.state(item).q;
        rows.push((
            r.ts,
            r.user.clone(),
            url,
            q,
            Label::from_reputation(q),
            flipped,
        ));
    }

    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "stream.csv", |out| {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["ts", "user", "url", "q", "label", "flipped"])
            .map_err(err)?;
        for (ts, user, url, q, label, flipped) in &rows {
            w.write_record([
                ts.to_string().as_str(),
                user,
                url,
                &q.to_string(),
                label.as_str(),
                &flipped.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(io_err(Path::new("stream.csv")))
    })?;
    write_output(&mut meta, dir, "graph.snap", graph_writer(&graph))?;
    meta.write(dir)?;
    Ok(())
}

fn classifications(path: &Path, meta: &mut RunMeta) -> Result<BTreeMap<String, Label>> {
    let map = read_classifications(open(path)?)?;
    meta.input(path);
    Ok(map)
}

pub fn eval_recall(args: &EvalRecallArgs) -> Result<()> {
    let mut meta = RunMeta::new("eval-recall");
    ensure_dir(&args.out.out_dir)?;
    let mut classes = classifications(&args.classifications, &mut meta)?;
    if let Some(path) = &args.exclude_seeds {
        let seeds = seed_urls(path, &mut meta)?;
        classes.retain(|url, _| seeds.label_of(url).is_none());
    }
    let urls: Vec<&String> = classes.keys().collect();
    let report = match (&args.fake_sites, &args.truth) {
        (Some(path), _) => {
            let list = site_list(path, &args.input, &mut meta)?;
            recall_report(&classes, &list, &urls)?
        }
        (None, Some(path)) => {
            let truth = read_truth(open(path)?)?;
            meta.input(path);
            let mut pairs = Vec::with_capacity(urls.len());
            for url in urls {
                let t = truth
                    .get(url)
                    .ok_or_else(|| Error::NotFound(format!("no ground truth for {url}")))?;
                pairs.push((*t, classes[url]));
            }
            RecallReport::from_pairs(pairs)
        }
        (None, None) => unreachable!("clap requires --fake-sites or --truth"),
    };
    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "recall.csv", |out| report.write_csv(out))?;
    write_output(&mut meta, dir, "recall.txt", text(report.summary()))?;
    meta.write(dir)?;
    Ok(())
}

pub fn eval_sites(args: &EvalSitesArgs) -> Result<()> {
    let mut meta = RunMeta::new("eval-sites");
    ensure_dir(&args.out.out_dir)?;
    let classes = classifications(&args.classifications, &mut meta)?;
    meta.config = json!({ "min_urls": args.min_urls });
    let report = site_flag_rates(&classes, &url_site_map(classes.keys()), args.min_urls);
    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "sites.csv", |out| report.write_csv(out))?;
    write_output(&mut meta, dir, "sites.txt", text(report.summary()))?;
    meta.write(dir)?;
    Ok(())
}

pub fn eval_crosslist(args: &EvalCrosslistArgs) -> Result<()> {
    let mut meta = RunMeta::new("eval-crosslist");
    ensure_dir(&args.out.out_dir)?;
    let classes = classifications(&args.classifications, &mut meta)?;
    let a = site_list(&args.list_a, &args.input, &mut meta)?;
    let b = site_list(&args.list_b, &args.input, &mut meta)?;
    let report = cross_list_detection(&classes, &a, &b, &url_site_map(classes.keys()));
    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "crosslist.csv", |out| report.write_csv(out))?;
    write_output(&mut meta, dir, "crosslist.txt", text(report.summary()))?;
    meta.write(dir)?;
    Ok(())
}

pub fn eval_correlation(args: &EvalCorrelationArgs) -> Result<()> {
    let mut meta = RunMeta::new("eval-correlation");
    ensure_dir(&args.out.out_dir)?;
    let records = records(&args.records, &args.input, &mut meta)?;
    let counts = TweetCounts::from_records(&records);
    let sites = match &args.sites {
        Some(list) => list
            .iter()
            .map(|s| {
                normalize_domain(s)
                    .ok_or_else(|| Error::InvalidInput(format!("not a domain: {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => counts.top_sites(args.top),
    };
    meta.config = json!({ "sites": sites });
    let matrix = correlation_matrix(&counts, &sites);
    let mut pairs = Vec::new();
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            pairs.push((matrix[i][j], &sites[i], &sites[j]));
        }
    }
    pairs.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then_with(|| (x.1, x.2).cmp(&(y.1, y.2)))
    });
    let mut summary = format!("{} sites\n", sites.len());
    for (v, a, b) in pairs.iter().take(10) {
        summary.push_str(&format!("{v:.4}  {a} ~ {b}\n"));
    }
    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "correlation.csv", |out| {
        write_correlation_csv(&sites, &matrix, out)
    })?;
    write_output(&mut meta, dir, "correlation.txt", text(summary))?;
    meta.write(dir)?;
    Ok(())
}

pub fn eval_agreement(args: &EvalAgreementArgs) -> Result<()> {
    let mut meta = RunMeta::new("eval-agreement");
    ensure_dir(&args.out.out_dir)?;
    let config = engine_config(&args.engine, &mut meta)?;
    let records = records(&args.records, &args.input, &mut meta)?;
    let seeds = seed_urls(&args.seeds, &mut meta)?;
    let warmup_end = records.first().map_or(0, |r| {
        day_start(day_of(r.ts)) + i64::from(args.warmup_days) * DAY
    });
    let options = ReplayOptions {
        interval: args.interval,
        threshold: args.threshold,
        config,
    };
    meta.config = json!({
        "engine": meta.config,
        "interval": format!("{:?}", args.interval),
        "threshold": args.threshold,
        "warmup_days": args.warmup_days,
    });
    let report = replay_records(&records, &seeds, warmup_end, &options)?;
    let dir = &args.out.out_dir;
    write_output(&mut meta, dir, "agreement.csv", |out| {
        write_agreement_csv(&report, out)
    })?;
    write_output(&mut meta, dir, "agreement.txt", text(report.summary()))?;
    meta.write(dir)?;
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut meta = RunMeta::new("synth");
    let mut spec = match &args.spec {
        Some(path) => {
            meta.input(path);
            GeneratorSpec::load(path)?
        }
        None => GeneratorSpec::default(),
    };
    if let Some(seed) = args.rng_seed {
        spec.rng_seed = seed;
    }
    spec.validate()?;
    meta.config = serde_json::to_value(&spec).expect("spec serializes");
    meta.rng_seeds = json!({ "generator": spec.rng_seed });
    let data = generate(&spec)?;
    data.write_dir(&args.out)?;
    for name in [
        "records.jsonl",
        "truth.csv",
        "users.csv",
        "seeds.csv",
        "fake_sites.txt",
    ] {
        meta.output(&args.out.join(name));
    }
    meta.write(&args.out)?;
    Ok(())
}
