use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use newsrep::engine::EngineConfig;
use newsrep::logistic::{FeatureMode, Hyperparams};

#[derive(Debug, Parser)]
#[command(
    name = "newsrep",
    version,
    about = "Reputation pipelines for news URLs shared on social media"
)]
pub struct Cli {
    /// Worker threads for the engine; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a graph snapshot from share records.
    Ingest(IngestArgs),
    /// Run the harmonic fixpoint and write per-URL classifications.
    TrainHarmonic(TrainHarmonicArgs),
    /// Train the logistic baseline and score held-out URLs.
    TrainLogistic(TrainLogisticArgs),
    /// Print the reputation of URLs in a trained graph snapshot.
    Classify(ClassifyArgs),
    /// Apply new records to a trained graph with the online update.
    Stream(StreamArgs),
    /// Fake and non-fake recall of a classification table.
    EvalRecall(EvalRecallArgs),
    /// Share of flagged URLs per site.
    EvalSites(EvalSitesArgs),
    /// Detection of sites that only the second list knows about.
    EvalCrosslist(EvalCrosslistArgs),
    /// Correlation between sites from shared audiences.
    EvalCorrelation(EvalCorrelationArgs),
    /// Replay a stream and compare online and batch reputations.
    EvalAgreement(EvalAgreementArgs),
    /// Generate a synthetic data set with planted ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Directory for outputs and the run's metadata file.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Largest tolerated share of malformed lines in input files.
    #[arg(long, default_value_t = 0.1)]
    pub max_malformed: f64,
}

/// Engine settings: `--config` first, then any flag given explicitly.
#[derive(Debug, Args)]
pub struct EngineArgs {
    /// TOML file with engine settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Regularization constant c.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub iterations: Option<u32>,
    /// Maximum depth of online propagation.
    #[arg(long)]
    pub propagation_depth: Option<u32>,
    /// Smallest change the online update forwards.
    #[arg(long)]
    pub propagation_threshold: Option<f64>,
    #[arg(long)]
    pub include_editorial: Option<bool>,
    #[arg(long)]
    pub include_votes: Option<bool>,
}

impl EngineArgs {
    pub fn resolve(&self) -> newsrep::Result<EngineConfig> {
        let mut config = match &self.config {
            Some(path) => EngineConfig::load(path)?,
            None => EngineConfig::default(),
        };
        if let Some(c) = self.c {
            config.c = c;
        }
        if let Some(n) = self.iterations {
            config.iterations = n;
        }
        if let Some(d) = self.propagation_depth {
            config.propagation_depth = d;
        }
        if let Some(k) = self.propagation_threshold {
            config.propagation_threshold = k;
        }
        if let Some(e) = self.include_editorial {
            config.include_editorial = e;
        }
        if let Some(v) = self.include_votes {
            config.include_votes = v;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSON-lines share records.
    #[arg(long)]
    pub records: PathBuf,
    /// Add a site -> URL editorial edge for every URL.
    #[arg(long)]
    pub editorial: bool,
    /// Sites that never get editorial edges, one domain per line.
    #[arg(long)]
    pub aggregators: Option<PathBuf>,
    #[arg(long, default_value_t = newsrep::graph::DEFAULT_C)]
    pub c: f64,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TrainHarmonicArgs {
    /// JSON-lines share records to build the graph from.
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    pub records: Option<PathBuf>,
    /// Existing graph snapshot.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Seed URLs as `url,label` CSV.
    #[arg(
        long,
        conflicts_with = "fake_sites",
        required_unless_present = "fake_sites"
    )]
    pub seeds: Option<PathBuf>,
    /// Fake site list; seeds are all its URLs plus sampled reliable URLs.
    #[arg(long)]
    pub fake_sites: Option<PathBuf>,
    /// Reliable seeds per fake seed when sampling from a site list.
    #[arg(long, default_value_t = 2)]
    pub multiplier: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Add editorial edges when building from records.
    #[arg(long)]
    pub editorial: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TrainLogisticArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// URLs on these sites are labeled fake, all others reliable.
    #[arg(long)]
    pub fake_sites: PathBuf,
    /// TOML split windows; without it the model trains and scores on everything.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value = "UT", value_parser = parse_mode)]
    pub mode: FeatureMode,
    /// Site aliases as `domain,alias` CSV, scrubbed from text.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    /// TOML file with training hyperparameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Disable N / (2 N_class) class weighting.
    #[arg(long)]
    pub no_class_weights: bool,
    #[arg(long)]
    pub rng_seed: Option<u64>,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_mode(s: &str) -> Result<FeatureMode, String> {
    s.parse().map_err(|e: newsrep::Error| e.to_string())
}

impl TrainLogisticArgs {
    pub fn hyperparams(&self) -> newsrep::Result<Hyperparams> {
        let mut h = match &self.params {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| newsrep::Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                toml::from_str(&text)
                    .map_err(|e| newsrep::Error::InvalidConfig(e.message().to_owned()))?
            }
            None => Hyperparams::default(),
        };
        if let Some(v) = self.learning_rate {
            h.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            h.epochs = v;
        }
        if let Some(v) = self.batch_size {
            h.batch_size = v;
        }
        if let Some(v) = self.l2 {
            h.l2 = v;
        }
        if self.no_class_weights {
            h.class_weighting = false;
        }
        if let Some(v) = self.rng_seed {
            h.rng_seed = v;
        }
        h.validate()?;
        Ok(h)
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Trained graph snapshot.
    #[arg(long)]
    pub graph: PathBuf,
    /// URL to look up; repeat for several.
    #[arg(long = "url", required = true)]
    pub urls: Vec<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Trained graph snapshot to start from.
    #[arg(long)]
    pub graph: PathBuf,
    /// New records, sorted by time.
    #[arg(long)]
    pub records: PathBuf,
    /// Seed URLs to pin when they first appear.
    #[arg(long)]
    pub seeds: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalRecallArgs {
    /// Classification CSV with `url` and `label` columns.
    #[arg(long)]
    pub classifications: PathBuf,
    /// Fake site list; URLs on other sites count as reliable.
    #[arg(long, conflicts_with = "truth", required_unless_present = "truth")]
    pub fake_sites: Option<PathBuf>,
    /// Per-URL ground truth as `url,label` CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Seed URLs to leave out of the evaluation.
    #[arg(long)]
    pub exclude_seeds: Option<PathBuf>,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalSitesArgs {
    #[arg(long)]
    pub classifications: PathBuf,
    /// Sites with fewer classified URLs are omitted.
    #[arg(long, default_value_t = newsrep::eval::MIN_SITE_URLS)]
    pub min_urls: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalCrosslistArgs {
    #[arg(long)]
    pub classifications: PathBuf,
    /// The list the classifier was seeded with.
    #[arg(long)]
    pub list_a: PathBuf,
    /// The list whose extra sites should be discovered.
    #[arg(long)]
    pub list_b: PathBuf,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalCorrelationArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Use the N most-tweeted sites.
    #[arg(long, default_value_t = 20, conflicts_with = "sites")]
    pub top: usize,
    /// Comma-separated sites, in matrix order.
    #[arg(long, value_delimiter = ',')]
    pub sites: Option<Vec<String>>,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalAgreementArgs {
    /// Records sorted by time.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub seeds: PathBuf,
    /// Recompute interval such as `1d`, `8h`, or `edge`.
    #[arg(long, default_value = "1d")]
    pub interval: newsrep::eval::RecomputeInterval,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    /// Days, from the first record's day, built in batch before replay.
    #[arg(long, default_value_t = 20)]
    pub warmup_days: u32,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub input: RecordArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator spec as TOML; defaults apply to missing keys.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's rng_seed.
    #[arg(long)]
    pub rng_seed: Option<u64>,
}
