//! Planted-truth share streams.
//!
//! Two user populations: spreaders lean towards fake items, honest users
//! towards reliable ones. Each user shares `shares_per_user` distinct items;
//! each share stays within the user's aligned class with probability
//! `affinity`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{write_seed_urls, SeedLabels, SeedUrls};
use crate::error::{Error, Result};
use crate::graph::ReputationGraph;
use crate::ingest::{
    build_graph, day_start, write_records, GraphOptions, SeedSiteList, ShareRecord,
};
use crate::label::Label;

const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_fake_items: usize,
    pub n_reliable_items: usize,
    pub n_spreaders: usize,
    pub n_honest: usize,
    /// Probability that a share falls in the user's aligned class.
    pub affinity: f64,
    pub shares_per_user: usize,
    /// Share of the fake items that are revealed as seeds.
    pub seed_fraction: f64,
    /// Reliable seeds per fake seed.
    pub sample_multiplier: usize,
    pub rng_seed: u64,
    pub start_date: NaiveDate,
    pub days: u32,
    pub n_fake_sites: usize,
    pub n_reliable_sites: usize,
    /// Attach a synthetic title to every record.
    pub titles: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_fake_items: 200,
            n_reliable_items: 800,
            n_spreaders: 40,
            n_honest: 160,
            affinity: 0.9,
            shares_per_user: 25,
            seed_fraction: 0.2,
            sample_multiplier: 2,
            rng_seed: 0,
            start_date: NaiveDate::from_ymd_opt(2017, 9, 1).expect("valid date"),
            days: 30,
            n_fake_sites: 10,
            n_reliable_sites: 20,
            titles: true,
        }
    }
}

impl GeneratorSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: GeneratorSpec =
            toml::from_str(text).map_err(|e| Error::InvalidSpec(e.message().to_owned()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        for (name, n) in [
            ("n_fake_items", self.n_fake_items),
            ("n_reliable_items", self.n_reliable_items),
            ("n_spreaders", self.n_spreaders),
            ("n_honest", self.n_honest),
            ("shares_per_user", self.shares_per_user),
            ("n_fake_sites", self.n_fake_sites),
            ("n_reliable_sites", self.n_reliable_sites),
            ("days", self.days as usize),
        ] {
            if n == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        for (name, p) in [
            ("affinity", self.affinity),
            ("seed_fraction", self.seed_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let per_class = self.n_fake_items.min(self.n_reliable_items);
        if self.shares_per_user > per_class {
            return fail(format!(
                "shares_per_user = {} exceeds the {per_class} items of the smaller class",
                self.shares_per_user
            ));
        }
        if self.n_fake_sites > self.n_fake_items || self.n_reliable_sites > self.n_reliable_items {
            return fail("more sites than items in a class".into());
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_spreaders + self.n_honest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Spreader,
    Honest,
}

impl Alignment {
    pub fn as_str(self) -> &'static str {
        match self {
            Alignment::Spreader => "spreader",
            Alignment::Honest => "honest",
        }
    }

    pub fn aligned_class(self) -> Label {
        match self {
            Alignment::Spreader => Label::Fake,
            Alignment::Honest => Label::Reliable,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlantedTruth {
    /// Every generated item, shared or not.
    pub items: BTreeMap<String, Label>,
    pub users: BTreeMap<String, Alignment>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub spec: GeneratorSpec,
    /// Sorted by time, then user, then URL.
    pub records: Vec<ShareRecord>,
    pub truth: PlantedTruth,
    pub seeds: SeedUrls,
    pub fake_sites: SeedSiteList,
}

pub fn fake_site(k: usize) -> String {
    format!("fake-site-{k:02}.com")
}

pub fn reliable_site(k: usize) -> String {
    format!("real-site-{k:02}.com")
}

fn item_url(label: Label, k: usize, spec: &GeneratorSpec) -> String {
    match label {
        Label::Fake => format!("https://{}/story/{k}", fake_site(k % spec.n_fake_sites)),
        Label::Reliable => format!(
            "https://{}/story/{k}",
            reliable_site(k % spec.n_reliable_sites)
        ),
    }
}

pub fn user_handle(k: usize) -> String {
    format!("user{k:05}")
}

const NEUTRAL_WORDS: &[&str] = &[
    "report", "today", "new", "people", "world", "week", "state", "city", "story", "update",
    "year", "says", "after", "over", "first", "time",
];
const FAKE_WORDS: &[&str] = &[
    "shocking", "exposed", "secret", "hoax", "banned", "truth", "miracle", "cover",
];
const RELIABLE_WORDS: &[&str] = &[
    "study",
    "officials",
    "announced",
    "analysis",
    "court",
    "data",
    "policy",
    "vote",
];

/// Three neutral words plus one class-leaning word (70% from the item's own
/// class), followed by the site's own name.
fn item_title(label: Label, site: &str, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = (0..3)
        .map(|_| NEUTRAL_WORDS[rng.gen_range(0..NEUTRAL_WORDS.len())])
        .collect();
    let own = rng.gen_bool(0.7);
    let pool = match (label, own) {
        (Label::Fake, true) | (Label::Reliable, false) => FAKE_WORDS,
        _ => RELIABLE_WORDS,
    };
    words.push(pool[rng.gen_range(0..pool.len())]);
    let name = site.split('.').next().unwrap_or(site);
    format!("{} | {name}", words.join(" "))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates one data set. Every user draws from its own RNG stream, so users
/// are generated in parallel without changing the output.
pub fn generate(spec: &GeneratorSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let fake_urls: Vec<String> = (0..spec.n_fake_items)
        .map(|k| item_url(Label::Fake, k, spec))
        .collect();
    let reliable_urls: Vec<String> = (0..spec.n_reliable_items)
        .map(|k| item_url(Label::Reliable, k, spec))
        .collect();

    let mut title_rng = stream_rng(spec.rng_seed, 1);
    let mut titles: BTreeMap<&str, String> = BTreeMap::new();
    if spec.titles {
        for (label, urls) in [(Label::Fake, &fake_urls), (Label::Reliable, &reliable_urls)] {
            for url in urls.iter() {
                let site = crate::ingest::site_of(url);
                titles.insert(url, item_title(label, &site, &mut title_rng));
            }
        }
    }

    let start = day_start(spec.start_date);
    let span = i64::from(spec.days) * DAY;
    let alignment = |k: usize| {
        if k < spec.n_spreaders {
            Alignment::Spreader
        } else {
            Alignment::Honest
        }
    };
    let per_user: Vec<Vec<ShareRecord>> = (0..spec.n_users())
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(spec.rng_seed, 2 + k as u64);
            let aligned = alignment(k).aligned_class();
            let handle = user_handle(k);
            let mut taken: HashSet<(Label, usize)> = HashSet::with_capacity(spec.shares_per_user);
            let mut out = Vec::with_capacity(spec.shares_per_user);
            while out.len() < spec.shares_per_user {
                let class = if rng.gen_bool(spec.affinity) {
                    aligned
                } else {
                    aligned.flip()
                };
                let pool = match class {
                    Label::Fake => &fake_urls,
                    Label::Reliable => &reliable_urls,
                };
                // validation guarantees each class has room for every share
                let idx = loop {
                    let i = rng.gen_range(0..pool.len());
                    if taken.insert((class, i)) {
                        break i;
                    }
                };
                let url = &pool[idx];
                out.push(ShareRecord {
                    user: handle.clone(),
                    url: url.clone(),
                    ts: start + rng.gen_range(0..span),
                    title: titles.get(url.as_str()).cloned(),
                    description: None,
                });
            }
            out
        })
        .collect();
    let mut records: Vec<ShareRecord> = per_user.into_iter().flatten().collect();
    records.sort_by(|a, b| (a.ts, &a.user, &a.url).cmp(&(b.ts, &b.user, &b.url)));

    let truth = PlantedTruth {
        items: fake_urls
            .iter()
            .map(|u| (u.clone(), Label::Fake))
            .chain(reliable_urls.iter().map(|u| (u.clone(), Label::Reliable)))
            .collect(),
        users: (0..spec.n_users())
            .map(|k| (user_handle(k), alignment(k)))
            .collect(),
    };
    let seeds = draw_seeds(spec, &records, &truth)?;
    let fake_sites =
        SeedSiteList::from_domains("fake_sites", (0..spec.n_fake_sites).map(fake_site));
    Ok(SyntheticData {
        spec: spec.clone(),
        records,
        truth,
        seeds,
        fake_sites,
    })
}

/// `round(seed_fraction * shared fake items)` fake seeds and
/// `sample_multiplier` times as many reliable ones, drawn among shared items.
fn draw_seeds(
    spec: &GeneratorSpec,
    records: &[ShareRecord],
    truth: &PlantedTruth,
) -> Result<SeedUrls> {
    let shared: BTreeSet<&str> = records.iter().map(|r| r.url.as_str()).collect();
    let of_class = |label: Label| -> Vec<&str> {
        shared
            .iter()
            .copied()
            .filter(|u| truth.items[*u] == label)
            .collect()
    };
    let fake = of_class(Label::Fake);
    let reliable = of_class(Label::Reliable);
    let n_fake = (spec.seed_fraction * fake.len() as f64).round() as usize;
    let n_reliable = n_fake * spec.sample_multiplier;
    if n_reliable > reliable.len() {
        return Err(Error::InvalidSpec(format!(
            "{n_reliable} reliable seeds requested but only {} reliable items were shared",
            reliable.len()
        )));
    }
    let mut rng = stream_rng(spec.rng_seed, 0);
    let mut pick = |pool: &[&str], n: usize| -> BTreeSet<String> {
        sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i].to_owned())
            .collect()
    };
    Ok(SeedUrls {
        fake: pick(&fake, n_fake),
        reliable: pick(&reliable, n_reliable),
    })
}

impl SyntheticData {
    /// The full graph and its seed labels.
    pub fn graph(&self, c: f64) -> Result<(ReputationGraph, SeedLabels)> {
        let options = GraphOptions {
            c,
            ..GraphOptions::default()
        };
        let (graph, _) = build_graph(&self.records, &options)?;
        let labels = self.seeds.resolve(&graph);
        Ok((graph, labels))
    }

    /// Writes `records.jsonl`, `truth.csv`, `users.csv`, `seeds.csv` and
    /// `fake_sites.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| -> Result<(BufWriter<fs::File>, std::path::PathBuf)> {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok((BufWriter::new(file), path))
        };

        let (out, path) = create("records.jsonl")?;
        write_records(&self.records, out).map_err(|e| Error::io(&path, e))?;

        let (out, path) = create("truth.csv")?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io(&path, std::io::Error::other(e));
        w.write_record(["url", "label"]).map_err(io)?;
        for (url, label) in &self.truth.items {
            w.write_record([url.as_str(), label.as_str()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let (out, path) = create("users.csv")?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io(&path, std::io::Error::other(e));
        w.write_record(["user", "alignment"]).map_err(io)?;
        for (user, a) in &self.truth.users {
            w.write_record([user.as_str(), a.as_str()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let (out, path) = create("seeds.csv")?;
        write_seed_urls(&self.seeds, out).map_err(|e| Error::io(&path, e))?;

        let (mut out, path) = create("fake_sites.txt")?;
        self.fake_sites
            .write(&mut out)
            .map_err(|e| Error::io(&path, e))?;
        out.flush().map_err(|e| Error::io(&path, e))
    }
}

/// Reads a `url,label` truth table.
pub fn read_truth<R: std::io::Read>(input: R) -> Result<BTreeMap<String, Label>> {
    let mut out = BTreeMap::new();
    for (n, row) in csv::Reader::from_reader(input).records().enumerate() {
        let loc = || format!("truth row {}", n + 1);
        let row = row.map_err(|e| Error::parse(loc(), e.to_string()))?;
        match (row.get(0), row.get(1)) {
            (Some(url), Some(label)) => {
                out.insert(url.to_owned(), label.parse()?);
            }
            _ => return Err(Error::parse(loc(), "expected url,label")),
        }
    }
    Ok(out)
}
