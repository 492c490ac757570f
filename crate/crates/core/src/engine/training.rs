use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SeedLabels;
use crate::error::{Error, Result};
use crate::graph::{NodeId, ReputationGraph};
use crate::ingest::{site_of, SeedSiteList};
use crate::label::Label;

/// Picks training seeds: every item from a listed fake site, plus
/// `sample_multiplier` times as many other items drawn uniformly without
/// replacement.
pub fn select_training_labels(
    graph: &ReputationGraph,
    fake_sites: &SeedSiteList,
    sample_multiplier: usize,
    rng_seed: u64,
) -> Result<SeedLabels> {
    let all: Vec<NodeId> = graph.item_ids().collect();
    select_training_labels_among(graph, &all, fake_sites, sample_multiplier, rng_seed)
}

/// Same as [`select_training_labels`] restricted to `candidates`.
pub fn select_training_labels_among(
    graph: &ReputationGraph,
    candidates: &[NodeId],
    fake_sites: &SeedSiteList,
    sample_multiplier: usize,
    rng_seed: u64,
) -> Result<SeedLabels> {
    if sample_multiplier == 0 {
        return Err(Error::InvalidInput(
            "sample multiplier must be positive".into(),
        ));
    }
    let mut ordered: Vec<NodeId> = candidates.to_vec();
    ordered.sort_unstable();
    ordered.dedup();

    let mut fake = BTreeSet::new();
    let mut rest = Vec::new();
    for id in ordered {
        if !id.is_item() || !graph.contains(id) {
            return Err(Error::InvalidLabels(format!(
                "{id:?} is not an item of the graph"
            )));
        }
        if fake_sites.contains(&site_of(graph.item_url(id))) {
            fake.insert(id);
        } else {
            rest.push(id);
        }
    }

    let needed = sample_multiplier * fake.len();
    if needed > rest.len() {
        return Err(Error::InsufficientCandidates {
            needed,
            available: rest.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let nonfake = sample(&mut rng, rest.len(), needed)
        .into_iter()
        .map(|k| rest[k])
        .collect();
    Ok(SeedLabels {
        fake_items: fake,
        nonfake_items: nonfake,
    })
}

/// Seed labels keyed by canonical URL, independent of any graph's indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedUrls {
    pub fake: BTreeSet<String>,
    pub reliable: BTreeSet<String>,
}

impl SeedUrls {
    pub fn from_labels(graph: &ReputationGraph, labels: &SeedLabels) -> Self {
        let urls = |set: &BTreeSet<NodeId>| {
            set.iter()
                .map(|&id| graph.item_url(id).to_owned())
                .collect()
        };
        SeedUrls {
            fake: urls(&labels.fake_items),
            reliable: urls(&labels.nonfake_items),
        }
    }

    pub fn label_of(&self, url: &str) -> Option<Label> {
        if self.fake.contains(url) {
            Some(Label::Fake)
        } else if self.reliable.contains(url) {
            Some(Label::Reliable)
        } else {
            None
        }
    }

    /// Resolves against a graph; URLs the graph does not know are skipped.
    pub fn resolve(&self, graph: &ReputationGraph) -> SeedLabels {
        let ids = |set: &BTreeSet<String>| {
            set.iter()
                .filter_map(|u| graph.item_id(u))
                .collect::<BTreeSet<_>>()
        };
        SeedLabels {
            fake_items: ids(&self.fake),
            nonfake_items: ids(&self.reliable),
        }
    }
}

/// Writes `url,label` rows, fake seeds first, each group sorted by URL.
pub fn write_seed_urls<W: Write>(seeds: &SeedUrls, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["url", "label"])?;
    for url in &seeds.fake {
        w.write_record([url.as_str(), "fake"])?;
    }
    for url in &seeds.reliable {
        w.write_record([url.as_str(), "reliable"])?;
    }
    w.flush()
}

pub fn read_seed_urls<R: Read>(input: R) -> Result<SeedUrls> {
    let mut seeds = SeedUrls::default();
    let mut reader = csv::Reader::from_reader(input);
    for (n, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::parse(format!("seed row {}", n + 1), e.to_string()))?;
        let (Some(url), Some(label)) = (row.get(0), row.get(1)) else {
            return Err(Error::parse(
                format!("seed row {}", n + 1),
                "expected url,label",
            ));
        };
        match label.parse::<Label>()? {
            Label::Fake => seeds.fake.insert(url.to_owned()),
            Label::Reliable => seeds.reliable.insert(url.to_owned()),
        };
    }
    if let Some(both) = seeds.fake.intersection(&seeds.reliable).next() {
        return Err(Error::InvalidLabels(format!("{both} is seeded both ways")));
    }
    Ok(seeds)
}
