//! Harmonic crowdsourcing engine.
//!
//! Reputation flows from items to the users who shared them and back. The
//! batch fixpoint recomputes every node from scratch for a fixed number of
//! iterations; the online path pushes a single new edge's contribution through
//! a bounded neighbourhood.

mod fixpoint;
mod online;
mod training;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BetaState, EdgeKind, NodeId, ReputationGraph, DEFAULT_C};
use crate::label::Label;

pub use fixpoint::{run_fixpoint, run_fixpoint_with, Execution};
pub use online::{ingest_edge_online, OnlineOutcome};
pub use training::{
    read_seed_urls, select_training_labels, select_training_labels_among, write_seed_urls, SeedUrls,
};

/// Tuning knobs of the harmonic engine. Loaded from a flat TOML file; every
/// missing key takes its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Regularization added to both beta parameters.
    pub c: f64,
    /// Full user+item iterations of the batch fixpoint.
    pub iterations: u32,
    /// Maximum recursion depth of online propagation.
    pub propagation_depth: u32,
    /// Smallest change in q that is forwarded to neighbours online.
    pub propagation_threshold: f64,
    pub include_editorial: bool,
    pub include_votes: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            c: DEFAULT_C,
            iterations: 3,
            propagation_depth: 1,
            propagation_threshold: 0.02,
            include_editorial: false,
            include_votes: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if !(self.propagation_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "propagation_threshold must be positive, got {}",
                self.propagation_threshold
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: EngineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("engine config serializes")
    }

    #[inline]
    pub(crate) fn allows(&self, kind: EdgeKind) -> bool {
        match kind {
            EdgeKind::Tweet => true,
            EdgeKind::Editorial => self.include_editorial,
            EdgeKind::Vote => self.include_votes,
        }
    }

    pub fn check_graph(&self, graph: &ReputationGraph) -> Result<()> {
        self.validate()?;
        if self.c != graph.c() {
            return Err(Error::InvalidConfig(format!(
                "engine c = {} but graph was built with c = {}",
                self.c,
                graph.c()
            )));
        }
        Ok(())
    }
}

/// Training labels: items known to be fake and items known to be reliable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedLabels {
    pub fake_items: BTreeSet<NodeId>,
    pub nonfake_items: BTreeSet<NodeId>,
}

impl SeedLabels {
    pub fn new(
        fake_items: impl IntoIterator<Item = NodeId>,
        nonfake_items: impl IntoIterator<Item = NodeId>,
    ) -> Self {
        SeedLabels {
            fake_items: fake_items.into_iter().collect(),
            nonfake_items: nonfake_items.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.fake_items.len() + self.nonfake_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same seeds with the classes exchanged.
    pub fn swapped(&self) -> Self {
        SeedLabels {
            fake_items: self.nonfake_items.clone(),
            nonfake_items: self.fake_items.clone(),
        }
    }

    pub fn label_of(&self, item: NodeId) -> Option<Label> {
        if self.fake_items.contains(&item) {
            Some(Label::Fake)
        } else if self.nonfake_items.contains(&item) {
            Some(Label::Reliable)
        } else {
            None
        }
    }

    pub fn validate(&self, graph: &ReputationGraph) -> Result<()> {
        if let Some(both) = self.fake_items.intersection(&self.nonfake_items).next() {
            return Err(Error::InvalidLabels(format!(
                "item {} is seeded both fake and non-fake",
                both.index
            )));
        }
        for &id in self.fake_items.iter().chain(&self.nonfake_items) {
            if !id.is_item() || !graph.contains(id) {
                return Err(Error::InvalidLabels(format!(
                    "{id:?} is not an item of the graph"
                )));
            }
        }
        Ok(())
    }
}

/// Pins seed items to q = ±1 and resets every other item to the fresh state.
pub fn seed(graph: &mut ReputationGraph, labels: &SeedLabels) -> Result<()> {
    labels.validate(graph)?;
    let c = graph.c();
    for id in graph.item_ids() {
        let pin = labels.label_of(id);
        graph.set_pin(id, pin);
        let state = match pin {
            Some(label) => BetaState::pinned(label, c),
            None => BetaState::fresh(c),
        };
        graph.set_state(id, state);
    }
    Ok(())
}

/// Pins one additional item, e.g. a seed URL that shows up mid-stream.
pub fn pin_item(graph: &mut ReputationGraph, item: NodeId, label: Label) -> Result<()> {
    if !item.is_item() || !graph.contains(item) {
        return Err(Error::InvalidLabels(format!(
            "{item:?} is not an item of the graph"
        )));
    }
    let c = graph.c();
    graph.set_pin(item, Some(label));
    graph.set_state(item, BetaState::pinned(label, c));
    Ok(())
}

/// Current seed labels as recorded on the graph.
pub fn current_seeds(graph: &ReputationGraph) -> SeedLabels {
    let mut labels = SeedLabels::default();
    for id in graph.item_ids() {
        match graph.seed_label(id) {
            Some(Label::Fake) => {
                labels.fake_items.insert(id);
            }
            Some(Label::Reliable) => {
                labels.nonfake_items.insert(id);
            }
            None => {}
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: Label,
    pub reputation: f64,
}

impl Classification {
    pub fn from_reputation(q: f64) -> Self {
        Classification {
            label: Label::from_reputation(q),
            reputation: q,
        }
    }
}

/// Current reputation of the item behind `url`.
pub fn reputation(graph: &ReputationGraph, url: &str) -> Result<Classification> {
    let id = graph
        .item_id(url)
        .ok_or_else(|| Error::NotFound(format!("url {url}")))?;
    Ok(Classification::from_reputation(graph.state(id).q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemClassification {
    pub item: NodeId,
    pub url: String,
    pub classification: Classification,
    pub degree: usize,
}

/// Per-item classifications in item index order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassificationTable {
    pub rows: Vec<ItemClassification>,
}

impl ClassificationTable {
    pub fn from_graph(graph: &ReputationGraph) -> Self {
        let rows = graph
            .item_ids()
            .map(|id| ItemClassification {
                item: id,
                url: graph.item_url(id).to_owned(),
                classification: Classification::from_reputation(graph.state(id).q),
                degree: graph.degree(id),
            })
            .collect();
        ClassificationTable { rows }
    }

    pub fn get(&self, item: NodeId) -> Option<&ItemClassification> {
        self.rows
            .get(item.index as usize)
            .filter(|r| r.item == item)
    }

    pub fn labels(&self) -> std::collections::BTreeMap<String, Label> {
        self.rows
            .iter()
            .map(|r| (r.url.clone(), r.classification.label))
            .collect()
    }

    /// CSV with columns `url,q,label,degree`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["url", "q", "label", "degree"])?;
        for r in &self.rows {
            w.write_record([
                r.url.as_str(),
                &r.classification.reputation.to_string(),
                r.classification.label.as_str(),
                &r.degree.to_string(),
            ])?;
        }
        w.flush()
    }
}
