//! Bipartite item/source graph with signed, typed edges and per-node beta state.
//!
//! Items are news URLs. Sources are users (tweets and votes) and sites
//! (editorial edges). Items and sources live in two dense index spaces; all
//! lookups by URL, handle or domain go through side tables so the fixpoint
//! loops never hash.

mod snapshot;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_HEADER};

/// Regularization constant for beta parameters.
pub const DEFAULT_C: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Item,
    User,
    Site,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Item => "item",
            NodeKind::User => "user",
            NodeKind::Site => "site",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "item" => Ok(NodeKind::Item),
            "user" => Ok(NodeKind::User),
            "site" => Ok(NodeKind::Site),
            other => Err(Error::InvalidInput(format!("unknown node kind {other:?}"))),
        }
    }
}

/// Dense node handle. Item indices and source indices are separate spaces;
/// users and sites share the source space, so `index` is unique per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: u32,
}

impl NodeId {
    pub fn item(index: u32) -> Self {
        NodeId {
            kind: NodeKind::Item,
            index,
        }
    }

    pub fn is_item(self) -> bool {
        self.kind == NodeKind::Item
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Tweet,
    Editorial,
    Vote,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Tweet => "tweet",
            EdgeKind::Editorial => "editorial",
            EdgeKind::Vote => "vote",
        }
    }

    fn expected_source(self) -> NodeKind {
        match self {
            EdgeKind::Editorial => NodeKind::Site,
            EdgeKind::Tweet | EdgeKind::Vote => NodeKind::User,
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tweet" => Ok(EdgeKind::Tweet),
            "editorial" => Ok(EdgeKind::Editorial),
            "vote" => Ok(EdgeKind::Vote),
            other => Err(Error::InvalidInput(format!("unknown edge kind {other:?}"))),
        }
    }
}

/// Edge sign: +1 for shares, editorial approval and truthful votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn from_sign(sign: i8) -> Result<Self> {
        match sign {
            1 => Ok(Polarity::Positive),
            -1 => Ok(Polarity::Negative),
            other => Err(Error::InvalidEdge(format!(
                "polarity must be +1 or -1, got {other}"
            ))),
        }
    }

    #[inline]
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

/// A fully resolved edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub item: NodeId,
    pub source: NodeId,
    pub polarity: Polarity,
    pub kind: EdgeKind,
    /// Seconds since the epoch, UTC.
    pub timestamp: i64,
}

/// Beta-distribution parameters of a node plus the cached reputation
/// `q = (alpha - beta) / (alpha + beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaState {
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

impl BetaState {
    pub fn fresh(c: f64) -> Self {
        BetaState {
            alpha: c,
            beta: c,
            q: 0.0,
        }
    }

    pub fn from_params(alpha: f64, beta: f64) -> Self {
        BetaState {
            alpha,
            beta,
            q: reputation(alpha, beta),
        }
    }

    /// State of a seed item: (1 + c, c) or (c, 1 + c) with q pinned to ±1.
    pub fn pinned(label: Label, c: f64) -> Self {
        match label {
            Label::Reliable => BetaState {
                alpha: 1.0 + c,
                beta: c,
                q: 1.0,
            },
            Label::Fake => BetaState {
                alpha: c,
                beta: 1.0 + c,
                q: -1.0,
            },
        }
    }
}

#[inline]
pub fn reputation(alpha: f64, beta: f64) -> f64 {
    let total = alpha + beta;
    if total > 0.0 {
        (alpha - beta) / total
    } else {
        0.0
    }
}

/// One adjacency entry; `node` indexes the opposite side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjacent {
    pub node: u32,
    pub polarity: Polarity,
    pub kind: EdgeKind,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeInsert {
    Inserted,
    Duplicate,
}

/// Bipartite reputation graph.
#[derive(Debug, Clone)]
pub struct ReputationGraph {
    c: f64,
    pub(crate) item_urls: Vec<String>,
    pub(crate) item_states: Vec<BetaState>,
    pub(crate) item_pins: Vec<Option<Label>>,
    pub(crate) item_adj: Vec<Vec<Adjacent>>,
    pub(crate) source_keys: Vec<String>,
    pub(crate) source_kinds: Vec<NodeKind>,
    pub(crate) source_states: Vec<BetaState>,
    pub(crate) source_adj: Vec<Vec<Adjacent>>,
    url_index: HashMap<String, u32>,
    handle_index: HashMap<String, u32>,
    site_index: HashMap<String, u32>,
    // (item, source, kind) -> (slot in item list, slot in source list)
    edge_index: HashMap<(u32, u32, EdgeKind), (u32, u32)>,
    edge_order: Vec<(u32, u32, EdgeKind)>,
}

impl Default for ReputationGraph {
    fn default() -> Self {
        Self::new(DEFAULT_C)
    }
}

fn check_key(what: &str, key: &str) -> Result<()> {
    if key.is_empty() {
        return Err(Error::InvalidInput(format!("empty {what}")));
    }
    if key.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidInput(format!(
            "{what} {key:?} contains tab or newline"
        )));
    }
    Ok(())
}

impl ReputationGraph {
    pub fn new(c: f64) -> Self {
        assert!(c > 0.0, "regularization constant must be positive");
        ReputationGraph {
            c,
            item_urls: Vec::new(),
            item_states: Vec::new(),
            item_pins: Vec::new(),
            item_adj: Vec::new(),
            source_keys: Vec::new(),
            source_kinds: Vec::new(),
            source_states: Vec::new(),
            source_adj: Vec::new(),
            url_index: HashMap::new(),
            handle_index: HashMap::new(),
            site_index: HashMap::new(),
            edge_index: HashMap::new(),
            edge_order: Vec::new(),
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn item_count(&self) -> usize {
        self.item_urls.len()
    }

    pub fn source_count(&self) -> usize {
        self.source_keys.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_index.len()
    }

    /// Adds an item for an already canonical URL; idempotent.
    pub fn add_item(&mut self, url: &str) -> Result<NodeId> {
        check_key("url", url)?;
        if let Some(&idx) = self.url_index.get(url) {
            return Ok(NodeId::item(idx));
        }
        let idx = u32::try_from(self.item_urls.len())
            .map_err(|_| Error::InvalidInput("item index space exhausted".into()))?;
        self.item_urls.push(url.to_owned());
        self.item_states.push(BetaState::fresh(self.c));
        self.item_pins.push(None);
        self.item_adj.push(Vec::new());
        self.url_index.insert(url.to_owned(), idx);
        Ok(NodeId::item(idx))
    }

    /// Adds a user (by handle) or site (by domain); idempotent per (key, kind).
    pub fn add_source(&mut self, key: &str, kind: NodeKind) -> Result<NodeId> {
        check_key("source key", key)?;
        let index = match kind {
            NodeKind::User => &mut self.handle_index,
            NodeKind::Site => &mut self.site_index,
            NodeKind::Item => {
                return Err(Error::InvalidInput("items are not sources".into()));
            }
        };
        if let Some(&idx) = index.get(key) {
            return Ok(NodeId { kind, index: idx });
        }
        let idx = u32::try_from(self.source_keys.len())
            .map_err(|_| Error::InvalidInput("source index space exhausted".into()))?;
        index.insert(key.to_owned(), idx);
        self.source_keys.push(key.to_owned());
        self.source_kinds.push(kind);
        self.source_states.push(BetaState::fresh(self.c));
        self.source_adj.push(Vec::new());
        Ok(NodeId { kind, index: idx })
    }

    /// Inserts an edge. Duplicate tweets and editorial edges keep the earliest
    /// timestamp and report `Duplicate`; a repeated vote replaces the stored
    /// polarity unless it is older than the stored one.
    pub fn add_edge(
        &mut self,
        item: NodeId,
        source: NodeId,
        polarity: Polarity,
        kind: EdgeKind,
        timestamp: i64,
    ) -> Result<EdgeInsert> {
        self.check_node(item)?;
        self.check_node(source)?;
        if !item.is_item() {
            return Err(Error::InvalidEdge(format!("{item:?} is not an item")));
        }
        if source.kind != kind.expected_source() {
            return Err(Error::InvalidEdge(format!(
                "{kind} edge needs a {} source, got {}",
                kind.expected_source(),
                source.kind
            )));
        }
        if kind != EdgeKind::Vote && polarity == Polarity::Negative {
            return Err(Error::InvalidEdge(format!(
                "{kind} edges are always positive"
            )));
        }

        let key = (item.index, source.index, kind);
        if let Some(&(islot, sslot)) = self.edge_index.get(&key) {
            let stored = &mut self.item_adj[item.index as usize][islot as usize];
            if kind == EdgeKind::Vote {
                if timestamp >= stored.timestamp {
                    stored.polarity = polarity;
                    stored.timestamp = timestamp;
                    let mirror = &mut self.source_adj[source.index as usize][sslot as usize];
                    mirror.polarity = polarity;
                    mirror.timestamp = timestamp;
                }
                return Ok(EdgeInsert::Inserted);
            }
            if timestamp < stored.timestamp {
                stored.timestamp = timestamp;
                self.source_adj[source.index as usize][sslot as usize].timestamp = timestamp;
            }
            return Ok(EdgeInsert::Duplicate);
        }

        let item_list = &mut self.item_adj[item.index as usize];
        let source_list = &mut self.source_adj[source.index as usize];
        let islot = item_list.len() as u32;
        let sslot = source_list.len() as u32;
        item_list.push(Adjacent {
            node: source.index,
            polarity,
            kind,
            timestamp,
        });
        source_list.push(Adjacent {
            node: item.index,
            polarity,
            kind,
            timestamp,
        });
        self.edge_index.insert(key, (islot, sslot));
        self.edge_order.push(key);
        Ok(EdgeInsert::Inserted)
    }

    fn check_node(&self, id: NodeId) -> Result<()> {
        let ok = match id.kind {
            NodeKind::Item => (id.index as usize) < self.item_urls.len(),
            kind => self
                .source_kinds
                .get(id.index as usize)
                .is_some_and(|&k| k == kind),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("unknown node {id:?}")))
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.check_node(id).is_ok()
    }

    pub fn item_id(&self, url: &str) -> Option<NodeId> {
        self.url_index.get(url).map(|&i| NodeId::item(i))
    }

    pub fn source_id(&self, key: &str, kind: NodeKind) -> Option<NodeId> {
        let index = match kind {
            NodeKind::User => &self.handle_index,
            NodeKind::Site => &self.site_index,
            NodeKind::Item => return None,
        };
        index.get(key).map(|&index| NodeId { kind, index })
    }

    pub fn item_url(&self, item: NodeId) -> &str {
        &self.item_urls[item.index as usize]
    }

    pub fn source_key(&self, source: NodeId) -> &str {
        &self.source_keys[source.index as usize]
    }

    pub fn item_ids(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.item_urls.len() as u32).map(NodeId::item)
    }

    pub fn source_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.source_kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| NodeId {
                kind,
                index: i as u32,
            })
    }

    pub fn state(&self, id: NodeId) -> BetaState {
        match id.kind {
            NodeKind::Item => self.item_states[id.index as usize],
            _ => self.source_states[id.index as usize],
        }
    }

    pub fn seed_label(&self, item: NodeId) -> Option<Label> {
        self.item_pins[item.index as usize]
    }

    pub fn is_seed(&self, item: NodeId) -> bool {
        item.is_item() && self.item_pins[item.index as usize].is_some()
    }

    /// Edges of an item (opposite side: source indices).
    pub fn item_edges(&self, item: NodeId) -> &[Adjacent] {
        &self.item_adj[item.index as usize]
    }

    /// Edges of a source (opposite side: item indices).
    pub fn source_edges(&self, source: NodeId) -> &[Adjacent] {
        &self.source_adj[source.index as usize]
    }

    pub fn degree(&self, id: NodeId) -> usize {
        match id.kind {
            NodeKind::Item => self.item_adj[id.index as usize].len(),
            _ => self.source_adj[id.index as usize].len(),
        }
    }

    pub fn source_kind_of(&self, index: u32) -> NodeKind {
        self.source_kinds[index as usize]
    }

    pub fn edge(&self, item: NodeId, source: NodeId, kind: EdgeKind) -> Option<Edge> {
        let &(islot, _) = self.edge_index.get(&(item.index, source.index, kind))?;
        if !item.is_item() || self.source_kinds.get(source.index as usize) != Some(&source.kind) {
            return None;
        }
        let adj = self.item_adj[item.index as usize][islot as usize];
        Some(Edge {
            item,
            source,
            polarity: adj.polarity,
            kind: adj.kind,
            timestamp: adj.timestamp,
        })
    }

    /// All edges, grouped by item in index order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.item_adj.iter().enumerate().flat_map(move |(i, list)| {
            list.iter().map(move |adj| Edge {
                item: NodeId::item(i as u32),
                source: NodeId {
                    kind: self.source_kinds[adj.node as usize],
                    index: adj.node,
                },
                polarity: adj.polarity,
                kind: adj.kind,
                timestamp: adj.timestamp,
            })
        })
    }

    /// All edges in first-insertion order. Replaying them into an empty graph
    /// reproduces both adjacency orders exactly.
    pub fn edges_in_insertion_order(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edge_order.iter().map(move |&(item, source, kind)| {
            self.edge(
                NodeId::item(item),
                NodeId {
                    kind: self.source_kinds[source as usize],
                    index: source,
                },
                kind,
            )
            .expect("edge log references a stored edge")
        })
    }

    pub(crate) fn set_state(&mut self, id: NodeId, state: BetaState) {
        match id.kind {
            NodeKind::Item => self.item_states[id.index as usize] = state,
            _ => self.source_states[id.index as usize] = state,
        }
    }

    pub(crate) fn set_pin(&mut self, item: NodeId, pin: Option<Label>) {
        self.item_pins[item.index as usize] = pin;
    }

    /// Full consistency check: adjacency symmetry, index round-trips and
    /// state bounds.
    pub fn audit(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InconsistentState(msg));
        let mut from_items = 0usize;
        for (i, list) in self.item_adj.iter().enumerate() {
            for adj in list {
                from_items += 1;
                let back = self.source_adj[adj.node as usize]
                    .iter()
                    .filter(|b| b.node == i as u32 && b.kind == adj.kind)
                    .collect::<Vec<_>>();
                if back.len() != 1 || back[0].polarity != adj.polarity {
                    return fail(format!("edge item {i} -> source {} not mirrored", adj.node));
                }
            }
        }
        let from_sources: usize = self.source_adj.iter().map(Vec::len).sum();
        if from_items != from_sources || from_items != self.edge_index.len() {
            return fail(format!(
                "edge counts disagree: items {from_items}, sources {from_sources}, index {}",
                self.edge_index.len()
            ));
        }
        for (url, &idx) in &self.url_index {
            if self.item_urls[idx as usize] != *url {
                return fail(format!("url index broken for {url}"));
            }
        }
        for (index, kind) in [
            (&self.handle_index, NodeKind::User),
            (&self.site_index, NodeKind::Site),
        ] {
            for (key, &idx) in index {
                if self.source_keys[idx as usize] != *key || self.source_kinds[idx as usize] != kind
                {
                    return fail(format!("{kind} index broken for {key}"));
                }
            }
        }
        for (i, st) in self
            .item_states
            .iter()
            .chain(&self.source_states)
            .enumerate()
        {
            if !(st.alpha >= self.c && st.beta >= self.c && (-1.0..=1.0).contains(&st.q)) {
                return fail(format!("node state {i} out of bounds: {st:?}"));
            }
        }
        Ok(())
    }

    /// Order-independent view of the edge set, keyed by URL and source key.
    pub fn edge_set(&self) -> BTreeSet<(String, NodeKind, String, EdgeKind, i8, i64)> {
        self.edges()
            .map(|e| {
                (
                    self.item_url(e.item).to_owned(),
                    e.source.kind,
                    self.source_key(e.source).to_owned(),
                    e.kind,
                    e.polarity.sign(),
                    e.timestamp,
                )
            })
            .collect()
    }

    /// True when both graphs hold the same keyed nodes, states and edges,
    /// regardless of the index order they were built in.
    pub fn same_content(&self, other: &ReputationGraph) -> bool {
        if self.item_count() != other.item_count() || self.source_count() != other.source_count() {
            return false;
        }
        let items_match = self.item_ids().all(|id| {
            other.item_id(self.item_url(id)).is_some_and(|o| {
                other.state(o) == self.state(id) && other.seed_label(o) == self.seed_label(id)
            })
        });
        let sources_match = self.source_ids().all(|id| {
            other
                .source_id(self.source_key(id), id.kind)
                .is_some_and(|o| other.state(o) == self.state(id))
        });
        items_match && sources_match && self.edge_set() == other.edge_set()
    }
}
