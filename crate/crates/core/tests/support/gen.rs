//! Random graphs with a parallel plain edge list for the oracles.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use newsrep::engine::SeedLabels;
use newsrep::graph::{EdgeKind, NodeId, NodeKind, Polarity, ReputationGraph};
use rand::seq::SliceRandom;
use rand::Rng;

use super::oracle::OracleEdge;

pub struct RandomGraph {
    pub graph: ReputationGraph,
    pub n_items: usize,
    pub n_users: usize,
    /// In insertion order.
    pub edges: Vec<OracleEdge>,
    pub seeds: HashMap<usize, f64>,
    pub labels: SeedLabels,
}

/// Up to `max_nodes` nodes split between items and users and up to
/// `max_edges` distinct item-user edges. With `votes`, about a third of the
/// edges are votes of random polarity.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    max_nodes: usize,
    max_edges: usize,
    votes: bool,
) -> RandomGraph {
    let n_items = rng.gen_range(1..max_nodes.max(2));
    let n_users = rng.gen_range(1..=(max_nodes - n_items).max(1));
    let mut graph = ReputationGraph::new(0.02);
    for i in 0..n_items {
        graph
            .add_item(&format!("https://site{}.example/{i}", i % 7))
            .unwrap();
    }
    for u in 0..n_users {
        graph
            .add_source(&format!("user{u}"), NodeKind::User)
            .unwrap();
    }
    let target = rng.gen_range(0..=max_edges.min(n_items * n_users));
    let mut pairs = BTreeSet::new();
    let mut edges = Vec::with_capacity(target);
    while edges.len() < target {
        let (i, u) = (rng.gen_range(0..n_items), rng.gen_range(0..n_users));
        if !pairs.insert((i, u)) {
            continue;
        }
        let (kind, p) = if votes && rng.gen_bool(1.0 / 3.0) {
            (EdgeKind::Vote, if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        } else {
            (EdgeKind::Tweet, 1.0)
        };
        let ts = rng.gen_range(1..1_000_000);
        graph
            .add_edge(
                NodeId::item(i as u32),
                NodeId {
                    kind: NodeKind::User,
                    index: u as u32,
                },
                Polarity::from_sign(p as i8).unwrap(),
                kind,
                ts,
            )
            .unwrap();
        edges.push((i, u, p));
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(rng);
    let n_seeds = rng.gen_range(0..=n_items.min(12));
    let mut seeds = HashMap::new();
    let mut labels = SeedLabels::default();
    for &i in &order[..n_seeds] {
        let id = NodeId::item(i as u32);
        if rng.gen_bool(0.5) {
            seeds.insert(i, -1.0);
            labels.fake_items.insert(id);
        } else {
            seeds.insert(i, 1.0);
            labels.nonfake_items.insert(id);
        }
    }
    RandomGraph {
        graph,
        n_items,
        n_users,
        edges,
        seeds,
        labels,
    }
}
