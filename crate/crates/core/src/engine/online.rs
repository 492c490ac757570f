use std::collections::HashMap;

use super::EngineConfig;
use crate::error::{Error, Result};
use crate::graph::{reputation, Edge, NodeId, NodeKind, ReputationGraph};
use crate::label::Label;

/// What a single online ingestion changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OnlineOutcome {
    /// Items whose label changed sign, in first-touch order.
    pub flipped: Vec<NodeId>,
    /// Update calls processed, including skipped seed items.
    pub touched: usize,
}

struct Task {
    node: NodeId,
    delta: f64,
    depth: u32,
}

/// Propagates a freshly inserted edge through the graph.
///
/// The item first receives the source's net contribution `p * q_u`; when its
/// reputation moves by at least the propagation threshold and depth remains,
/// the change is forwarded to every neighbour, alternating between item and
/// source updates. A positive delta grows alpha, a negative one grows beta.
/// Seed items are never written and forward nothing.
///
/// The traversal uses an explicit stack with children pushed in reverse, which
/// visits nodes in the same order as depth-first recursion.
pub fn ingest_edge_online(
    graph: &mut ReputationGraph,
    edge: &Edge,
    config: &EngineConfig,
) -> Result<OnlineOutcome> {
    config.check_graph(graph)?;
    let stored = graph
        .edge(edge.item, edge.source, edge.kind)
        .ok_or_else(|| {
            Error::InconsistentState(format!(
                "{} edge between {:?} and {:?} is not in the graph",
                edge.kind, edge.item, edge.source
            ))
        })?;
    let mut outcome = OnlineOutcome::default();
    if !config.allows(stored.kind) {
        return Ok(outcome);
    }

    let delta = stored.polarity.value() * graph.state(stored.source).q;
    let mut stack = vec![Task {
        node: stored.item,
        delta,
        depth: config.propagation_depth,
    }];
    let mut before: HashMap<u32, Label> = HashMap::new();
    let mut order: Vec<u32> = Vec::new();

    while let Some(task) = stack.pop() {
        outcome.touched += 1;
        let node = task.node;
        if node.is_item() {
            if graph.is_seed(node) {
                continue;
            }
            before.entry(node.index).or_insert_with(|| {
                order.push(node.index);
                Label::from_reputation(graph.state(node).q)
            });
        }

        let mut st = graph.state(node);
        if task.delta > 0.0 {
            st.alpha += task.delta;
        } else if task.delta < 0.0 {
            st.beta -= task.delta;
        }
        let q_new = reputation(st.alpha, st.beta);
        let change = q_new - st.q;
        st.q = q_new;
        graph.set_state(node, st);

        if task.depth == 0 || change.abs() < config.propagation_threshold {
            continue;
        }
        let neighbours = if node.is_item() {
            graph.item_edges(node)
        } else {
            graph.source_edges(node)
        };
        for adj in neighbours.iter().rev() {
            if !config.allows(adj.kind) {
                continue;
            }
            let next = if node.is_item() {
                NodeId {
                    kind: graph.source_kind_of(adj.node),
                    index: adj.node,
                }
            } else {
                NodeId {
                    kind: NodeKind::Item,
                    index: adj.node,
                }
            };
            stack.push(Task {
                node: next,
                delta: change * adj.polarity.value(),
                depth: task.depth - 1,
            });
        }
    }

    for index in order {
        let id = NodeId::item(index);
        if Label::from_reputation(graph.state(id).q) != before[&index] {
            outcome.flipped.push(id);
        }
    }
    Ok(outcome)
}
