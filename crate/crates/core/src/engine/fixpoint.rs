use rayon::prelude::*;

use super::{seed, ClassificationTable, EngineConfig, SeedLabels};
use crate::error::Result;
use crate::graph::{reputation, Adjacent, BetaState, ReputationGraph};

/// How the per-node updates of one phase are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    /// Fan out over the current rayon pool. Each node still sums its own
    /// neighbours in adjacency order, so results match `Sequential` bit for bit.
    Parallel,
}

const PAR_CHUNK: usize = 4096;

/// Seeds the graph and runs `config.iterations` full iterations.
pub fn run_fixpoint(
    graph: &mut ReputationGraph,
    labels: &SeedLabels,
    config: &EngineConfig,
) -> Result<ClassificationTable> {
    run_fixpoint_with(graph, labels, config, Execution::Sequential)
}

pub fn run_fixpoint_with(
    graph: &mut ReputationGraph,
    labels: &SeedLabels,
    config: &EngineConfig,
    execution: Execution,
) -> Result<ClassificationTable> {
    config.check_graph(graph)?;
    seed(graph, labels)?;
    for _ in 0..config.iterations {
        source_phase(graph, config, execution);
        item_phase(graph, config, execution);
    }
    Ok(ClassificationTable::from_graph(graph))
}

/// alpha = c + sum of positive p*q over neighbours, beta = c - sum of the
/// negative ones. Zero contributions join neither sum.
#[inline]
fn accumulate(adj: &[Adjacent], other: &[BetaState], config: &EngineConfig) -> BetaState {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for a in adj {
        if !config.allows(a.kind) {
            continue;
        }
        let x = a.polarity.value() * other[a.node as usize].q;
        if x > 0.0 {
            pos += x;
        } else if x < 0.0 {
            neg -= x;
        }
    }
    let alpha = config.c + pos;
    let beta = config.c + neg;
    BetaState {
        alpha,
        beta,
        q: reputation(alpha, beta),
    }
}

fn source_phase(graph: &mut ReputationGraph, config: &EngineConfig, execution: Execution) {
    let items = &graph.item_states;
    let adj = &graph.source_adj;
    let states = &mut graph.source_states;
    match execution {
        Execution::Sequential => {
            for (st, list) in states.iter_mut().zip(adj) {
                *st = accumulate(list, items, config);
            }
        }
        Execution::Parallel => {
            states
                .par_iter_mut()
                .zip(adj.par_iter())
                .with_min_len(PAR_CHUNK)
                .for_each(|(st, list)| *st = accumulate(list, items, config));
        }
    }
}

fn item_phase(graph: &mut ReputationGraph, config: &EngineConfig, execution: Execution) {
    let sources = &graph.source_states;
    let adj = &graph.item_adj;
    let pins = &graph.item_pins;
    let states = &mut graph.item_states;
    match execution {
        Execution::Sequential => {
            for ((st, list), pin) in states.iter_mut().zip(adj).zip(pins) {
                if pin.is_none() {
                    *st = accumulate(list, sources, config);
                }
            }
        }
        Execution::Parallel => {
            states
                .par_iter_mut()
                .zip(adj.par_iter())
                .zip(pins.par_iter())
                .with_min_len(PAR_CHUNK)
                .for_each(|((st, list), pin)| {
                    if pin.is_none() {
                        *st = accumulate(list, sources, config);
                    }
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeKind, NodeKind, Polarity};
    use crate::label::Label;

    fn worked_example() -> (ReputationGraph, SeedLabels) {
        let mut g = ReputationGraph::default();
        let i1 = g.add_item("https://a.example/1").unwrap();
        let i2 = g.add_item("https://a.example/2").unwrap();
        let i3 = g.add_item("https://a.example/3").unwrap();
        let u1 = g.add_source("u1", NodeKind::User).unwrap();
        let u2 = g.add_source("u2", NodeKind::User).unwrap();
        for (i, u) in [(i1, u1), (i3, u1), (i2, u2)] {
            g.add_edge(i, u, Polarity::Positive, EdgeKind::Tweet, 0)
                .unwrap();
        }
        (g, SeedLabels::new([i1], [i2]))
    }

    #[test]
    fn worked_example_one_iteration() {
        let (mut g, seeds) = worked_example();
        let config = EngineConfig {
            iterations: 1,
            ..EngineConfig::default()
        };
        let table = run_fixpoint(&mut g, &seeds, &config).unwrap();
        // scalar oracle: user u1 sees one fake seed, u2 one reliable seed
        let qu1: f64 = (0.02 - 1.02) / (0.02 + 1.02);
        let qu2: f64 = (1.02 - 0.02) / (0.02 + 1.02);
        let a3 = 0.02;
        let b3 = 0.02 - qu1;
        let qi3 = (a3 - b3) / (a3 + b3);
        assert!((qu1 + 0.96154).abs() < 1e-5);
        assert!((g.state(g.source_id("u1", NodeKind::User).unwrap()).q - qu1).abs() < 1e-15);
        assert!((g.state(g.source_id("u2", NodeKind::User).unwrap()).q - qu2).abs() < 1e-15);
        let row = &table.rows[2];
        assert!((row.classification.reputation - qi3).abs() < 1e-15);
        assert!((row.classification.reputation + 0.96006).abs() < 1e-4);
        assert_eq!(row.classification.label, Label::Fake);
        assert_eq!(table.rows[0].classification.reputation, -1.0);
        assert_eq!(table.rows[1].classification.reputation, 1.0);
    }

    #[test]
    fn isolated_item_stays_neutral() {
        let mut g = ReputationGraph::default();
        let lone = g.add_item("https://a.example/lone").unwrap();
        let table = run_fixpoint(&mut g, &SeedLabels::default(), &EngineConfig::default()).unwrap();
        assert_eq!(table.rows[0].classification.reputation, 0.0);
        assert_eq!(table.rows[0].classification.label, Label::Reliable);
        assert_eq!(g.state(lone), BetaState::fresh(0.02));
    }

    #[test]
    fn swap_negates() {
        let (mut g, seeds) = worked_example();
        let config = EngineConfig::default();
        let a = run_fixpoint(&mut g, &seeds, &config).unwrap();
        let b = run_fixpoint(&mut g, &seeds.swapped(), &config).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.classification.reputation, -y.classification.reputation);
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let (mut g, seeds) = worked_example();
        let config = EngineConfig::default();
        let a = run_fixpoint_with(&mut g, &seeds, &config, Execution::Sequential).unwrap();
        let b = run_fixpoint_with(&mut g, &seeds, &config, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disabled_edge_kinds_are_ignored() {
        let mut g = ReputationGraph::default();
        let i1 = g.add_item("https://a.example/1").unwrap();
        let i2 = g.add_item("https://a.example/2").unwrap();
        let site = g.add_source("a.example", NodeKind::Site).unwrap();
        let u = g.add_source("u", NodeKind::User).unwrap();
        g.add_edge(i1, site, Polarity::Positive, EdgeKind::Editorial, 0)
            .unwrap();
        g.add_edge(i2, site, Polarity::Positive, EdgeKind::Editorial, 0)
            .unwrap();
        g.add_edge(i2, u, Polarity::Negative, EdgeKind::Vote, 0)
            .unwrap();
        let seeds = SeedLabels::new([i1], []);
        let off = EngineConfig {
            include_votes: false,
            ..EngineConfig::default()
        };
        run_fixpoint(&mut g, &seeds, &off).unwrap();
        assert_eq!(g.state(i2).q, 0.0);
        let on = EngineConfig {
            include_editorial: true,
            include_votes: false,
            ..EngineConfig::default()
        };
        run_fixpoint(&mut g, &seeds, &on).unwrap();
        assert!(g.state(i2).q < 0.0);
    }
}
