//! Line-oriented graph snapshots.
//!
//! ```text
//! newsrep-graph<TAB>1<TAB><c>
//! N<TAB><item|user|site><TAB><key><TAB><alpha><TAB><beta><TAB><q><TAB><fake|reliable|->
//! E<TAB><item-url><TAB><source-key><TAB><user|site><TAB><+1|-1><TAB><tweet|editorial|vote><TAB><timestamp>
//! ```
//!
//! Node lines come first, items then sources, each in index order. Edge lines
//! follow in first-insertion order, so reading a snapshot rebuilds identical
//! indices and adjacency orders. Floats use the shortest round-trip decimal
//! form. The seed column is `-` for sources and unseeded items.

use std::io::{BufRead, Write};

use super::{BetaState, EdgeKind, NodeKind, Polarity, ReputationGraph};
use crate::error::{Error, Result};
use crate::label::Label;

pub const SNAPSHOT_HEADER: &str = "newsrep-graph";
const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(graph: &ReputationGraph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}\t{SNAPSHOT_VERSION}\t{}", graph.c())?;
    for id in graph.item_ids() {
        let st = graph.state(id);
        let seed = graph.seed_label(id).map_or("-", Label::as_str);
        writeln!(
            out,
            "N\titem\t{}\t{}\t{}\t{}\t{seed}",
            graph.item_url(id),
            st.alpha,
            st.beta,
            st.q
        )?;
    }
    for id in graph.source_ids() {
        let st = graph.state(id);
        writeln!(
            out,
            "N\t{}\t{}\t{}\t{}\t{}\t-",
            id.kind,
            graph.source_key(id),
            st.alpha,
            st.beta,
            st.q
        )?;
    }
    for e in graph.edges_in_insertion_order() {
        let sign = if e.polarity == Polarity::Positive {
            "+1"
        } else {
            "-1"
        };
        writeln!(
            out,
            "E\t{}\t{}\t{}\t{sign}\t{}\t{}",
            graph.item_url(e.item),
            graph.source_key(e.source),
            e.source.kind,
            e.kind,
            e.timestamp
        )?;
    }
    out.flush()
}

fn float(field: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| Error::parse(format!("snapshot line {line}"), e.to_string()))
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<ReputationGraph> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("snapshot line 1", "empty snapshot"))?
        .map_err(|e| Error::parse("snapshot line 1", e.to_string()))?;
    let head: Vec<&str> = header.split('\t').collect();
    if head.len() != 3 || head[0] != SNAPSHOT_HEADER {
        return Err(Error::parse("snapshot line 1", "missing snapshot header"));
    }
    if head[1] != SNAPSHOT_VERSION.to_string() {
        return Err(Error::parse(
            "snapshot line 1",
            format!("unsupported snapshot version {}", head[1]),
        ));
    }
    let c = float(head[2], 1)?;
    if !(c > 0.0) {
        return Err(Error::parse(
            "snapshot line 1",
            "regularization must be positive",
        ));
    }
    let mut graph = ReputationGraph::new(c);

    for (n, line) in lines.enumerate() {
        let lineno = n + 2;
        let loc = || format!("snapshot line {lineno}");
        let line = line.map_err(|e| Error::parse(loc(), e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        match (f[0], f.len()) {
            ("N", 7) => {
                let kind: NodeKind = f[1].parse()?;
                let state = BetaState {
                    alpha: float(f[3], lineno)?,
                    beta: float(f[4], lineno)?,
                    q: float(f[5], lineno)?,
                };
                let id = match kind {
                    NodeKind::Item => graph.add_item(f[2])?,
                    k => graph.add_source(f[2], k)?,
                };
                graph.set_state(id, state);
                if f[6] != "-" {
                    if kind != NodeKind::Item {
                        return Err(Error::parse(loc(), "only items carry seed labels"));
                    }
                    graph.set_pin(id, Some(f[6].parse()?));
                }
            }
            ("E", 7) => {
                let item = graph
                    .item_id(f[1])
                    .ok_or_else(|| Error::parse(loc(), format!("unknown item {}", f[1])))?;
                let kind: NodeKind = f[3].parse()?;
                let source = graph
                    .source_id(f[2], kind)
                    .ok_or_else(|| Error::parse(loc(), format!("unknown source {}", f[2])))?;
                let polarity = match f[4] {
                    "+1" | "1" => Polarity::Positive,
                    "-1" => Polarity::Negative,
                    other => return Err(Error::parse(loc(), format!("bad polarity {other}"))),
                };
                let edge_kind: EdgeKind = f[5].parse()?;
                let ts = f[6]
                    .parse::<i64>()
                    .map_err(|e| Error::parse(loc(), e.to_string()))?;
                graph.add_edge(item, source, polarity, edge_kind, ts)?;
            }
            _ => return Err(Error::parse(loc(), "unrecognized record")),
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReputationGraph {
        let mut g = ReputationGraph::default();
        let i1 = g.add_item("https://a.example/1").unwrap();
        let i2 = g.add_item("https://b.example/2").unwrap();
        let u = g.add_source("alice", NodeKind::User).unwrap();
        let v = g.add_source("bob", NodeKind::User).unwrap();
        let s = g.add_source("a.example", NodeKind::Site).unwrap();
        g.add_edge(i2, v, Polarity::Positive, EdgeKind::Tweet, 7)
            .unwrap();
        g.add_edge(i1, u, Polarity::Positive, EdgeKind::Tweet, 5)
            .unwrap();
        g.add_edge(i1, s, Polarity::Positive, EdgeKind::Editorial, 5)
            .unwrap();
        g.add_edge(i2, u, Polarity::Negative, EdgeKind::Vote, 9)
            .unwrap();
        g.set_pin(i1, Some(Label::Fake));
        g.set_state(i1, BetaState::pinned(Label::Fake, g.c()));
        g.set_state(u, BetaState::from_params(0.1, 0.7 / 3.0));
        g
    }

    #[test]
    fn round_trip_preserves_everything() {
        let g = sample();
        let mut buf = Vec::new();
        write_snapshot(&g, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert!(g.same_content(&back));
        for id in g.source_ids() {
            assert_eq!(g.source_edges(id), back.source_edges(id));
        }
        let mut again = Vec::new();
        write_snapshot(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_snapshot("nope\n".as_bytes()).is_err());
        assert!(read_snapshot("newsrep-graph\t9\t0.02\n".as_bytes()).is_err());
    }

    #[test]
    fn rejects_dangling_edge() {
        let text = "newsrep-graph\t1\t0.02\nE\thttps://x/\tu\tuser\t+1\ttweet\t1\n";
        assert!(read_snapshot(text.as_bytes()).is_err());
    }
}
