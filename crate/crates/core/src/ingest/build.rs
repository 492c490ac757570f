use std::collections::BTreeSet;

use super::domain::{canonicalize_url, site_of};
use super::records::ShareRecord;
use crate::error::Result;
use crate::graph::{EdgeInsert, EdgeKind, NodeKind, Polarity, ReputationGraph, DEFAULT_C};

/// How share records become graph edges.
#[derive(Debug, Clone)]
pub struct GraphOptions {
    pub c: f64,
    /// Add a site -> item editorial edge for every URL.
    pub editorial: bool,
    /// Sites without editorial oversight; they never get editorial edges.
    pub aggregators: BTreeSet<String>,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            c: DEFAULT_C,
            editorial: false,
            aggregators: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub records: usize,
    pub invalid_urls: usize,
    pub duplicate_tweets: usize,
}

/// Inserts one record. Returns whether the tweet edge was new.
pub fn add_record(
    graph: &mut ReputationGraph,
    record: &ShareRecord,
    options: &GraphOptions,
) -> Result<EdgeInsert> {
    let url = canonicalize_url(&record.url)?;
    let item = graph.add_item(&url)?;
    let user = graph.add_source(&record.user, NodeKind::User)?;
    let inserted = graph.add_edge(item, user, Polarity::Positive, EdgeKind::Tweet, record.ts)?;
    if options.editorial {
        let site = site_of(&url);
        if !site.is_empty() && !options.aggregators.contains(&site) {
            let site = graph.add_source(&site, NodeKind::Site)?;
            graph.add_edge(
                item,
                site,
                Polarity::Positive,
                EdgeKind::Editorial,
                record.ts,
            )?;
        }
    }
    Ok(inserted)
}

/// Builds a graph from share records, skipping records whose URL does not
/// canonicalize.
pub fn build_graph<'a>(
    records: impl IntoIterator<Item = &'a ShareRecord>,
    options: &GraphOptions,
) -> Result<(ReputationGraph, BuildReport)> {
    let mut graph = ReputationGraph::new(options.c);
    let mut report = BuildReport::default();
    for record in records {
        report.records += 1;
        match add_record(&mut graph, record, options) {
            Ok(EdgeInsert::Inserted) => {}
            Ok(EdgeInsert::Duplicate) => report.duplicate_tweets += 1,
            Err(crate::Error::InvalidUrl { .. }) => report.invalid_urls += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((graph, report))
}
