//! Replays an edge stream through the online update and measures how far the
//! online reputations drift from a batch recomputation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat};

use super::csv_err;
use crate::engine::{ingest_edge_online, pin_item, run_fixpoint, EngineConfig, SeedUrls};
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeInsert, EdgeKind, NodeKind, Polarity, ReputationGraph};
use crate::ingest::{build_graph, canonicalize_url, GraphOptions, ShareRecord};

/// When the batch fixpoint is recomputed during replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecomputeInterval {
    /// After every edge; the online state is refreshed continuously.
    EveryEdge,
    /// At multiples of this many seconds since the epoch, so `1d` means at
    /// every UTC midnight.
    Seconds(i64),
}

impl RecomputeInterval {
    pub const DAILY: RecomputeInterval = RecomputeInterval::Seconds(86_400);
}

impl FromStr for RecomputeInterval {
    type Err = Error;

    /// Accepts `edge`, `every-edge`, or a count with unit `s`, `m`, `h`, `d`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("edge") || s.eq_ignore_ascii_case("every-edge") {
            return Ok(RecomputeInterval::EveryEdge);
        }
        let bad = || Error::InvalidInput(format!("bad recompute interval {s:?}"));
        let split = s.len().checked_sub(1).ok_or_else(bad)?;
        let (n, unit) = s.split_at(split);
        let n: i64 = n.parse().map_err(|_| bad())?;
        let scale = match unit {
            "s" => 1,
            "m" => 60,
            "h" => 3600,
            "d" => 86_400,
            _ => return Err(bad()),
        };
        match n.checked_mul(scale) {
            Some(secs) if secs > 0 => Ok(RecomputeInterval::Seconds(secs)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub interval: RecomputeInterval,
    /// Items agree when `|q_online - q_batch|` is strictly below this.
    pub threshold: f64,
    pub config: EngineConfig,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            interval: RecomputeInterval::DAILY,
            threshold: 0.1,
            config: EngineConfig::default(),
        }
    }
}

/// One edge of a replayed stream, named by keys rather than node ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamEdge {
    pub url: String,
    pub source: String,
    pub source_kind: NodeKind,
    pub polarity: Polarity,
    pub kind: EdgeKind,
    pub ts: i64,
}

impl StreamEdge {
    /// A tweet edge; the URL must already be canonical.
    pub fn tweet(url: &str, user: &str, ts: i64) -> Self {
        StreamEdge {
            url: url.to_owned(),
            source: user.to_owned(),
            source_kind: NodeKind::User,
            polarity: Polarity::Positive,
            kind: EdgeKind::Tweet,
            ts,
        }
    }
}

/// Items of one category and how many of them agree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryAgreement {
    pub count: usize,
    pub within: usize,
}

impl CategoryAgreement {
    /// Share of agreeing items; an empty category agrees vacuously.
    pub fn fraction(self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            self.within as f64 / self.count as f64
        }
    }

    fn add(&mut self, agrees: bool) {
        self.count += 1;
        self.within += usize::from(agrees);
    }
}

impl std::ops::AddAssign for CategoryAgreement {
    fn add_assign(&mut self, rhs: Self) {
        self.count += rhs.count;
        self.within += rhs.within;
    }
}

/// Agreement at one recompute boundary. Seed items are left out of every
/// category since both sides pin them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalAgreement {
    pub index: usize,
    /// Covered time range, `[start, end)`; for per-edge recompute both are the
    /// edge's timestamp.
    pub start: i64,
    pub end: i64,
    pub edges: usize,
    /// Items first seen in the interval.
    pub new_items: CategoryAgreement,
    /// Items with at least one tweet in the interval, new ones included.
    pub tweeted_items: CategoryAgreement,
    pub all_items: CategoryAgreement,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgreementReport {
    pub threshold: f64,
    pub intervals: Vec<IntervalAgreement>,
}

impl AgreementReport {
    /// Categories summed over every interval.
    pub fn pooled(&self) -> [CategoryAgreement; 3] {
        let mut out = [CategoryAgreement::default(); 3];
        for iv in &self.intervals {
            out[0] += iv.new_items;
            out[1] += iv.tweeted_items;
            out[2] += iv.all_items;
        }
        out
    }

    /// Lowest per-interval fraction of each category.
    pub fn worst(&self) -> [f64; 3] {
        let mut out = [1.0f64; 3];
        for iv in &self.intervals {
            for (slot, cat) in out
                .iter_mut()
                .zip([iv.new_items, iv.tweeted_items, iv.all_items])
            {
                *slot = slot.min(cat.fraction());
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} intervals, agreement threshold {}\n",
            self.intervals.len(),
            self.threshold
        );
        let worst = self.worst();
        for ((name, cat), low) in ["new items", "tweeted items", "all items"]
            .iter()
            .zip(self.pooled())
            .zip(worst)
        {
            let _ = writeln!(
                s,
                "{name:<14} {:.2}% ({}/{}), worst interval {:.2}%",
                100.0 * cat.fraction(),
                cat.within,
                cat.count,
                100.0 * low
            );
        }
        s
    }
}

fn rfc3339(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

/// Per-interval time series, one row per recompute boundary.
pub fn write_agreement_csv<W: Write>(report: &AgreementReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "interval",
        "start",
        "end",
        "edges",
        "new_items",
        "new_agreement",
        "tweeted_items",
        "tweeted_agreement",
        "all_items",
        "all_agreement",
    ])
    .map_err(csv_err)?;
    for iv in &report.intervals {
        let mut row = vec![
            iv.index.to_string(),
            rfc3339(iv.start),
            rfc3339(iv.end),
            iv.edges.to_string(),
        ];
        for cat in [iv.new_items, iv.tweeted_items, iv.all_items] {
            row.push(cat.count.to_string());
            row.push(format!("{:.6}", cat.fraction()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))
}

struct Replay<'a> {
    graph: &'a mut ReputationGraph,
    seeds: &'a SeedUrls,
    options: &'a ReplayOptions,
    report: AgreementReport,
    new_items: BTreeSet<u32>,
    tweeted: BTreeSet<u32>,
    edges: usize,
}

impl Replay<'_> {
    fn apply(&mut self, e: &StreamEdge) -> Result<()> {
        let known = self.graph.item_count();
        let item = self.graph.add_item(&e.url)?;
        if self.graph.item_count() > known {
            self.new_items.insert(item.index);
            if let Some(label) = self.seeds.label_of(&e.url) {
                pin_item(self.graph, item, label)?;
            }
        }
        let source = self.graph.add_source(&e.source, e.source_kind)?;
        let inserted = self
            .graph
            .add_edge(item, source, e.polarity, e.kind, e.ts)?;
        if e.kind == EdgeKind::Tweet {
            self.tweeted.insert(item.index);
        }
        self.edges += 1;
        if inserted == EdgeInsert::Duplicate && e.kind != EdgeKind::Vote {
            return Ok(());
        }
        let edge = Edge {
            item,
            source,
            polarity: e.polarity,
            kind: e.kind,
            timestamp: e.ts,
        };
        ingest_edge_online(self.graph, &edge, &self.options.config)?;
        Ok(())
    }

    fn refresh(&mut self) -> Result<()> {
        let labels = self.seeds.resolve(self.graph);
        run_fixpoint(self.graph, &labels, &self.options.config)?;
        Ok(())
    }

    /// Compares the online state with a fresh batch run, then adopts the batch
    /// state.
    fn close(&mut self, start: i64, end: i64) -> Result<()> {
        let online: Vec<f64> = self
            .graph
            .item_ids()
            .map(|id| self.graph.state(id).q)
            .collect();
        let mut batch = self.graph.clone();
        let labels = self.seeds.resolve(&batch);
        run_fixpoint(&mut batch, &labels, &self.options.config)?;

        let mut iv = IntervalAgreement {
            index: self.report.intervals.len(),
            start,
            end,
            edges: self.edges,
            new_items: CategoryAgreement::default(),
            tweeted_items: CategoryAgreement::default(),
            all_items: CategoryAgreement::default(),
        };
        for id in batch.item_ids() {
            if batch.is_seed(id) {
                continue;
            }
            let agrees =
                (online[id.index as usize] - batch.state(id).q).abs() < self.options.threshold;
            iv.all_items.add(agrees);
            if self.new_items.contains(&id.index) {
                iv.new_items.add(agrees);
            }
            if self.tweeted.contains(&id.index) {
                iv.tweeted_items.add(agrees);
            }
        }
        self.report.intervals.push(iv);
        *self.graph = batch;
        self.new_items.clear();
        self.tweeted.clear();
        self.edges = 0;
        Ok(())
    }
}

/// Replays `stream` on top of `graph`, which should already hold the batch
/// state of the edges before the stream.
///
/// Edges are applied with the online update. At each recompute boundary the
/// online reputations are compared with a batch fixpoint over everything seen
/// so far, and the graph then continues from the batch state. Seed URLs that
/// appear mid-stream are pinned on arrival. Empty intervals between two edges
/// are reported too.
pub fn replay_agreement(
    graph: &mut ReputationGraph,
    seeds: &SeedUrls,
    stream: &[StreamEdge],
    options: &ReplayOptions,
) -> Result<AgreementReport> {
    options.config.check_graph(graph)?;
    if !(options.threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "agreement threshold must be positive, got {}",
            options.threshold
        )));
    }
    if let Some(k) = stream.windows(2).position(|w| w[1].ts < w[0].ts) {
        return Err(Error::InvalidStream(format!(
            "edge {} at {} precedes edge {} at {}",
            k + 1,
            stream[k + 1].ts,
            k,
            stream[k].ts
        )));
    }
    let mut replay = Replay {
        graph,
        seeds,
        options,
        report: AgreementReport {
            threshold: options.threshold,
            intervals: Vec::new(),
        },
        new_items: BTreeSet::new(),
        tweeted: BTreeSet::new(),
        edges: 0,
    };
    match options.interval {
        RecomputeInterval::EveryEdge => {
            for e in stream {
                replay.apply(e)?;
                replay.refresh()?;
                replay.close(e.ts, e.ts)?;
            }
        }
        RecomputeInterval::Seconds(len) => {
            let mut current: Option<i64> = None;
            for e in stream {
                let slot = e.ts.div_euclid(len);
                if let Some(open) = current {
                    for k in open..slot {
                        replay.close(k * len, (k + 1) * len)?;
                    }
                }
                current = Some(slot);
                replay.apply(e)?;
            }
            if let Some(open) = current {
                replay.close(open * len, (open + 1) * len)?;
            }
        }
    }
    Ok(replay.report)
}

/// Builds the batch state from records before `warmup_end` and replays the
/// rest as tweet edges. Records must be sorted by time; records whose URL
/// does not canonicalize are skipped.
pub fn replay_records(
    records: &[ShareRecord],
    seeds: &SeedUrls,
    warmup_end: i64,
    options: &ReplayOptions,
) -> Result<AgreementReport> {
    if let Some(k) = records.windows(2).position(|w| w[1].ts < w[0].ts) {
        return Err(Error::InvalidStream(format!(
            "record {} at {} precedes record {} at {}",
            k + 1,
            records[k + 1].ts,
            k,
            records[k].ts
        )));
    }
    let split = records.partition_point(|r| r.ts < warmup_end);
    let graph_options = GraphOptions {
        c: options.config.c,
        ..GraphOptions::default()
    };
    let (mut graph, _) = build_graph(&records[..split], &graph_options)?;
    let labels = seeds.resolve(&graph);
    run_fixpoint(&mut graph, &labels, &options.config)?;
    let stream: Vec<StreamEdge> = records[split..]
        .iter()
        .filter_map(|r| {
            canonicalize_url(&r.url)
                .ok()
                .map(|url| StreamEdge::tweet(&url, &r.user, r.ts))
        })
        .collect();
    replay_agreement(&mut graph, seeds, &stream, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: i64 = 86_400;

    fn seeds() -> SeedUrls {
        SeedUrls {
            fake: ["https://f.example/1".to_string()].into(),
            reliable: ["https://r.example/1".to_string()].into(),
        }
    }

    fn stream() -> Vec<StreamEdge> {
        let t0 = 100 * DAY;
        vec![
            StreamEdge::tweet("https://f.example/1", "a", t0 + 10),
            StreamEdge::tweet("https://r.example/1", "b", t0 + 20),
            StreamEdge::tweet("https://x.example/1", "a", t0 + 30),
            StreamEdge::tweet("https://x.example/2", "b", t0 + DAY + 5),
            StreamEdge::tweet("https://x.example/3", "a", t0 + 3 * DAY + 5),
            StreamEdge::tweet("https://x.example/2", "a", t0 + 3 * DAY + 9),
        ]
    }

    #[test]
    fn parses_intervals() {
        assert_eq!(
            "1d".parse::<RecomputeInterval>().unwrap(),
            RecomputeInterval::DAILY
        );
        assert_eq!(
            "8h".parse::<RecomputeInterval>().unwrap(),
            RecomputeInterval::Seconds(8 * 3600)
        );
        assert_eq!(
            "edge".parse::<RecomputeInterval>().unwrap(),
            RecomputeInterval::EveryEdge
        );
        for bad in ["", "d", "0d", "-1h", "3w", "1.5d"] {
            assert!(bad.parse::<RecomputeInterval>().is_err(), "{bad}");
        }
    }

    #[test]
    fn every_edge_agrees_exactly() {
        let mut g = ReputationGraph::new(0.02);
        let options = ReplayOptions {
            interval: RecomputeInterval::EveryEdge,
            ..ReplayOptions::default()
        };
        let report = replay_agreement(&mut g, &seeds(), &stream(), &options).unwrap();
        assert_eq!(report.intervals.len(), 6);
        for iv in &report.intervals {
            for cat in [iv.new_items, iv.tweeted_items, iv.all_items] {
                assert_eq!(cat.within, cat.count);
            }
        }
    }

    #[test]
    fn daily_boundaries_include_empty_days() {
        let mut g = ReputationGraph::new(0.02);
        let report =
            replay_agreement(&mut g, &seeds(), &stream(), &ReplayOptions::default()).unwrap();
        let edges: Vec<usize> = report.intervals.iter().map(|iv| iv.edges).collect();
        assert_eq!(edges, [3, 1, 0, 2]);
        let empty = &report.intervals[2];
        assert_eq!(empty.new_items.count, 0);
        assert_eq!(empty.all_items.within, empty.all_items.count);
        assert_eq!(empty.end - empty.start, DAY);
        // seeds are excluded
        assert_eq!(report.intervals[0].new_items.count, 1);
        assert_eq!(report.intervals[3].tweeted_items.count, 2);
        assert_eq!(report.intervals[3].new_items.count, 1);
    }

    #[test]
    fn unsorted_stream_is_rejected() {
        let mut s = stream();
        s.swap(1, 4);
        let mut g = ReputationGraph::new(0.02);
        let err = replay_agreement(&mut g, &seeds(), &s, &ReplayOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidStream(_)));
    }

    #[test]
    fn threshold_rule() {
        // before {0.0, 0.5}, after {0.05, 0.8}
        let pairs = [(0.0f64, 0.05f64), (0.5, 0.8)];
        let mut cat = CategoryAgreement::default();
        for (a, b) in pairs {
            cat.add((a - b).abs() < 0.1);
        }
        assert_eq!(cat.fraction(), 0.5);
    }

    #[test]
    fn csv_has_three_categories() {
        let mut g = ReputationGraph::new(0.02);
        let report =
            replay_agreement(&mut g, &seeds(), &stream(), &ReplayOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_agreement_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header
            .contains("new_agreement,tweeted_items,tweeted_agreement,all_items,all_agreement"));
        assert_eq!(text.lines().count(), 5);
    }
}
