//! Recall, per-site flag rates, cross-list detection, site correlation and
//! online-vs-batch agreement.
//!
//! Ratios are kept as exact counts; percentages are derived on demand and
//! rounded only when written out.

mod replay;

pub use replay::{
    replay_agreement, replay_records, write_agreement_csv, AgreementReport, CategoryAgreement,
    IntervalAgreement, RecomputeInterval, ReplayOptions, StreamEdge,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::ingest::{canonicalize_url, site_of, SeedSiteList, ShareRecord};
use crate::label::Label;

/// Sites with fewer URLs are not judged by the 5% rule.
pub const MIN_SITE_URLS: usize = 20;
/// A site is suspicious when strictly more than this percentage of its URLs
/// is flagged.
pub const SUSPICIOUS_PERCENT: usize = 5;

/// `hits` out of `total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ratio {
    pub hits: usize,
    pub total: usize,
}

impl Ratio {
    pub fn new(hits: usize, total: usize) -> Self {
        debug_assert!(hits <= total);
        Ratio { hits, total }
    }

    /// Percentage, or `None` when the denominator is empty.
    pub fn percent(self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.hits as f64 / self.total as f64)
    }

    pub fn fraction(self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

/// Formats a percentage with two decimals, or `undefined`.
pub fn format_percent(p: Option<f64>) -> String {
    p.map_or_else(|| "undefined".to_owned(), |p| format!("{p:.2}"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecallReport {
    /// Truly fake items labeled fake.
    pub fake: Ratio,
    /// Truly reliable items labeled reliable.
    pub nonfake: Ratio,
}

impl RecallReport {
    /// Tallies `(truth, predicted)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut r = RecallReport::default();
        for (truth, predicted) in pairs {
            let cell = match truth {
                Label::Fake => &mut r.fake,
                Label::Reliable => &mut r.nonfake,
            };
            cell.total += 1;
            if predicted == truth {
                cell.hits += 1;
            }
        }
        r
    }

    pub fn fake_recall(&self) -> Option<f64> {
        self.fake.percent()
    }

    pub fn nonfake_recall(&self) -> Option<f64> {
        self.nonfake.percent()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "hits", "total", "percent"])
            .map_err(csv_err)?;
        for (name, r) in [("fake_recall", self.fake), ("nonfake_recall", self.nonfake)] {
            w.write_record([
                name.to_owned(),
                r.hits.to_string(),
                r.total.to_string(),
                format_percent(r.percent()),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("csv output", e))
    }

    pub fn summary(&self) -> String {
        format!(
            "fake recall: {}% ({}/{})\nnon-fake recall: {}% ({}/{})\n",
            format_percent(self.fake_recall()),
            self.fake.hits,
            self.fake.total,
            format_percent(self.nonfake_recall()),
            self.nonfake.hits,
            self.nonfake.total,
        )
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("csv output", std::io::Error::other(e))
}

/// Fake recall over test URLs whose site is on the fake list, non-fake recall
/// over the rest. Every test URL needs a classification.
pub fn recall_report<S: AsRef<str>>(
    classifications: &BTreeMap<String, Label>,
    fake_sites: &SeedSiteList,
    test_urls: &[S],
) -> Result<RecallReport> {
    let mut pairs = Vec::with_capacity(test_urls.len());
    for url in test_urls {
        let url = url.as_ref();
        let predicted = *classifications
            .get(url)
            .ok_or_else(|| Error::NotFound(format!("no classification for {url}")))?;
        let truth = if fake_sites.contains(&site_of(url)) {
            Label::Fake
        } else {
            Label::Reliable
        };
        pairs.push((truth, predicted));
    }
    Ok(RecallReport::from_pairs(pairs))
}

/// Reads the `url` and `label` columns of a classification CSV.
pub fn read_classifications<R: std::io::Read>(input: R) -> Result<BTreeMap<String, Label>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse("classification header", e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse("classification header", format!("missing column {name}")))
    };
    let (url_col, label_col) = (column("url")?, column("label")?);
    let mut out = BTreeMap::new();
    for (n, row) in reader.records().enumerate() {
        let loc = || format!("classification row {}", n + 1);
        let row = row.map_err(|e| Error::parse(loc(), e.to_string()))?;
        let (Some(url), Some(label)) = (row.get(url_col), row.get(label_col)) else {
            return Err(Error::parse(loc(), "short row"));
        };
        out.insert(url.to_owned(), label.parse()?);
    }
    Ok(out)
}

/// Maps each URL to its registered site.
pub fn url_site_map<'a>(urls: impl IntoIterator<Item = &'a String>) -> BTreeMap<String, String> {
    urls.into_iter().map(|u| (u.clone(), site_of(u))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteFlagRow {
    pub site: String,
    /// `hits` = URLs labeled fake.
    pub urls: Ratio,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiteFlagReport {
    /// Sorted by site.
    pub rows: Vec<SiteFlagRow>,
}

fn per_site_counts(
    classifications: &BTreeMap<String, Label>,
    url_sites: &BTreeMap<String, String>,
) -> BTreeMap<String, Ratio> {
    let mut counts: BTreeMap<String, Ratio> = BTreeMap::new();
    for (url, label) in classifications {
        let Some(site) = url_sites.get(url) else {
            continue;
        };
        let r = counts.entry(site.clone()).or_default();
        r.total += 1;
        if *label == Label::Fake {
            r.hits += 1;
        }
    }
    counts
}

/// Share of each site's URLs labeled fake; sites with fewer than `min_urls`
/// classified URLs are omitted.
pub fn site_flag_rates(
    classifications: &BTreeMap<String, Label>,
    url_sites: &BTreeMap<String, String>,
    min_urls: usize,
) -> SiteFlagReport {
    SiteFlagReport {
        rows: per_site_counts(classifications, url_sites)
            .into_iter()
            .filter(|(_, r)| r.total >= min_urls)
            .map(|(site, urls)| SiteFlagRow { site, urls })
            .collect(),
    }
}

impl SiteFlagReport {
    pub fn get(&self, site: &str) -> Option<&SiteFlagRow> {
        self.rows.iter().find(|r| r.site == site)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["site", "urls", "flagged", "flag_rate_pct"])
            .map_err(csv_err)?;
        for row in &self.rows {
            w.write_record([
                row.site.clone(),
                row.urls.total.to_string(),
                row.urls.hits.to_string(),
                format_percent(row.urls.percent()),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("csv output", e))
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} sites\n", self.rows.len());
        for row in &self.rows {
            let _ = writeln!(
                s,
                "{:<40} {:>6} URLs {:>7}% flagged",
                row.site,
                row.urls.total,
                format_percent(row.urls.percent())
            );
        }
        s
    }
}

/// How well a classifier seeded from list A finds what only list B knows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrossListReport {
    /// URLs on sites in B \ A, and how many are labeled fake.
    pub direct: Ratio,
    /// Sites in B \ A with at least 20 URLs, and how many are suspicious.
    pub sites: Ratio,
    /// URLs on sites in B \ A, and how many belong to suspicious sites.
    pub suspicious_urls: Ratio,
    pub suspicious_sites: BTreeSet<String>,
}

impl CrossListReport {
    pub fn direct_url_pct(&self) -> Option<f64> {
        self.direct.percent()
    }

    pub fn suspicious_site_pct(&self) -> Option<f64> {
        self.sites.percent()
    }

    pub fn suspicious_url_pct(&self) -> Option<f64> {
        self.suspicious_urls.percent()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "hits", "total", "percent"])
            .map_err(csv_err)?;
        for (name, r) in [
            ("direct_url", self.direct),
            ("suspicious_site", self.sites),
            ("suspicious_url", self.suspicious_urls),
        ] {
            w.write_record([
                name.to_owned(),
                r.hits.to_string(),
                r.total.to_string(),
                format_percent(r.percent()),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("csv output", e))
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "direct URL detection: {}% ({}/{})\nsuspicious site detection: {}% ({}/{})\nsuspicious URL detection: {}% ({}/{})\n",
            format_percent(self.direct_url_pct()),
            self.direct.hits,
            self.direct.total,
            format_percent(self.suspicious_site_pct()),
            self.sites.hits,
            self.sites.total,
            format_percent(self.suspicious_url_pct()),
            self.suspicious_urls.hits,
            self.suspicious_urls.total,
        );
        for site in &self.suspicious_sites {
            let _ = writeln!(s, "suspicious: {site}");
        }
        s
    }
}

/// Cross-list detection over URLs whose site is in `list_b` but not
/// `list_a`. A site is suspicious when it has at least 20 URLs and strictly
/// more than 5% of them are flagged.
pub fn cross_list_detection(
    classifications: &BTreeMap<String, Label>,
    list_a: &SeedSiteList,
    list_b: &SeedSiteList,
    url_sites: &BTreeMap<String, String>,
) -> CrossListReport {
    let diff = list_b.difference(list_a);
    let counts = per_site_counts(classifications, url_sites);
    let mut report = CrossListReport::default();
    for (site, r) in counts.iter().filter(|(s, _)| diff.contains(*s)) {
        report.direct.total += r.total;
        report.direct.hits += r.hits;
        report.suspicious_urls.total += r.total;
        if r.total >= MIN_SITE_URLS {
            report.sites.total += 1;
            if r.hits * 100 > r.total * SUSPICIOUS_PERCENT {
                report.sites.hits += 1;
                report.suspicious_urls.hits += r.total;
                report.suspicious_sites.insert(site.clone());
            }
        }
    }
    report
}

/// Per-site, per-user tweet counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TweetCounts {
    pub by_site: BTreeMap<String, BTreeMap<String, u64>>,
}

impl TweetCounts {
    /// Counts every record; records whose URL does not canonicalize are skipped.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a ShareRecord>) -> Self {
        let mut counts = TweetCounts::default();
        for r in records {
            let Ok(url) = canonicalize_url(&r.url) else {
                continue;
            };
            counts.add(&site_of(&url), &r.user, 1);
        }
        counts
    }

    pub fn add(&mut self, site: &str, user: &str, n: u64) {
        *self
            .by_site
            .entry(site.to_owned())
            .or_default()
            .entry(user.to_owned())
            .or_default() += n;
    }

    pub fn total(&self, site: &str) -> u64 {
        self.by_site.get(site).map_or(0, |m| m.values().sum())
    }

    /// The `n` sites with the most tweets, ties broken by name.
    pub fn top_sites(&self, n: usize) -> Vec<String> {
        let mut sites: Vec<(u64, &String)> = self
            .by_site
            .iter()
            .map(|(s, m)| (m.values().sum(), s))
            .collect();
        sites.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        sites.into_iter().take(n).map(|(_, s)| s.clone()).collect()
    }
}

/// `T_ij / sqrt(T_i * T_j)` with `T_ij = sum_u t(u,i) t(u,j)` and
/// `T_i = sum_u t(u,i)^2`; 0 when either site has no tweets.
pub fn site_correlation(counts: &TweetCounts, site_a: &str, site_b: &str) -> f64 {
    let empty = BTreeMap::new();
    let a = counts.by_site.get(site_a).unwrap_or(&empty);
    let b = counts.by_site.get(site_b).unwrap_or(&empty);
    // iterate the smaller map; integer sums keep the result symmetric
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let t_ab: u128 = small
        .iter()
        .filter_map(|(u, &x)| large.get(u).map(|&y| x as u128 * y as u128))
        .sum();
    let sq = |m: &BTreeMap<String, u64>| m.values().map(|&x| x as u128 * x as u128).sum::<u128>();
    let (t_a, t_b) = (sq(a), sq(b));
    if t_a == 0 || t_b == 0 {
        return 0.0;
    }
    t_ab as f64 / ((t_a as f64) * (t_b as f64)).sqrt()
}

/// Square correlation matrix over `sites`, in the given order.
pub fn correlation_matrix(counts: &TweetCounts, sites: &[String]) -> Vec<Vec<f64>> {
    let n = sites.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = site_correlation(counts, &sites[i], &sites[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

pub fn write_correlation_csv<W: Write>(
    sites: &[String],
    matrix: &[Vec<f64>],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = std::iter::once("site")
        .chain(sites.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (site, row) in sites.iter().zip(matrix) {
        let mut record = vec![site.clone()];
        record.extend(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(name: &str, domains: &[&str]) -> SeedSiteList {
        SeedSiteList::from_domains(name, domains.iter().copied())
    }

    /// `n` URLs on `site`, the first `flagged` of them labeled fake.
    fn site_urls(classes: &mut BTreeMap<String, Label>, site: &str, n: usize, flagged: usize) {
        for k in 0..n {
            let label = if k < flagged {
                Label::Fake
            } else {
                Label::Reliable
            };
            classes.insert(format!("https://{site}/a{k}"), label);
        }
    }

    #[test]
    fn reads_classification_csv() {
        let text = "url,q,label,degree\nhttps://a.example/1,-0.5,fake,3\nhttps://b.example/2,0,reliable,1\n";
        let m = read_classifications(text.as_bytes()).unwrap();
        assert_eq!(m["https://a.example/1"], Label::Fake);
        assert_eq!(m["https://b.example/2"], Label::Reliable);
        assert!(read_classifications("url,q\nx,1\n".as_bytes()).is_err());
    }

    #[test]
    fn perfect_classifier() {
        let r = RecallReport::from_pairs([
            (Label::Fake, Label::Fake),
            (Label::Reliable, Label::Reliable),
        ]);
        assert_eq!(r.fake_recall(), Some(100.0));
        assert_eq!(r.nonfake_recall(), Some(100.0));
    }

    #[test]
    fn recall_arithmetic() {
        let mut classes = BTreeMap::new();
        site_urls(&mut classes, "fake.example", 10, 9);
        // 90 others, 9 flagged
        site_urls(&mut classes, "real.example", 90, 9);
        let urls: Vec<&String> = classes.keys().collect();
        let r = recall_report(&classes, &list("fake", &["fake.example"]), &urls).unwrap();
        assert_eq!(r.fake, Ratio::new(9, 10));
        assert_eq!(r.nonfake, Ratio::new(81, 90));
        assert_eq!(r.fake_recall(), Some(90.0));
        assert_eq!(r.nonfake_recall(), Some(90.0));
    }

    #[test]
    fn empty_class_is_undefined() {
        let r = RecallReport::from_pairs([(Label::Reliable, Label::Fake)]);
        assert_eq!(r.fake_recall(), None);
        assert_eq!(r.nonfake_recall(), Some(0.0));
        assert!(r.summary().contains("undefined"));
    }

    #[test]
    fn missing_classification_is_an_error() {
        let classes = BTreeMap::new();
        let err = recall_report(&classes, &list("f", &[]), &["https://a.example/x"]).unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
    }

    #[test]
    fn flag_rates() {
        let mut classes = BTreeMap::new();
        site_urls(&mut classes, "twenty.example", 20, 2);
        site_urls(&mut classes, "nineteen.example", 19, 5);
        site_urls(&mut classes, "clean.example", 25, 0);
        let sites = url_site_map(classes.keys());
        let report = site_flag_rates(&classes, &sites, 20);
        assert_eq!(
            report.get("twenty.example").unwrap().urls.percent(),
            Some(10.0)
        );
        assert!(report.get("nineteen.example").is_none());
        assert_eq!(
            report.get("clean.example").unwrap().urls.percent(),
            Some(0.0)
        );
    }

    #[test]
    fn cross_list_single_site() {
        let mut classes = BTreeMap::new();
        site_urls(&mut classes, "only-b.example", 20, 2);
        let sites = url_site_map(classes.keys());
        let r = cross_list_detection(
            &classes,
            &list("a", &["shared.example"]),
            &list("b", &["shared.example", "only-b.example"]),
            &sites,
        );
        assert_eq!(r.suspicious_site_pct(), Some(100.0));
        assert_eq!(r.suspicious_url_pct(), Some(100.0));
        assert_eq!(r.direct_url_pct(), Some(10.0));
    }

    #[test]
    fn five_percent_is_not_suspicious() {
        let mut classes = BTreeMap::new();
        site_urls(&mut classes, "only-b.example", 20, 1);
        let sites = url_site_map(classes.keys());
        let r = cross_list_detection(
            &classes,
            &list("a", &[]),
            &list("b", &["only-b.example"]),
            &sites,
        );
        assert_eq!(r.suspicious_site_pct(), Some(0.0));
        assert_eq!(r.suspicious_url_pct(), Some(0.0));
        assert_eq!(r.direct_url_pct(), Some(5.0));
    }

    #[test]
    fn subset_lists_are_undefined() {
        let mut classes = BTreeMap::new();
        site_urls(&mut classes, "x.example", 30, 10);
        let sites = url_site_map(classes.keys());
        let a = list("a", &["x.example", "y.example"]);
        let r = cross_list_detection(&classes, &a, &list("b", &["x.example"]), &sites);
        assert_eq!(r.direct_url_pct(), None);
        assert_eq!(r.suspicious_site_pct(), None);
        assert_eq!(r.suspicious_url_pct(), None);
    }

    #[test]
    fn correlation_examples() {
        let mut c = TweetCounts::default();
        c.add("a.com", "solo", 1);
        c.add("b.com", "solo", 1);
        assert_eq!(site_correlation(&c, "a.com", "b.com"), 1.0);

        let mut c = TweetCounts::default();
        c.add("a.com", "x", 3);
        c.add("b.com", "y", 1);
        assert_eq!(site_correlation(&c, "a.com", "b.com"), 0.0);
        assert_eq!(site_correlation(&c, "a.com", "missing.com"), 0.0);

        let mut c = TweetCounts::default();
        c.add("i.com", "u1", 2);
        c.add("j.com", "u1", 1);
        c.add("j.com", "u2", 3);
        let v = site_correlation(&c, "i.com", "j.com");
        assert!((v - 2.0 / 40f64.sqrt()).abs() < 1e-15);
        assert!((v - 0.3162).abs() < 1e-4);
        assert_eq!(v, site_correlation(&c, "j.com", "i.com"));
    }

    #[test]
    fn matrix_is_symmetric_with_unit_diagonal() {
        let mut c = TweetCounts::default();
        for (s, u, n) in [
            ("a", "x", 2),
            ("a", "y", 1),
            ("b", "y", 4),
            ("c", "z", 1),
            ("c", "x", 7),
        ] {
            c.add(s, u, n);
        }
        let sites = c.top_sites(3);
        assert_eq!(sites, ["c", "b", "a"]);
        let m = correlation_matrix(&c, &sites);
        for i in 0..3 {
            assert_eq!(m[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
                assert!((0.0..=1.0).contains(&m[i][j]));
            }
        }
    }
}
