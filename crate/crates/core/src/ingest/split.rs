//! Per-URL bundles and the chronological train/test split.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use super::domain::{canonicalize_url, site_of};
use super::records::ShareRecord;
use crate::error::{Error, Result};

const DAY: i64 = 86_400;

/// Everything known about one canonical URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlBundle {
    pub url: String,
    pub site: String,
    /// Timestamp of the earliest share in the full stream.
    pub first_seen: i64,
    pub title: Option<String>,
    pub description: Option<String>,
    /// `(user, ts)` pairs sorted by time then user.
    pub shares: Vec<(String, i64)>,
}

impl UrlBundle {
    /// Distinct sharers, sorted.
    pub fn sharers(&self) -> BTreeSet<&str> {
        self.shares.iter().map(|(u, _)| u.as_str()).collect()
    }

    pub fn last_share(&self) -> Option<i64> {
        self.shares.iter().map(|&(_, ts)| ts).max()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Bundles {
    pub by_url: BTreeMap<String, UrlBundle>,
    /// Records dropped because their URL did not canonicalize.
    pub invalid_urls: usize,
}

/// Groups records by canonical URL. The result does not depend on record
/// order: shares are sorted and text fields come from the earliest record
/// that carries them.
pub fn bundle_records(records: impl IntoIterator<Item = ShareRecord>) -> Bundles {
    let mut out = Bundles::default();
    // (ts, text) of the current pick per field
    let mut picks: BTreeMap<String, (Option<(i64, String)>, Option<(i64, String)>)> =
        BTreeMap::new();
    for r in records {
        let Ok(url) = canonicalize_url(&r.url) else {
            out.invalid_urls += 1;
            continue;
        };
        let bundle = out.by_url.entry(url.clone()).or_insert_with(|| UrlBundle {
            site: site_of(&url),
            url: url.clone(),
            first_seen: r.ts,
            title: None,
            description: None,
            shares: Vec::new(),
        });
        bundle.first_seen = bundle.first_seen.min(r.ts);
        bundle.shares.push((r.user, r.ts));
        let pick = picks.entry(url).or_default();
        for (slot, value) in [(&mut pick.0, r.title), (&mut pick.1, r.description)] {
            if let Some(text) = value {
                let candidate = (r.ts, text);
                if slot.as_ref().is_none_or(|cur| candidate < *cur) {
                    *slot = Some(candidate);
                }
            }
        }
    }
    for (url, bundle) in out.by_url.iter_mut() {
        bundle
            .shares
            .sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        if let Some((title, description)) = picks.remove(url) {
            bundle.title = title.map(|(_, t)| t);
            bundle.description = description.map(|(_, d)| d);
        }
    }
    out
}

/// Date windows of the chronological split. All dates are UTC days and both
/// ends of a range are inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    /// Train bundles keep only shares strictly before this day.
    pub train_cutoff: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    /// Keep only shares on every other day, counted from each range start.
    #[serde(default)]
    pub alternate_days: bool,
}

pub fn day_start(date: NaiveDate) -> i64 {
    date.and_time(NaiveTime::MIN).and_utc().timestamp()
}

pub fn day_of(ts: i64) -> NaiveDate {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.date_naive())
        .unwrap_or(NaiveDate::MIN)
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_start > self.train_end {
            return Err(Error::InvalidSpec("train range is empty".into()));
        }
        if self.test_start > self.test_end {
            return Err(Error::InvalidSpec("test range is empty".into()));
        }
        if self.train_end >= self.test_start {
            return Err(Error::InvalidSpec(format!(
                "train range ends {} but test range starts {}",
                self.train_end, self.test_start
            )));
        }
        if self.train_cutoff < self.train_end {
            return Err(Error::InvalidSpec(format!(
                "train cutoff {} precedes train end {}",
                self.train_cutoff, self.train_end
            )));
        }
        Ok(())
    }

    fn in_range(ts: i64, start: NaiveDate, end: NaiveDate) -> bool {
        ts >= day_start(start) && ts < day_start(end) + DAY
    }

    fn on_kept_day(&self, ts: i64, range_start: NaiveDate) -> bool {
        !self.alternate_days || (ts - day_start(range_start)).div_euclid(DAY) % 2 == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<UrlBundle>,
    pub test: Vec<UrlBundle>,
    pub invalid_urls: usize,
}

/// Assigns each URL by its first-seen day. Train bundles keep shares strictly
/// before the cutoff, test bundles keep every share. URLs first seen outside
/// both ranges are dropped.
pub fn temporal_split(
    records: impl IntoIterator<Item = ShareRecord>,
    spec: &SplitSpec,
) -> Result<Split> {
    spec.validate()?;
    let bundles = bundle_records(records);
    let cutoff = day_start(spec.train_cutoff);
    let mut split = Split {
        invalid_urls: bundles.invalid_urls,
        ..Split::default()
    };
    for (_, mut bundle) in bundles.by_url {
        if SplitSpec::in_range(bundle.first_seen, spec.train_start, spec.train_end) {
            bundle
                .shares
                .retain(|&(_, ts)| ts < cutoff && spec.on_kept_day(ts, spec.train_start));
            if !bundle.shares.is_empty() {
                split.train.push(bundle);
            }
        } else if SplitSpec::in_range(bundle.first_seen, spec.test_start, spec.test_end) {
            bundle
                .shares
                .retain(|&(_, ts)| spec.on_kept_day(ts, spec.test_start));
            if !bundle.shares.is_empty() {
                split.test.push(bundle);
            }
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn spec() -> SplitSpec {
        SplitSpec {
            train_start: d("2017-09-01"),
            train_end: d("2017-10-20"),
            train_cutoff: d("2017-10-30"),
            test_start: d("2017-10-31"),
            test_end: d("2017-11-26"),
            alternate_days: false,
        }
    }

    fn at(date: &str, hour: i64) -> i64 {
        day_start(d(date)) + hour * 3600
    }

    fn rec(user: &str, url: &str, ts: i64) -> ShareRecord {
        ShareRecord {
            user: user.into(),
            url: url.into(),
            ts,
            title: None,
            description: None,
        }
    }

    #[test]
    fn late_train_tweets_are_cut() {
        let records = vec![
            rec("a", "https://x.example/1", at("2017-10-20", 23)),
            rec("b", "https://x.example/1", at("2017-10-29", 23)),
            rec("c", "https://x.example/1", at("2017-10-30", 0)),
        ];
        let split = temporal_split(records, &spec()).unwrap();
        assert_eq!(split.train.len(), 1);
        let users: Vec<_> = split.train[0].shares.iter().map(|s| s.0.as_str()).collect();
        assert_eq!(users, ["a", "b"]);
        assert!(split.test.is_empty());
    }

    #[test]
    fn gap_days_belong_to_neither() {
        let records = vec![rec("a", "https://x.example/2", at("2017-10-25", 3))];
        let split = temporal_split(records, &spec()).unwrap();
        assert!(split.train.is_empty() && split.test.is_empty());
    }

    #[test]
    fn first_seen_decides() {
        let records = vec![
            rec("a", "https://x.example/3", at("2017-11-02", 1)),
            rec("b", "https://x.example/3", at("2017-09-05", 1)),
        ];
        let split = temporal_split(records, &spec()).unwrap();
        assert_eq!(split.train.len(), 1);
        assert!(split.test.is_empty());
        assert_eq!(split.train[0].shares.len(), 1);
    }

    #[test]
    fn test_bundles_keep_everything() {
        let records = vec![
            rec("a", "https://x.example/4", at("2017-11-02", 1)),
            rec("b", "https://x.example/4", at("2017-12-20", 1)),
        ];
        let split = temporal_split(records, &spec()).unwrap();
        assert_eq!(split.test[0].shares.len(), 2);
    }

    #[test]
    fn rejects_overlapping_ranges() {
        let mut bad = spec();
        bad.test_start = d("2017-10-10");
        assert!(matches!(
            temporal_split(vec![], &bad),
            Err(Error::InvalidSpec(_))
        ));
        let mut bad = spec();
        bad.train_cutoff = d("2017-10-01");
        assert!(bad.validate().is_err());
    }

    #[test]
    fn alternate_days_filter() {
        let mut s = spec();
        s.alternate_days = true;
        let records = vec![
            rec("a", "https://x.example/5", at("2017-09-01", 1)),
            rec("b", "https://x.example/5", at("2017-09-02", 1)),
            rec("c", "https://x.example/5", at("2017-09-03", 1)),
        ];
        let split = temporal_split(records, &s).unwrap();
        let users: Vec<_> = split.train[0].shares.iter().map(|s| s.0.as_str()).collect();
        assert_eq!(users, ["a", "c"]);
    }

    #[test]
    fn bundles_are_order_independent() {
        let mut records = vec![
            rec("a", "https://x.example/6", 500),
            rec("b", "https://x.example/6/", 100),
            rec("c", "https://x.example/7", 300),
        ];
        records[0].title = Some("late".into());
        records[1].title = Some("early".into());
        let forward = bundle_records(records.clone());
        records.reverse();
        let backward = bundle_records(records);
        assert_eq!(forward.by_url, backward.by_url);
        let b = &forward.by_url["https://x.example/6"];
        assert_eq!(b.first_seen, 100);
        assert_eq!(b.title.as_deref(), Some("early"));
    }
}
