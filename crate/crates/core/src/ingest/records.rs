//! JSON-lines share records and one-domain-per-line site lists.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::domain::normalize_domain;
use crate::error::{Error, Result};

/// One observed share of a URL.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShareRecord {
    pub user: String,
    pub url: String,
    /// Seconds since the epoch, UTC.
    pub ts: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ShareRecord {
    pub fn validate(&self) -> Result<()> {
        if self.user.trim().is_empty() {
            return Err(Error::InvalidInput("record has an empty user".into()));
        }
        if self.url.trim().is_empty() {
            return Err(Error::InvalidInput("record has an empty url".into()));
        }
        if self.ts <= 0 {
            return Err(Error::InvalidInput(format!(
                "record timestamp must be positive, got {}",
                self.ts
            )));
        }
        Ok(())
    }
}

/// Tolerance for malformed lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsePolicy {
    /// Largest tolerated share of malformed non-blank lines.
    pub max_malformed_fraction: f64,
}

impl Default for ParsePolicy {
    fn default() -> Self {
        ParsePolicy {
            max_malformed_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Non-blank lines seen.
    pub lines: usize,
    pub accepted: usize,
    pub malformed: usize,
    /// First few problems, as `line N: reason`.
    pub samples: Vec<String>,
}

impl ParseReport {
    const MAX_SAMPLES: usize = 5;

    fn reject(&mut self, line: usize, reason: impl std::fmt::Display) {
        self.malformed += 1;
        if self.samples.len() < Self::MAX_SAMPLES {
            self.samples.push(format!("line {line}: {reason}"));
        }
    }

    /// Fails when the malformed share exceeds the policy.
    pub fn check(&self, path: &Path, policy: &ParsePolicy) -> Result<()> {
        if self.lines > 0
            && self.malformed as f64 / self.lines as f64 > policy.max_malformed_fraction
        {
            return Err(Error::CorruptInput {
                path: path.to_path_buf(),
                malformed: self.malformed,
                total: self.lines,
            });
        }
        Ok(())
    }
}

/// Streaming reader over a JSON-lines record file. Malformed lines are
/// skipped and counted in [`RecordReader::report`].
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    report: ParseReport,
    path: PathBuf,
    io_error: Option<std::io::Error>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(input: R, path: impl Into<PathBuf>) -> Self {
        RecordReader {
            lines: input.lines(),
            line_no: 0,
            report: ParseReport::default(),
            path: path.into(),
            io_error: None,
        }
    }

    pub fn report(&self) -> &ParseReport {
        &self.report
    }

    /// Ends the stream, surfacing read errors and the malformed-line policy.
    pub fn finish(self, policy: &ParsePolicy) -> Result<ParseReport> {
        if let Some(e) = self.io_error {
            return Err(Error::io(self.path, e));
        }
        self.report.check(&self.path, policy)?;
        Ok(self.report)
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = ShareRecord;

    fn next(&mut self) -> Option<ShareRecord> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.io_error = Some(e);
                    return None;
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            self.report.lines += 1;
            let parsed = serde_json::from_str::<ShareRecord>(&line)
                .map_err(|e| e.to_string())
                .and_then(|r| r.validate().map(|()| r).map_err(|e| e.to_string()));
            match parsed {
                Ok(record) => {
                    self.report.accepted += 1;
                    return Some(record);
                }
                Err(reason) => self.report.reject(self.line_no, reason),
            }
        }
    }
}

pub fn open_records(path: &Path) -> Result<RecordReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(RecordReader::new(BufReader::new(file), path))
}

/// Reads a whole record file.
pub fn load_records(path: &Path, policy: &ParsePolicy) -> Result<(Vec<ShareRecord>, ParseReport)> {
    let mut reader = open_records(path)?;
    let records: Vec<ShareRecord> = reader.by_ref().collect();
    let report = reader.finish(policy)?;
    Ok((records, report))
}

pub fn write_records<'a, W: Write>(
    records: impl IntoIterator<Item = &'a ShareRecord>,
    mut out: W,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// A named list of registered domains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSiteList {
    pub name: String,
    pub domains: BTreeSet<String>,
}

impl SeedSiteList {
    /// Builds a list, normalizing each entry; unusable entries are dropped.
    pub fn from_domains<S: AsRef<str>>(name: &str, domains: impl IntoIterator<Item = S>) -> Self {
        SeedSiteList {
            name: name.to_owned(),
            domains: domains
                .into_iter()
                .filter_map(|d| normalize_domain(d.as_ref()))
                .collect(),
        }
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.domains.contains(domain)
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// Domains in `self` but not in `other`.
    pub fn difference(&self, other: &SeedSiteList) -> BTreeSet<String> {
        self.domains.difference(&other.domains).cloned().collect()
    }

    pub fn parse<R: BufRead>(name: &str, input: R) -> Result<(Self, ParseReport)> {
        let mut list = SeedSiteList {
            name: name.to_owned(),
            domains: BTreeSet::new(),
        };
        let mut report = ParseReport::default();
        for (n, line) in input.lines().enumerate() {
            let line =
                line.map_err(|e| Error::parse(format!("{name} line {}", n + 1), e.to_string()))?;
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            report.lines += 1;
            match normalize_domain(entry) {
                Some(d) => {
                    report.accepted += 1;
                    list.domains.insert(d);
                }
                None => report.reject(n + 1, format!("not a domain: {entry:?}")),
            }
        }
        Ok((list, report))
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.domains {
            writeln!(out, "{d}")?;
        }
        out.flush()
    }
}

/// Loads a site list, named after the file stem.
pub fn load_seed_list(path: &Path, policy: &ParsePolicy) -> Result<(SeedSiteList, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (list, report) = SeedSiteList::parse(&name, BufReader::new(file))?;
    report.check(path, policy)?;
    Ok((list, report))
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn empty_input() {
        let mut r = RecordReader::new("".as_bytes(), "mem");
        assert!(r.next().is_none());
        let report = r.finish(&ParsePolicy::default()).unwrap();
        assert_eq!(report, ParseReport::default());
    }

    #[test]
    fn skips_one_malformed_line() {
        let mut text = String::new();
        for k in 0..100 {
            if k == 42 {
                text.push_str("{not json\n");
            } else {
                let r = rec(&format!("u{k}"), "https://a.example/x", 1000 + k);
                text.push_str(&serde_json::to_string(&r).unwrap());
                text.push('\n');
            }
        }
        let mut reader = RecordReader::new(text.as_bytes(), "mem");
        let records: Vec<_> = reader.by_ref().collect();
        let report = reader.finish(&ParsePolicy::default()).unwrap();
        assert_eq!(records.len(), 99);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.samples.len(), 1);
        assert!(report.samples[0].starts_with("line 43"));
    }

    #[test]
    fn too_many_malformed_lines() {
        let text = "x\ny\n{\"user\":\"u\",\"url\":\"https://a.example/\",\"ts\":5}\n";
        let mut reader = RecordReader::new(text.as_bytes(), "mem");
        let _ = reader.by_ref().count();
        assert!(matches!(
            reader.finish(&ParsePolicy::default()),
            Err(Error::CorruptInput {
                malformed: 2,
                total: 3,
                ..
            })
        ));
    }

    #[test]
    fn invalid_fields_are_malformed() {
        let text = "{\"user\":\"\",\"url\":\"https://a.example/\",\"ts\":5}\n{\"user\":\"u\",\"url\":\"https://a.example/\",\"ts\":0}\n";
        let mut reader = RecordReader::new(text.as_bytes(), "mem");
        assert_eq!(reader.by_ref().count(), 0);
        assert_eq!(reader.report().malformed, 2);
    }

    #[test]
    fn optional_fields_round_trip() {
        let mut a = rec("u", "https://a.example/x", 7);
        a.title = Some("Hello \"world\"".into());
        let mut buf = Vec::new();
        write_records([&a, &rec("v", "https://b.example/", 8)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.lines().nth(1).unwrap().contains("title"));
        let back: Vec<_> = RecordReader::new(text.as_bytes(), "mem").collect();
        assert_eq!(back[0], a);
    }

    #[test]
    fn seed_list_normalizes() {
        let text = "# comment\nWWW.Example.COM/path\nbreitbart.com\n\nnot a domain\n";
        let (list, report) = SeedSiteList::parse("os", text.as_bytes()).unwrap();
        assert!(list.contains("example.com"));
        assert!(list.contains("breitbart.com"));
        assert_eq!(list.len(), 2);
        assert_eq!(report.malformed, 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_records(
            Path::new("/definitely/not/here.jsonl"),
            &ParsePolicy::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
