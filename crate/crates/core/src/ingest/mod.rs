//! Share-record ingestion: parsing, URL canonicalization, site mapping,
//! text scrubbing, the chronological split and graph construction.

mod build;
mod domain;
mod records;
mod scrub;
mod split;

pub use build::{add_record, build_graph, BuildReport, GraphOptions};
pub use domain::{
    canonicalize_url, normalize_domain, site_of, suffix_snapshot_version, SuffixList,
};
pub use records::{
    load_records, load_seed_list, open_records, write_records, ParsePolicy, ParseReport,
    RecordReader, SeedSiteList, ShareRecord,
};
pub use scrub::{scrub_site_mentions, site_name_token};
pub use split::{
    bundle_records, day_of, day_start, temporal_split, Bundles, Split, SplitSpec, UrlBundle,
};

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Error, Result};

/// Known aliases of sites, keyed by registered domain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    pub aliases: BTreeMap<String, Vec<String>>,
}

impl AliasTable {
    pub fn get(&self, domain: &str) -> &[String] {
        self.aliases.get(domain).map_or(&[], Vec::as_slice)
    }

    pub fn insert(&mut self, domain: &str, alias: &str) {
        self.aliases
            .entry(domain.to_owned())
            .or_default()
            .push(alias.to_owned());
    }

    /// Reads `domain,alias` CSV rows (header required).
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut table = AliasTable::default();
        for (n, row) in csv::Reader::from_reader(input).records().enumerate() {
            let row =
                row.map_err(|e| Error::parse(format!("alias row {}", n + 1), e.to_string()))?;
            match (row.get(0).and_then(normalize_domain), row.get(1)) {
                (Some(domain), Some(alias)) if !alias.trim().is_empty() => {
                    table.insert(&domain, alias.trim())
                }
                _ => {
                    return Err(Error::parse(
                        format!("alias row {}", n + 1),
                        "expected domain,alias",
                    ))
                }
            }
        }
        Ok(table)
    }
}
