//! URL canonicalization and registrable-domain extraction.

use std::collections::HashSet;
use std::sync::OnceLock;

use url::{Host, Url};

use crate::error::{Error, Result};

const SUFFIX_SNAPSHOT: &str = include_str!("../../data/public_suffix_icann.dat");

/// Version tag of the bundled suffix snapshot.
pub fn suffix_snapshot_version() -> &'static str {
    SUFFIX_SNAPSHOT
        .lines()
        .find_map(|l| l.strip_prefix("// Version: "))
        .unwrap_or("unknown")
}

/// Public-suffix rules: plain, wildcard (`*.ck` stored as `ck`) and
/// exception (`!www.ck` stored as `www.ck`).
#[derive(Debug, Default)]
pub struct SuffixList {
    rules: HashSet<String>,
    wildcards: HashSet<String>,
    exceptions: HashSet<String>,
}

impl SuffixList {
    pub fn parse(text: &str) -> Self {
        let mut list = SuffixList::default();
        for line in text.lines() {
            let rule = line.split_whitespace().next().unwrap_or("");
            if rule.is_empty() || rule.starts_with("//") {
                continue;
            }
            let rule = rule.to_ascii_lowercase();
            if let Some(rest) = rule.strip_prefix('!') {
                list.exceptions.insert(rest.to_owned());
            } else if let Some(rest) = rule.strip_prefix("*.") {
                list.wildcards.insert(rest.to_owned());
            } else {
                list.rules.insert(rule);
            }
        }
        list
    }

    pub fn bundled() -> &'static SuffixList {
        static LIST: OnceLock<SuffixList> = OnceLock::new();
        LIST.get_or_init(|| SuffixList::parse(SUFFIX_SNAPSHOT))
    }

    /// Number of labels in the public suffix of `host`.
    fn suffix_labels(&self, labels: &[&str]) -> usize {
        let n = labels.len();
        for i in 0..n {
            let candidate = labels[i..].join(".");
            if self.exceptions.contains(&candidate) {
                return n - i - 1;
            }
            if self.rules.contains(&candidate) {
                return n - i;
            }
            if i + 1 < n && self.wildcards.contains(&labels[i + 1..].join(".")) {
                return n - i;
            }
        }
        // default rule "*"
        1.min(n)
    }

    /// Registrable domain: the public suffix plus one label. Hosts that are
    /// themselves a public suffix are returned unchanged.
    pub fn registrable_domain(&self, host: &str) -> String {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
        let suffix = self.suffix_labels(&labels);
        let keep = (suffix + 1).min(labels.len());
        labels[labels.len() - keep..].join(".")
    }
}

const DEFAULT_TRACKING_PREFIXES: &[&str] = &["utm_"];

/// Normalizes a raw URL: lowercase scheme and host, default port dropped,
/// fragment dropped, `utm_*` query parameters removed, trailing slash removed
/// from non-root paths.
pub fn canonicalize_url(raw: &str) -> Result<String> {
    let invalid = |reason: String| Error::InvalidUrl {
        url: raw.to_owned(),
        reason,
    };
    let mut url = Url::parse(raw.trim()).map_err(|e| invalid(e.to_string()))?;
    if url.cannot_be_a_base() || url.host().is_none() {
        return Err(invalid("url has no host".into()));
    }
    url.set_fragment(None);

    if url.query().is_some() {
        let kept: Vec<(String, String)> = url
            .query_pairs()
            .filter(|(k, _)| {
                let k = k.to_ascii_lowercase();
                !DEFAULT_TRACKING_PREFIXES.iter().any(|p| k.starts_with(p))
            })
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        if kept.is_empty() {
            url.set_query(None);
        } else {
            url.query_pairs_mut().clear().extend_pairs(kept);
        }
    }

    let path = url.path().to_owned();
    if path.len() > 1 && path.ends_with('/') {
        let trimmed = path.trim_end_matches('/');
        url.set_path(if trimmed.is_empty() { "/" } else { trimmed });
    }
    // the url crate already lowercases scheme and host and drops default ports
    Ok(url.to_string())
}

/// Registrable domain of a canonical URL, e.g. `nytimes.com` for
/// `https://www.nytimes.com/a`. Input that does not parse as a URL is treated
/// as a bare host.
pub fn site_of(url: &str) -> String {
    match Url::parse(url) {
        Ok(parsed) => match parsed.host() {
            Some(Host::Domain(d)) => SuffixList::bundled().registrable_domain(d),
            Some(Host::Ipv4(ip)) => ip.to_string(),
            Some(Host::Ipv6(ip)) => ip.to_string(),
            None => String::new(),
        },
        Err(_) => {
            let host = url.split(['/', ':', '?', '#']).next().unwrap_or("");
            SuffixList::bundled().registrable_domain(host)
        }
    }
}

/// Normalizes a domain as written in a site list: scheme, path and port are
/// dropped and the result is reduced to its registrable domain.
pub fn normalize_domain(entry: &str) -> Option<String> {
    let entry = entry.trim();
    if entry.is_empty() || entry.contains(char::is_whitespace) {
        return None;
    }
    let without_scheme = entry.split_once("://").map_or(entry, |(_, rest)| rest);
    let authority = without_scheme.split(['/', '?', '#']).next().unwrap_or("");
    let host = authority.rsplit_once('@').map_or(authority, |(_, h)| h);
    let host = host.split(':').next().unwrap_or("").trim_end_matches('.');
    if host.is_empty()
        || !host
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
    {
        return None;
    }
    Some(SuffixList::bundled().registrable_domain(host))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        assert_eq!(
            canonicalize_url("HTTP://A.Example:80/x?utm_source=t#frag").unwrap(),
            "http://a.example/x"
        );
        assert_eq!(
            canonicalize_url("https://a.example:443/x/?id=3&utm_medium=m").unwrap(),
            "https://a.example/x?id=3"
        );
        assert_eq!(
            canonicalize_url("https://a.example:8443/").unwrap(),
            "https://a.example:8443/"
        );
        assert_eq!(
            canonicalize_url("https://a.example").unwrap(),
            "https://a.example/"
        );
    }

    #[test]
    fn canonicalization_is_idempotent() {
        for raw in [
            "HTTP://A.Example:80/x?utm_source=t#frag",
            "https://www.nytimes.com/2017/10/01/us/story.html?smid=tw&utm_campaign=x",
            "https://a.example/a%20b//",
            "http://a.example/?q=a+b&r=%2F",
        ] {
            let once = canonicalize_url(raw).unwrap();
            assert_eq!(canonicalize_url(&once).unwrap(), once, "{raw}");
        }
    }

    #[test]
    fn rejects_non_urls() {
        assert!(matches!(
            canonicalize_url("not a url"),
            Err(Error::InvalidUrl { .. })
        ));
        assert!(canonicalize_url("mailto:someone@example.com").is_err());
    }

    #[test]
    fn registrable_domains() {
        assert_eq!(site_of("https://www.nytimes.com/a"), "nytimes.com");
        assert_eq!(site_of("https://blog.x.blogspot.com/p"), "blogspot.com");
        assert_eq!(site_of("https://a.example/x"), "a.example");
        assert_eq!(site_of("https://news.bbc.co.uk/1"), "bbc.co.uk");
        assert_eq!(site_of("https://co.uk/"), "co.uk");
        assert_eq!(site_of("http://127.0.0.1/x"), "127.0.0.1");
    }

    #[test]
    fn wildcard_and_exception_rules() {
        let list = SuffixList::bundled();
        assert_eq!(list.registrable_domain("a.b.foo.ck"), "b.foo.ck");
        assert_eq!(list.registrable_domain("x.www.ck"), "www.ck");
    }

    #[test]
    fn list_entries_normalize() {
        assert_eq!(
            normalize_domain("WWW.Example.COM/path").as_deref(),
            Some("example.com")
        );
        assert_eq!(
            normalize_domain("https://infowars.com/").as_deref(),
            Some("infowars.com")
        );
        assert_eq!(
            normalize_domain("nytimes.com:443").as_deref(),
            Some("nytimes.com")
        );
        assert_eq!(normalize_domain("two words.com"), None);
        assert_eq!(normalize_domain(""), None);
    }

    #[test]
    fn snapshot_is_versioned() {
        assert!(suffix_snapshot_version().contains("icann"));
    }
}
