use regex::RegexBuilder;

use super::domain::SuffixList;

/// Name part of a registrable domain: `nytimes` for `nytimes.com`,
/// `bbc` for `bbc.co.uk`.
pub fn site_name_token(domain: &str) -> String {
    let domain = domain.to_ascii_lowercase();
    let labels: Vec<&str> = domain.split('.').collect();
    let reg = SuffixList::bundled().registrable_domain(&domain);
    let reg_labels = reg.split('.').count();
    if reg_labels >= 1 && labels.len() >= reg_labels {
        labels[labels.len() - reg_labels].to_owned()
    } else {
        domain
    }
}

/// Removes every case-insensitive mention of `domain`, its name token and
/// each alias. Nothing else is touched, surrounding whitespace included.
/// Removal repeats until no pattern matches, so the result is a fixpoint.
pub fn scrub_site_mentions<S: AsRef<str>>(text: &str, domain: &str, aliases: &[S]) -> String {
    let mut patterns: Vec<String> = std::iter::once(domain.to_owned())
        .chain(std::iter::once(site_name_token(domain)))
        .chain(aliases.iter().map(|a| a.as_ref().to_owned()))
        .map(|p| p.trim().to_owned())
        .filter(|p| !p.is_empty())
        .collect();
    if patterns.is_empty() {
        return text.to_owned();
    }
    // longest first so "nytimes.com" wins over "nytimes"
    patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    patterns.dedup();
    let alternation = patterns
        .iter()
        .map(|p| regex::escape(p))
        .collect::<Vec<_>>()
        .join("|");
    let re = RegexBuilder::new(&alternation)
        .case_insensitive(true)
        .build()
        .expect("escaped alternation is a valid regex");

    let mut current = text.to_owned();
    loop {
        let next = re.replace_all(&current, "").into_owned();
        if next == current {
            return current;
        }
        current = next;
    }
}
