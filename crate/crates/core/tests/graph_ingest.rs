mod support;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use newsrep::graph::{read_snapshot, write_snapshot, NodeKind};
use newsrep::ingest::{
    build_graph, canonicalize_url, day_start, normalize_domain, scrub_site_mentions, site_of,
    temporal_split, write_records, GraphOptions, RecordReader, ShareRecord, SplitSpec,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use support::gen::random_graph;

fn record() -> impl Strategy<Value = ShareRecord> {
    (
        "[a-z][a-z0-9_]{0,7}",
        prop::sample::select(vec![
            "a.example",
            "news.co.uk",
            "blog.blogspot.com",
            "x.org",
        ]),
        0u32..40,
        1_500_000_000i64..1_520_000_000,
        proptest::option::of("[ -~]{0,20}"),
    )
        .prop_map(|(user, host, path, ts, title)| ShareRecord {
            user,
            url: format!("https://{host}/p{path}"),
            ts,
            title,
            description: None,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphs_pass_audit_and_round_trip(seed_value in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
        let rg = random_graph(&mut rng, 60, 300, true);
        rg.graph.audit().unwrap();
        let mut buf = Vec::new();
        write_snapshot(&rg.graph, &mut buf).unwrap();
        let back = read_snapshot(buf.as_slice()).unwrap();
        back.audit().unwrap();
        let mut again = Vec::new();
        write_snapshot(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn construction_ignores_record_order(records in prop::collection::vec(record(), 0..60), seed_value in any::<u64>()) {
        let options = GraphOptions { editorial: true, ..GraphOptions::default() };
        let (a, _) = build_graph(&records, &options).unwrap();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed_value));
        let (b, _) = build_graph(&shuffled, &options).unwrap();
        prop_assert!(a.same_content(&b));
        a.audit().unwrap();
    }

    #[test]
    fn split_is_disjoint_and_chronological(records in prop::collection::vec(record(), 0..80)) {
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let spec = SplitSpec {
            train_start: d("2017-07-14"),
            train_end: d("2017-09-01"),
            train_cutoff: d("2017-09-10"),
            test_start: d("2017-09-11"),
            test_end: d("2018-02-01"),
            alternate_days: false,
        };
        let split = temporal_split(records, &spec).unwrap();
        let train: BTreeSet<_> = split.train.iter().map(|b| &b.url).collect();
        let test: BTreeSet<_> = split.test.iter().map(|b| &b.url).collect();
        prop_assert!(train.is_disjoint(&test));
        let cutoff = day_start(spec.train_cutoff);
        for b in &split.train {
            prop_assert!(b.first_seen < day_start(spec.test_start));
            prop_assert!(b.shares.iter().all(|&(_, ts)| ts < cutoff));
        }
        for b in &split.test {
            prop_assert!(b.first_seen >= day_start(spec.test_start));
        }
    }

    #[test]
    fn records_round_trip(records in prop::collection::vec(record(), 0..30)) {
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        let back: Vec<_> = RecordReader::new(buf.as_slice(), "mem").collect();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn canonicalization_is_idempotent(
        host in "[a-z]{1,8}\\.(com|co\\.uk|org|blogspot\\.com)",
        path in "(/[a-z0-9]{1,5}){0,3}/?",
        query in proptest::option::of("[a-z]=[0-9]"),
    ) {
        let mut url = format!("https://WWW.{host}{path}");
        if let Some(q) = query {
            url.push('?');
            url.push_str(&q);
            url.push_str("&utm_source=x");
        }
        let once = canonicalize_url(&url).unwrap();
        prop_assert_eq!(canonicalize_url(&once).unwrap(), once.clone());
        let site = site_of(&once);
        prop_assert_eq!(normalize_domain(&site), Some(site.clone()));
    }

    #[test]
    fn scrubbing_removes_every_mention(
        before in "[ -~]{0,20}",
        after in "[ -~]{0,20}",
        alias in "[a-zA-Z]{3,8}",
        name in "[a-z]{3,8}",
    ) {
        let domain = format!("{name}.com");
        let mixed: String = name
            .chars()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { c.to_ascii_uppercase() } else { c })
            .collect();
        let text = format!("{before}{mixed}{before}{alias}{after}{domain}{after}");
        let clean = scrub_site_mentions(&text, &domain, &[alias.clone()]).to_lowercase();
        prop_assert!(!clean.contains(&name));
        prop_assert!(!clean.contains(&alias.to_lowercase()));
        prop_assert!(!clean.contains(&domain));
    }
}

#[test]
fn users_and_sites_share_no_keys_by_accident() {
    let records = vec![ShareRecord {
        user: "nytimes.com".into(),
        url: "https://www.nytimes.com/a".into(),
        ts: 1_500_000_000,
        title: None,
        description: None,
    }];
    let options = GraphOptions {
        editorial: true,
        ..GraphOptions::default()
    };
    let (g, _) = build_graph(&records, &options).unwrap();
    let user = g.source_id("nytimes.com", NodeKind::User).unwrap();
    let site = g.source_id("nytimes.com", NodeKind::Site).unwrap();
    assert_ne!(user, site);
    assert_eq!(g.edge_count(), 2);
}
