use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vsixscan::clock::SimClock;
use vsixscan::deps::{parse_range, parse_version, VulnDatabase};
use vsixscan::finding::Finding;
use vsixscan::graph::{build_graph, chains, InstallEdge, InstallGraph, Mechanism, NodeAttributes, DEFAULT_PATH_CAP};
use vsixscan::intel::{classify_positives, ThreatClass, DEFAULT_THRESHOLD};
use vsixscan::market::{
    CrawlOptions, EndpointProfile, LedgerEntry, MarketClient, MarketConfig, Method, Request, Response, Store, Transport,
};
use vsixscan::par::Parallelism;
use vsixscan::pipeline::{store_items, Scanner};
use vsixscan::policy::Policy;
use vsixscan::report::{emit_reports, parse_reports, ExtensionReport, Format};
use vsixscan_testkit::corpus::{benign_corpus, cve_histogram_fixture, listing_one, seeded_corpus, synthetic_corpus};
use vsixscan_testkit::digraph::{node_id, random_dag, random_digraph, simple_paths_bruteforce, Digraph};
use vsixscan_testkit::gallery::{plain_bytes, FixtureGallery};
use vsixscan_testkit::semver::{lattice, random_range};

fn scanner() -> Scanner {
    Scanner::new(Policy::default(), VulnDatabase::default()).with_mode(Parallelism::Sequential)
}

fn rule_counts<'a>(findings: impl Iterator<Item = &'a Finding>) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for f in findings {
        *m.entry(f.rule_id.as_str()).or_insert(0) += 1;
    }
    m
}

fn seeded_detection() -> String {
    let seeded = seeded_corpus(0x5eed);
    let benign = benign_corpus(0x5eed, 40);
    let s = scanner();
    let start = Instant::now();
    let mut seen: BTreeMap<&'static str, usize> = BTreeMap::new();
    for e in &seeded {
        let r = s.scan_bytes(&e.bytes, None).unwrap().report;
        let got = rule_counts(r.all_findings());
        assert_eq!(got, e.expected, "{}", e.id());
        for (id, _) in got {
            *seen.entry(id).or_insert(0) += 1;
        }
    }
    for e in &benign {
        let r = s.scan_bytes(&e.bytes, None).unwrap().report;
        assert_eq!(r.all_findings().count(), 0, "{}: {:?}", e.id(), rule_counts(r.all_findings()));
    }
    let elapsed = start.elapsed();
    let src = seen.keys().filter(|k| k.starts_with("SRC-")).count();
    let man = seen.keys().filter(|k| k.starts_with("MAN-") || k.starts_with("PKG-")).count();
    assert!(src >= 20, "only {src} source rules seeded");
    assert!(seen.values().all(|&n| n >= 2), "{seen:?}");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    format!(
        "{} seeded + {} benign packages, {src} source and {man} manifest/package rules each hit at least twice, 0 unexplained findings, {:.1}s",
        seeded.len(),
        benign.len(),
        elapsed.as_secs_f64()
    )
}

fn threshold_exactness() -> String {
    assert_eq!(DEFAULT_THRESHOLD, 4);
    assert_eq!(classify_positives(3, DEFAULT_THRESHOLD), ThreatClass::Flagged);
    assert_eq!(classify_positives(4, DEFAULT_THRESHOLD), ThreatClass::Malicious);
    assert_eq!(classify_positives(0, DEFAULT_THRESHOLD), ThreatClass::Clean);
    let mut runner = TestRunner::new(Config { cases: 2000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(2u32..=10, 0u32..=80), |(t, p)| {
            let want = if p == 0 {
                ThreatClass::Clean
            } else if p >= t {
                ThreatClass::Malicious
            } else {
                ThreatClass::Flagged
            };
            proptest::prop_assert_eq!(classify_positives(p, t), want);
            proptest::prop_assert_eq!(classify_positives(t - 1, t), ThreatClass::Flagged);
            proptest::prop_assert_eq!(classify_positives(t, t), ThreatClass::Malicious);
            Ok(())
        })
        .unwrap();
    "3 positives flagged, 4 malicious; boundary holds for thresholds 2-10".into()
}

fn listing_one_oracle() -> String {
    let bytes = listing_one().bytes;
    let first = scanner().scan_bytes(&bytes, None).unwrap().report;
    let ids: BTreeSet<&str> = first.all_findings().map(|f| f.rule_id.as_str()).collect();
    let want = BTreeSet::from(["MAN-PACK-INSTALL", "MAN-DEP-INSTALL", "MAN-UNTRUSTED-WS", "MAN-NET-DEP"]);
    assert_eq!(ids, want);
    assert_eq!(first.all_findings().count(), 4);
    let a = emit_reports(&[first], Format::Structured);
    let b = emit_reports(&[scanner().scan_bytes(&bytes, None).unwrap().report], Format::Structured);
    assert_eq!(a, b);
    format!("exactly {} findings, {} structured bytes stable across runs", want.len(), a.len())
}

fn range_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    let versions = lattice(3, 9);
    let parsed: Vec<_> = versions.iter().map(|&(a, b, c)| parse_version(&format!("{a}.{b}.{c}")).unwrap()).collect();
    let mut disagreements = Vec::new();
    for _ in 0..1000 {
        let oracle = random_range(&mut rng);
        let text = oracle.text();
        let range = parse_range(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        for (&t, v) in versions.iter().zip(&parsed) {
            if vsixscan::deps::version_in_range(v, &range) != oracle.admits(t) {
                disagreements.push(format!("{text} on {t:?}"));
            }
        }
    }
    assert!(disagreements.is_empty(), "{} disagreements, first {}", disagreements.len(), disagreements[0]);
    format!("1000 ranges x {} versions, 0 disagreements", versions.len())
}

fn install_graph(g: &Digraph) -> InstallGraph {
    let mut out = InstallGraph::default();
    for i in 0..g.n {
        out.nodes.insert(node_id(i), NodeAttributes::default());
    }
    for &(a, b) in &g.edges {
        out.edges.insert(InstallEdge { from: node_id(a), to: node_id(b), mechanism: Mechanism::ExtensionPack });
    }
    out
}

fn chain_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005);
    let mut total = 0;
    for round in 0..200 {
        let density = rng.gen_range(0.05..0.3);
        let g = if round % 2 == 0 { random_digraph(&mut rng, 12, density) } else { random_dag(&mut rng, 12, density) };
        let want: Vec<Vec<String>> =
            simple_paths_bruteforce(&g, 3).into_iter().map(|p| p.into_iter().map(node_id).collect()).collect();
        let got = chains(&install_graph(&g), 3, DEFAULT_PATH_CAP);
        assert_eq!(got.paths, want, "round {round}");
        total += want.len();
    }

    let s = scanner();
    let pack = |name: &str, next: &[&str]| {
        let bytes = vsixscan_testkit::vsix::VsixBuilder::new()
            .manifest(&serde_json::json!({
                "publisher": "chain", "name": name, "version": "1.0.0",
                "repository": { "url": "https://example.test/r.git" },
                "extensionPack": next,
            }))
            .build();
        s.scan_bytes(&bytes, None).unwrap().subject
    };
    let (g, _) = build_graph(&[pack("e1", &["chain.e2"]), pack("e2", &["chain.e3"]), pack("e3", &[])]);
    let c = chains(&g, 3, DEFAULT_PATH_CAP);
    assert_eq!(c.paths, vec![vec!["chain.e1".to_string(), "chain.e2".into(), "chain.e3".into()]]);
    format!("200 digraphs, {total} paths matched; E1 -> E2 -> E3 gives 1 chain")
}

fn severity_histogram() -> String {
    let fx = cve_histogram_fixture();
    let s = Scanner::new(Policy::default(), VulnDatabase::parse(&fx.db_text).unwrap());
    let mut hist: BTreeMap<String, usize> = BTreeMap::new();
    for e in &fx.extensions {
        let r = s.scan_bytes(&e.bytes, None).unwrap().report;
        let cves: Vec<&Finding> = r.dep_findings.iter().filter(|f| f.rule_id.as_str() == "DEP-CVE").collect();
        assert_eq!(cves.len(), e.expected.get("DEP-CVE").copied().unwrap_or(0), "{}", e.id());
        for f in cves {
            *hist.entry(f.severity.as_str().to_string()).or_insert(0) += 1;
        }
    }
    let want: BTreeMap<String, usize> = fx.histogram.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    assert_eq!(hist, want);
    format!("low {}, medium {}, high {}; patched manifest clean", hist["low"], hist["medium"], hist["high"])
}

const BASE: &str = "http://gallery.test";

struct Local(Arc<FixtureGallery>);

impl Transport for Local {
    fn send(&self, request: &Request) -> Result<Response, String> {
        let target = request.url.strip_prefix(BASE).ok_or("unknown host")?;
        let method = match request.method {
            Method::Get => "GET",
            Method::Post => "POST",
        };
        let (status, _, body) = self.0.handle(method, target);
        Ok(Response { status, body, retry_after_ms: None })
    }
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn crawl_resumability() -> String {
    const T0: u64 = 1_700_000_000;
    let g = Arc::new(FixtureGallery::seeded(0xACCE, 50, T0, &plain_bytes));
    let client = |config: MarketConfig, clock: Arc<SimClock>| {
        MarketClient::with_parts(EndpointProfile::fixture_server(BASE), config, Arc::new(Local(g.clone())), clock)
    };
    let free = MarketConfig { rate_per_second: 0, workers: 4, page_size: 20, initial_backoff_ms: 100, ..Default::default() };
    let clock = || Arc::new(SimClock::starting_at(T0 * 1000));
    let opts = CrawlOptions { all_versions: true, ..Default::default() };

    let full = tempfile::tempdir().unwrap();
    let r = client(free.clone(), clock()).crawl(&Store::open(full.path()).unwrap(), &opts).unwrap();
    let resumed = tempfile::tempdir().unwrap();
    let mut cuts = 0;
    for cut in [7, 19] {
        let part = client(free.clone(), clock())
            .crawl(&Store::open(resumed.path()).unwrap(), &CrawlOptions { max_downloads: Some(cut), ..opts.clone() })
            .unwrap();
        assert!(part.interrupted);
        cuts += 1;
    }
    let last = client(free.clone(), clock()).crawl(&Store::open(resumed.path()).unwrap(), &opts).unwrap();
    assert!(!last.interrupted);
    let a = tree(full.path());
    assert_eq!(tree(resumed.path()), a);

    let rate = 5;
    let limited = client(MarketConfig { rate_per_second: rate, workers: 6, page_size: 10, ..free }, Arc::new(SimClock::starting_at(0)));
    let dir = tempfile::tempdir().unwrap();
    limited.crawl(&Store::open(dir.path()).unwrap(), &opts).unwrap();
    let times = limited.request_times();
    let n = rate as usize;
    let worst = times.windows(n + 1).map(|w| w[n] - w[0]).min().unwrap();
    assert!(worst >= 1000, "{} requests within {worst} ms", n + 1);
    format!(
        "{} packages; store after {cuts} interruptions identical ({} files); {} requests, never more than {rate} per simulated second",
        r.downloaded,
        a.len(),
        times.len()
    )
}

fn round_trip_and_determinism() -> String {
    let corpus = synthetic_corpus(0xACCE_0008, 40);
    let scan = || -> Vec<ExtensionReport> {
        let s = scanner();
        corpus.iter().map(|e| s.scan_bytes(&e.bytes, Some(e.install_count)).unwrap().report).collect()
    };
    let reports = scan();
    let bytes = emit_reports(&reports, Format::Structured);
    let back = parse_reports(&bytes).unwrap();
    assert_eq!(back, reports);
    assert_eq!(emit_reports(&back, Format::Structured), bytes);
    assert_eq!(emit_reports(&scan(), Format::Structured), bytes);
    format!("{} reports, {} bytes, parse(emit) equal and rescans byte-identical", reports.len(), bytes.len())
}

fn throughput() -> String {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let corpus = synthetic_corpus(0xACCE_0009, 500);
    let mut entries = Vec::new();
    for e in &corpus {
        let (sha256, _) = store.put(&e.bytes).unwrap();
        entries.push(LedgerEntry { id: e.id(), version: e.version.clone(), sha256, size: e.bytes.len() as u64 });
    }
    store.append(&entries).unwrap();
    let start = Instant::now();
    let items = store_items(dir.path(), true).unwrap();
    let out = Scanner::new(Policy::default(), VulnDatabase::default()).scan_corpus(&items);
    let elapsed = start.elapsed();
    assert_eq!(items.len(), 500);
    assert_eq!(out.reports.len(), 500);
    assert!(out.failures.is_empty());
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    let findings: usize = out.reports.iter().map(|r| r.all_findings().count()).sum();
    format!("500 stored packages scanned in {:.1}s, {findings} findings", elapsed.as_secs_f64())
}

fn run(n: usize, f: fn() -> String) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let line = match &outcome {
        Ok(detail) => format!("criterion {n}: PASS: {detail}"),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            format!("criterion {n}: FAIL: {msg}")
        }
    };
    writeln!(std::io::stdout(), "{line}").unwrap();
    outcome.is_ok()
}

#[test]
fn acceptance() {
    let criteria: [fn() -> String; 9] = [
        seeded_detection,
        threshold_exactness,
        listing_one_oracle,
        range_oracle,
        chain_oracle,
        severity_histogram,
        crawl_resumability,
        round_trip_and_determinism,
        throughput,
    ];
    let failed: Vec<usize> = criteria.iter().enumerate().filter(|(i, f)| !run(i + 1, **f)).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
