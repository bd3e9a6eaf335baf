use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use vsixscan::deps::VulnDatabase;
use vsixscan::par::Parallelism;
use vsixscan::pipeline::{CorpusItem, Scanner};
use vsixscan::policy::Policy;
use vsixscan_testkit::corpus::synthetic_corpus;

fn scan_corpus(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let items: Vec<CorpusItem> = synthetic_corpus(42, 200)
        .iter()
        .map(|e| {
            let path = dir.path().join(format!("{}-{}.vsix", e.id(), e.version));
            std::fs::write(&path, &e.bytes).unwrap();
            CorpusItem { label: e.id(), path, install_count: Some(e.install_count) }
        })
        .collect();

    let mut group = c.benchmark_group("scan_corpus");
    group.sample_size(10);
    group.throughput(Throughput::Elements(items.len() as u64));
    for mode in [Parallelism::Sequential, Parallelism::Parallel] {
        let scanner = Scanner::new(Policy::default(), VulnDatabase::default()).with_mode(mode);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}").to_lowercase()), &items, |b, items| {
            b.iter(|| scanner.scan_corpus(items))
        });
    }
    group.finish();
}

criterion_group!(benches, scan_corpus);
criterion_main!(benches);
