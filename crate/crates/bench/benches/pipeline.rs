use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdcascade::analysis::correlate;
use qdcascade::detection::{wavepacket_overlap, Wavepacket};
use qdcascade::experiments::{run_hbt, ExperimentConfig};
use qdcascade::Channel;
use qdcascade_bench::poisson_stream;

fn bench_correlate(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlate");
    for rate in [1e5, 1e6] {
        let a = poisson_stream(0, rate, 1_000_000_000_000);
        let b = poisson_stream(1, rate, 1_000_000_000_000);
        g.bench_with_input(BenchmarkId::from_parameter(rate), &(a, b), |bch, (a, b)| {
            bch.iter(|| correlate(a, b, 256, 140_000).unwrap())
        });
    }
    g.finish();
}

fn bench_overlap(c: &mut Criterion) {
    let a = Wavepacket { start: 0, t1: 220.0, t2: 192.0, seed: 1 };
    let b = Wavepacket { start: 30, t1: 220.0, t2: 192.0, seed: 2 };
    c.bench_function("wavepacket_overlap", |bch| bch.iter(|| wavepacket_overlap(&a, &b).unwrap()));
}

fn bench_hbt(c: &mut Criterion) {
    let cfg = ExperimentConfig::paper_default().desk_scaled(0.3, 100_000);
    let mut g = c.benchmark_group("run_hbt");
    g.sample_size(10);
    g.bench_function("1e5_periods", |bch| bch.iter(|| run_hbt(&cfg, Channel::XX).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_correlate, bench_overlap, bench_hbt);
criterion_main!(benches);
