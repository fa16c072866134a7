use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use eschil::events::DurationSource;
use eschil::scenario::{run_es, run_sweep_sequential, Prepared};

fn scenario(name: &str) -> Prepared {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    Prepared::load(path).expect("bundled scenario")
}

fn sweep(c: &mut Criterion) {
    let p = scenario("rc_smoke.json");
    let list = p.scenario.baselines.clone();
    let mut group = c.benchmark_group("fe_sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_sweep_sequential(&p, &list).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| eschil::scenario::run_sweep_parallel(&p, &list).unwrap())
    });
    group.finish();
}

fn event_synchronized(c: &mut Criterion) {
    let p = scenario("rc_smoke.json");
    let mut group = c.benchmark_group("es");
    group.sample_size(10);
    group.bench_function("rc_smoke", |b| {
        b.iter(|| run_es(&p, DurationSource::Ideal).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sweep, event_synchronized);
criterion_main!(benches);
