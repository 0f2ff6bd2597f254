//! Throughput benchmarks for the three hot paths: a whole scenario run, the
//! streaming power average, and matrix connectivity.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use routersim_core::{connectivity, run_scenario, GateStates, PowerAverager, Scenario, SwitchTopology};

/// The full 4 s reference scenario: 48 000 samples across four ports,
/// including the mode switch. This is the number the 5 s runtime budget
/// watches.
fn full_scenario(c: &mut Criterion) {
    let scenario = Scenario::reference();
    let mut group = c.benchmark_group("engine");
    group.sample_size(20);
    group.bench_function("default_4s_scenario", |b| {
        b.iter(|| run_scenario(black_box(&scenario)).unwrap())
    });
    group.finish();
}

/// One million updates through a 200-sample window — the per-port cost the
/// engine pays four times per tick.
fn averager_stream(c: &mut Criterion) {
    c.bench_function("sense/averager_1m_updates", |b| {
        b.iter(|| {
            let mut avg = PowerAverager::new(200).unwrap();
            let mut acc = 0.0;
            for k in 0..1_000_000u32 {
                let p = (f64::from(k) * 1.0e-3).sin() * 700.0;
                if let Some(a) = avg.update(p) {
                    acc += a;
                }
            }
            black_box(acc)
        })
    });
}

/// Every gate combination of the eight-switch matrix, partitioned fresh.
fn connectivity_sweep(c: &mut Criterion) {
    let topology = SwitchTopology::extended_eight();
    let switches: Vec<_> = topology.switches().collect();
    c.bench_function("matrix/connectivity_256_combos", |b| {
        b.iter(|| {
            for mask in 0u32..256 {
                let gates = GateStates::from_map(
                    switches
                        .iter()
                        .enumerate()
                        .map(|(bit, &sw)| (sw, mask & (1 << bit) != 0))
                        .collect(),
                );
                black_box(connectivity(&topology, &gates));
            }
        })
    });
}

criterion_group!(benches, full_scenario, averager_stream, connectivity_sweep);
criterion_main!(benches);
