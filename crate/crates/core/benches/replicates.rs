//! Replicate loop on the rayon pool against the sequential baseline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grainfield::field::{FieldSimulator, SimulationOptions};
use grainfield::parallel::{replicate_map, replicate_map_sequential};
use grainfield::{ModelParams, SeededStream};

fn field_replicates(c: &mut Criterion) {
    let params = ModelParams::square(1.5, 0.5).unwrap();
    let mut group = c.benchmark_group("field_replicates");
    group.sample_size(10);
    for &lambda in &[8.0, 32.0] {
        let sim = FieldSimulator::new(&params, lambda, 1.0, &[(1.0, 1.0)], SimulationOptions::default()).unwrap();
        let one = |i: usize| sim.sample(&mut SeededStream::new(7, i as u64)).unwrap().values[0];
        group.bench_with_input(BenchmarkId::new("parallel", lambda), &lambda, |b, _| {
            b.iter(|| replicate_map(256, one))
        });
        group.bench_with_input(BenchmarkId::new("sequential", lambda), &lambda, |b, _| {
            b.iter(|| replicate_map_sequential(256, one))
        });
    }
    group.finish();
}

criterion_group!(benches, field_replicates);
criterion_main!(benches);
