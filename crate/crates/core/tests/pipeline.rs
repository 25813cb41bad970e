use grainfield::field::{FieldSimulator, SimulationOptions, SmallGrains};
use grainfield::limits::{GridSpec, IntermediateSampler, IntermediateSide, TruncationOptions};
use grainfield::stats::{mean, mean_se};
use grainfield::theory::classify_field_regime;
use grainfield::verify::{run_check, Suite};
use grainfield::workload::{simulate_replicates, WorkloadConfig};
use grainfield::{GrainShape, ModelParams, SeededStream, Usage};

#[test]
fn centered_field_has_zero_mean() {
    let params = ModelParams::square(1.7, 0.4).unwrap();
    let sim = FieldSimulator::new(
        &params,
        4.0,
        1.5,
        &[(0.5, 1.0), (1.0, 1.0)],
        SimulationOptions::default(),
    )
    .unwrap();
    let vals: Vec<f64> = (0..4000)
        .map(|i| sim.sample(&mut SeededStream::new(3, i)).unwrap().values[1])
        .collect();
    assert!(mean(&vals).abs() < 4.0 * mean_se(&vals), "{}", mean(&vals));
}

#[test]
fn hybrid_and_exact_agree_in_variance() {
    let params = ModelParams::square(1.9, 0.5).unwrap();
    let grid = [(1.0, 1.0)];
    let exact = FieldSimulator::new(&params, 8.0, 1.0, &grid, SimulationOptions::default()).unwrap();
    let opts = SimulationOptions {
        small_grains: SmallGrains::Gaussian { target: 50.0 },
        ..SimulationOptions::default()
    };
    let hybrid = FieldSimulator::new(&params, 8.0, 1.0, &grid, opts).unwrap();
    assert!(hybrid.r_cut().is_some());
    let n = 3000;
    let a: Vec<f64> = (0..n)
        .map(|i| exact.sample(&mut SeededStream::new(1, i)).unwrap().values[0])
        .collect();
    let b: Vec<f64> = (0..n)
        .map(|i| hybrid.sample(&mut SeededStream::new(2, i)).unwrap().values[0])
        .collect();
    let (va, vb) = (grainfield::stats::variance(&a), grainfield::stats::variance(&b));
    // Heavy tails make the variance estimate noisy; a loose ratio is enough.
    assert!((va / vb - 1.0).abs() < 0.35, "{va} {vb}");
}

#[test]
fn intermediate_minus_sampler_runs_at_gamma_minus() {
    let params = ModelParams::square(1.5, 0.5).unwrap();
    let regime = classify_field_regime(0.5, 1.5, 0.5).unwrap();
    assert_eq!(regime.family, grainfield::theory::FieldFamily::IntermediateMinus);
    let grid = GridSpec::new(vec![0.5, 1.0], vec![0.5, 1.0]).unwrap();
    let s = IntermediateSampler::new(IntermediateSide::Minus, &grid, &params, TruncationOptions::default()).unwrap();
    let f = s.sample(&mut SeededStream::new(9, 0)).unwrap();
    assert_eq!(f.values.len(), 4);
    assert!(f.values.iter().all(|v| v.is_finite()));
}

#[test]
fn workload_replicates_reproducible() {
    let params = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitSquare, Usage::Workload).unwrap();
    let cfg = WorkloadConfig::new(32.0, 1.0, 1.0, vec![0.5, 1.0], params).unwrap();
    let a = simulate_replicates(&cfg, 50, 4).unwrap();
    let b = simulate_replicates(&cfg, 50, 4).unwrap();
    assert_eq!(a, b);
    let c = simulate_replicates(&cfg, 50, 5).unwrap();
    assert_ne!(a, c);
}

#[test]
fn exact_checks_pass_in_fast_smoke() {
    for id in [1, 2, 3] {
        let r = run_check(id, Suite::FastSmoke, 7).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
