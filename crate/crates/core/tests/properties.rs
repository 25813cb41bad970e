use grainfield::geometry::{cross_overlap_integral, interval_overlap};
use grainfield::limits::fbs_covariance;
use grainfield::parallel::tree_sum;
use grainfield::sampling::{pareto_sample, stable_sample};
use grainfield::stats::{empirical_chf, hill, ks_two_sample};
use grainfield::theory::{
    classify_field_regime, classify_workload_regime, field_log_chf, reflect_params, FieldFamily, Rational,
};
use grainfield::verify::format_f64;
use grainfield::workload::{normalize_a, simulate_a_raw, WorkloadConfig};
use grainfield::{GrainShape, ModelParams, Rect, SeededStream};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-6 * (1.0 + b.abs())
}

fn away_from_boundaries(gamma: f64, alpha: f64, p: f64) -> bool {
    let gp = alpha / p - 1.0;
    let gm = (1.0 - p) / (alpha - 1.0 + p);
    !near(gamma, gp) && !near(gamma, gm) && !near(alpha, 2.0 - p) && !near(alpha, 1.0 + p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empirical_chf_conjugate_symmetric(values in prop::collection::vec(-50.0f64..50.0, 1..200), theta in 0.0f64..5.0) {
        let c = empirical_chf(&values, &[theta, -theta]);
        prop_assert!((c.values[0] - c.values[1].conj()).norm() < 1e-12);
        prop_assert!(c.values[0].norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn stable_log_chf_conjugate_symmetric(alpha in 1.05f64..1.95, theta in 0.01f64..3.0) {
        let params = ModelParams::square(alpha, 0.5).unwrap();
        let regime = classify_field_regime(1.0, alpha, 0.5).unwrap();
        prop_assume!(regime.family == FieldFamily::StableSheet);
        let c = field_log_chf(&regime, &params, &[theta, -theta], 1.0, 1.0).unwrap();
        prop_assert!((c.values[0] - c.values[1].conj()).norm() < 1e-12);
        prop_assert!(c.values[0].re < 0.0);
    }

    #[test]
    fn hill_is_permutation_invariant(mut values in prop::collection::vec(0.01f64..1e6, 20..300), seed in any::<u64>()) {
        let k = values.len() / 4;
        let a = hill(&values, k).unwrap();
        // Deterministic Fisher-Yates driven by the seed.
        let mut s = SeededStream::new(seed, 0);
        for i in (1..values.len()).rev() {
            let j = (s.uniform(0.0, (i + 1) as f64) as usize).min(i);
            values.swap(i, j);
        }
        let b = hill(&values, k).unwrap();
        prop_assert_eq!(a.alpha, b.alpha);
        prop_assert!(a.alpha > 0.0);
    }

    #[test]
    fn ks_statistic_in_unit_interval(a in prop::collection::vec(-10.0f64..10.0, 2..100), b in prop::collection::vec(-10.0f64..10.0, 2..100)) {
        let r = ks_two_sample(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        let same = ks_two_sample(&a, &a).unwrap();
        prop_assert_eq!(same.statistic, 0.0);
    }

    #[test]
    fn fbs_covariance_is_psd(
        h1 in 0.05f64..1.0,
        h2 in 0.05f64..1.0,
        pts in prop::collection::vec((0.01f64..3.0, 0.01f64..3.0), 2..12),
    ) {
        let n = pts.len();
        let m = DMatrix::from_fn(n, n, |i, j| fbs_covariance(h1, h2, 1.0, pts[i], pts[j]));
        let scale = m.diagonal().iter().cloned().fold(0.0, f64::max);
        let eig = SymmetricEigen::new(m).eigenvalues;
        prop_assert!(eig.iter().all(|&e| e >= -1e-9 * scale), "{eig:?}");
    }

    #[test]
    fn regime_mirror_symmetry(gamma in 0.05f64..6.0, alpha in 1.02f64..1.98, p in 0.05f64..0.95) {
        prop_assume!(away_from_boundaries(gamma, alpha, p));
        let (g2, p2, _) = reflect_params(gamma, p, &GrainShape::UnitSquare).unwrap();
        prop_assume!(away_from_boundaries(g2, alpha, p2));
        let r = classify_field_regime(gamma, alpha, p).unwrap();
        let m = classify_field_regime(g2, alpha, p2).unwrap();
        prop_assert_eq!(m.family, r.family.mirror());
        prop_assert!((m.h - r.h / gamma).abs() < 1e-9 * (1.0 + r.h), "{} vs {}", m.h, r.h / gamma);
    }

    #[test]
    fn h_nondecreasing_in_gamma(g1 in 0.05f64..6.0, dg in 0.0f64..3.0, alpha in 1.02f64..1.98, p in 0.05f64..0.95) {
        let a = classify_field_regime(g1, alpha, p).unwrap();
        let b = classify_field_regime(g1 + dg, alpha, p).unwrap();
        prop_assert!(b.h >= a.h - 1e-12);
    }

    #[test]
    fn float_and_exact_classifiers_agree(gn in 1i128..60, gd in 1i128..12, an in 11i128..20, pn in 1i128..10) {
        let (gamma, alpha, p) = (Rational::new(gn, gd), Rational::new(an, 10), Rational::new(pn, 10));
        let exact = grainfield::theory::classify_field_regime_exact(gamma, alpha, p).unwrap();
        let f = |r: Rational| *r.numer() as f64 / *r.denom() as f64;
        prop_assume!(away_from_boundaries(f(gamma), f(alpha), f(p)));
        let float = classify_field_regime(f(gamma), f(alpha), f(p)).unwrap();
        prop_assert_eq!(exact.family, float.family);
    }

    #[test]
    fn workload_classification_total(gamma in 0.05f64..6.0, beta in prop_oneof![Just(f64::INFINITY), 0.05f64..5.0], alpha in 1.02f64..1.98, p in 0.05f64..1.0) {
        let r = classify_workload_regime(gamma, beta, alpha, p).unwrap();
        prop_assert!(r.script_h > 0.0);
    }

    #[test]
    fn reflection_is_an_involution(gamma in 0.01f64..100.0, p in 0.01f64..0.99) {
        let (g2, p2, _) = reflect_params(gamma, p, &GrainShape::UnitSquare).unwrap();
        let (g3, p3, _) = reflect_params(g2, p2, &GrainShape::UnitSquare).unwrap();
        prop_assert!((g3 - gamma).abs() < 1e-12 * gamma);
        prop_assert!((p3 - p).abs() < 1e-15);
    }

    #[test]
    fn overlaps_bounded(cx in -3.0f64..3.0, cy in -3.0f64..3.0, sx in 0.01f64..4.0, sy in 0.01f64..4.0, w in 0.1f64..3.0, h in 0.1f64..3.0) {
        let rect = Rect::new(0.0, w, 0.0, h);
        for grain in [GrainShape::UnitSquare, GrainShape::UnitDisk] {
            let o = grain.dilated_overlap(cx, cy, sx, sy, &rect);
            prop_assert!(o >= 0.0);
            prop_assert!(o <= (grain.area() * sx * sy).min(w * h) * (1.0 + 1e-9) + 1e-12);
        }
        let l = interval_overlap(cx, sx, w);
        prop_assert!(l >= 0.0 && l <= sx.min(w) + 1e-15);
    }

    #[test]
    fn cross_overlap_symmetric(a in 0.001f64..5.0, l1 in 0.01f64..4.0, l2 in 0.01f64..4.0) {
        let x = cross_overlap_integral(a, l1, l2);
        let y = cross_overlap_integral(a, l2, l1);
        prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-300));
        prop_assert!(x >= 0.0);
        prop_assert!(x <= a * a * (l1 + a).min(l2 + a) * (1.0 + 1e-9));
    }

    #[test]
    fn pareto_above_minimum(alpha in 1.01f64..1.99, seed in any::<u64>()) {
        let params = ModelParams::square(alpha, 0.5).unwrap();
        let mut s = SeededStream::new(seed, 0);
        for _ in 0..50 {
            prop_assert!(pareto_sample(&params, &mut s) >= params.r_min);
        }
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), id in any::<u64>(), index in 1.01f64..1.99) {
        let a: Vec<f64> = { let mut s = SeededStream::new(seed, id); (0..8).map(|_| stable_sample(index, 1.0, &mut s)).collect() };
        let b: Vec<f64> = { let mut s = SeededStream::new(seed, id); (0..8).map(|_| stable_sample(index, 1.0, &mut s)).collect() };
        prop_assert_eq!(a, b);
    }

    #[test]
    fn float_format_round_trips(v in any::<f64>()) {
        prop_assume!(v.is_finite());
        prop_assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn tree_sum_matches_naive(values in prop::collection::vec(-1e3f64..1e3, 0..500)) {
        let naive: f64 = values.iter().sum();
        prop_assert!((tree_sum(&values) - naive).abs() < 1e-9 * (1.0 + values.iter().map(|v| v.abs()).sum::<f64>()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn normalization_is_linear(c in -10.0f64..10.0, path in prop::collection::vec(-5.0f64..5.0, 3)) {
        let params = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitSquare, grainfield::Usage::Workload).unwrap();
        let config = WorkloadConfig::new(64.0, 1.0, f64::INFINITY, vec![0.25, 0.5, 1.0], params).unwrap();
        let regime = config.regime().unwrap();
        let scaled: Vec<f64> = path.iter().map(|v| c * v).collect();
        let a = normalize_a(&scaled, &config, &regime).unwrap();
        let b = normalize_a(&path, &config, &regime).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - c * y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn raw_workload_is_monotone(seed in any::<u64>(), gamma in 0.5f64..1.5, beta in prop_oneof![Just(f64::INFINITY), 0.3f64..2.0]) {
        let params = ModelParams::validate(1.5, 0.5, 1.0, GrainShape::UnitSquare, grainfield::Usage::Workload).unwrap();
        let xs = vec![0.1, 0.25, 0.5, 0.75, 1.0];
        let config = WorkloadConfig::new(16.0, gamma, beta, xs, params).unwrap();
        let a = simulate_a_raw(&config, &mut SeededStream::new(seed, 0)).unwrap();
        prop_assert!(a[0] >= 0.0);
        prop_assert!(a.windows(2).all(|w| w[1] >= w[0]), "{a:?}");
    }
}
