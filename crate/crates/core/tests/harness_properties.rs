use proptest::prelude::*;

use swan_core::detectors::DetectorKind;
use swan_core::experiments::{monte_carlo, prepare, ExperimentSpec, TagDesign};
use swan_core::lasso::{LassoDetector, LassoOptions};
use swan_core::phys::{build_channel, SystemConfig};
use swan_core::sim::{sample_states, synthesize, StateVector};
use swan_core::tags::submatrix_tags;
use swan_core::Complex64;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_spec(m: usize, extra_t: usize, p_db: f64, seed: u64, q: f64) -> ExperimentSpec {
    let mut spec = ExperimentSpec {
        name: "prop".into(),
        power_db: vec![p_db],
        pilot_lengths: vec![m + extra_t],
        segment_counts: vec![m],
        detectors: DetectorKind::ALL.to_vec(),
        trials: 40,
        seed,
        ..ExperimentSpec::default()
    };
    spec.system.q_fail = q;
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schedule_does_not_change_results(
        m in 2usize..9, extra_t in 0usize..6, p_db in -35.0f64..-10.0, seed in any::<u64>(), q in 0.01f64..0.5,
    ) {
        let spec = small_spec(m, extra_t, p_db, seed, q);
        let a = monte_carlo(&spec, 1).unwrap().table;
        let b = monte_carlo(&spec, 3).unwrap().table;
        prop_assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert_eq!(
                (&x.detector, x.block_err, x.seg_err, x.missed_rate, x.false_alarm_rate),
                (&y.detector, y.block_err, y.seg_err, y.missed_rate, y.false_alarm_rate)
            );
        }
    }

    #[test]
    fn rates_are_consistent(
        m in 2usize..9, extra_t in 0usize..6, p_db in -35.0f64..-10.0, seed in any::<u64>(), q in 0.01f64..0.5,
    ) {
        let spec = small_spec(m, extra_t, p_db, seed, q);
        for r in &monte_carlo(&spec, 1).unwrap().table.rows {
            prop_assert!(r.block_err >= r.seg_err);
            prop_assert!((r.missed_rate + r.false_alarm_rate - r.seg_err).abs() < 1e-12);
            for v in [r.block_err, r.seg_err, r.missed_rate, r.false_alarm_rate] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn decisions_are_binary_and_sized(
        m in 2usize..9, extra_t in 0usize..6, seed in any::<u64>(), trial in 0u64..1000,
    ) {
        let spec = small_spec(m, extra_t, -25.0, seed, 0.2);
        for point in &prepare(&spec).unwrap().points {
            let rec = point.run_trial(trial).unwrap();
            prop_assert_eq!(rec.truth.len(), m);
            prop_assert_eq!(rec.decisions.len(), point.detectors().len());
            for d in &rec.decisions {
                prop_assert_eq!(d.states.len(), m);
            }
            prop_assert_eq!(rec.decisions_only(), point.run_trial(trial).unwrap().decisions_only());
        }
    }

    #[test]
    fn config_text_round_trips(
        m in 1usize..20, t in 1usize..64, p in proptest::collection::vec(-40.0f64..0.0, 1..4),
        trials in 1usize..100_000, seed in any::<u64>(), wide in any::<bool>(),
    ) {
        let spec = ExperimentSpec {
            name: "rt".into(),
            power_db: p,
            pilot_lengths: vec![t],
            segment_counts: vec![m],
            detectors: vec![DetectorKind::JointMl, DetectorKind::Lasso],
            trials,
            seed,
            tags: if wide { TagDesign::SubmatrixWide } else { TagDesign::Submatrix },
            ..ExperimentSpec::default()
        };
        let back = ExperimentSpec::from_config_str(&spec.to_config_string()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn lasso_decisions_are_scale_invariant(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let (m, t, p, sigma2) = (16usize, 8usize, 10f64.powf(-2.0), 1e-9);
        let cfg = SystemConfig { segments: m, ..SystemConfig::default() };
        let (_, h) = build_channel(&cfg).unwrap();
        let b = submatrix_tags(m, t, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample_states(m, 0.2, &mut rng);
        let y = synthesize(&b, &h, &s, p, sigma2, &mut rng).unwrap().y;
        let s0 = StateVector::all_working(m);
        let base = LassoDetector::new(&b, &h, p, LassoOptions::default()).unwrap();
        let h_scaled = swan_core::phys::ChannelVector(h.0.iter().map(|v| v * alpha).collect());
        let y_scaled: Vec<Complex64> = y.iter().map(|v| v * alpha).collect();
        let scaled = LassoDetector::new(&b, &h_scaled, p, LassoOptions::default()).unwrap();
        prop_assert_eq!(
            base.detect(&y, &s0, sigma2).unwrap().states,
            scaled.detect(&y_scaled, &s0, sigma2 * alpha * alpha).unwrap().states
        );
    }
}
