//! Quick invariant suite behind `swan validate`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::detectors::{
    per_segment_ml, DetectorKind, JointMl, LsEstimator, DEFAULT_MAX_JOINT_SEGMENTS,
};
use crate::error::Result;
use crate::lasso::{LassoDesign, LassoOptions};
use crate::phys::{build_channel, SystemConfig};
use crate::sim::{sample_states, synthesize, StreamKey};
use crate::tags::{hadamard, orthogonal_tags};

use super::analytic::{analytic_error, binomial_sd};
use super::harness::monte_carlo;
use super::spec::ExperimentSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

fn hadamard_rows_orthogonal() -> Result<CheckOutcome> {
    let mut worst = 0i64;
    for k in 0..=6 {
        let t = 1usize << k;
        let h = hadamard(t)?.map(i64::from);
        let off = &h.transpose() * &h - DMatrix::<i64>::identity(t, t) * t as i64;
        worst = worst.max(off.iter().map(|v| v.abs()).max().unwrap_or(0));
    }
    Ok(outcome(
        "hadamard-orthogonality",
        worst == 0,
        format!("max |HᵀH − T·I| = {worst}"),
    ))
}

fn channel_geometry() -> Result<CheckOutcome> {
    let mut ok = true;
    let mut detail = String::new();
    for m in [1, 8, 13, 64] {
        let cfg = SystemConfig {
            segments: m,
            ..SystemConfig::default()
        };
        let (layout, h) = build_channel(&cfg)?;
        let user = cfg.user();
        for k in 0..m {
            let r = layout.pa_position(k).distance(&user);
            let rel = (h[k].norm() * r / cfg.eta().sqrt() - 1.0).abs();
            ok &= rel < 1e-12;
        }
        if let Some(gap) = layout.min_pa_spacing() {
            ok &= gap >= cfg.min_spacing * (1.0 - 1e-12);
            detail = format!("min PA spacing at M = {m}: {gap:.4} m");
        }
    }
    Ok(outcome("channel-geometry", ok, detail))
}

fn orthogonal_equivalence(trials: u64) -> Result<CheckOutcome> {
    let cfg = SystemConfig::default();
    let (_, h) = build_channel(&cfg)?;
    let b = orthogonal_tags(cfg.segments, 16)?;
    let (p, s2) = (cfg.tx_power(), cfg.noise_power());
    let joint = JointMl::new(&b, &h, p, DEFAULT_MAX_JOINT_SEGMENTS)?;
    let ls = LsEstimator::new(&b, p, s2)?;
    let key = StreamKey::new(0x5eed, 0);
    let mut disagreements = 0;
    for trial in 0..trials {
        let s = sample_states(cfg.segments, cfg.q_fail, &mut key.rng(trial, 0));
        let y = synthesize(&b, &h, &s, p, s2, &mut key.rng(trial, 1))?.y;
        if joint.detect(&y)?.states != per_segment_ml(&ls.estimate(&y)?, &h).states {
            disagreements += 1;
        }
    }
    Ok(outcome(
        "orthogonal-equivalence",
        disagreements == 0,
        format!("{disagreements} disagreements in {trials} trials"),
    ))
}

fn analytic_match(trials: u64) -> Result<CheckOutcome> {
    let cfg = SystemConfig::default();
    let (_, h) = build_channel(&cfg)?;
    let t = 16;
    let b = orthogonal_tags(cfg.segments, t)?;
    let (p, s2) = (cfg.tx_power(), cfg.noise_power());
    let ls = LsEstimator::new(&b, p, s2)?;
    let key = StreamKey::new(0x5eed, 1);
    let mut errors = vec![0u64; cfg.segments];
    for trial in 0..trials {
        let s = sample_states(cfg.segments, cfg.q_fail, &mut key.rng(trial, 0));
        let y = synthesize(&b, &h, &s, p, s2, &mut key.rng(trial, 1))?.y;
        let d = per_segment_ml(&ls.estimate(&y)?, &h).states;
        for (e, (a, b)) in errors.iter_mut().zip(s.0.iter().zip(&d.0)) {
            *e += u64::from(a != b);
        }
    }
    let mut worst = 0.0f64;
    for (k, &e) in errors.iter().enumerate() {
        let pe = analytic_error(h[k].norm(), p, t, s2);
        let z = (e as f64 / trials as f64 - pe).abs() / binomial_sd(pe, trials).max(1e-12);
        worst = worst.max(z);
    }
    Ok(outcome(
        "analytic-error",
        worst <= 4.0,
        format!("largest deviation {worst:.2} sd"),
    ))
}

fn lasso_certificates() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a55);
    let opts = LassoOptions {
        n_lambdas: 10,
        ..LassoOptions::default()
    };
    let mut worst = 0.0f64;
    let mut zero_ok = true;
    for _ in 0..5 {
        let a = DMatrix::from_fn(24, 16, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r: Vec<f64> = (0..24).map(|_| rng.sample(StandardNormal)).collect();
        let design = LassoDesign::new(a)?;
        let path = design.solve_path(&r, &opts)?;
        for (lambda, f) in path.lambdas.iter().zip(&path.coefficients) {
            worst = worst.max(design.kkt_violation(&r, f, *lambda, false)? / lambda.max(1e-300));
        }
        let lmax = design.lambda_max(&r)?;
        zero_ok &= design
            .solve(&r, lmax, None, &opts)?
            .iter()
            .all(|&v| v == 0.0);
    }
    Ok(outcome(
        "lasso-kkt",
        worst < 1e-6 && zero_ok,
        format!("worst relative KKT violation {worst:.2e}; zero at lambda_max: {zero_ok}"),
    ))
}

fn determinism_and_metrics() -> Result<CheckOutcome> {
    let spec = ExperimentSpec {
        name: "validate".into(),
        power_db: vec![-30.0, -20.0],
        pilot_lengths: vec![12, 16],
        segment_counts: vec![10],
        detectors: DetectorKind::ALL.to_vec(),
        trials: 300,
        seed: 99,
        ..ExperimentSpec::default()
    };
    let strip = |t: &super::harness::ResultTable| {
        t.rows
            .iter()
            .map(|r| {
                (
                    r.detector.clone(),
                    r.m,
                    r.t,
                    r.power_db.to_bits(),
                    r.block_err.to_bits(),
                    r.seg_err.to_bits(),
                )
            })
            .collect::<Vec<_>>()
    };
    let one = monte_carlo(&spec, 1)?.table;
    let many = monte_carlo(&spec, 4)?.table;
    let same = strip(&one) == strip(&many);
    let consistent = one.rows.iter().all(|r| {
        r.block_err >= r.seg_err
            && (r.missed_rate + r.false_alarm_rate - r.seg_err).abs() < 1e-12
            && [r.block_err, r.seg_err, r.missed_rate, r.false_alarm_rate]
                .iter()
                .all(|v| (0.0..=1.0).contains(v))
    });
    Ok(outcome(
        "determinism-and-metrics",
        same && consistent,
        format!("parallelism 1 vs 4 identical: {same}; rate invariants: {consistent}"),
    ))
}

type Check = fn() -> Result<CheckOutcome>;

/// Runs every check; errors inside a check count as failures.
pub fn run_validation() -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 6] = [
        ("hadamard-orthogonality", hadamard_rows_orthogonal),
        ("channel-geometry", channel_geometry),
        ("orthogonal-equivalence", || orthogonal_equivalence(2_000)),
        ("analytic-error", || analytic_match(4_000)),
        ("lasso-kkt", lasso_certificates),
        ("determinism-and-metrics", determinism_and_metrics),
    ];
    checks
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| outcome(name, false, format!("error: {e}"))))
        .collect()
}
