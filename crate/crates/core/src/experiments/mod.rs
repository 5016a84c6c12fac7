//! Monte-Carlo experiments: specs and config files, the seeded harness,
//! closed-form error oracles, CSV output and the invariant suite.

pub mod analytic;
pub mod harness;
pub mod io;
pub mod spec;
pub mod validate;

use std::path::Path;

pub use analytic::{analytic_error, binomial_sd, q_function};
pub use harness::{
    monte_carlo, prepare, Counts, Decision, DesignRecord, PreparedPoint, PreparedSweep, ResultRow,
    ResultTable, RunOutput, SkippedPair, SweepPoint, TrialRecord,
};
pub use io::{read_results, sidecar_path, write_metadata, write_results, RunMetadata, CSV_HEADER};
pub use spec::{
    ExperimentSpec, Metric, ReferencePolicy, TagDesign, DEFAULT_POWER_DB, DEFAULT_TRIALS,
};

use crate::detectors::DetectorKind;
use crate::error::Result;

/// The three canned experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Error against pilot length at `M = 13`.
    VsPilot,
    /// Error against segment count at `T ∈ {16, 32}`.
    VsSegments,
    /// Error against transmit power with short pilots, `T = 32`, `M = 64`.
    VsPower,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::VsPilot, Family::VsSegments, Family::VsPower];

    pub fn spec(self, trials: usize, seed: u64) -> ExperimentSpec {
        let base = ExperimentSpec {
            trials,
            seed,
            ..ExperimentSpec::default()
        };
        match self {
            Family::VsPilot => ExperimentSpec {
                name: "fig2".into(),
                power_db: vec![-30.0, -25.0, -20.0],
                pilot_lengths: vec![13, 14, 15, 16],
                segment_counts: vec![13],
                detectors: vec![DetectorKind::JointMl, DetectorKind::PerSegmentMl],
                ..base
            },
            Family::VsSegments => ExperimentSpec {
                name: "fig3".into(),
                power_db: vec![-30.0, -25.0, -20.0],
                pilot_lengths: vec![16, 32],
                segment_counts: vec![8, 16, 32],
                detectors: vec![DetectorKind::PerSegmentMl],
                ..base
            },
            Family::VsPower => ExperimentSpec {
                name: "fig4".into(),
                pilot_lengths: vec![32],
                segment_counts: vec![64],
                detectors: vec![
                    DetectorKind::Lasso,
                    DetectorKind::ProbeNonorth,
                    DetectorKind::ProbeIdeal,
                    DetectorKind::MapOracle,
                ],
                ..base
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::VsPilot => "fig2",
            Family::VsSegments => "fig3",
            Family::VsPower => "fig4",
        }
    }
}

/// Choices made by this implementation that a reader of the CSV should know
/// about.
pub fn artifact_choices(spec: &ExperimentSpec) -> Vec<String> {
    let mut notes = vec![
        "rates are unconditional: missed_rate + false_alarm_rate = seg_err".to_string(),
        "probing baselines use T = M and are reported with T = M".to_string(),
        "probe-nonorth uses a random full-rank M x M submatrix of H_{2*2^ceil(log2 M)}".to_string(),
        format!(
            "lasso: discrepancy rule with target T*sigma2, tau = {}",
            spec.lasso.tau
        ),
    ];
    if spec.power_db == DEFAULT_POWER_DB {
        notes.push("transmit-power grid is the default sweep, not a measured one".into());
    }
    if spec.detectors.contains(&DetectorKind::Lasso) && spec.segment_counts == [64] {
        notes.push("M = 64 for the short-pilot family is a default, not a measured value".into());
    }
    notes
}

/// Runs `spec`, appends the rows to `out` and writes the metadata sidecar.
pub fn run_and_write(spec: &ExperimentSpec, parallelism: usize, out: &Path) -> Result<RunOutput> {
    let output = monte_carlo(spec, parallelism)?;
    write_results(&output.table, out)?;
    write_metadata(
        &RunMetadata {
            experiment: &spec.name,
            version: env!("CARGO_PKG_VERSION"),
            seed: spec.seed,
            trials: spec.trials,
            parallelism,
            config: spec.to_config_string(),
            spec,
            designs: &output.designs,
            skipped: &output.skipped,
            artifact_choices: artifact_choices(spec),
        },
        out,
    )?;
    Ok(output)
}
