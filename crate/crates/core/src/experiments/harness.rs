//! Seeded Monte-Carlo harness.
//!
//! Each sweep point `(M, T, P)` is prepared once: channel, tag designs and
//! per-design detector state. Trials then draw from counter-based substreams
//! keyed by `(seed, point, trial, lane)`, so the aggregated integer counts do
//! not depend on how trials are scheduled across threads.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::detectors::{
    map_oracle, per_segment_ml, DetectionResult, DetectorKind, JointMl, LsEstimator,
};
use crate::error::{Result, SwanError};
use crate::lasso::LassoDetector;
use crate::phys::{build_channel, db_to_linear, ChannelVector, SystemConfig};
use crate::sim::{sample_states, synthesize, StateVector, StreamKey};
use crate::tags::{ideal_probe, orthogonal_tags, parent_order, submatrix_tags_from, TagMatrix};

use super::spec::{ExperimentSpec, ReferencePolicy, TagDesign};

const LANE_STATE: u64 = 0;
const LANE_PRIMARY: u64 = 1;
const LANE_NONORTH: u64 = 2;
const LANE_IDEAL: u64 = 3;

/// Attempts at drawing a full-column-rank random design before giving up.
const MAX_DESIGN_DRAWS: u64 = 256;

/// Coordinates of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub m: usize,
    pub t: usize,
    pub power_db: f64,
    /// Position in the sweep enumeration; part of the RNG key.
    pub index: u64,
}

/// Why a requested (detector, point) pair produced no row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPair {
    pub detector: DetectorKind,
    pub m: usize,
    pub t: usize,
    pub power_db: f64,
    pub reason: String,
}

/// Tag design actually used at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignRecord {
    pub role: &'static str,
    pub m: usize,
    pub t: usize,
    pub kind: crate::tags::TagKind,
    /// Order of the Hadamard parent for submatrix designs.
    pub parent: Option<usize>,
    /// Seed of the row/column selection for submatrix designs.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
struct Primary {
    tags: TagMatrix,
    joint: Option<JointMl>,
    ls: Option<LsEstimator>,
    lasso: Option<LassoDetector>,
}

#[derive(Debug, Clone)]
struct Probes {
    nonorth: Option<(TagMatrix, LsEstimator)>,
    ideal: Option<(TagMatrix, LsEstimator)>,
    map: bool,
    channel: ChannelVector,
}

/// A fully resolved sweep point.
#[derive(Debug, Clone)]
pub struct PreparedPoint {
    pub point: SweepPoint,
    pub channel: ChannelVector,
    pub power: f64,
    pub sigma2: f64,
    pub q_fail: f64,
    key: StreamKey,
    reference: StateVector,
    primary: Option<Primary>,
    probes: Option<Probes>,
    detectors: Vec<DetectorKind>,
}

/// One detector's decision in a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub detector: DetectorKind,
    pub states: StateVector,
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: SweepPoint,
    pub trial: u64,
    pub truth: StateVector,
    pub decisions: Vec<Decision>,
}

impl TrialRecord {
    /// Decisions with timings stripped, for determinism comparisons.
    pub fn decisions_only(&self) -> Vec<(DetectorKind, StateVector)> {
        self.decisions
            .iter()
            .map(|d| (d.detector, d.states.clone()))
            .collect()
    }
}

/// All points of a spec, plus bookkeeping about designs and skipped pairs.
#[derive(Debug, Clone)]
pub struct PreparedSweep {
    pub points: Vec<PreparedPoint>,
    pub designs: Vec<DesignRecord>,
    pub skipped: Vec<SkippedPair>,
}

fn is_probe(d: DetectorKind) -> bool {
    matches!(
        d,
        DetectorKind::ProbeNonorth | DetectorKind::ProbeIdeal | DetectorKind::MapOracle
    )
}

fn design_key(seed: u64, m: usize, parent: usize) -> StreamKey {
    // High bit keeps design keys disjoint from point-enumeration keys.
    StreamKey::new(seed, (1u64 << 63) | ((m as u64) << 32) | parent as u64)
}

/// Draws a random submatrix of `H_parent`, retrying until it has full column
/// rank when `need_rank` is set.
fn draw_submatrix(
    m: usize,
    t: usize,
    parent: usize,
    key: StreamKey,
    salt: u64,
    need_rank: bool,
) -> Result<(TagMatrix, u64)> {
    for attempt in 0..MAX_DESIGN_DRAWS {
        let seed = key.design_seed(salt).wrapping_add(attempt);
        let tags = submatrix_tags_from(m, t, parent, seed)?;
        if !need_rank || tags.has_full_column_rank() {
            return Ok((tags, seed));
        }
    }
    Err(SwanError::SingularDesign)
}

/// Tag design for the primary detectors at `(m, t)`.
fn primary_design(
    spec: &ExperimentSpec,
    m: usize,
    t: usize,
    need_rank: bool,
) -> Result<(TagMatrix, DesignRecord)> {
    let orthogonal_ok = t.is_power_of_two() && t >= m;
    let parent = match spec.tags {
        TagDesign::Auto | TagDesign::Orthogonal if orthogonal_ok => {
            let tags = orthogonal_tags(m, t)?;
            let record = DesignRecord {
                role: "primary",
                m,
                t,
                kind: tags.kind(),
                parent: None,
                seed: None,
            };
            return Ok((tags, record));
        }
        TagDesign::Orthogonal => {
            return Err(SwanError::InvalidConfig(format!(
                "orthogonal tags need T a power of two with T >= M, got M = {m}, T = {t}"
            )))
        }
        TagDesign::Auto | TagDesign::Submatrix => parent_order(m, t),
        TagDesign::SubmatrixWide => 2 * parent_order(m, t),
    };
    // Keyed without `t`: pilot lengths sharing a parent get nested row sets.
    let (tags, seed) =
        draw_submatrix(m, t, parent, design_key(spec.seed, m, parent), 0, need_rank)?;
    let record = DesignRecord {
        role: "primary",
        m,
        t,
        kind: tags.kind(),
        parent: Some(parent),
        seed: Some(seed),
    };
    Ok((tags, record))
}

/// Resolves every sweep point of `spec`.
///
/// Probing baselines use `T = M` and do not depend on the pilot-length axis,
/// so they are attached only to the first `T` of each `(M, P)` pair.
pub fn prepare(spec: &ExperimentSpec) -> Result<PreparedSweep> {
    spec.validate()?;
    let mut points = Vec::new();
    let mut designs = Vec::new();
    let mut skipped = Vec::new();
    let primary_set: Vec<DetectorKind> = spec
        .detectors
        .iter()
        .copied()
        .filter(|d| !is_probe(*d))
        .collect();
    let probe_set: Vec<DetectorKind> = spec
        .detectors
        .iter()
        .copied()
        .filter(|d| is_probe(*d))
        .collect();
    let sigma2 = spec.system.noise_power();
    let mut index = 0u64;

    for &m in &spec.segment_counts {
        let config = SystemConfig {
            segments: m,
            ..spec.system.clone()
        };
        let (_, channel) = build_channel(&config)?;
        let reference = match spec.reference {
            ReferencePolicy::AllWorking => StateVector::all_working(m),
        };

        // Probing designs depend on M only.
        let nonorth_tags = if probe_set.contains(&DetectorKind::ProbeNonorth) {
            let parent = 2 * parent_order(m, m);
            let (tags, seed) =
                draw_submatrix(m, m, parent, design_key(spec.seed, m, parent), 1, true)?;
            designs.push(DesignRecord {
                role: "probe-nonorth",
                m,
                t: m,
                kind: tags.kind(),
                parent: Some(parent),
                seed: Some(seed),
            });
            Some(tags)
        } else {
            None
        };
        let ideal_tags = if probe_set.iter().any(|d| *d != DetectorKind::ProbeNonorth) {
            let tags = ideal_probe(m)?;
            designs.push(DesignRecord {
                role: "probe-ideal",
                m,
                t: m,
                kind: tags.kind(),
                parent: None,
                seed: None,
            });
            Some(tags)
        } else {
            None
        };

        for (t_idx, &t) in spec.pilot_lengths.iter().enumerate() {
            let mut active: Vec<DetectorKind> = Vec::new();
            let mut need_rank = false;
            for &d in &primary_set {
                if d == DetectorKind::PerSegmentMl && t < m {
                    for &p in &spec.power_db {
                        skipped.push(SkippedPair {
                            detector: d,
                            m,
                            t,
                            power_db: p,
                            reason: "per-segment LS needs T >= M".into(),
                        });
                    }
                } else {
                    need_rank |= d == DetectorKind::PerSegmentMl;
                    active.push(d);
                }
            }
            let primary_tags = if active.is_empty() {
                None
            } else {
                let (tags, record) = primary_design(spec, m, t, need_rank)?;
                designs.push(record);
                Some(tags)
            };
            let with_probes = t_idx == 0 && !probe_set.is_empty();

            for &power_db in &spec.power_db {
                let power = db_to_linear(power_db);
                let primary = match &primary_tags {
                    Some(tags) => Some(Primary {
                        tags: tags.clone(),
                        joint: if active.contains(&DetectorKind::JointMl) {
                            Some(JointMl::new(
                                tags,
                                &channel,
                                power,
                                spec.max_joint_segments,
                            )?)
                        } else {
                            None
                        },
                        ls: if active.contains(&DetectorKind::PerSegmentMl) {
                            Some(LsEstimator::new(tags, power, sigma2)?)
                        } else {
                            None
                        },
                        lasso: if active.contains(&DetectorKind::Lasso) {
                            Some(LassoDetector::new(
                                tags,
                                &channel,
                                power,
                                spec.lasso.clone(),
                            )?)
                        } else {
                            None
                        },
                    }),
                    None => None,
                };
                let probes = if with_probes {
                    Some(Probes {
                        nonorth: match &nonorth_tags {
                            Some(tags) => {
                                Some((tags.clone(), LsEstimator::new(tags, power, sigma2)?))
                            }
                            None => None,
                        },
                        ideal: match &ideal_tags {
                            Some(tags) => {
                                Some((tags.clone(), LsEstimator::new(tags, power, sigma2)?))
                            }
                            None => None,
                        },
                        map: probe_set.contains(&DetectorKind::MapOracle),
                        channel: channel.clone(),
                    })
                } else {
                    None
                };
                // Keep the user's detector order in the output.
                let detectors: Vec<DetectorKind> = spec
                    .detectors
                    .iter()
                    .copied()
                    .filter(|d| {
                        if is_probe(*d) {
                            with_probes
                        } else {
                            active.contains(d)
                        }
                    })
                    .collect();
                let point = SweepPoint {
                    m,
                    t,
                    power_db,
                    index,
                };
                points.push(PreparedPoint {
                    point,
                    channel: channel.clone(),
                    power,
                    sigma2,
                    q_fail: spec.system.q_fail,
                    key: StreamKey::new(spec.seed, index),
                    reference: reference.clone(),
                    primary,
                    probes,
                    detectors,
                });
                index += 1;
            }
        }
    }
    Ok(PreparedSweep {
        points,
        designs,
        skipped,
    })
}

fn timed<F: FnOnce() -> Result<DetectionResult>>(f: F) -> Result<(StateVector, Duration)> {
    let start = Instant::now();
    let r = f()?;
    Ok((r.states, start.elapsed()))
}

impl PreparedPoint {
    pub fn detectors(&self) -> &[DetectorKind] {
        &self.detectors
    }

    /// Pilot length a detector actually uses at this point.
    pub fn pilot_len(&self, detector: DetectorKind) -> usize {
        if is_probe(detector) {
            self.point.m
        } else {
            self.point.t
        }
    }

    /// Runs every detector of this point on trial `trial`.
    ///
    /// All detectors see the same state draw. Detectors that share a tag
    /// design also share one noisy observation; each design has its own
    /// noise lane.
    pub fn run_trial(&self, trial: u64) -> Result<TrialRecord> {
        let m = self.point.m;
        let truth = sample_states(m, self.q_fail, &mut self.key.rng(trial, LANE_STATE));
        let mut decisions = Vec::with_capacity(self.detectors.len());

        let primary_y = match &self.primary {
            Some(p) => Some(
                synthesize(
                    &p.tags,
                    &self.channel,
                    &truth,
                    self.power,
                    self.sigma2,
                    &mut self.key.rng(trial, LANE_PRIMARY),
                )?
                .y,
            ),
            None => None,
        };
        let nonorth_y = match self.probes.as_ref().and_then(|p| p.nonorth.as_ref()) {
            Some((tags, _)) => Some(
                synthesize(
                    tags,
                    &self.channel,
                    &truth,
                    self.power,
                    self.sigma2,
                    &mut self.key.rng(trial, LANE_NONORTH),
                )?
                .y,
            ),
            None => None,
        };
        let ideal_y = match self.probes.as_ref().and_then(|p| p.ideal.as_ref()) {
            Some((tags, _)) => Some(
                synthesize(
                    tags,
                    &self.channel,
                    &truth,
                    self.power,
                    self.sigma2,
                    &mut self.key.rng(trial, LANE_IDEAL),
                )?
                .y,
            ),
            None => None,
        };

        for &detector in &self.detectors {
            let (states, runtime) = match detector {
                DetectorKind::JointMl => {
                    let (p, y) = (self.primary.as_ref().unwrap(), primary_y.as_ref().unwrap());
                    timed(|| p.joint.as_ref().unwrap().detect(y))?
                }
                DetectorKind::PerSegmentMl => {
                    let (p, y) = (self.primary.as_ref().unwrap(), primary_y.as_ref().unwrap());
                    timed(|| {
                        Ok(per_segment_ml(
                            &p.ls.as_ref().unwrap().estimate(y)?,
                            &self.channel,
                        ))
                    })?
                }
                DetectorKind::Lasso => {
                    let (p, y) = (self.primary.as_ref().unwrap(), primary_y.as_ref().unwrap());
                    timed(|| {
                        p.lasso
                            .as_ref()
                            .unwrap()
                            .detect(y, &self.reference, self.sigma2)
                    })?
                }
                DetectorKind::ProbeNonorth => {
                    let probes = self.probes.as_ref().unwrap();
                    let (_, est) = probes.nonorth.as_ref().unwrap();
                    let y = nonorth_y.as_ref().unwrap();
                    timed(|| Ok(per_segment_ml(&est.estimate(y)?, &probes.channel)))?
                }
                DetectorKind::ProbeIdeal => {
                    let probes = self.probes.as_ref().unwrap();
                    let (_, est) = probes.ideal.as_ref().unwrap();
                    let y = ideal_y.as_ref().unwrap();
                    timed(|| Ok(per_segment_ml(&est.estimate(y)?, &probes.channel)))?
                }
                DetectorKind::MapOracle => {
                    let probes = self.probes.as_ref().unwrap();
                    debug_assert!(probes.map);
                    let (tags, _) = probes.ideal.as_ref().unwrap();
                    let y = ideal_y.as_ref().unwrap();
                    timed(|| {
                        map_oracle(
                            tags,
                            y,
                            &probes.channel,
                            self.power,
                            self.sigma2,
                            self.q_fail,
                        )
                    })?
                }
            };
            debug_assert_eq!(states.len(), m);
            decisions.push(Decision {
                detector,
                states,
                runtime,
            });
        }
        Ok(TrialRecord {
            point: self.point,
            trial,
            truth,
            decisions,
        })
    }
}

/// Integer error tallies for one (point, detector) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub trials: u64,
    pub block_errors: u64,
    pub segment_errors: u64,
    /// Declared working but failed.
    pub missed: u64,
    /// Declared failed but working.
    pub false_alarms: u64,
    pub runtime_ns: u128,
}

impl Counts {
    pub fn record(&mut self, truth: &StateVector, decision: &Decision) {
        let mut missed = 0;
        let mut false_alarms = 0;
        for (&s, &s_hat) in truth.0.iter().zip(&decision.states.0) {
            match (s, s_hat) {
                (false, true) => missed += 1,
                (true, false) => false_alarms += 1,
                _ => {}
            }
        }
        self.trials += 1;
        self.missed += missed;
        self.false_alarms += false_alarms;
        self.segment_errors += missed + false_alarms;
        self.block_errors += u64::from(missed + false_alarms > 0);
        self.runtime_ns += decision.runtime.as_nanos();
    }

    pub fn merge(mut self, other: &Counts) -> Counts {
        self.trials += other.trials;
        self.block_errors += other.block_errors;
        self.segment_errors += other.segment_errors;
        self.missed += other.missed;
        self.false_alarms += other.false_alarms;
        self.runtime_ns += other.runtime_ns;
        self
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub detector: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "P_dB")]
    pub power_db: f64,
    pub trials: u64,
    pub block_err: f64,
    pub seg_err: f64,
    pub missed_rate: f64,
    pub false_alarm_rate: f64,
    pub mean_runtime_us: f64,
}

impl ResultRow {
    pub fn from_counts(
        experiment: &str,
        detector: DetectorKind,
        m: usize,
        t: usize,
        power_db: f64,
        c: &Counts,
    ) -> Self {
        let n = c.trials as f64;
        let nm = n * m as f64;
        Self {
            experiment: experiment.to_string(),
            detector: detector.to_string(),
            m,
            t,
            power_db,
            trials: c.trials,
            block_err: c.block_errors as f64 / n,
            seg_err: c.segment_errors as f64 / nm,
            missed_rate: c.missed as f64 / nm,
            false_alarm_rate: c.false_alarms as f64 / nm,
            mean_runtime_us: c.runtime_ns as f64 / n / 1e3,
        }
    }

    /// Rate selected by a metric.
    pub fn rate(&self, metric: super::spec::Metric) -> f64 {
        match metric {
            super::spec::Metric::Block => self.block_err,
            super::spec::Metric::PerSegment => self.seg_err,
        }
    }

    /// Number of trials with at least one wrong segment.
    pub fn block_errors(&self) -> u64 {
        (self.block_err * self.trials as f64).round() as u64
    }

    /// Number of wrong segment decisions over all trials.
    pub fn segment_errors(&self) -> u64 {
        (self.seg_err * (self.trials * self.m as u64) as f64).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(
        &self,
        detector: DetectorKind,
        m: usize,
        t: usize,
        power_db: f64,
    ) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.detector == detector.as_str() && r.m == m && r.t == t && r.power_db == power_db
        })
    }

    pub fn for_detector(&self, detector: DetectorKind) -> impl Iterator<Item = &ResultRow> {
        self.rows
            .iter()
            .filter(move |r| r.detector == detector.as_str())
    }
}

/// Output of [`monte_carlo`]: the table plus what was resolved along the way.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub designs: Vec<DesignRecord>,
    pub skipped: Vec<SkippedPair>,
}

/// Aggregates `trials` trials of one prepared point on the current thread
/// pool.
pub fn run_point(point: &PreparedPoint, trials: u64) -> Result<Vec<Counts>> {
    use rayon::prelude::*;
    let k = point.detectors.len();
    (0..trials)
        .into_par_iter()
        .map(|trial| point.run_trial(trial))
        .try_fold(
            || vec![Counts::default(); k],
            |mut acc, rec| {
                let rec = rec?;
                for (c, d) in acc.iter_mut().zip(&rec.decisions) {
                    c.record(&rec.truth, d);
                }
                Ok::<_, SwanError>(acc)
            },
        )
        .try_reduce(
            || vec![Counts::default(); k],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x.merge(y)).collect()),
        )
}

/// Runs the full sweep of `spec` on `parallelism` worker threads
/// (`0` = all cores).
pub fn monte_carlo(spec: &ExperimentSpec, parallelism: usize) -> Result<RunOutput> {
    let sweep = prepare(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| SwanError::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    let mut rows = Vec::new();
    for point in &sweep.points {
        let counts = pool.install(|| run_point(point, spec.trials as u64))?;
        for (&d, c) in point.detectors.iter().zip(&counts) {
            rows.push(ResultRow::from_counts(
                &spec.name,
                d,
                point.point.m,
                point.pilot_len(d),
                point.point.power_db,
                c,
            ));
        }
    }
    Ok(RunOutput {
        table: ResultTable { rows },
        designs: sweep.designs,
        skipped: sweep.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::spec::Metric;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            name: "t".into(),
            power_db: vec![-25.0],
            pilot_lengths: vec![8],
            segment_counts: vec![6],
            detectors: DetectorKind::ALL.to_vec(),
            trials: 200,
            seed: 3,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn pilot_lengths_sharing_a_parent_share_a_design_seed() {
        let spec = ExperimentSpec {
            pilot_lengths: vec![13, 14, 15, 16],
            segment_counts: vec![13],
            detectors: vec![DetectorKind::JointMl],
            ..small_spec()
        };
        let designs = prepare(&spec).unwrap().designs;
        let seeds: Vec<Option<u64>> = designs
            .iter()
            .filter(|d| d.role == "primary")
            .map(|d| d.seed)
            .collect();
        // T = 16 takes the orthogonal design, which is the full-row member
        // of the same nested family.
        assert_eq!(seeds.len(), 4);
        assert_eq!(seeds[3], None);
        assert!(
            seeds[..3].iter().all(|s| s.is_some() && *s == seeds[0]),
            "{seeds:?}"
        );
    }

    #[test]
    fn noiseless_trials_are_exact_for_every_detector() {
        let mut spec = small_spec();
        spec.system.noise_db = -400.0;
        spec.system.q_fail = 0.3;
        let sweep = prepare(&spec).unwrap();
        let point = &sweep.points[0];
        assert_eq!(point.detectors().len(), 6);
        for trial in 0..50 {
            let rec = point.run_trial(trial).unwrap();
            for d in &rec.decisions {
                assert_eq!(d.states, rec.truth, "{} trial {trial}", d.detector);
            }
        }
    }

    #[test]
    fn trial_records_are_reproducible() {
        let sweep = prepare(&small_spec()).unwrap();
        let p = &sweep.points[0];
        for trial in [0, 1, 17, 199] {
            assert_eq!(
                p.run_trial(trial).unwrap().decisions_only(),
                p.run_trial(trial).unwrap().decisions_only()
            );
        }
    }

    #[test]
    fn all_working_noise_free_gives_zero_rates() {
        let mut spec = small_spec();
        spec.system.noise_db = -400.0;
        spec.system.q_fail = 0.0;
        spec.detectors.retain(|d| *d != DetectorKind::MapOracle);
        spec.trials = 1;
        let out = monte_carlo(&spec, 1).unwrap();
        for r in &out.table.rows {
            assert_eq!(
                (r.block_err, r.seg_err, r.missed_rate, r.false_alarm_rate),
                (0.0, 0.0, 0.0, 0.0)
            );
        }
    }

    #[test]
    fn counts_and_rates_are_consistent() {
        let mut spec = small_spec();
        spec.power_db = vec![-35.0, -25.0];
        let out = monte_carlo(&spec, 2).unwrap();
        assert_eq!(out.table.rows.len(), 12);
        for r in &out.table.rows {
            for v in [r.block_err, r.seg_err, r.missed_rate, r.false_alarm_rate] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(r.block_err >= r.seg_err);
            assert!((r.missed_rate + r.false_alarm_rate - r.seg_err).abs() < 1e-12);
            assert!(r.rate(Metric::Block) == r.block_err);
            let nm = (r.trials * r.m as u64) as f64;
            assert!((r.seg_err * nm - r.segment_errors() as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn probes_report_their_own_pilot_length() {
        let mut spec = small_spec();
        spec.pilot_lengths = vec![8, 16];
        let out = monte_carlo(&ExperimentSpec { trials: 5, ..spec }, 1).unwrap();
        let probe_rows: Vec<_> = out.table.for_detector(DetectorKind::ProbeIdeal).collect();
        assert_eq!(probe_rows.len(), 1);
        assert_eq!(probe_rows[0].t, 6);
    }

    #[test]
    fn short_pilots_skip_per_segment_ls() {
        let spec = ExperimentSpec {
            pilot_lengths: vec![4],
            detectors: vec![DetectorKind::PerSegmentMl, DetectorKind::Lasso],
            trials: 3,
            ..small_spec()
        };
        let out = monte_carlo(&spec, 1).unwrap();
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.table.rows.len(), 1);
        assert_eq!(out.table.rows[0].detector, "lasso");
    }

    #[test]
    fn orthogonal_request_checks_feasibility() {
        let spec = ExperimentSpec {
            pilot_lengths: vec![12],
            tags: TagDesign::Orthogonal,
            ..small_spec()
        };
        assert!(matches!(prepare(&spec), Err(SwanError::InvalidConfig(_))));
    }
}
