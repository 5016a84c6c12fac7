//! Overdetermined detectors: exhaustive joint ML, least squares with
//! per-segment ML decisions, and the per-segment MAP oracle used with
//! identity probing.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwanError};
use crate::linalg::{norm_sqr, spd_inverse};
use crate::phys::ChannelVector;
use crate::sim::StateVector;
use crate::tags::{TagKind, TagMatrix};

/// Default cap on the segment count for exhaustive joint ML.
pub const DEFAULT_MAX_JOINT_SEGMENTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    JointMl,
    PerSegmentMl,
    Lasso,
    ProbeNonorth,
    ProbeIdeal,
    MapOracle,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::JointMl,
        DetectorKind::PerSegmentMl,
        DetectorKind::Lasso,
        DetectorKind::ProbeNonorth,
        DetectorKind::ProbeIdeal,
        DetectorKind::MapOracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::JointMl => "joint-ml",
            DetectorKind::PerSegmentMl => "per-segment-ml",
            DetectorKind::Lasso => "lasso",
            DetectorKind::ProbeNonorth => "probe-nonorth",
            DetectorKind::ProbeIdeal => "probe-ideal",
            DetectorKind::MapOracle => "map-oracle",
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = SwanError;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| SwanError::InvalidConfig(format!("unknown detector `{s}`")))
    }
}

/// LS estimate of `a = diag(h)s` and the diagonal of its error covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub a_hat: Vec<Complex64>,
    pub error_var: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub objective: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub states: StateVector,
    pub detector: DetectorKind,
    pub diagnostics: Diagnostics,
}

/// Least-squares estimator for a fixed full-rank design, with the
/// pseudo-inverse `(BᵀB)⁻¹Bᵀ` factored once.
#[derive(Debug, Clone)]
pub struct LsEstimator {
    pinv: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    amp: f64,
    error_var: Vec<f64>,
}

impl LsEstimator {
    pub fn new(b: &TagMatrix, power: f64, sigma2: f64) -> Result<Self> {
        if !b.has_full_column_rank() {
            return Err(SwanError::SingularDesign);
        }
        if !(power > 0.0) {
            return Err(SwanError::InvalidConfig(
                "transmit power must be positive".into(),
            ));
        }
        // All supported designs are real, so BᴴB = BᵀB.
        let gram_inv = spd_inverse(&b.gram()).ok_or(SwanError::SingularDesign)?;
        let pinv = &gram_inv * b.entries().transpose();
        let error_var = (0..b.segments())
            .map(|m| sigma2 / power * gram_inv[(m, m)])
            .collect();
        Ok(Self {
            pinv,
            gram_inv,
            amp: power.sqrt(),
            error_var,
        })
    }

    /// Error covariance `(σ²/P)(BᵀB)⁻¹` given the noise power used at
    /// construction; the scale is recovered from the stored diagonal.
    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn estimate(&self, y: &[Complex64]) -> Result<EstimatorOutput> {
        if y.len() != self.pinv.ncols() {
            return Err(SwanError::DimensionMismatch(format!(
                "observation has {} samples, design expects {}",
                y.len(),
                self.pinv.ncols()
            )));
        }
        let a_hat = (0..self.pinv.nrows())
            .map(|m| {
                self.pinv
                    .row(m)
                    .iter()
                    .zip(y)
                    .fold(Complex64::new(0.0, 0.0), |acc, (p, yi)| acc + p * yi)
                    / self.amp
            })
            .collect();
        Ok(EstimatorOutput {
            a_hat,
            error_var: self.error_var.clone(),
        })
    }
}

/// `â = (1/√P)(BᴴB)⁻¹Bᴴy` with per-segment error variances
/// `σ_m² = (σ²/P)[(BᴴB)⁻¹]_mm`.
pub fn ls_estimate(
    b: &TagMatrix,
    y: &[Complex64],
    power: f64,
    sigma2: f64,
) -> Result<EstimatorOutput> {
    LsEstimator::new(b, power, sigma2)?.estimate(y)
}

/// Declares segment `m` working iff `Re{h_m*·â_m} > |h_m|²/2`; the boundary
/// decides failed.
pub fn per_segment_ml(est: &EstimatorOutput, h: &ChannelVector) -> DetectionResult {
    let states = est
        .a_hat
        .iter()
        .zip(h.as_slice())
        .map(|(a, hm)| (hm.conj() * a).re > hm.norm_sqr() / 2.0)
        .collect();
    DetectionResult {
        states: StateVector(states),
        detector: DetectorKind::PerSegmentMl,
        diagnostics: Diagnostics::default(),
    }
}

/// Exhaustive minimizer of `‖y − C s‖²` over binary `s`, with the columns of
/// `C = √P·B·diag(h)` and their real Gram precomputed.
///
/// Expanding the norm, only `J(s) = sᵀGs − 2 sᵀg` depends on `s`, with
/// `G = Re{CᴴC}` and `g = Re{Cᴴy}`. States are visited depth-first over the
/// bits, so each candidate costs O(M).
#[derive(Debug, Clone)]
pub struct JointMl {
    columns: DMatrix<Complex64>,
    gram: DMatrix<f64>,
}

impl JointMl {
    pub fn new(b: &TagMatrix, h: &ChannelVector, power: f64, max_segments: usize) -> Result<Self> {
        let m = b.segments();
        if h.len() != m {
            return Err(SwanError::DimensionMismatch(format!(
                "tag matrix has {m} columns, channel {} entries",
                h.len()
            )));
        }
        if m > max_segments || m >= 63 {
            return Err(SwanError::ComplexityGuard {
                m,
                max: max_segments,
            });
        }
        let amp = power.sqrt();
        let columns = DMatrix::from_fn(b.pilot_len(), m, |t, k| b.entries()[(t, k)] * amp * h[k]);
        let gram = DMatrix::from_fn(m, m, |i, j| {
            columns
                .column(i)
                .iter()
                .zip(columns.column(j).iter())
                .map(|(a, b)| (a.conj() * b).re)
                .sum()
        });
        Ok(Self { columns, gram })
    }

    pub fn detect(&self, y: &[Complex64]) -> Result<DetectionResult> {
        let m = self.columns.ncols();
        if y.len() != self.columns.nrows() {
            return Err(SwanError::DimensionMismatch(format!(
                "observation has {} samples, design expects {}",
                y.len(),
                self.columns.nrows()
            )));
        }
        let g: Vec<f64> = (0..m)
            .map(|k| {
                self.columns
                    .column(k)
                    .iter()
                    .zip(y)
                    .map(|(c, yi)| (c.conj() * yi).re)
                    .sum()
            })
            .collect();

        let mut best = Best {
            value: 0.0,
            code: 0,
        };
        // The all-failed state has J = 0 and code 0; explore the rest.
        let mut acc = vec![0.0; m];
        self.search(0, 0, 0.0, &g, &mut acc, &mut best);

        let objective = norm_sqr(y) + best.value;
        Ok(DetectionResult {
            states: StateVector::from_code(best.code, m),
            detector: DetectorKind::JointMl,
            diagnostics: Diagnostics {
                objective: Some(objective),
                lambda: None,
            },
        })
    }

    /// Extends the partial state `code` (bits below `start` decided) by
    /// switching on each later bit in turn. `acc[k] = Σ_{j∈code} G_jk`.
    fn search(
        &self,
        start: usize,
        code: u64,
        value: f64,
        g: &[f64],
        acc: &mut [f64],
        best: &mut Best,
    ) {
        let m = g.len();
        for k in start..m {
            let next = value + self.gram[(k, k)] - 2.0 * g[k] + 2.0 * acc[k];
            let next_code = code | (1u64 << k);
            best.offer(next, next_code);
            if k + 1 < m {
                for (j, a) in acc.iter_mut().enumerate().skip(k + 1) {
                    *a += self.gram[(k, j)];
                }
                self.search(k + 1, next_code, next, g, acc, best);
                for (j, a) in acc.iter_mut().enumerate().skip(k + 1) {
                    *a -= self.gram[(k, j)];
                }
            }
        }
    }
}

struct Best {
    value: f64,
    code: u64,
}

impl Best {
    fn offer(&mut self, value: f64, code: u64) {
        if value < self.value || (value == self.value && code < self.code) {
            self.value = value;
            self.code = code;
        }
    }
}

/// `argmin_s ‖y − √P·B·diag(h)·s‖²` by exhaustive search. Exact ties go to
/// the smallest binary encoding (segment 0 least significant).
pub fn joint_ml(
    b: &TagMatrix,
    h: &ChannelVector,
    y: &[Complex64],
    power: f64,
) -> Result<DetectionResult> {
    JointMl::new(b, h, power, DEFAULT_MAX_JOINT_SEGMENTS)?.detect(y)
}

/// Per-segment MAP decision for identity probing `B = √T·I_T`:
/// working iff `Re{h_m*·â_m} > |h_m|²/2 + (σ_m²/2)·ln(q/(1−q))` with
/// `â_m = y_m/√(PT)` and `σ_m² = σ²/(PT)`.
pub fn map_oracle(
    b: &TagMatrix,
    y: &[Complex64],
    h: &ChannelVector,
    power: f64,
    sigma2: f64,
    q_fail: f64,
) -> Result<DetectionResult> {
    if b.kind() != TagKind::IdealProbe {
        return Err(SwanError::NotIdentityProbe);
    }
    if !(q_fail > 0.0 && q_fail < 1.0) {
        return Err(SwanError::InvalidConfig(
            "MAP oracle needs a failure prior strictly inside (0, 1)".into(),
        ));
    }
    let t = b.pilot_len();
    if y.len() != t || h.len() != t {
        return Err(SwanError::DimensionMismatch(format!(
            "identity probe of size {t} with {} samples and {} channel entries",
            y.len(),
            h.len()
        )));
    }
    let scale = (power * t as f64).sqrt();
    let var = sigma2 / (power * t as f64);
    let shift = var / 2.0 * (q_fail / (1.0 - q_fail)).ln();
    let states = y
        .iter()
        .zip(h.as_slice())
        .map(|(ym, hm)| {
            let a = ym / scale;
            (hm.conj() * a).re > hm.norm_sqr() / 2.0 + shift
        })
        .collect();
    Ok(DetectionResult {
        states: StateVector(states),
        detector: DetectorKind::MapOracle,
        diagnostics: Diagnostics::default(),
    })
}

/// Re-labels a result produced by a shared detector path.
pub fn relabel(mut r: DetectionResult, detector: DetectorKind) -> DetectionResult {
    r.detector = detector;
    r
}
