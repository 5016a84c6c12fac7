//! Experiment specifications and the flat key-value config format.
//!
//! ```text
//! # comments start with '#'
//! experiment = vs-pilot
//! detectors  = joint-ml, per-segment-ml
//! P_dB       = -30, -25, -20
//! T          = 13, 14, 15, 16
//! M          = 13
//! trials     = 10000
//! seed       = 7
//! ```
//!
//! Lists are comma-separated. Every key of [`ExperimentSpec`] and of the
//! physical [`SystemConfig`] can be set; unknown keys are rejected.

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::detectors::{DetectorKind, DEFAULT_MAX_JOINT_SEGMENTS};
use crate::error::{Result, SwanError};
use crate::lasso::LassoOptions;
use crate::phys::{SystemConfig, SPEED_OF_LIGHT};

/// Default transmit-power sweep (dB).
pub const DEFAULT_POWER_DB: [f64; 5] = [-35.0, -30.0, -25.0, -20.0, -15.0];

/// Default number of Monte-Carlo trials per sweep point.
pub const DEFAULT_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Block,
    PerSegment,
}

impl FromStr for Metric {
    type Err = SwanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "block" => Ok(Metric::Block),
            "per-segment" | "segment" => Ok(Metric::PerSegment),
            other => Err(SwanError::InvalidConfig(format!(
                "unknown metric `{other}`"
            ))),
        }
    }
}

/// How the reference state `s₀` of the sparse detector is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferencePolicy {
    /// Every segment verified working.
    AllWorking,
}

impl FromStr for ReferencePolicy {
    type Err = SwanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ones" | "all-working" | "1" => Ok(ReferencePolicy::AllWorking),
            other => Err(SwanError::InvalidConfig(format!(
                "unknown s0 policy `{other}`"
            ))),
        }
    }
}

/// Tag design for the joint-ML, per-segment-ML and LASSO detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagDesign {
    /// Walsh–Hadamard columns when `T` is a power of two and `T ≥ M`,
    /// otherwise a random submatrix of `H_{T₀}`.
    Auto,
    Orthogonal,
    /// Random submatrix of `H_{T₀}`, `T₀ = 2^⌈log₂ max(M, T)⌉`.
    Submatrix,
    /// Random submatrix of `H_{2T₀}`; never a full Hadamard matrix.
    SubmatrixWide,
}

impl FromStr for TagDesign {
    type Err = SwanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(TagDesign::Auto),
            "orthogonal" | "hadamard" => Ok(TagDesign::Orthogonal),
            "submatrix" => Ok(TagDesign::Submatrix),
            "submatrix-wide" => Ok(TagDesign::SubmatrixWide),
            other => Err(SwanError::InvalidConfig(format!(
                "unknown tag design `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub name: String,
    /// Physical constants; `segments` and `power_db` are overridden per
    /// sweep point.
    pub system: SystemConfig,
    pub power_db: Vec<f64>,
    pub pilot_lengths: Vec<usize>,
    pub segment_counts: Vec<usize>,
    pub detectors: Vec<DetectorKind>,
    pub trials: usize,
    pub seed: u64,
    pub metric: Metric,
    pub reference: ReferencePolicy,
    pub tags: TagDesign,
    pub lasso: LassoOptions,
    pub max_joint_segments: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            system: SystemConfig::default(),
            power_db: DEFAULT_POWER_DB.to_vec(),
            pilot_lengths: vec![16],
            segment_counts: vec![13],
            detectors: vec![DetectorKind::PerSegmentMl],
            trials: DEFAULT_TRIALS,
            seed: 0,
            metric: Metric::PerSegment,
            reference: ReferencePolicy::AllWorking,
            tags: TagDesign::Auto,
            lasso: LassoOptions::default(),
            max_joint_segments: DEFAULT_MAX_JOINT_SEGMENTS,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SwanError::InvalidConfig(msg));
        if self.power_db.is_empty()
            || self.pilot_lengths.is_empty()
            || self.segment_counts.is_empty()
        {
            return bad("sweep axes must be non-empty".into());
        }
        if self.detectors.is_empty() {
            return bad("at least one detector is required".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.pilot_lengths.contains(&0) || self.segment_counts.contains(&0) {
            return bad("pilot lengths and segment counts must be positive".into());
        }
        if self.power_db.iter().any(|p| !p.is_finite()) {
            return bad("transmit powers must be finite".into());
        }
        if self.detectors.contains(&DetectorKind::JointMl) {
            if let Some(m) = self
                .segment_counts
                .iter()
                .find(|&&m| m > self.max_joint_segments)
            {
                return bad(format!(
                    "joint-ml needs M <= {} but the sweep contains M = {m}",
                    self.max_joint_segments
                ));
            }
        }
        if self.detectors.contains(&DetectorKind::MapOracle)
            && !(self.system.q_fail > 0.0 && self.system.q_fail < 1.0)
        {
            return bad("map-oracle needs 0 < q_fail < 1".into());
        }
        self.lasso.validate()?;
        for &m in &self.segment_counts {
            SystemConfig {
                segments: m,
                ..self.system.clone()
            }
            .validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SwanError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_config_str(&text)
    }

    /// Parses the flat key-value format on top of the defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        let mut spacing_set = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| SwanError::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "delta" {
                spacing_set = true;
            }
            spec.set(key, value).map_err(|e| SwanError::Parse {
                line,
                msg: match e {
                    SwanError::InvalidConfig(msg) => msg,
                    other => other.to_string(),
                },
            })?;
        }
        if !spacing_set {
            spec.system.min_spacing = SPEED_OF_LIGHT / spec.system.carrier_hz / 2.0;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let sys = &mut self.system;
        match key {
            "experiment" | "name" => self.name = value.to_string(),
            "detectors" => self.detectors = parse_list(value)?,
            "P_dB" | "power_db" => self.power_db = parse_list(value)?,
            "T" => self.pilot_lengths = parse_list(value)?,
            "M" => self.segment_counts = parse_list(value)?,
            "trials" => self.trials = parse_one(value)?,
            "seed" => self.seed = parse_one(value)?,
            "metric" => self.metric = value.parse()?,
            "s0" => self.reference = value.parse()?,
            "tags" => self.tags = value.parse()?,
            "q_fail" => sys.q_fail = parse_one(value)?,
            "f_c" => sys.carrier_hz = parse_one(value)?,
            "n_eff" => sys.n_eff = parse_one(value)?,
            "delta" => sys.min_spacing = parse_one(value)?,
            "sigma2_dB" => sys.noise_db = parse_one(value)?,
            "d" => sys.height = parse_one(value)?,
            "L" => sys.segment_len = parse_one(value)?,
            "u_x" => sys.user_x = parse_one(value)?,
            "u_y" => sys.user_y = parse_one(value)?,
            "D_y" => sys.depth_y = parse_one(value)?,
            "M_max" => self.max_joint_segments = parse_one(value)?,
            "lasso.n_lambdas" => self.lasso.n_lambdas = parse_one(value)?,
            "lasso.lambda_ratio" => self.lasso.lambda_ratio = parse_one(value)?,
            "lasso.tol" => self.lasso.tol = Some(parse_one(value)?),
            "lasso.max_sweeps" => self.lasso.max_sweeps = parse_one(value)?,
            "lasso.nonnegative" => self.lasso.nonnegative = parse_one(value)?,
            "tau" | "lasso.tau" => self.lasso.tau = parse_one(value)?,
            other => return Err(SwanError::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Renders the experiment back to the config format.
    pub fn to_config_string(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let s = &self.system;
        let mut lines = vec![
            format!("experiment = {}", self.name),
            format!(
                "detectors = {}",
                join(self.detectors.iter().map(|d| d.to_string()).collect())
            ),
            format!(
                "P_dB = {}",
                join(self.power_db.iter().map(|v| v.to_string()).collect())
            ),
            format!(
                "T = {}",
                join(self.pilot_lengths.iter().map(|v| v.to_string()).collect())
            ),
            format!(
                "M = {}",
                join(self.segment_counts.iter().map(|v| v.to_string()).collect())
            ),
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
            format!(
                "metric = {}",
                match self.metric {
                    Metric::Block => "block",
                    Metric::PerSegment => "per-segment",
                }
            ),
            "s0 = ones".to_string(),
            format!(
                "tags = {}",
                match self.tags {
                    TagDesign::Auto => "auto",
                    TagDesign::Orthogonal => "orthogonal",
                    TagDesign::Submatrix => "submatrix",
                    TagDesign::SubmatrixWide => "submatrix-wide",
                }
            ),
            format!("q_fail = {}", s.q_fail),
            format!("f_c = {}", s.carrier_hz),
            format!("n_eff = {}", s.n_eff),
            format!("delta = {}", s.min_spacing),
            format!("sigma2_dB = {}", s.noise_db),
            format!("d = {}", s.height),
            format!("L = {}", s.segment_len),
            format!("u_x = {}", s.user_x),
            format!("u_y = {}", s.user_y),
            format!("D_y = {}", s.depth_y),
            format!("M_max = {}", self.max_joint_segments),
            format!("lasso.n_lambdas = {}", self.lasso.n_lambdas),
            format!("lasso.lambda_ratio = {}", self.lasso.lambda_ratio),
            format!("lasso.max_sweeps = {}", self.lasso.max_sweeps),
            format!("lasso.nonnegative = {}", self.lasso.nonnegative),
            format!("tau = {}", self.lasso.tau),
        ];
        if let Some(tol) = self.lasso.tol {
            lines.push(format!("lasso.tol = {tol}"));
        }
        lines.join("\n") + "\n"
    }
}

/// Whether the config text assigns `key` (ignoring comments).
pub fn config_sets_key(text: &str, key: &str) -> bool {
    text.lines().any(|raw| {
        raw.split('#')
            .next()
            .and_then(|c| c.split_once('='))
            .is_some_and(|(k, _)| k.trim() == key)
    })
}

fn parse_one<T: FromStr>(value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| SwanError::InvalidConfig(format!("cannot parse `{value}`")))
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_one)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(SwanError::InvalidConfig("empty list".into()));
    }
    Ok(items)
}
