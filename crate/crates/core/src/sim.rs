//! Segment states and noisy tagged-pilot observations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SwanError};
use crate::linalg::real_mat_cvec;
use crate::phys::ChannelVector;
use crate::tags::TagMatrix;

/// Operational state of every segment: `true` is working, `false` failed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateVector(pub Vec<bool>);

impl StateVector {
    pub fn all_working(m: usize) -> Self {
        Self(vec![true; m])
    }

    pub fn all_failed(m: usize) -> Self {
        Self(vec![false; m])
    }

    /// State whose bit `m` is `(code >> m) & 1`.
    pub fn from_code(code: u64, m: usize) -> Self {
        Self((0..m).map(|k| (code >> k) & 1 == 1).collect())
    }

    /// Binary encoding with segment 0 as the least significant bit.
    pub fn code(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &b)| acc | (u64::from(b) << k))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn working(&self, m: usize) -> bool {
        self.0[m]
    }

    pub fn failed_count(&self) -> usize {
        self.0.iter().filter(|b| !**b).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// A received pilot burst and the power context that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<Complex64>,
    pub power: f64,
    pub sigma2: f64,
}

/// Draws i.i.d. segment states with `P(failed) = q_fail`.
pub fn sample_states<R: Rng + ?Sized>(m: usize, q_fail: f64, rng: &mut R) -> StateVector {
    StateVector((0..m).map(|_| rng.random::<f64>() >= q_fail).collect())
}

/// Circularly-symmetric complex Gaussian vector with per-entry variance
/// `sigma2` (each real component has variance `sigma2 / 2`).
pub fn complex_gaussian<R: Rng + ?Sized>(t: usize, sigma2: f64, rng: &mut R) -> Vec<Complex64> {
    let scale = (sigma2 / 2.0).sqrt();
    (0..t)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(scale * re, scale * im)
        })
        .collect()
}

fn check_dims(b: &TagMatrix, h: &ChannelVector, s: &StateVector) -> Result<()> {
    if b.segments() != h.len() || h.len() != s.len() {
        return Err(SwanError::DimensionMismatch(format!(
            "tag matrix has {} columns, channel {} entries, state {} entries",
            b.segments(),
            h.len(),
            s.len()
        )));
    }
    Ok(())
}

/// Noise-free part `√P·B·diag(h)·s` of the tagged-pilot model.
pub fn noiseless(
    b: &TagMatrix,
    h: &ChannelVector,
    s: &StateVector,
    power: f64,
) -> Result<Vec<Complex64>> {
    check_dims(b, h, s)?;
    let amp = power.sqrt();
    let a: Vec<Complex64> = h
        .as_slice()
        .iter()
        .zip(&s.0)
        .map(|(hm, &on)| {
            if on {
                hm * amp
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(real_mat_cvec(b.entries(), &a))
}

/// `y = √P·B·diag(h)·s + n` with `n ~ CN(0, σ² I_T)`.
pub fn synthesize<R: Rng + ?Sized>(
    b: &TagMatrix,
    h: &ChannelVector,
    s: &StateVector,
    power: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(sigma2 >= 0.0) {
        return Err(SwanError::InvalidConfig(
            "noise power must be non-negative".into(),
        ));
    }
    let mut y = noiseless(b, h, s, power)?;
    let noise = complex_gaussian(y.len(), sigma2, rng);
    for (yi, ni) in y.iter_mut().zip(noise) {
        *yi += ni;
    }
    Ok(Observation { y, power, sigma2 })
}

/// Untagged combiner output `x·hᵀs` for pilot `x`.
pub fn untagged_observation(
    pilot: &[Complex64],
    h: &ChannelVector,
    s: &StateVector,
) -> Vec<Complex64> {
    let hs: Complex64 = h
        .as_slice()
        .iter()
        .zip(&s.0)
        .filter(|(_, &on)| on)
        .map(|(hm, _)| *hm)
        .sum();
    pilot.iter().map(|x| x * hs).collect()
}

/// Untagged measurement matrix `x·hᵀ` (`T × M`).
pub fn untagged_measurement_matrix(pilot: &[Complex64], h: &ChannelVector) -> DMatrix<Complex64> {
    DMatrix::from_fn(pilot.len(), h.len(), |t, m| pilot[t] * h[m])
}

/// Counter-based random substreams.
///
/// The ChaCha key is derived from `(seed, point)` and the stream id from
/// `(trial, lane)`, so every draw depends only on those coordinates and not
/// on which worker ran the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub point: u64,
}

/// Lanes inside one trial.
pub const LANES_PER_TRIAL: u64 = 16;

impl StreamKey {
    pub fn new(seed: u64, point: u64) -> Self {
        Self { seed, point }
    }

    pub fn rng(&self, trial: u64, lane: u64) -> ChaCha8Rng {
        debug_assert!(lane < LANES_PER_TRIAL);
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.point.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(trial.wrapping_mul(LANES_PER_TRIAL).wrapping_add(lane));
        rng
    }

    /// A seed for per-point randomized designs, disjoint from trial streams.
    pub fn design_seed(&self, salt: u64) -> u64 {
        let mut rng = self.rng(u64::MAX / LANES_PER_TRIAL, salt % LANES_PER_TRIAL);
        rng.random()
    }
}
