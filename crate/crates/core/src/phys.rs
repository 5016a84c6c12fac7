//! Segmented-waveguide geometry and the effective channel of each segment.
//!
//! The waveguide runs along the x-axis at height `d`. Segment `m` starts at
//! its feed point and carries exactly one pinching antenna (PA). The
//! effective channel of a segment is the product of the in-waveguide phase
//! from PA to feed and the free-space line-of-sight coefficient from user to
//! PA.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, SwanError};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power on the dB scale to linear units.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Physical and simulation constants of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    /// Effective refractive index of the dielectric waveguide.
    pub n_eff: f64,
    /// Minimum inter-antenna spacing (m).
    pub min_spacing: f64,
    /// Noise power on the dB scale.
    pub noise_db: f64,
    /// Waveguide height (m).
    pub height: f64,
    /// Segment length (m).
    pub segment_len: f64,
    /// Number of segments.
    pub segments: usize,
    /// User position in the ground plane (m).
    pub user_x: f64,
    pub user_y: f64,
    /// Transmit power on the dB scale.
    pub power_db: f64,
    /// Per-segment failure probability.
    pub q_fail: f64,
    /// Service-region depth along y (m). Carried for bookkeeping only.
    pub depth_y: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let carrier_hz = 28e9;
        Self {
            carrier_hz,
            n_eff: 1.4,
            min_spacing: SPEED_OF_LIGHT / carrier_hz / 2.0,
            noise_db: -90.0,
            height: 3.0,
            segment_len: 1.0,
            segments: 13,
            user_x: 0.0,
            user_y: 0.0,
            power_db: -25.0,
            q_fail: 0.02,
            depth_y: 10.0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SwanError::InvalidConfig(msg.to_string()));
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return bad("carrier frequency must be positive");
        }
        if !(self.n_eff >= 1.0) {
            return bad("effective refractive index must be >= 1");
        }
        if !(self.segment_len > 0.0) {
            return bad("segment length must be positive");
        }
        if self.segments == 0 {
            return bad("segment count must be at least 1");
        }
        if !(self.min_spacing > 0.0) {
            return bad("minimum spacing must be positive");
        }
        if self.segment_len < self.min_spacing {
            return bad("segment length must be at least the minimum spacing");
        }
        if !(0.0..=1.0).contains(&self.q_fail) {
            return bad("failure probability must lie in [0, 1]");
        }
        if !(self.height.is_finite() && self.user_x.is_finite() && self.user_y.is_finite()) {
            return bad("geometry must be finite");
        }
        Ok(())
    }

    /// Free-space wavelength λ₀ = c / f_c.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Guided wavelength λ₀ / n_eff.
    pub fn guided_wavelength(&self) -> f64 {
        self.wavelength() / self.n_eff
    }

    /// Free-space wavenumber k₀ = 2π / λ₀.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    /// Path-loss constant η = c² / (16 π² f_c²).
    pub fn eta(&self) -> f64 {
        SPEED_OF_LIGHT * SPEED_OF_LIGHT / (16.0 * PI * PI * self.carrier_hz * self.carrier_hz)
    }

    /// Total waveguide span D_x = L·M.
    pub fn span_x(&self) -> f64 {
        self.segment_len * self.segments as f64
    }

    pub fn noise_power(&self) -> f64 {
        db_to_linear(self.noise_db)
    }

    pub fn tx_power(&self) -> f64 {
        db_to_linear(self.power_db)
    }

    pub fn user(&self) -> Point3 {
        Point3::new(self.user_x, self.user_y, 0.0)
    }
}

/// Feed and PA x-coordinates of every segment (all at y = 0, z = d).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLayout {
    pub feeds: Vec<f64>,
    pub pas: Vec<f64>,
    pub height: f64,
}

impl SegmentLayout {
    pub fn len(&self) -> usize {
        self.feeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feeds.is_empty()
    }

    pub fn pa_position(&self, m: usize) -> Point3 {
        Point3::new(self.pas[m], 0.0, self.height)
    }

    /// Smallest distance between two PAs, `None` for a single segment.
    pub fn min_pa_spacing(&self) -> Option<f64> {
        // PAs are sorted, so adjacent pairs are enough.
        self.pas
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Complex effective channel h_m of every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub Vec<Complex64>);

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.0.iter().map(|h| h.norm()).collect()
    }
}

impl std::ops::Index<usize> for ChannelVector {
    type Output = Complex64;

    fn index(&self, m: usize) -> &Complex64 {
        &self.0[m]
    }
}

/// Places the feeds uniformly from −D_x/2 and each PA at the point of
/// `[feed + Δ/2, feed + L − Δ/2]` closest to the user.
///
/// Adjacent clamp intervals are exactly Δ apart, so the spacing constraint
/// holds for any user position.
pub fn build_layout(config: &SystemConfig) -> Result<SegmentLayout> {
    config.validate()?;
    let half = config.min_spacing / 2.0;
    let origin = -config.span_x() / 2.0;
    let mut feeds = Vec::with_capacity(config.segments);
    let mut pas = Vec::with_capacity(config.segments);
    for m in 0..config.segments {
        let feed = origin + m as f64 * config.segment_len;
        let lo = feed + half;
        let hi = feed + config.segment_len - half;
        feeds.push(feed);
        pas.push(config.user_x.clamp(lo, hi));
    }
    Ok(SegmentLayout {
        feeds,
        pas,
        height: config.height,
    })
}

/// Free-space line-of-sight coefficient √η·e^{−j k₀ r}/r from user to PA.
pub fn out_waveguide_coeff(pa: &Point3, user: &Point3, config: &SystemConfig) -> Result<Complex64> {
    let r = pa.distance(user);
    if r == 0.0 || !r.is_finite() {
        return Err(SwanError::DegenerateGeometry);
    }
    Ok(Complex64::from_polar(
        config.eta().sqrt() / r,
        -config.wavenumber() * r,
    ))
}

/// In-waveguide coefficient from feed to PA, a pure phase e^{−j 2π ℓ/λ_g}.
///
/// Propagation loss inside a short segment is neglected.
pub fn in_waveguide_coeff(feed_x: f64, pa_x: f64, config: &SystemConfig) -> Complex64 {
    let len = (pa_x - feed_x).abs();
    Complex64::from_polar(1.0, -2.0 * PI / config.guided_wavelength() * len)
}

pub fn effective_channel(layout: &SegmentLayout, config: &SystemConfig) -> Result<ChannelVector> {
    let user = config.user();
    let h = (0..layout.len())
        .map(|m| {
            let inner = in_waveguide_coeff(layout.feeds[m], layout.pas[m], config);
            let outer = out_waveguide_coeff(&layout.pa_position(m), &user, config)?;
            Ok(inner * outer)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelVector(h))
}

/// Layout and channel for `config` in one call.
pub fn build_channel(config: &SystemConfig) -> Result<(SegmentLayout, ChannelVector)> {
    let layout = build_layout(config)?;
    let h = effective_channel(&layout, config)?;
    Ok((layout, h))
}
