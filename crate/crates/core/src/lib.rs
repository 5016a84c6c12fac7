//! Tagged-pilot failure detection for segmented-waveguide pinching-antenna
//! systems.
//!
//! The crate covers the whole simulation chain: the line-of-sight channel of
//! each waveguide segment ([`phys`]), per-segment tag designs ([`tags`]),
//! synthesis of noisy pilot bursts ([`sim`]), the overdetermined detectors
//! ([`detectors`]), the sparse-recovery detector for short pilots
//! ([`lasso`]) and a seeded Monte-Carlo harness with CSV output
//! ([`experiments`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
pub mod error;
pub mod experiments;
pub mod lasso;
pub mod linalg;
pub mod phys;
pub mod sim;
pub mod tags;

pub use error::{Result, SwanError};
pub use num_complex::Complex64;
