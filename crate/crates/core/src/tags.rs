//! Per-segment tag matrices.
//!
//! A tag matrix `B` is `T × M`: column `m` is the ±1 sequence applied at the
//! feed of segment `m` during a pilot burst of length `T`. Orthogonal designs
//! are Walsh–Hadamard columns; the near-orthogonal designs are random
//! submatrices of a larger Hadamard matrix; the ideal probe is `√T·I_T`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SwanError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagKind {
    HadamardOrthogonal,
    HadamardSubmatrix,
    IdealProbe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagMatrix {
    entries: DMatrix<f64>,
    kind: TagKind,
}

/// Sylvester–Hadamard matrix of order `t`.
pub fn hadamard(t: usize) -> Result<DMatrix<i32>> {
    if t == 0 || !t.is_power_of_two() {
        return Err(SwanError::NotPowerOfTwo(t));
    }
    let mut h = DMatrix::from_element(1, 1, 1i32);
    while h.nrows() < t {
        let n = h.nrows();
        let mut next = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let v = h[(i, j)];
                next[(i, j)] = v;
                next[(i, j + n)] = v;
                next[(i + n, j)] = v;
                next[(i + n, j + n)] = -v;
            }
        }
        h = next;
    }
    Ok(h)
}

/// First `m` columns of `H_t`; the Gram matrix is exactly `t·I_m`.
pub fn orthogonal_tags(m: usize, t: usize) -> Result<TagMatrix> {
    let h = hadamard(t)?;
    if t < m {
        return Err(SwanError::DesignTooShort { t, m });
    }
    if m == 0 {
        return Err(SwanError::InvalidConfig(
            "segment count must be positive".into(),
        ));
    }
    Ok(TagMatrix {
        entries: h.columns(0, m).map(f64::from),
        kind: TagKind::HadamardOrthogonal,
    })
}

/// Smallest power of two that is at least `max(m, t)`.
pub fn parent_order(m: usize, t: usize) -> usize {
    m.max(t).next_power_of_two()
}

/// Random `t × m` submatrix of `H_{T₀}` with `T₀ = 2^⌈log₂ max(m, t)⌉`.
pub fn submatrix_tags(m: usize, t: usize, seed: u64) -> Result<TagMatrix> {
    submatrix_tags_from(m, t, parent_order(m, t), seed)
}

/// Random `t × m` submatrix of `H_parent`: `t` distinct rows and `m`
/// distinct columns drawn without replacement, kept in ascending order.
///
/// The columns are drawn first and the rows are a prefix of one random row
/// permutation, so for a fixed `(m, parent, seed)` the design at pilot length
/// `t` is contained in the design at `t + 1`.
pub fn submatrix_tags_from(m: usize, t: usize, parent: usize, seed: u64) -> Result<TagMatrix> {
    if m == 0 || t == 0 {
        return Err(SwanError::InvalidConfig(
            "pilot length and segment count must be positive".into(),
        ));
    }
    if parent < m.max(t) {
        return Err(SwanError::InvalidConfig(format!(
            "parent Hadamard order {parent} is smaller than max(M, T) = {}",
            m.max(t)
        )));
    }
    let h = hadamard(parent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = index::sample(&mut rng, parent, m).into_vec();
    let mut rows: Vec<usize> = (0..parent).collect();
    rows.shuffle(&mut rng);
    rows.truncate(t);
    rows.sort_unstable();
    cols.sort_unstable();
    let entries = DMatrix::from_fn(t, m, |i, j| f64::from(h[(rows[i], cols[j])]));
    Ok(TagMatrix {
        entries,
        kind: TagKind::HadamardSubmatrix,
    })
}

/// Scaled-identity probing `√t·I_t`.
pub fn ideal_probe(t: usize) -> Result<TagMatrix> {
    if t == 0 {
        return Err(SwanError::InvalidConfig(
            "pilot length must be positive".into(),
        ));
    }
    Ok(TagMatrix {
        entries: DMatrix::identity(t, t) * (t as f64).sqrt(),
        kind: TagKind::IdealProbe,
    })
}

impl TagMatrix {
    /// Wraps an arbitrary real matrix as a submatrix-kind design. Mostly
    /// useful for tests and hand-built designs.
    pub fn from_entries(entries: DMatrix<f64>) -> Self {
        Self {
            entries,
            kind: TagKind::HadamardSubmatrix,
        }
    }

    pub fn kind(&self) -> TagKind {
        self.kind
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Pilot length `T`.
    pub fn pilot_len(&self) -> usize {
        self.entries.nrows()
    }

    /// Segment count `M`.
    pub fn segments(&self) -> usize {
        self.entries.ncols()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.entries.tr_mul(&self.entries)
    }

    /// `BᵀB == T·I_M` with zero tolerance.
    pub fn is_orthogonal(&self) -> bool {
        let t = self.pilot_len() as f64;
        let g = self.gram();
        g.iter().enumerate().all(|(k, &v)| {
            let (i, j) = (k % g.nrows(), k / g.nrows());
            if i == j {
                v == t
            } else {
                v == 0.0
            }
        })
    }

    /// Whether `BᵀB` admits a Cholesky factorization.
    pub fn has_full_column_rank(&self) -> bool {
        if self.pilot_len() < self.segments() {
            return false;
        }
        // Numerical rank from the singular values. A Cholesky attempt on the
        // Gram matrix is not enough: rounding lets it succeed on exactly
        // singular ±1 designs.
        let sv = self.entries.clone().svd(false, false).singular_values;
        let (max, min) = (sv.max(), sv.min());
        min > max * f64::EPSILON * self.pilot_len().max(self.segments()) as f64
    }

    /// Plain-text dump: one row per line, entries separated by spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.entries.nrows() {
            let row: Vec<String> = self.entries.row(i).iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}
