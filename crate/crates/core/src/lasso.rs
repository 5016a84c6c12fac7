//! Sparse-recovery detector for pilots shorter than the segment count.
//!
//! Relative to a verified reference state `s₀`, the failure indicator
//! `f = s₀ − s` is sparse. The reference contribution is removed from the
//! observation, the complex residual system is lifted to a real one, and
//! `½‖r̃ − Ãf‖² + λ‖f‖₁` is minimized by cyclic coordinate descent along a
//! warm-started λ path. λ is picked by the discrepancy rule and each
//! coefficient is thresholded at τ.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::detectors::{DetectionResult, DetectorKind, Diagnostics};
use crate::error::{Result, SwanError};
use crate::linalg::real_mat_cvec;
use crate::phys::ChannelVector;
use crate::sim::StateVector;
use crate::tags::TagMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoOptions {
    /// Number of λ grid points.
    pub n_lambdas: usize,
    /// Smallest λ as a fraction of λ_max.
    pub lambda_ratio: f64,
    /// Coordinate-change tolerance; `None` means `1e-8·max(1, ‖r̃‖_∞)`.
    pub tol: Option<f64>,
    pub max_sweeps: usize,
    /// Clamp coefficients at zero (nonnegative LASSO).
    pub nonnegative: bool,
    /// Decision threshold on the recovered coefficients.
    pub tau: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            n_lambdas: 50,
            lambda_ratio: 1e-3,
            tol: None,
            max_sweeps: 10_000,
            nonnegative: false,
            tau: 0.5,
        }
    }
}

impl LassoOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambdas < 2 {
            return Err(SwanError::InvalidConfig(
                "λ grid needs at least 2 points".into(),
            ));
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(SwanError::InvalidConfig(
                "λ ratio must lie in (0, 1)".into(),
            ));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SwanError::InvalidConfig("τ must lie in (0, 1)".into()));
        }
        if self.max_sweeps == 0 {
            return Err(SwanError::InvalidConfig(
                "max_sweeps must be positive".into(),
            ));
        }
        Ok(())
    }

    fn tolerance(&self, r: &[f64]) -> f64 {
        self.tol.unwrap_or_else(|| {
            let inf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            1e-8 * inf.max(1.0)
        })
    }
}

/// The complex residual system and its real lifting.
#[derive(Debug, Clone)]
pub struct ResidualSystem {
    /// `A_f = −√P·B·diag(h)`.
    pub a_f: DMatrix<Complex64>,
    /// `r = y + A_f·s₀`.
    pub r: Vec<Complex64>,
    /// `[Re A_f; Im A_f]`.
    pub a_lift: DMatrix<f64>,
    /// `[Re r; Im r]`.
    pub r_lift: Vec<f64>,
    pub sigma2: f64,
}

pub fn failure_matrix(b: &TagMatrix, h: &ChannelVector, power: f64) -> Result<DMatrix<Complex64>> {
    if b.segments() != h.len() {
        return Err(SwanError::DimensionMismatch(format!(
            "tag matrix has {} columns, channel {} entries",
            b.segments(),
            h.len()
        )));
    }
    let amp = power.sqrt();
    Ok(DMatrix::from_fn(b.pilot_len(), b.segments(), |t, m| {
        -(b.entries()[(t, m)] * amp) * h[m]
    }))
}

pub fn lift_matrix(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let t = a.nrows();
    DMatrix::from_fn(2 * t, a.ncols(), |i, j| {
        if i < t {
            a[(i, j)].re
        } else {
            a[(i - t, j)].im
        }
    })
}

pub fn lift_vector(v: &[Complex64]) -> Vec<f64> {
    v.iter()
        .map(|z| z.re)
        .chain(v.iter().map(|z| z.im))
        .collect()
}

pub fn form_residual(
    y: &[Complex64],
    b: &TagMatrix,
    h: &ChannelVector,
    power: f64,
    s0: &StateVector,
    sigma2: f64,
) -> Result<ResidualSystem> {
    let a_f = failure_matrix(b, h, power)?;
    if y.len() != a_f.nrows() || s0.len() != a_f.ncols() {
        return Err(SwanError::DimensionMismatch(format!(
            "observation has {} samples and reference {} entries for a {}×{} system",
            y.len(),
            s0.len(),
            a_f.nrows(),
            a_f.ncols()
        )));
    }
    let r = residual(y, b, h, power, s0);
    Ok(ResidualSystem {
        a_lift: lift_matrix(&a_f),
        r_lift: lift_vector(&r),
        a_f,
        r,
        sigma2,
    })
}

/// `y − √P·B·diag(h)·s₀`.
fn residual(
    y: &[Complex64],
    b: &TagMatrix,
    h: &ChannelVector,
    power: f64,
    s0: &StateVector,
) -> Vec<Complex64> {
    let amp = power.sqrt();
    let a0: Vec<Complex64> = h
        .as_slice()
        .iter()
        .zip(&s0.0)
        .map(|(hm, &on)| {
            if on {
                hm * amp
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let reference = real_mat_cvec(b.entries(), &a0);
    y.iter().zip(&reference).map(|(yi, ri)| yi - ri).collect()
}

/// Sweep interval at which a slow coordinate descent is finished by
/// feature-sign search.
const SLOW_SWEEPS: usize = 200;

fn sign_pattern(f: &[f64]) -> Vec<i8> {
    f.iter()
        .map(|&v| {
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    z.signum() * (z.abs() - lambda).max(0.0)
}

/// Solution path on a decreasing λ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub residual_energies: Vec<f64>,
}

impl LassoPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Per-λ diagnostics as CSV: `lambda,support,residual_energy`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda,support,residual_energy")?;
        for ((lambda, f), e) in self
            .lambdas
            .iter()
            .zip(&self.coefficients)
            .zip(&self.residual_energies)
        {
            let support = f.iter().filter(|v| **v != 0.0).count();
            writeln!(out, "{lambda},{support},{e}")?;
        }
        Ok(())
    }
}

/// A fixed real design `Ã` with its Gram matrix `ÃᵀÃ` cached, so that many
/// right-hand sides and λ values can be solved cheaply.
#[derive(Debug, Clone)]
pub struct LassoDesign {
    a: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl LassoDesign {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let gram = a.tr_mul(&a);
        if let Some(j) = (0..gram.ncols()).find(|&j| !(gram[(j, j)] > 0.0)) {
            return Err(SwanError::InvalidConfig(format!(
                "design column {j} has zero norm"
            )));
        }
        Ok(Self { a, gram })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn correlations(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.a.nrows() {
            return Err(SwanError::DimensionMismatch(format!(
                "right-hand side has {} entries, design has {} rows",
                r.len(),
                self.a.nrows()
            )));
        }
        Ok((0..self.a.ncols())
            .map(|j| self.a.column(j).iter().zip(r).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `λ_max = ‖Ãᵀr̃‖_∞`, the smallest λ with an all-zero solution.
    pub fn lambda_max(&self, r: &[f64]) -> Result<f64> {
        Ok(self
            .correlations(r)?
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn residual_energy(&self, r: &[f64], f: &[f64]) -> f64 {
        let fit = &self.a * nalgebra::DVector::from_column_slice(f);
        r.iter()
            .zip(fit.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn objective(&self, r: &[f64], f: &[f64], lambda: f64) -> f64 {
        0.5 * self.residual_energy(r, f) + lambda * f.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Largest violation of the optimality conditions at `f`.
    pub fn kkt_violation(
        &self,
        r: &[f64],
        f: &[f64],
        lambda: f64,
        nonnegative: bool,
    ) -> Result<f64> {
        let c = self.correlations(r)?;
        Ok(self.kkt_from(&c, &self.gram_times(f), f, lambda, nonnegative))
    }

    fn gram_times(&self, f: &[f64]) -> Vec<f64> {
        let m = f.len();
        let mut q = vec![0.0; m];
        for (j, &fj) in f.iter().enumerate() {
            if fj != 0.0 {
                for (i, qi) in q.iter_mut().enumerate() {
                    *qi += self.gram[(i, j)] * fj;
                }
            }
        }
        debug_assert_eq!(q.len(), m);
        q
    }

    fn kkt_from(&self, c: &[f64], q: &[f64], f: &[f64], lambda: f64, nonnegative: bool) -> f64 {
        f.iter()
            .enumerate()
            .map(|(j, &fj)| {
                let grad = c[j] - q[j];
                if fj != 0.0 {
                    (grad - lambda * fj.signum()).abs()
                } else if nonnegative {
                    (grad - lambda).max(0.0)
                } else {
                    (grad.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Cyclic coordinate descent at one λ, starting from `warm` (or zero).
    pub fn solve(
        &self,
        r: &[f64],
        lambda: f64,
        warm: Option<&[f64]>,
        opts: &LassoOptions,
    ) -> Result<Vec<f64>> {
        let c = self.correlations(r)?;
        self.solve_with(&c, r, lambda, warm, opts, opts.tolerance(r))
    }

    fn solve_with(
        &self,
        c: &[f64],
        r: &[f64],
        lambda: f64,
        warm: Option<&[f64]>,
        opts: &LassoOptions,
        tol: f64,
    ) -> Result<Vec<f64>> {
        if !(lambda >= 0.0) {
            return Err(SwanError::InvalidConfig("λ must be non-negative".into()));
        }
        let m = self.ncols();
        let mut f = match warm {
            Some(w) if w.len() == m => w.to_vec(),
            Some(w) => {
                return Err(SwanError::DimensionMismatch(format!(
                    "warm start has {} entries, design has {m} columns",
                    w.len()
                )))
            }
            None => vec![0.0; m],
        };
        let mut q = self.gram_times(&f);
        let mut last_objective = if cfg!(debug_assertions) {
            self.objective(r, &f, lambda)
        } else {
            f64::INFINITY
        };

        let mut pattern = sign_pattern(&f);
        let mut stable_sweeps = 0usize;
        let mut next_polish = 2usize;
        for sweep in 0..opts.max_sweeps {
            let mut max_change = 0.0f64;
            for j in 0..m {
                let gjj = self.gram[(j, j)];
                let z = c[j] - q[j] + gjj * f[j];
                let next = if opts.nonnegative {
                    (z - lambda).max(0.0) / gjj
                } else {
                    soft_threshold(z, lambda) / gjj
                };
                let delta = next - f[j];
                if delta != 0.0 {
                    for (i, qi) in q.iter_mut().enumerate() {
                        *qi += self.gram[(i, j)] * delta;
                    }
                    f[j] = next;
                    max_change = max_change.max(delta.abs());
                }
            }
            if cfg!(debug_assertions) {
                let obj = self.objective(r, &f, lambda);
                debug_assert!(
                    obj <= last_objective + 1e-10 * last_objective.abs().max(f64::MIN_POSITIVE),
                    "objective increased from {last_objective} to {obj}"
                );
                last_objective = obj;
            }
            if max_change <= tol {
                // Refresh the running product before certifying.
                q = self.gram_times(&f);
                if self.kkt_from(c, &q, &f, lambda, opts.nonnegative) <= 10.0 * tol {
                    return Ok(f);
                }
            }

            let current = sign_pattern(&f);
            if current == pattern {
                stable_sweeps += 1;
            } else {
                pattern = current;
                stable_sweeps = 0;
                if lambda > 0.0 {
                    next_polish = 2;
                }
            }
            let due = if lambda == 0.0 {
                sweep + 1 >= next_polish
            } else {
                stable_sweeps >= next_polish
            };
            if due {
                // Without a penalty the sign pattern carries no information,
                // so try the unrestricted normal equations instead.
                let guess = if lambda == 0.0 {
                    vec![1; m]
                } else {
                    pattern.clone()
                };
                if let Some(exact) = self.polish(c, &guess, lambda) {
                    let q_exact = self.gram_times(&exact);
                    if self.kkt_from(c, &q_exact, &exact, lambda, opts.nonnegative) <= 10.0 * tol {
                        return Ok(exact);
                    }
                }
                next_polish = next_polish.saturating_mul(2);
            }
            // Ill-conditioned designs make coordinate descent crawl; hand
            // the iterate to an exact active-set search.
            if (sweep + 1) % SLOW_SWEEPS == 0 {
                if let Some(exact) = self.feature_sign(c, lambda, &f, opts.nonnegative, 10.0 * tol)
                {
                    return Ok(exact);
                }
            }
        }
        Err(SwanError::IterationLimit {
            sweeps: opts.max_sweeps,
            last: f,
        })
    }

    /// `½fᵀGf − cᵀf + λ‖f‖₁`, the objective up to the constant `½‖r̃‖²`.
    fn reduced_objective(&self, c: &[f64], f: &[f64], lambda: f64) -> f64 {
        let q = self.gram_times(f);
        f.iter()
            .zip(c.iter().zip(&q))
            .map(|(&fj, (&cj, &qj))| 0.5 * fj * qj - cj * fj + lambda * fj.abs())
            .sum()
    }

    /// Feature-sign search from `start`: repeatedly solve the equality-
    /// constrained problem on the current active set and signs, line-search
    /// toward it through the zero crossings, and grow the active set with the
    /// most violating coordinate. Each step strictly lowers the objective, so
    /// the search is finite; the cap only guards against rounding loops.
    /// Returns a point certified to `kkt_tol`, or `None`.
    fn feature_sign(
        &self,
        c: &[f64],
        lambda: f64,
        start: &[f64],
        nonnegative: bool,
        kkt_tol: f64,
    ) -> Option<Vec<f64>> {
        let m = start.len();
        let mut x = start.to_vec();
        let mut theta: Vec<f64> = x
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { v.signum() })
            .collect();
        for _ in 0..20 * m.max(1) {
            let q = self.gram_times(&x);
            let grad: Vec<f64> = c.iter().zip(&q).map(|(a, b)| a - b).collect();
            let kkt = self.kkt_from(c, &q, &x, lambda, nonnegative);
            if kkt <= kkt_tol {
                return Some(x);
            }
            let active_ok = x
                .iter()
                .zip(&grad)
                .all(|(&xj, &g)| xj == 0.0 || (g - lambda * xj.signum()).abs() <= kkt_tol);
            if active_ok {
                // Activate the zero coordinate with the largest violation.
                let (j, g) = (0..m)
                    .filter(|&j| x[j] == 0.0 && theta[j] == 0.0)
                    .map(|j| (j, grad[j]))
                    .filter(|&(_, g)| {
                        if nonnegative {
                            g > lambda
                        } else {
                            g.abs() > lambda
                        }
                    })
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
                theta[j] = g.signum();
            }

            let active: Vec<usize> = (0..m).filter(|&j| theta[j] != 0.0).collect();
            let k = active.len();
            let g_aa = DMatrix::from_fn(k, k, |a, b| self.gram[(active[a], active[b])]);
            let rhs =
                nalgebra::DVector::from_fn(k, |a, _| c[active[a]] - lambda * theta[active[a]]);
            let sol = g_aa.cholesky()?.solve(&rhs);
            let mut target = vec![0.0; m];
            for (a, &j) in active.iter().enumerate() {
                target[j] = sol[a];
            }

            // Candidates: the full step and every zero crossing on the way.
            let mut steps = vec![1.0];
            for &j in &active {
                if x[j] != 0.0 && target[j].signum() != x[j].signum() {
                    steps.push(x[j] / (x[j] - target[j]));
                }
            }
            let mut best: Option<(f64, Vec<f64>)> = None;
            for &t in &steps {
                let mut cand: Vec<f64> = x
                    .iter()
                    .zip(&target)
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                for &j in &active {
                    let crossed = x[j] != 0.0 && x[j] / (x[j] - target[j]) == t;
                    if crossed || (nonnegative && cand[j] < 0.0) {
                        cand[j] = 0.0;
                    }
                }
                let obj = self.reduced_objective(c, &cand, lambda);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, cand));
                }
            }
            let (_, next) = best?;
            if next == x {
                return None;
            }
            x = next;
            theta = x
                .iter()
                .map(|&v| if v == 0.0 { 0.0 } else { v.signum() })
                .collect();
        }
        None
    }

    /// Exact minimizer restricted to a guessed sign pattern:
    /// `f_A = G_AA⁻¹(c_A − λ·sign_A)`, zero elsewhere. `None` if `G_AA` is
    /// singular or, for `λ > 0`, the solution does not keep the guessed
    /// signs.
    fn polish(&self, c: &[f64], pattern: &[i8], lambda: f64) -> Option<Vec<f64>> {
        let active: Vec<usize> = (0..pattern.len()).filter(|&j| pattern[j] != 0).collect();
        let mut f = vec![0.0; pattern.len()];
        if active.is_empty() {
            return Some(f);
        }
        let k = active.len();
        let g = DMatrix::from_fn(k, k, |i, j| self.gram[(active[i], active[j])]);
        let rhs = nalgebra::DVector::from_fn(k, |i, _| {
            c[active[i]] - lambda * f64::from(pattern[active[i]])
        });
        let sol = g.cholesky()?.solve(&rhs);
        for (i, &j) in active.iter().enumerate() {
            if lambda > 0.0 && (sol[i].signum() as i8 != pattern[j] || sol[i] == 0.0) {
                return None;
            }
            f[j] = sol[i];
        }
        Some(f)
    }

    /// Geometric grid from λ_max down to `lambda_ratio·λ_max`. A zero
    /// right-hand side gives the single point `[0]`.
    pub fn lambda_path(&self, r: &[f64], n_points: usize, lambda_ratio: f64) -> Result<Vec<f64>> {
        let lmax = self.lambda_max(r)?;
        Ok(geometric_grid(lmax, n_points, lambda_ratio))
    }

    /// Warm-started solutions from the largest λ to the smallest.
    pub fn solve_path(&self, r: &[f64], opts: &LassoOptions) -> Result<LassoPath> {
        self.solve_path_until(r, opts, None)
    }

    /// Like [`solve_path`](Self::solve_path), but stops after the first grid
    /// point whose residual energy is at most `floor`. Residual energy is
    /// non-increasing along the path, so later points cannot be closer to a
    /// discrepancy target of `floor`.
    pub fn solve_path_until(
        &self,
        r: &[f64],
        opts: &LassoOptions,
        floor: Option<f64>,
    ) -> Result<LassoPath> {
        opts.validate()?;
        let c = self.correlations(r)?;
        let lmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lambdas = geometric_grid(lmax, opts.n_lambdas, opts.lambda_ratio);
        let tol = opts.tolerance(r);
        let mut coefficients = Vec::with_capacity(lambdas.len());
        let mut residual_energies = Vec::with_capacity(lambdas.len());
        let mut warm = vec![0.0; self.ncols()];
        for &lambda in &lambdas {
            let f = if lmax == 0.0 {
                warm.clone()
            } else {
                self.solve_with(&c, r, lambda, Some(&warm), opts, tol)?
            };
            let energy = self.residual_energy(r, &f);
            residual_energies.push(energy);
            warm.clone_from(&f);
            coefficients.push(f);
            if floor.is_some_and(|target| energy <= target) {
                break;
            }
        }
        let lambdas = lambdas[..coefficients.len()].to_vec();
        Ok(LassoPath {
            lambdas,
            coefficients,
            residual_energies,
        })
    }
}

fn geometric_grid(lmax: f64, n_points: usize, ratio: f64) -> Vec<f64> {
    if lmax == 0.0 {
        return vec![0.0];
    }
    let step = ratio.powf(1.0 / (n_points - 1) as f64);
    (0..n_points)
        .map(|k| {
            if k + 1 == n_points {
                lmax * ratio
            } else {
                lmax * step.powi(k as i32)
            }
        })
        .collect()
}

/// Single-λ coordinate descent on an explicit system.
pub fn lasso_cd(
    a: &DMatrix<f64>,
    r: &[f64],
    lambda: f64,
    warm: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<Vec<f64>> {
    LassoDesign::new(a.clone())?.solve(r, lambda, warm, opts)
}

pub fn lambda_path(a: &DMatrix<f64>, r: &[f64], n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(SwanError::InvalidConfig(
            "λ grid needs at least 2 points".into(),
        ));
    }
    LassoDesign::new(a.clone())?.lambda_path(r, n_points, LassoOptions::default().lambda_ratio)
}

/// Index of the path point whose residual energy is closest to `T·σ²`.
/// Ties go to the larger λ (the earlier grid point).
pub fn select_lambda_discrepancy(path: &LassoPath, sigma2: f64, pilot_len: usize) -> usize {
    let target = pilot_len as f64 * sigma2;
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for (k, e) in path.residual_energies.iter().enumerate() {
        let gap = (e - target).abs();
        if gap < best_gap {
            best = k;
            best_gap = gap;
        }
    }
    best
}

/// `f_m = 1` marks segment `m` as newly failed relative to `s₀`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureIndicator(pub Vec<bool>);

/// `f_m = 1` iff `f̂_m > τ` and segment `m` is working in `s₀`.
pub fn threshold_decide(f_hat: &[f64], tau: f64, s0: &StateVector) -> FailureIndicator {
    FailureIndicator(
        f_hat
            .iter()
            .zip(&s0.0)
            .map(|(&v, &working)| working && v > tau)
            .collect(),
    )
}

/// `ŝ = s₀ − f`.
pub fn recover_states(s0: &StateVector, f: &FailureIndicator) -> Result<StateVector> {
    if s0.len() != f.0.len() {
        return Err(SwanError::DimensionMismatch(format!(
            "reference has {} entries, indicator {}",
            s0.len(),
            f.0.len()
        )));
    }
    s0.0.iter()
        .zip(&f.0)
        .enumerate()
        .map(|(m, (&working, &failed))| match (working, failed) {
            (false, true) => Err(SwanError::SupportViolation(m)),
            (w, f) => Ok(w && !f),
        })
        .collect::<Result<Vec<_>>>()
        .map(StateVector)
}

/// End-to-end sparse detector for a fixed design, channel and power.
///
/// The lifted design is rescaled to unit largest column norm before
/// solving. Scaling `Ã` and `r̃` by `α` and λ by `α²` leaves the minimizer
/// unchanged, and it puts the absolute solver tolerance on the natural scale
/// of the problem instead of the raw channel scale (entries near 1e-5).
#[derive(Debug, Clone)]
pub struct LassoDetector {
    tags: TagMatrix,
    channel: ChannelVector,
    power: f64,
    design: LassoDesign,
    scale: f64,
    options: LassoOptions,
}

impl LassoDetector {
    pub fn new(
        tags: &TagMatrix,
        channel: &ChannelVector,
        power: f64,
        options: LassoOptions,
    ) -> Result<Self> {
        options.validate()?;
        let lifted = lift_matrix(&failure_matrix(tags, channel, power)?);
        let max_norm = lifted
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if !(max_norm > 0.0 && max_norm.is_finite()) {
            return Err(SwanError::InvalidConfig(
                "failure matrix has no usable column".into(),
            ));
        }
        let scale = 1.0 / max_norm;
        let design = LassoDesign::new(lifted * scale)?;
        Ok(Self {
            tags: tags.clone(),
            channel: channel.clone(),
            power,
            design,
            scale,
            options,
        })
    }

    /// The normalized design `α·Ã` that the solver works on.
    pub fn design(&self) -> &LassoDesign {
        &self.design
    }

    /// Normalization factor `α`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Full solution path, with λ and residual energies on the original
    /// scale.
    pub fn path(&self, y: &[Complex64], s0: &StateVector) -> Result<LassoPath> {
        let r = self.scaled_residual(y, s0)?;
        Ok(self.unscale(self.design.solve_path(&r, &self.options)?))
    }

    fn unscale(&self, mut path: LassoPath) -> LassoPath {
        let a2 = self.scale * self.scale;
        path.lambdas.iter_mut().for_each(|l| *l /= a2);
        path.residual_energies.iter_mut().for_each(|e| *e /= a2);
        path
    }

    fn scaled_residual(&self, y: &[Complex64], s0: &StateVector) -> Result<Vec<f64>> {
        if y.len() != self.tags.pilot_len() || s0.len() != self.tags.segments() {
            return Err(SwanError::DimensionMismatch(format!(
                "observation has {} samples and reference {} entries for a {}×{} design",
                y.len(),
                s0.len(),
                self.tags.pilot_len(),
                self.tags.segments()
            )));
        }
        let mut r = lift_vector(&residual(y, &self.tags, &self.channel, self.power, s0));
        r.iter_mut().for_each(|v| *v *= self.scale);
        Ok(r)
    }

    pub fn detect(
        &self,
        y: &[Complex64],
        s0: &StateVector,
        sigma2: f64,
    ) -> Result<DetectionResult> {
        let r = self.scaled_residual(y, s0)?;
        let a2 = self.scale * self.scale;
        let target = self.tags.pilot_len() as f64 * sigma2 * a2;
        let path = self
            .design
            .solve_path_until(&r, &self.options, Some(target))?;
        let k = select_lambda_discrepancy(&path, sigma2 * a2, self.tags.pilot_len());
        let f = threshold_decide(&path.coefficients[k], self.options.tau, s0);
        Ok(DetectionResult {
            states: recover_states(s0, &f)?,
            detector: DetectorKind::Lasso,
            diagnostics: Diagnostics {
                objective: Some(0.5 * path.residual_energies[k] / a2),
                lambda: Some(path.lambdas[k] / a2),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phys::{build_channel, SystemConfig};
    use crate::sim::{noiseless, sample_states, synthesize};
    use crate::tags::{orthogonal_tags, submatrix_tags};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn channel(m: usize) -> ChannelVector {
        build_channel(&SystemConfig {
            segments: m,
            ..SystemConfig::default()
        })
        .unwrap()
        .1
    }

    #[test]
    fn scalar_soft_threshold() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let f = lasso_cd(&a, &[1.0, 0.0], 0.3, None, &LassoOptions::default()).unwrap();
        assert!((f[0] - 0.7).abs() < 1e-15);
        let f = lasso_cd(&a, &[-1.0, 0.0], 0.3, None, &LassoOptions::default()).unwrap();
        assert!((f[0] + 0.7).abs() < 1e-15);
    }

    #[test]
    fn above_lambda_max_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gaussian_matrix(20, 30, &mut rng);
        let r: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
        let d = LassoDesign::new(a).unwrap();
        let lmax = d.lambda_max(&r).unwrap();
        for scale in [1.0, 1.5, 10.0] {
            let f = d
                .solve(&r, lmax * scale, None, &LassoOptions::default())
                .unwrap();
            assert!(f.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn zero_lambda_matches_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gaussian_matrix(30, 8, &mut rng);
        let r: Vec<f64> = (0..30).map(|_| rng.sample(StandardNormal)).collect();
        let f = lasso_cd(&a, &r, 0.0, None, &LassoOptions::default()).unwrap();
        let ls = (a.transpose() * &a)
            .cholesky()
            .unwrap()
            .solve(&(a.transpose() * nalgebra::DVector::from_column_slice(&r)));
        for j in 0..8 {
            assert!((f[j] - ls[j]).abs() < 1e-6 * ls.amax());
        }
    }

    #[test]
    fn zero_column_rejected() {
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(LassoDesign::new(a).is_err());
    }

    #[test]
    fn iteration_limit_carries_last_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian_matrix(10, 10, &mut rng);
        let r: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
        let opts = LassoOptions {
            max_sweeps: 1,
            ..LassoOptions::default()
        };
        match lasso_cd(&a, &r, 1e-4, None, &opts) {
            Err(SwanError::IterationLimit { sweeps: 1, last }) => assert_eq!(last.len(), 10),
            other => panic!("expected iteration limit, got {other:?}"),
        }
    }

    #[test]
    fn grid_shape() {
        let a = DMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        let grid = lambda_path(&a, &[3.0, 0.0], 2).unwrap();
        assert_eq!(grid, vec![6.0, 6.0e-3]);
        let grid = lambda_path(&a, &[3.0, 0.0], 50).unwrap();
        let ratio = 1e-3f64.powf(1.0 / 49.0);
        for w in grid.windows(2) {
            assert!(w[1] < w[0]);
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
        assert_eq!(lambda_path(&a, &[0.0, 0.0], 50).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_residual_gives_trivial_path() {
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let path = LassoDesign::new(a)
            .unwrap()
            .solve_path(&[0.0, 0.0], &LassoOptions::default())
            .unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.coefficients[0], vec![0.0, 0.0]);
        assert_eq!(path.residual_energies[0], 0.0);
    }

    #[test]
    fn kkt_and_monotone_residual_along_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = gaussian_matrix(16, 24, &mut rng);
            let r: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
            let d = LassoDesign::new(a).unwrap();
            let opts = LassoOptions::default();
            let path = d.solve_path(&r, &opts).unwrap();
            let tol = opts.tolerance(&r);
            for (lambda, f) in path.lambdas.iter().zip(&path.coefficients) {
                assert!(d.kkt_violation(&r, f, *lambda, false).unwrap() <= 10.0 * tol);
            }
            for w in path.residual_energies.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
            }
            assert!(path.coefficients[0].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn nonnegative_variant_stays_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = gaussian_matrix(12, 20, &mut rng);
        let r: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let d = LassoDesign::new(a).unwrap();
        let opts = LassoOptions {
            nonnegative: true,
            ..LassoOptions::default()
        };
        let path = d.solve_path(&r, &opts).unwrap();
        for (lambda, f) in path.lambdas.iter().zip(&path.coefficients) {
            assert!(f.iter().all(|v| *v >= 0.0));
            assert!(d.kkt_violation(&r, f, *lambda, true).unwrap() <= 10.0 * opts.tolerance(&r));
        }
    }

    #[test]
    fn residual_vanishes_without_new_failures() {
        let (m, t, p) = (12, 8, 1e-3);
        let h = channel(m);
        let b = submatrix_tags(m, t, 1).unwrap();
        let s0 = StateVector(vec![
            true, true, false, true, true, true, true, false, true, true, true, true,
        ]);
        let y = noiseless(&b, &h, &s0, p).unwrap();
        let sys = form_residual(&y, &b, &h, p, &s0, 0.0).unwrap();
        assert!(sys.r.iter().all(|v| v.norm() <= 1e-12 * h[0].norm()));
    }

    #[test]
    fn single_failure_residual_is_column_signature() {
        let (m, t, p) = (12, 8, 1e-3);
        let h = channel(m);
        let b = submatrix_tags(m, t, 2).unwrap();
        let s0 = StateVector::all_working(m);
        for k in 0..m {
            let mut s = s0.clone();
            s.0[k] = false;
            let y = noiseless(&b, &h, &s, p).unwrap();
            let sys = form_residual(&y, &b, &h, p, &s0, 0.0).unwrap();
            for i in 0..t {
                let expected = -(p.sqrt() * b.entries()[(i, k)]) * h[k];
                assert!((sys.r[i] - expected).norm() <= 1e-12 * expected.norm());
                assert!((sys.a_f[(i, k)] - expected).norm() <= 1e-12 * expected.norm());
            }
        }
    }

    #[test]
    fn lifting_identities() {
        let (m, t, p) = (10, 6, 0.5);
        let h = channel(m);
        let b = submatrix_tags(m, t, 3).unwrap();
        let s0 = StateVector::all_working(m);
        let y = noiseless(&b, &h, &s0, p).unwrap();
        let sys = form_residual(&y, &b, &h, p, &s0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let lifted = &sys.a_lift * nalgebra::DVector::from_column_slice(&f);
        let fc: Vec<Complex64> = f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let direct = &sys.a_f * nalgebra::DVector::from_column_slice(&fc);
        let expected = lift_vector(direct.as_slice());
        for (u, v) in lifted.iter().zip(&expected) {
            assert!((u - v).abs() <= 1e-12 * h[0].norm());
        }
        for j in 0..m {
            let e_lift = sys.a_lift.column(j).norm_squared();
            let e_c: f64 = sys.a_f.column(j).iter().map(|z| z.norm_sqr()).sum();
            assert!((e_lift - e_c).abs() <= 1e-12 * e_c);
        }
        assert_eq!(sys.r_lift.len(), 2 * t);
    }

    #[test]
    fn orthogonal_single_failure_exact_recovery() {
        // Orthogonal lifted columns: the solution at λ is the shrunk
        // indicator (G_mm − λ)/G_mm on the true support.
        let a = orthogonal_tags(6, 8).unwrap().entries().clone() * 0.3;
        let d = LassoDesign::new(a.clone()).unwrap();
        let s0 = StateVector::all_working(6);
        for k in 0..6 {
            let r: Vec<f64> = a.column(k).iter().copied().collect();
            let path = d.solve_path(&r, &LassoOptions::default()).unwrap();
            let gkk = a.column(k).norm_squared();
            let mut found = false;
            for (lambda, f) in path.lambdas.iter().zip(&path.coefficients) {
                let support: Vec<usize> = (0..6).filter(|&j| f[j] != 0.0).collect();
                if *lambda < gkk * (1.0 - 1e-12) {
                    assert_eq!(support, vec![k]);
                }
                if *lambda <= 0.5 * gkk {
                    found = true;
                    let ind = threshold_decide(f, 0.5, &s0);
                    let mut expected = vec![false; 6];
                    expected[k] = true;
                    assert_eq!(ind.0, expected);
                }
            }
            assert!(found);
        }
    }

    #[test]
    fn discrepancy_selection_rules() {
        let path = LassoPath {
            lambdas: vec![4.0, 2.0, 1.0, 0.5],
            coefficients: vec![vec![0.0]; 4],
            residual_energies: vec![10.0, 6.0, 2.0, 0.5],
        };
        // Target T·σ² = 4: 6 and 2 are equidistant, larger λ wins.
        assert_eq!(select_lambda_discrepancy(&path, 1.0, 4), 1);
        assert_eq!(select_lambda_discrepancy(&path, 0.0, 4), 3);
        assert_eq!(select_lambda_discrepancy(&path, 2.5, 4), 0);
    }

    #[test]
    fn noiseless_selection_tends_to_zero_residual() {
        let (m, t, p) = (24, 12, 1e-3);
        let h = channel(m);
        let b = submatrix_tags(m, t, 4).unwrap();
        let det = LassoDetector::new(&b, &h, p, LassoOptions::default()).unwrap();
        let s0 = StateVector::all_working(m);
        let mut s = s0.clone();
        s.0[5] = false;
        let y = noiseless(&b, &h, &s, p).unwrap();
        let path = det.path(&y, &s0).unwrap();
        let k = select_lambda_discrepancy(&path, 0.0, t);
        assert_eq!(k, path.len() - 1);
        let min = path
            .residual_energies
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(path.residual_energies[k], min);
        assert_eq!(det.detect(&y, &s0, 0.0).unwrap().states, s);
    }

    #[test]
    fn pure_noise_selects_zero_vector() {
        // With f = 0 the zero solution has expected residual energy T·σ²,
        // which is exactly the discrepancy target.
        let (m, t, p, sigma2) = (32, 16, 10f64.powf(-2.0), 1e-9);
        let h = channel(m);
        let b = submatrix_tags(m, t, 5).unwrap();
        let det = LassoDetector::new(&b, &h, p, LassoOptions::default()).unwrap();
        let s0 = StateVector::all_working(m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 1000;
        let mut zero = 0;
        for _ in 0..trials {
            let y = synthesize(&b, &h, &s0, p, sigma2, &mut rng).unwrap().y;
            if det.detect(&y, &s0, sigma2).unwrap().states == s0 {
                zero += 1;
            }
        }
        assert!(
            zero as f64 / trials as f64 > 0.95,
            "zero-decision rate {zero}/{trials}"
        );
    }

    #[test]
    fn threshold_rules() {
        let s0 = StateVector::all_working(2);
        assert_eq!(threshold_decide(&[0.9, 0.1], 0.5, &s0).0, vec![true, false]);
        assert_eq!(
            threshold_decide(&[0.5], 0.5, &StateVector::all_working(1)).0,
            vec![false]
        );
        assert_eq!(
            threshold_decide(&[-0.2], 0.5, &StateVector::all_working(1)).0,
            vec![false]
        );
        let s0 = StateVector(vec![false, true]);
        assert_eq!(threshold_decide(&[0.9, 0.9], 0.5, &s0).0, vec![false, true]);
    }

    #[test]
    fn recovery_rules() {
        let s0 = StateVector::all_working(3);
        let f = FailureIndicator(vec![false, true, false]);
        assert_eq!(recover_states(&s0, &f).unwrap().0, vec![true, false, true]);
        assert_eq!(
            recover_states(&s0, &FailureIndicator(vec![false; 3])).unwrap(),
            s0
        );
        assert_eq!(
            recover_states(&s0, &FailureIndicator(vec![true; 3])).unwrap(),
            StateVector::all_failed(3)
        );
        let s0 = StateVector(vec![true, false]);
        assert!(matches!(
            recover_states(&s0, &FailureIndicator(vec![false, true])),
            Err(SwanError::SupportViolation(1))
        ));
    }

    #[test]
    fn detector_end_to_end_high_snr() {
        let (m, t, p, sigma2) = (64, 32, 1.0, 1e-9);
        let h = channel(m);
        let b = submatrix_tags(m, t, 6).unwrap();
        let det = LassoDetector::new(&b, &h, p, LassoOptions::default()).unwrap();
        let s0 = StateVector::all_working(m);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut ok = 0;
        for _ in 0..100 {
            let s = sample_states(m, 0.02, &mut rng);
            let y = synthesize(&b, &h, &s, p, sigma2, &mut rng).unwrap().y;
            if det.detect(&y, &s0, sigma2).unwrap().states == s {
                ok += 1;
            }
        }
        assert!(ok >= 75, "{ok}/100 exact recoveries");
    }

    #[test]
    fn diagnostics_csv() {
        let path = LassoPath {
            lambdas: vec![1.0, 0.5],
            coefficients: vec![vec![0.0, 0.0], vec![0.2, 0.0]],
            residual_energies: vec![3.0, 1.5],
        };
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda,support,residual_energy\n1,0,3\n0.5,1,1.5\n"
        );
    }
}
