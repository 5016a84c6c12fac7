//! Closed-form error probabilities for orthogonal tags.

use libm::erfc;

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Per-segment error probability of the ML detector with orthogonal tags.
///
/// With `â_m ~ CN(s_m·h_m, σ²/(PT))` the decision statistic `Re{h_m*·â_m}`
/// is real Gaussian with variance `|h_m|²σ²/(2PT)`, and both hypotheses sit
/// `|h_m|²/2` from the threshold, so the error is
/// `Q(|h_m|·√(PT/(2σ²)))` regardless of the prior.
pub fn analytic_error(h_abs: f64, power: f64, pilot_len: usize, sigma2: f64) -> f64 {
    if sigma2 == 0.0 {
        return if h_abs > 0.0 { 0.0 } else { 0.5 };
    }
    q_function(h_abs * (power * pilot_len as f64 / (2.0 * sigma2)).sqrt())
}

/// Binomial standard deviation of a rate estimated from `n` trials.
pub fn binomial_sd(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Error probability by integrating the two class-conditional densities
    /// of the scalar statistic over the wrong side of the threshold.
    fn integrate_error(h_abs: f64, power: f64, t: usize, sigma2: f64) -> f64 {
        let var = h_abs * h_abs * sigma2 / (2.0 * power * t as f64);
        let sd = var.sqrt();
        let (mu0, mu1, thr) = (0.0, h_abs * h_abs, h_abs * h_abs / 2.0);
        let pdf = |x: f64, mu: f64| {
            (-(x - mu).powi(2) / (2.0 * var)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        // Composite Simpson over ±12σ around each mean.
        let simpson = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
            let n = 20_000;
            let step = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for i in 1..n {
                acc += f(a + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * step / 3.0
        };
        let false_alarm = simpson(mu1 - 12.0 * sd, thr, &|x| pdf(x, mu1));
        let missed = simpson(thr, mu0 + 12.0 * sd, &|x| pdf(x, mu0));
        // The two conditional errors agree; average them.
        0.5 * (false_alarm.max(0.0) + missed.max(0.0))
    }

    #[test]
    fn q_function_reference_values() {
        assert_eq!(q_function(0.0), 0.5);
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(q_function(1.0), 0.158_655_253_931_457_05) < 1e-13);
        assert!(rel(q_function(3.0), 1.349_898_031_630_094_6e-3) < 1e-13);
        assert!(rel(q_function(-1.0), 1.0 - 0.158_655_253_931_457_05) < 1e-13);
    }

    #[test]
    fn closed_form_matches_numeric_integration() {
        for &(h, p_db, t, s2) in &[
            (2.8401e-4, -25.0, 16usize, 1e-9),
            (1.36e-4, -30.0, 13, 1e-9),
            (2.8e-4, -15.0, 32, 1e-9),
            (5e-5, -20.0, 8, 1e-9),
        ] {
            let p: f64 = 10f64.powf(p_db / 10.0);
            let closed = analytic_error(h, p, t, s2);
            let numeric = integrate_error(h, p, t, s2);
            assert!(
                (closed - numeric).abs() <= 1e-9_f64.max(1e-7 * closed),
                "{closed} vs {numeric}"
            );
        }
    }

    #[test]
    fn worked_example_and_scalar_monte_carlo() {
        let (h, s2, t, p) = (2.8401e-4, 1e-9, 16, 10f64.powf(-2.5));
        let x = h * (p * t as f64 / (2.0 * s2)).sqrt();
        assert!((x - 1.43).abs() < 5e-3);
        let pe = analytic_error(h, p, t, s2);
        assert!((pe - 0.077).abs() < 1e-3, "{pe}");

        // Scalar Monte-Carlo of the working hypothesis.
        let n = 1_000_000u64;
        let sd = (h * h * s2 / (2.0 * p * t as f64)).sqrt();
        let noise = Normal::new(0.0, sd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let errors = (0..n)
            .filter(|_| h * h + noise.sample(&mut rng) <= h * h / 2.0)
            .count() as f64;
        let rate = errors / n as f64;
        assert!(
            (rate - pe).abs() < 4.0 * binomial_sd(pe, n),
            "{rate} vs {pe}"
        );
    }

    #[test]
    fn limits() {
        assert!(analytic_error(1e-4, 1e6, 16, 1e-9) < 1e-300);
        assert_eq!(analytic_error(0.0, 1.0, 16, 1e-9), 0.5);
        assert_eq!(analytic_error(1e-4, 1.0, 16, 0.0), 0.0);
    }
}
