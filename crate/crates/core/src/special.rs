//! Digamma and trigamma functions and the moments of a log-chi-squared variate.
//!
//! Both functions lift small arguments with the upward recurrences
//! `ψ(x) = ψ(x + 1) - 1/x` and `ψ'(x) = ψ'(x + 1) + 1/x²` until `x ≥ 8`, then
//! evaluate the asymptotic expansions with Bernoulli terms through `x^-14`.
//! The truncation error at `x = 8` is below `2e-15`.

use crate::error::{HurstError, Result};

const ASYMPTOTIC_THRESHOLD: f64 = 8.0;

/// `B_{2k}` for k = 1..=7.
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(HurstError::domain(format!(
            "{what} requires x > 0, got {x}"
        )))
    }
}

/// ψ(x), the logarithmic derivative of the gamma function.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x, "digamma")?;
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Horner over k = 7..1 of B_{2k} / (2k x^{2k}).
    let mut series = 0.0;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate().rev() {
        series = (series + b / (2.0 * (k as f64 + 1.0))) * inv2;
    }
    Ok(x.ln() - 0.5 / x - series - shift)
}

/// ψ'(x), the derivative of the digamma function.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive(x, "trigamma")?;
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for b in BERNOULLI_EVEN.iter().rev() {
        series = (series + b) * inv2;
    }
    Ok(inv + 0.5 * inv2 + series * inv + shift)
}

/// Mean and variance (natural-log units) of `W = ln X` with `X ~ χ²_dof`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogChiSquaredMoments {
    pub dof: u64,
    pub mean: f64,
    pub variance: f64,
}

/// `E[W] = ln 2 + ψ(dof/2)` and `Var[W] = ψ'(dof/2)`.
pub fn log_chi2_moments(dof: u64) -> Result<LogChiSquaredMoments> {
    if dof < 1 {
        return Err(HurstError::domain("log-chi-squared moments need dof >= 1"));
    }
    let half = dof as f64 / 2.0;
    Ok(LogChiSquaredMoments {
        dof,
        mean: std::f64::consts::LN_2 + digamma(half)?,
        variance: trigamma(half)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    // Closed forms at integers and half-integers, summed in a different order
    // from the recurrence used by the implementation.
    fn digamma_integer(n: u32) -> f64 {
        -EULER_GAMMA + (1..n).map(|k| 1.0 / k as f64).sum::<f64>()
    }

    fn digamma_half_integer(n: u32) -> f64 {
        // ψ(n + 1/2)
        -EULER_GAMMA - 2.0 * LN_2 + (1..=n).map(|k| 2.0 / (2 * k - 1) as f64).sum::<f64>()
    }

    fn trigamma_integer(n: u32) -> f64 {
        PI * PI / 6.0 - (1..n).map(|k| 1.0 / (k as f64).powi(2)).sum::<f64>()
    }

    fn trigamma_half_integer(n: u32) -> f64 {
        PI * PI / 2.0
            - (1..=n)
                .map(|k| 4.0 / ((2 * k - 1) as f64).powi(2))
                .sum::<f64>()
    }

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-14);
        assert!((digamma(1.0).unwrap() - (-0.577_215_664_9)).abs() < 1e-10);
        assert!((digamma(0.5).unwrap() - (-1.963_510_026_0)).abs() < 1e-10);
        assert!((digamma(0.5).unwrap() + EULER_GAMMA + 2.0 * LN_2).abs() < 1e-14);
        assert!((digamma(2.0).unwrap() - digamma(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trigamma_reference_values() {
        assert!((trigamma(1.0).unwrap() - PI * PI / 6.0).abs() < 1e-14);
        assert!((trigamma(1.0).unwrap() - 1.644_934_066_8).abs() < 1e-10);
        assert!((trigamma(2.0).unwrap() - (trigamma(1.0).unwrap() - 1.0)).abs() < 1e-15);
        for x in [0.5, 1.0, 8.0, 1024.0] {
            assert!(trigamma(x).unwrap() > 0.0);
        }
    }

    #[test]
    fn matches_closed_forms_on_integer_and_half_integer_grid() {
        for n in 1..200u32 {
            let d = digamma(n as f64).unwrap();
            assert!((d - digamma_integer(n)).abs() < 1e-12, "psi({n})");
            let t = trigamma(n as f64).unwrap();
            assert!((t - trigamma_integer(n)).abs() < 1e-12, "psi'({n})");
        }
        for n in 0..200u32 {
            let x = n as f64 + 0.5;
            assert!((digamma(x).unwrap() - digamma_half_integer(n)).abs() < 1e-12);
            assert!((trigamma(x).unwrap() - trigamma_half_integer(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn recurrences_hold_on_dense_grid() {
        let mut x = 0.5;
        while x <= 100.0 {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
            let t = trigamma(x + 1.0).unwrap() - trigamma(x).unwrap() + 1.0 / (x * x);
            assert!(d.abs() <= 1e-12, "digamma recurrence at {x}: {d}");
            assert!(t.abs() <= 1e-12, "trigamma recurrence at {x}: {t}");
            x += 0.013;
        }
    }

    #[test]
    fn monotone_on_wide_grid() {
        let mut prev_d = f64::NEG_INFINITY;
        let mut prev_t = f64::INFINITY;
        let mut x = 0.5;
        while x <= 1e6 {
            let d = digamma(x).unwrap();
            let t = trigamma(x).unwrap();
            assert!(d > prev_d, "digamma not increasing at {x}");
            assert!(t < prev_t, "trigamma not decreasing at {x}");
            prev_d = d;
            prev_t = t;
            x *= 1.01;
        }
    }

    #[test]
    fn rejects_nonpositive_arguments() {
        for x in [0.0, -1.0, -0.5, f64::NAN] {
            assert!(matches!(digamma(x), Err(HurstError::Domain(_))));
            assert!(matches!(trigamma(x), Err(HurstError::Domain(_))));
        }
        assert!(log_chi2_moments(0).is_err());
    }

    #[test]
    fn log_chi2_moments_examples() {
        let m = log_chi2_moments(2).unwrap();
        assert!((m.mean - (LN_2 - EULER_GAMMA)).abs() < 1e-14);
        assert!((m.mean - 0.1159).abs() < 1e-4);
        assert!((m.variance - 1.6449).abs() < 1e-4);
        let diff = log_chi2_moments(1024).unwrap().mean - log_chi2_moments(512).unwrap().mean;
        assert!((diff - LN_2).abs() < 0.002);
    }

    #[test]
    fn log_chi2_moments_monotone_in_dof() {
        let mut prev = log_chi2_moments(1).unwrap();
        assert!(prev.variance > 0.0);
        for dof in 2..5000 {
            let m = log_chi2_moments(dof).unwrap();
            assert!(m.variance > 0.0);
            assert!(m.mean > prev.mean);
            assert!(m.variance < prev.variance);
            prev = m;
        }
    }
}
