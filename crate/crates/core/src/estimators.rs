//! Wavelet-spectrum Hurst estimators.
//!
//! The standard estimator regresses the log energies on the level index. The
//! pairwise estimators compare the digamma-corrected log energies of two
//! levels at a time, each pair yielding one candidate `Ĥ` and a closed-form
//! variance. NC-ALPHEE first subtracts the white-noise contribution
//! `2σ_ε² e^{ψ(n/2)}` from each level's scaled energy; ALPHEE is its
//! noise-free special case.
//!
//! Everything is computed in natural logs and converted to base 2 once.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HurstError, Result};
use crate::special::{digamma, trigamma};
use crate::wavelet::{LevelEnergy, WaveletDecomposition};

/// Estimated (or supplied) variance of the additive white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseEstimate {
    pub sigma_eps_sq: f64,
    /// Level the estimate was taken from; `None` when supplied directly.
    pub source_level: Option<usize>,
}

impl NoiseEstimate {
    /// A known noise variance, bypassing estimation.
    pub fn fixed(sigma_eps_sq: f64) -> Result<Self> {
        if !(sigma_eps_sq.is_finite() && sigma_eps_sq >= 0.0) {
            return Err(HurstError::domain(format!(
                "noise variance must be finite and nonnegative, got {sigma_eps_sq}"
            )));
        }
        Ok(Self {
            sigma_eps_sq,
            source_level: None,
        })
    }

    pub fn zero() -> Self {
        Self {
            sigma_eps_sq: 0.0,
            source_level: None,
        }
    }
}

/// Sample variance (divisor `n - 1`) of the finest detail level.
pub fn estimate_noise_variance(decomp: &WaveletDecomposition) -> Result<NoiseEstimate> {
    let level = decomp.j_max();
    let d = decomp
        .detail(level)
        .ok_or_else(|| HurstError::shape("decomposition has no finest level"))?;
    if d.len() < 2 {
        return Err(HurstError::shape(format!(
            "finest level {level} has {} coefficient(s), need at least 2",
            d.len()
        )));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let ss = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok(NoiseEstimate {
        sigma_eps_sq: ss / (n - 1.0),
        source_level: Some(level),
    })
}

/// OLS fit `S(j) = β₀ - j β₁` over a level range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumFit {
    pub beta0: f64,
    pub beta1: f64,
    pub h_hat: f64,
    pub j_min: usize,
    pub j_max: usize,
    /// Levels actually used (degenerate levels are skipped).
    pub levels_used: usize,
}

/// Standard log-spectrum regression; `Ĥ = (β₁ - 1)/2`.
pub fn spectrum_regression(
    energies: &[LevelEnergy],
    j_min: usize,
    j_max: usize,
) -> Result<SpectrumFit> {
    let points: Vec<(f64, f64)> = energies
        .iter()
        .filter(|e| (j_min..=j_max).contains(&e.level))
        .filter_map(|e| e.log2_energy.map(|s| (e.level as f64, s)))
        .collect();
    if points.len() < 3 {
        return Err(HurstError::InsufficientData(format!(
            "spectrum regression over [{j_min}, {j_max}] has {} usable level(s), need 3",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let beta1 = -slope;
    Ok(SpectrumFit {
        beta0: my - slope * mx,
        beta1,
        h_hat: (beta1 - 1.0) / 2.0,
        j_min,
        j_max,
        levels_used: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    /// A level has identically zero energy.
    DegenerateEnergy,
    /// The bias-corrected energy `A_i` is not positive.
    NoiseDominates,
    /// `n_i ≤ 4`, where the variance terms are undefined.
    InsufficientDof,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DegenerateEnergy => "degenerate energy",
            Self::NoiseDominates => "noise dominates level",
            Self::InsufficientDof => "insufficient dof",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairOutcome {
    Valid { h_hat: f64, variance: f64 },
    Invalid(InvalidReason),
}

/// One candidate estimate from the level pair `(j1, j2)`, `j1 < j2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "PairRecord")]
pub struct PairEstimate {
    pub j1: usize,
    pub j2: usize,
    pub outcome: PairOutcome,
}

impl PairEstimate {
    pub fn is_valid(&self) -> bool {
        matches!(self.outcome, PairOutcome::Valid { .. })
    }

    pub fn h_hat(&self) -> Option<f64> {
        match self.outcome {
            PairOutcome::Valid { h_hat, .. } => Some(h_hat),
            PairOutcome::Invalid(_) => None,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self.outcome {
            PairOutcome::Valid { variance, .. } => Some(variance),
            PairOutcome::Invalid(_) => None,
        }
    }

    pub fn invalid_reason(&self) -> Option<InvalidReason> {
        match self.outcome {
            PairOutcome::Valid { .. } => None,
            PairOutcome::Invalid(r) => Some(r),
        }
    }

    fn invalid(j1: usize, j2: usize, reason: InvalidReason) -> Self {
        Self {
            j1,
            j2,
            outcome: PairOutcome::Invalid(reason),
        }
    }
}

/// Flat serialized form of a [`PairEstimate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub j1: usize,
    pub j2: usize,
    pub h_hat: Option<f64>,
    pub variance: Option<f64>,
    pub valid: bool,
    pub reason: Option<String>,
}

impl From<PairEstimate> for PairRecord {
    fn from(p: PairEstimate) -> Self {
        Self {
            j1: p.j1,
            j2: p.j2,
            h_hat: p.h_hat(),
            variance: p.variance(),
            valid: p.is_valid(),
            reason: p.invalid_reason().map(|r| r.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Alphee,
    NcAlphee,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Alphee => "alphee",
            Self::NcAlphee => "nc_alphee",
        }
    }

    pub fn is_pairwise(&self) -> bool {
        !matches!(self, Self::Standard)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = HurstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "standard" => Ok(Self::Standard),
            "alphee" => Ok(Self::Alphee),
            "nc_alphee" => Ok(Self::NcAlphee),
            _ => Err(HurstError::Lookup {
                kind: "method",
                name: s.to_string(),
            }),
        }
    }
}

fn check_order(e1: &LevelEnergy, e2: &LevelEnergy) -> Result<()> {
    if e1.level >= e2.level {
        return Err(HurstError::domain(format!(
            "pair levels must satisfy j1 < j2, got ({}, {})",
            e1.level, e2.level
        )));
    }
    Ok(())
}

/// ALPHEE estimate from two noise-free levels.
pub fn alphee_pair(e1: &LevelEnergy, e2: &LevelEnergy) -> Result<PairEstimate> {
    check_order(e1, e2)?;
    let (j1, j2) = (e1.level, e2.level);
    if e1.is_degenerate() || e2.is_degenerate() {
        return Ok(PairEstimate::invalid(
            j1,
            j2,
            InvalidReason::DegenerateEnergy,
        ));
    }
    let half1 = e1.count as f64 / 2.0;
    let half2 = e2.count as f64 / 2.0;
    let dj = j1 as f64 - j2 as f64;
    let psi_diff = digamma(half1)? - digamma(half2)?;
    let log_ratio = (e1.mean_sq.ln() - e2.mean_sq.ln()) / LN_2;
    let h_hat = (psi_diff / LN_2 - log_ratio) / (2.0 * dj) - 1.0;
    let denom = 2.0 * dj * LN_2;
    let variance = (trigamma(half1)? + trigamma(half2)?) / (denom * denom);
    Ok(PairEstimate {
        j1,
        j2,
        outcome: PairOutcome::Valid { h_hat, variance },
    })
}

/// NC-ALPHEE estimate from two noisy levels and a noise variance.
pub fn nc_alphee_pair(
    e1: &LevelEnergy,
    e2: &LevelEnergy,
    noise: &NoiseEstimate,
) -> Result<PairEstimate> {
    check_order(e1, e2)?;
    let (j1, j2) = (e1.level, e2.level);
    if e1.count <= 4 || e2.count <= 4 {
        return Ok(PairEstimate::invalid(
            j1,
            j2,
            InvalidReason::InsufficientDof,
        ));
    }
    if e1.is_degenerate() || e2.is_degenerate() {
        return Ok(PairEstimate::invalid(
            j1,
            j2,
            InvalidReason::DegenerateEnergy,
        ));
    }
    let s2 = noise.sigma_eps_sq;
    let mut log_a = [0.0; 2];
    let mut var_sum = 0.0;
    for (i, e) in [e1, e2].into_iter().enumerate() {
        let n = e.count as f64;
        let psi = digamma(n / 2.0)?;
        let e_psi = psi.exp();
        let a = n * e.mean_sq - 2.0 * s2 * e_psi;
        if !(a > 0.0) {
            return Ok(PairEstimate::invalid(j1, j2, InvalidReason::NoiseDominates));
        }
        log_a[i] = a.ln();
        let r = s2 / e.mean_sq;
        var_sum += trigamma(n / 2.0)?
            + 8.0 * r * r * e_psi * e_psi / ((n - 2.0) * (n - 2.0) * (n - 4.0))
            + 8.0 * r * e_psi / ((n - 2.0) * n);
    }
    let psi_diff = digamma(e1.count as f64 / 2.0)? - digamma(e2.count as f64 / 2.0)?;
    let dj = j1 as f64 - j2 as f64;
    let h_hat = (psi_diff / LN_2 - (log_a[0] - log_a[1]) / LN_2) / (2.0 * dj) - 0.5;
    let denom = 2.0 * dj * LN_2;
    Ok(PairEstimate {
        j1,
        j2,
        outcome: PairOutcome::Valid {
            h_hat,
            variance: var_sum / (denom * denom),
        },
    })
}

/// Number of unordered level pairs in `[j_min, j_max]`.
pub fn pair_count(j_min: usize, j_max: usize) -> usize {
    if j_max <= j_min {
        return 0;
    }
    let k = j_max - j_min + 1;
    k * (k - 1) / 2
}

/// Level pairs of `[j_min, j_max]` in lexicographic order.
pub fn pair_order(j_min: usize, j_max: usize) -> Vec<(usize, usize)> {
    (j_min..=j_max)
        .flat_map(|j1| (j1 + 1..=j_max).map(move |j2| (j1, j2)))
        .collect()
}

/// Every pair estimate in `[j_min, j_max]`, lexicographic in `(j1, j2)`.
///
/// Invalid pairs are kept in place so the output length is always
/// [`pair_count`].
pub fn all_pair_estimates(
    energies: &[LevelEnergy],
    j_min: usize,
    j_max: usize,
    method: Method,
    noise: Option<&NoiseEstimate>,
) -> Result<Vec<PairEstimate>> {
    if j_max <= j_min {
        return Err(HurstError::InsufficientData(format!(
            "level range [{j_min}, {j_max}] contains no pair"
        )));
    }
    let by_level = |j: usize| {
        energies.iter().find(|e| e.level == j).ok_or_else(|| {
            HurstError::InsufficientData(format!("no energy supplied for level {j}"))
        })
    };
    let range: Vec<&LevelEnergy> = (j_min..=j_max).map(by_level).collect::<Result<_>>()?;
    let noise =
        match method {
            Method::NcAlphee => Some(noise.ok_or_else(|| {
                HurstError::Config("nc_alphee needs a noise estimate".to_string())
            })?),
            Method::Alphee => None,
            Method::Standard => {
                return Err(HurstError::domain(
                    "the standard method has no pair estimates",
                ));
            }
        };
    let mut out = Vec::with_capacity(pair_count(j_min, j_max));
    for (a, e1) in range.iter().enumerate() {
        for e2 in &range[a + 1..] {
            out.push(match noise {
                Some(noise) => nc_alphee_pair(e1, e2, noise)?,
                None => alphee_pair(e1, e2)?,
            });
        }
    }
    Ok(out)
}
