//! From raw samples to a Hurst estimate.
//!
//! The periodic transform treats the path as if it wrapped around. For fBm
//! the wrap joins `X(N-1)` to `X(0)`, a jump that leaks into every level and
//! dominates the fine levels when `H` is large. Subtracting the chord through
//! the two endpoints closes the gap; linear trends are annihilated by any
//! filter with two or more vanishing moments, so the interior coefficients
//! are untouched.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_pairs, normalize_weights, weighted_median, Aggregate};
use crate::error::{HurstError, Result};
use crate::estimators::{
    all_pair_estimates, estimate_noise_variance, spectrum_regression, Method, NoiseEstimate,
    PairEstimate, SpectrumFit,
};
use crate::wavelet::{all_level_energies, dwt, LevelEnergy, WaveletDecomposition, WaveletFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    /// Remove the straight line through the first and last sample.
    #[default]
    Endpoint,
}

impl FromStr for Detrend {
    type Err = HurstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "endpoint" => Ok(Self::Endpoint),
            _ => Err(HurstError::Lookup {
                kind: "detrend mode",
                name: s.to_string(),
            }),
        }
    }
}

/// `x[k] - (x[N-1] - x[0]) k / (N - 1)`.
pub fn detrend_endpoint(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n < 2 {
        return samples.to_vec();
    }
    let slope = (samples[n - 1] - samples[0]) / (n - 1) as f64;
    samples
        .iter()
        .enumerate()
        .map(|(k, v)| v - slope * k as f64)
        .collect()
}

/// Where the NC-ALPHEE noise variance comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    /// Sample variance of the finest detail level.
    #[default]
    Estimate,
    /// A known noise standard deviation.
    Fixed(f64),
}

impl FromStr for NoiseSource {
    type Err = HurstError;

    /// `estimate` or `fixed:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "estimate" {
            return Ok(Self::Estimate);
        }
        let bad = || {
            HurstError::Config(format!(
                "noise source `{s}` is neither `estimate` nor `fixed:<sigma>`"
            ))
        };
        let value = s.strip_prefix("fixed:").ok_or_else(bad)?;
        let sigma: f64 = value.parse().map_err(|_| bad())?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(bad());
        }
        Ok(Self::Fixed(sigma))
    }
}

/// Decomposition-level summary of one signal.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub decomposition: WaveletDecomposition,
    pub energies: Vec<LevelEnergy>,
    pub noise: NoiseEstimate,
}

/// Detrends, decomposes down to level 0, and computes every level energy.
pub fn analyze(
    samples: &[f64],
    filter: &WaveletFilter,
    detrend: Detrend,
    noise: NoiseSource,
) -> Result<Analysis> {
    if filter.vanishing_moments() < 2 {
        log::warn!(
            "filter {} has {} vanishing moment(s); its detail coefficients stay correlated and it should not be used for estimation",
            filter.name(),
            filter.vanishing_moments()
        );
    }
    let prepared = match detrend {
        Detrend::None => samples.to_vec(),
        Detrend::Endpoint => detrend_endpoint(samples),
    };
    let decomposition = dwt(&prepared, filter, 0)?;
    let energies = all_level_energies(&decomposition);
    let noise = match noise {
        NoiseSource::Estimate => estimate_noise_variance(&decomposition)?,
        NoiseSource::Fixed(sigma) => NoiseEstimate::fixed(sigma * sigma)?,
    };
    Ok(Analysis {
        decomposition,
        energies,
        noise,
    })
}

/// Final estimate of one method and aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub method: Method,
    pub aggregate: Aggregate,
    /// `None` when no valid candidate remained.
    pub h_hat: Option<f64>,
    pub valid_pairs: usize,
    pub excluded_pairs: usize,
    pub j_min: usize,
    pub j_max: usize,
    pub noise: Option<NoiseEstimate>,
    pub fit: Option<SpectrumFit>,
    pub pairs: Vec<PairEstimate>,
}

impl Analysis {
    pub fn pairs(&self, method: Method, j_min: usize, j_max: usize) -> Result<Vec<PairEstimate>> {
        self.check_range(j_min, j_max)?;
        all_pair_estimates(&self.energies, j_min, j_max, method, Some(&self.noise))
    }

    pub fn spectrum_fit(&self, j_min: usize, j_max: usize) -> Result<SpectrumFit> {
        self.check_range(j_min, j_max)?;
        spectrum_regression(&self.energies, j_min, j_max)
    }

    /// Runs `method` over `[j_min, j_max]` and combines the candidates.
    ///
    /// The standard method only supports [`Aggregate::Ols`]; the learned
    /// aggregate is applied by the caller via [`nn_features`].
    pub fn estimate(
        &self,
        method: Method,
        aggregate: Aggregate,
        j_min: usize,
        j_max: usize,
    ) -> Result<Estimate> {
        let mut out = Estimate {
            method,
            aggregate,
            h_hat: None,
            valid_pairs: 0,
            excluded_pairs: 0,
            j_min,
            j_max,
            noise: (method == Method::NcAlphee).then_some(self.noise),
            fit: None,
            pairs: Vec::new(),
        };
        if method == Method::Standard {
            if aggregate != Aggregate::Ols {
                return Err(HurstError::Config(format!(
                    "the standard method has no candidates to combine with `{aggregate}`"
                )));
            }
            let fit = self.spectrum_fit(j_min, j_max)?;
            out.h_hat = Some(fit.h_hat);
            out.fit = Some(fit);
            return Ok(out);
        }
        let pairs = self.pairs(method, j_min, j_max)?;
        out.valid_pairs = pairs.iter().filter(|p| p.is_valid()).count();
        out.excluded_pairs = pairs.len() - out.valid_pairs;
        out.h_hat = match aggregate_pairs(&pairs, aggregate) {
            Ok(h) => Some(h),
            Err(HurstError::NoData(_)) => None,
            Err(e) => return Err(e),
        };
        out.pairs = pairs;
        Ok(out)
    }

    fn check_range(&self, j_min: usize, j_max: usize) -> Result<()> {
        let top = self.decomposition.j_max();
        if j_max > top {
            return Err(HurstError::domain(format!(
                "level {j_max} exceeds the finest level {top} of a length-{} signal",
                self.decomposition.signal_len()
            )));
        }
        if j_min > j_max {
            return Err(HurstError::domain(format!(
                "empty level range [{j_min}, {j_max}]"
            )));
        }
        Ok(())
    }
}

/// Feature vector for the learned aggregator: every pair estimate in order,
/// with invalid pairs replaced by the weighted median of the valid ones.
pub fn nn_features(pairs: &[PairEstimate]) -> Result<Vec<f64>> {
    let fill = weighted_median(&normalize_weights(pairs)?);
    Ok(pairs.iter().map(|p| p.h_hat().unwrap_or(fill)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{generate_fbm, SignalSpec};
    use crate::wavelet::make_filter;

    #[test]
    fn endpoint_detrend_closes_the_path() {
        let x = [1.0, 4.0, 2.0, 7.0];
        let d = detrend_endpoint(&x);
        assert_eq!(d[0], 1.0);
        assert!((d[3] - 1.0).abs() < 1e-15);
        assert!((d[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn noise_source_parsing() {
        assert_eq!(
            "estimate".parse::<NoiseSource>().unwrap(),
            NoiseSource::Estimate
        );
        assert_eq!(
            "fixed:0.25".parse::<NoiseSource>().unwrap(),
            NoiseSource::Fixed(0.25)
        );
        for bad in ["fixed:", "fixed:-1", "known", "fixed:abc"] {
            assert!(bad.parse::<NoiseSource>().is_err(), "{bad}");
        }
    }

    #[test]
    fn standard_method_only_takes_ols() {
        let path = generate_fbm(&SignalSpec::new(1 << 10, 0.5, 1)).unwrap();
        let a = analyze(
            path.samples(),
            &make_filter("sym6").unwrap(),
            Detrend::Endpoint,
            NoiseSource::Estimate,
        )
        .unwrap();
        let e = a.estimate(Method::Standard, Aggregate::Ols, 3, 9).unwrap();
        assert!(e.fit.is_some() && e.pairs.is_empty());
        assert!(a
            .estimate(Method::Standard, Aggregate::Wmedian, 3, 9)
            .is_err());
        assert!(a.estimate(Method::Alphee, Aggregate::Wmean, 3, 10).is_err());
        let e = a
            .estimate(Method::NcAlphee, Aggregate::Wmedian, 3, 9)
            .unwrap();
        assert_eq!(e.pairs.len(), 21);
        assert_eq!(e.valid_pairs + e.excluded_pairs, 21);
    }

    #[test]
    fn features_impute_invalid_pairs() {
        use crate::estimators::{InvalidReason, PairOutcome};
        let v = |h, var| PairOutcome::Valid {
            h_hat: h,
            variance: var,
        };
        let pairs = [
            PairEstimate {
                j1: 3,
                j2: 4,
                outcome: v(0.2, 1.0),
            },
            PairEstimate {
                j1: 3,
                j2: 5,
                outcome: PairOutcome::Invalid(InvalidReason::NoiseDominates),
            },
            PairEstimate {
                j1: 4,
                j2: 5,
                outcome: v(0.6, 0.1),
            },
        ];
        assert_eq!(nn_features(&pairs).unwrap(), vec![0.2, 0.6, 0.6]);
    }
}
