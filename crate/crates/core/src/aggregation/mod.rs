//! Combining pairwise candidates into a single Hurst estimate.

mod mlp;
mod search;
mod train;

pub use mlp::{Activation, FeatureScaler, Gradients, Layer, MlpModel, MODEL_FORMAT_VERSION};
pub use search::{
    hyperparam_search, preset, SearchOutcome, SearchRanges, TrialSummary, PRESET_NAMES,
};
pub use train::{mlp_train, TrainConfig, TrainReport, TrainRow};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{HurstError, Result};
use crate::estimators::PairEstimate;

/// Distance from one half below which a cumulative weight counts as exactly ½.
pub const HALF_WEIGHT_TOLERANCE: f64 = 1e-12;

/// Valid candidates with normalized inverse-variance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCandidates {
    estimates: Vec<f64>,
    weights: Vec<f64>,
    pair_ids: Vec<(usize, usize)>,
    excluded: usize,
}

impl WeightedCandidates {
    /// Builds candidates from raw positive weights, normalizing them to sum to 1.
    pub fn new(
        estimates: Vec<f64>,
        raw_weights: Vec<f64>,
        pair_ids: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if estimates.is_empty() {
            return Err(HurstError::NoData("no candidate estimates".into()));
        }
        if raw_weights.len() != estimates.len() || pair_ids.len() != estimates.len() {
            return Err(HurstError::shape(
                "estimates, weights and pair ids differ in length",
            ));
        }
        if let Some(w) = raw_weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(HurstError::domain(format!(
                "weights must be positive and finite, got {w}"
            )));
        }
        if let Some(h) = estimates.iter().find(|h| !h.is_finite()) {
            return Err(HurstError::domain(format!(
                "candidate estimate {h} is not finite"
            )));
        }
        let total: f64 = raw_weights.iter().sum();
        let weights = raw_weights.iter().map(|w| w / total).collect();
        Ok(Self {
            estimates,
            weights,
            pair_ids,
            excluded: 0,
        })
    }

    /// Equal weights over `estimates`, with placeholder pair ids `(i, i + 1)`.
    pub fn uniform(estimates: Vec<f64>) -> Result<Self> {
        let n = estimates.len();
        Self::new(
            estimates,
            vec![1.0; n],
            (0..n).map(|i| (i, i + 1)).collect(),
        )
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pair_ids(&self) -> &[(usize, usize)] {
        &self.pair_ids
    }

    /// Invalid pairs dropped during construction.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

/// Inverse-variance weights over the valid pairs; invalid pairs are counted and dropped.
pub fn normalize_weights(pairs: &[PairEstimate]) -> Result<WeightedCandidates> {
    let mut estimates = Vec::with_capacity(pairs.len());
    let mut raw = Vec::with_capacity(pairs.len());
    let mut ids = Vec::with_capacity(pairs.len());
    for p in pairs {
        if let (Some(h), Some(v)) = (p.h_hat(), p.variance()) {
            estimates.push(h);
            raw.push(1.0 / v);
            ids.push((p.j1, p.j2));
        }
    }
    if estimates.is_empty() {
        return Err(HurstError::NoData(format!(
            "all {} pair estimates are invalid",
            pairs.len()
        )));
    }
    let mut c = WeightedCandidates::new(estimates, raw, ids)?;
    c.excluded = pairs.len() - c.len();
    Ok(c)
}

pub fn weighted_mean(c: &WeightedCandidates) -> f64 {
    c.estimates.iter().zip(&c.weights).map(|(h, w)| h * w).sum()
}

/// Order statistic splitting the weight into halves.
///
/// Ties in the estimates are ordered by pair id. When the weight below some
/// position is exactly ½ the midpoint of the two bracketing estimates is
/// returned.
pub fn weighted_median(c: &WeightedCandidates) -> f64 {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| {
        c.estimates[a]
            .total_cmp(&c.estimates[b])
            .then_with(|| c.pair_ids[a].cmp(&c.pair_ids[b]))
    });
    let mut below = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        let through = below + c.weights[i];
        if (through - 0.5).abs() <= HALF_WEIGHT_TOLERANCE && pos + 1 < order.len() {
            return 0.5 * (c.estimates[i] + c.estimates[order[pos + 1]]);
        }
        if through > 0.5 {
            return c.estimates[i];
        }
        below = through;
    }
    c.estimates[*order.last().expect("non-empty")]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Mean,
    Median,
    Wmean,
    Wmedian,
    Nn,
    /// The standard method's regression estimate, which has no candidates to combine.
    Ols,
}

impl Aggregate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Median => "median",
            Self::Wmean => "wmean",
            Self::Wmedian => "wmedian",
            Self::Nn => "nn",
            Self::Ols => "ols",
        }
    }
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Aggregate {
    type Err = HurstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "wmean" | "weightedmean" => Ok(Self::Wmean),
            "wmedian" | "weightedmedian" => Ok(Self::Wmedian),
            "nn" => Ok(Self::Nn),
            "ols" => Ok(Self::Ols),
            _ => Err(HurstError::Lookup {
                kind: "aggregate",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithmeticKind {
    Mean,
    Median,
}

/// Unweighted mean or median; an even-length median is the midpoint.
pub fn arithmetic_aggregate(estimates: &[f64], kind: ArithmeticKind) -> Result<f64> {
    if estimates.is_empty() {
        return Err(HurstError::NoData("no estimates to aggregate".into()));
    }
    let n = estimates.len();
    Ok(match kind {
        ArithmeticKind::Mean => estimates.iter().sum::<f64>() / n as f64,
        ArithmeticKind::Median => {
            let mut s = estimates.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            if n % 2 == 1 {
                s[n / 2]
            } else {
                0.5 * (s[n / 2 - 1] + s[n / 2])
            }
        }
    })
}

/// Applies one of the non-learned aggregates to a set of pair estimates.
pub fn aggregate_pairs(pairs: &[PairEstimate], aggregate: Aggregate) -> Result<f64> {
    match aggregate {
        Aggregate::Mean | Aggregate::Median => {
            let valid: Vec<f64> = pairs.iter().filter_map(PairEstimate::h_hat).collect();
            let kind = if aggregate == Aggregate::Mean {
                ArithmeticKind::Mean
            } else {
                ArithmeticKind::Median
            };
            arithmetic_aggregate(&valid, kind)
        }
        Aggregate::Wmean => Ok(weighted_mean(&normalize_weights(pairs)?)),
        Aggregate::Wmedian => Ok(weighted_median(&normalize_weights(pairs)?)),
        Aggregate::Nn | Aggregate::Ols => Err(HurstError::domain(format!(
            "aggregate `{aggregate}` is not a pair statistic"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{InvalidReason, PairOutcome};

    fn valid(j1: usize, j2: usize, h: f64, v: f64) -> PairEstimate {
        PairEstimate {
            j1,
            j2,
            outcome: PairOutcome::Valid {
                h_hat: h,
                variance: v,
            },
        }
    }

    fn weighted(estimates: &[f64], weights: &[f64]) -> WeightedCandidates {
        let ids = (0..estimates.len()).map(|i| (3, 4 + i)).collect();
        WeightedCandidates::new(estimates.to_vec(), weights.to_vec(), ids).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let c = normalize_weights(&[valid(3, 4, 0.2, 2.0), valid(3, 5, 0.4, 2.0)]).unwrap();
        assert_eq!(c.weights(), &[0.5, 0.5]);
        let c = normalize_weights(&[valid(3, 4, 0.2, 1.0), valid(3, 5, 0.4, 3.0)]).unwrap();
        assert!((c.weights()[0] - 0.75).abs() < 1e-15);
        assert!((c.weights()[1] - 0.25).abs() < 1e-15);
        let bad = PairEstimate {
            j1: 3,
            j2: 6,
            outcome: PairOutcome::Invalid(InvalidReason::NoiseDominates),
        };
        let c = normalize_weights(&[valid(3, 4, 0.2, 1.0), bad]).unwrap();
        assert_eq!(c.weights(), &[1.0]);
        assert_eq!(c.excluded(), 1);
        assert!(matches!(
            normalize_weights(&[bad]),
            Err(HurstError::NoData(_))
        ));
    }

    #[test]
    fn weighted_mean_examples() {
        assert!((weighted_mean(&weighted(&[0.2, 0.4], &[0.5, 0.5])) - 0.3).abs() < 1e-15);
        assert_eq!(weighted_mean(&weighted(&[0.62], &[1.0])), 0.62);
        let xs = [0.11, 0.29, 0.47, 0.52, 0.9];
        let mean = xs.iter().sum::<f64>() / 5.0;
        assert!(
            (weighted_mean(&WeightedCandidates::uniform(xs.to_vec()).unwrap()) - mean).abs()
                < 1e-14
        );
    }

    #[test]
    fn weighted_median_examples() {
        assert_eq!(
            weighted_median(&weighted(&[0.1, 0.5, 0.9], &[0.7, 0.2, 0.1])),
            0.1
        );
        assert!((weighted_median(&weighted(&[0.2, 0.4], &[0.5, 0.5])) - 0.3).abs() < 1e-15);
        let c = WeightedCandidates::uniform(vec![0.9, 0.1, 0.5, 0.3, 0.7]).unwrap();
        assert_eq!(weighted_median(&c), 0.5);
    }

    #[test]
    fn arithmetic_examples() {
        let med = ArithmeticKind::Median;
        assert_eq!(arithmetic_aggregate(&[0.1, 0.3, 0.5], med).unwrap(), 0.3);
        assert!(
            (arithmetic_aggregate(&[0.2, 0.4], ArithmeticKind::Mean).unwrap() - 0.3).abs() < 1e-15
        );
        assert!((arithmetic_aggregate(&[0.4, 0.2], med).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(arithmetic_aggregate(&[0.77], med).unwrap(), 0.77);
        assert!(matches!(
            arithmetic_aggregate(&[], med),
            Err(HurstError::NoData(_))
        ));
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(WeightedCandidates::new(vec![0.1], vec![0.0], vec![(1, 2)]).is_err());
        assert!(WeightedCandidates::new(vec![0.1, 0.2], vec![1.0], vec![(1, 2)]).is_err());
        assert!(WeightedCandidates::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn aggregate_names_round_trip() {
        for a in [
            Aggregate::Mean,
            Aggregate::Median,
            Aggregate::Wmean,
            Aggregate::Wmedian,
            Aggregate::Nn,
            Aggregate::Ols,
        ] {
            assert_eq!(a.as_str().parse::<Aggregate>().unwrap(), a);
        }
    }
}
