use serde::Serialize;

use super::transform::WaveletDecomposition;
use crate::error::{HurstError, Result};

/// Mean squared detail coefficient of one level and its base-2 logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelEnergy {
    pub level: usize,
    pub count: usize,
    pub mean_sq: f64,
    /// `log2(mean_sq)`; `None` when the level is identically zero.
    pub log2_energy: Option<f64>,
}

impl LevelEnergy {
    pub fn from_coefficients(level: usize, coefficients: &[f64]) -> Self {
        let count = coefficients.len();
        let mean_sq = coefficients.iter().map(|d| d * d).sum::<f64>() / count as f64;
        Self::new(level, count, mean_sq)
    }

    pub fn new(level: usize, count: usize, mean_sq: f64) -> Self {
        let log2_energy = (mean_sq > 0.0).then(|| mean_sq.log2());
        Self {
            level,
            count,
            mean_sq,
            log2_energy,
        }
    }

    /// `count = 2^level`, the exact periodic-boundary count.
    pub fn dyadic(level: usize, mean_sq: f64) -> Self {
        Self::new(level, 1 << level, mean_sq)
    }

    pub fn is_degenerate(&self) -> bool {
        self.log2_energy.is_none()
    }
}

/// One [`LevelEnergy`] per level in `[j_min, j_max]`.
pub fn level_energies(
    decomp: &WaveletDecomposition,
    j_min: usize,
    j_max: usize,
) -> Result<Vec<LevelEnergy>> {
    if j_min > j_max {
        return Err(HurstError::domain(format!(
            "empty level range [{j_min}, {j_max}]"
        )));
    }
    if j_min < decomp.j0() || j_max > decomp.j_max() {
        return Err(HurstError::domain(format!(
            "level range [{j_min}, {j_max}] outside decomposition levels [{}, {}]",
            decomp.j0(),
            decomp.j_max()
        )));
    }
    let energies: Vec<LevelEnergy> = (j_min..=j_max)
        .map(|j| LevelEnergy::from_coefficients(j, decomp.detail(j).expect("level in range")))
        .collect();
    for e in energies.iter().filter(|e| e.is_degenerate()) {
        log::debug!(
            "level {} has zero energy and is excluded from estimation",
            e.level
        );
    }
    Ok(energies)
}

/// Energies of every detail level of `decomp`.
pub fn all_level_energies(decomp: &WaveletDecomposition) -> Vec<LevelEnergy> {
    level_energies(decomp, decomp.j0(), decomp.j_max()).expect("full range is always valid")
}
