use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::Aggregate;
use crate::error::{HurstError, Result};
use crate::estimators::Method;
use crate::fbm::Sampling;
use crate::pipeline::{Detrend, NoiseSource};
use crate::wavelet::make_filter;

/// Lowest level used unless `allow_low_levels` is set; the two coarsest levels
/// hold too few coefficients for the chi-squared model.
pub const MIN_LEVEL: usize = 3;

/// Inclusive `[j_min, j_max]` per method, plus the learned aggregator's range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelRanges {
    pub standard: (usize, usize),
    pub alphee: (usize, usize),
    pub nc_alphee: (usize, usize),
    pub nn: (usize, usize),
}

impl Default for LevelRanges {
    fn default() -> Self {
        Self {
            standard: (3, 13),
            alphee: (3, 13),
            nc_alphee: (3, 13),
            nn: (3, 15),
        }
    }
}

impl LevelRanges {
    pub fn for_method(&self, method: Method) -> (usize, usize) {
        match method {
            Method::Standard => self.standard,
            Method::Alphee => self.alphee,
            Method::NcAlphee => self.nc_alphee,
        }
    }
}

/// A Monte Carlo grid. The JSON form uses these field names verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub h_grid: Vec<f64>,
    pub noise_grid: Vec<f64>,
    pub replicates: usize,
    pub signal_length: usize,
    pub filter: String,
    #[serde(default)]
    pub level_range: LevelRanges,
    pub methods: Vec<Method>,
    pub aggregates: Vec<Aggregate>,
    pub base_seed: u64,
    /// Permits `j_min < 3`.
    #[serde(default)]
    pub allow_low_levels: bool,
    #[serde(default)]
    pub detrend: Detrend,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub noise_source: NoiseSource,
    /// Model files used by the `nn` aggregate.
    #[serde(default)]
    pub nn_models: Vec<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            h_grid: (1..=8).map(|i| i as f64 / 10.0).collect(),
            noise_grid: vec![0.0, 0.1, 0.25, 0.5, 0.75, 1.0],
            replicates: 200,
            signal_length: 1 << 16,
            filter: "sym6".into(),
            level_range: LevelRanges::default(),
            methods: vec![Method::Standard, Method::Alphee, Method::NcAlphee],
            aggregates: vec![
                Aggregate::Mean,
                Aggregate::Median,
                Aggregate::Wmean,
                Aggregate::Wmedian,
            ],
            base_seed: 2024,
            allow_low_levels: false,
            detrend: Detrend::Endpoint,
            sampling: Sampling::UnitInterval,
            noise_source: NoiseSource::Estimate,
            nn_models: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| HurstError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_json(&text)?;
        // Model paths are relative to the config file.
        if let Some(dir) = path.parent() {
            for m in &mut config.nn_models {
                if m.is_relative() {
                    *m = dir.join(&*m);
                }
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Finest detail level, `log2(N) - 1`.
    pub fn finest_level(&self) -> usize {
        self.signal_length.trailing_zeros() as usize - 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HurstError::Config(m));
        if self.h_grid.is_empty() || self.noise_grid.is_empty() {
            return fail("h_grid and noise_grid must be non-empty".into());
        }
        if let Some(h) = self.h_grid.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
            return fail(format!("Hurst value {h} outside (0, 1)"));
        }
        if let Some(s) = self
            .noise_grid
            .iter()
            .find(|s| !(s.is_finite() && **s >= 0.0))
        {
            return fail(format!("noise level {s} must be nonnegative"));
        }
        if self.replicates == 0 {
            return fail("replicates must be positive".into());
        }
        if self.signal_length < 16 || !self.signal_length.is_power_of_two() {
            return fail(format!(
                "signal_length {} is not a power of two >= 16",
                self.signal_length
            ));
        }
        if self.methods.is_empty() || self.aggregates.is_empty() {
            return fail("methods and aggregates must be non-empty".into());
        }
        if self.aggregates.contains(&Aggregate::Ols) {
            return fail("`ols` is implied by the standard method and cannot be requested".into());
        }
        if self.aggregates.contains(&Aggregate::Nn) && self.nn_models.is_empty() {
            return fail("the nn aggregate needs at least one entry in nn_models".into());
        }
        let filter = make_filter(&self.filter).map_err(|e| HurstError::Config(e.to_string()))?;
        // Only ranges that will be used are checked, so short signals need not
        // override the defaults of unused methods.
        for m in &self.methods {
            self.check_range(m.as_str(), self.level_range.for_method(*m))?;
        }
        if self.aggregates.contains(&Aggregate::Nn) {
            self.check_range("nn", self.level_range.nn)?;
        }
        if let Some(h) = self.h_grid.iter().find(|h| !filter.decorrelates(**h)) {
            return fail(format!(
                "filter {} has {} vanishing moment(s), fewer than H + 1/2 for H = {h}",
                filter.name(),
                filter.vanishing_moments()
            ));
        }
        Ok(())
    }

    pub(crate) fn check_range(&self, name: &str, (lo, hi): (usize, usize)) -> Result<()> {
        let top = self.finest_level();
        if lo >= hi || hi > top {
            return Err(HurstError::Config(format!(
                "{name} level range [{lo}, {hi}] invalid for finest level {top}"
            )));
        }
        if lo < MIN_LEVEL && !self.allow_low_levels {
            return Err(HurstError::Config(format!(
                "{name} level range starts at {lo}; levels below {MIN_LEVEL} need allow_low_levels"
            )));
        }
        Ok(())
    }
}
