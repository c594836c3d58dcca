//! Orthogonal Daubechies and Symmlet filter banks.
//!
//! Names follow the filter-length convention: `dbL` / `symL` has `L` taps and
//! `L/2` vanishing moments, so `sym6` is the six-tap Symmlet with M = 3.
//! Coefficients come from the spectral factorisation of the Daubechies
//! polynomial (minimum phase for `db`, least asymmetric root selection for
//! `sym`) and are checked against the orthonormality, QMF and
//! vanishing-moment invariants on construction.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::error::{HurstError, Result};

#[allow(clippy::excessive_precision)]
const DB4: [f64; 4] = [
    0.482_962_913_144_534_143_37,
    0.836_516_303_737_807_905_58,
    0.224_143_868_042_013_381_03,
    -0.129_409_522_551_260_381_17,
];

#[allow(clippy::excessive_precision)]
const DB6: [f64; 6] = [
    0.332_670_552_950_082_616,
    0.806_891_509_311_092_576_49,
    0.459_877_502_118_491_570_1,
    -0.135_011_020_010_254_588_7,
    -0.085_441_273_882_026_661_693,
    0.035_226_291_885_709_536_603,
];

#[allow(clippy::excessive_precision)]
const DB8: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];

#[allow(clippy::excessive_precision)]
const DB10: [f64; 10] = [
    0.160_102_397_974_192_914_48,
    0.603_829_269_797_189_670_54,
    0.724_308_528_437_772_927_73,
    0.138_428_145_901_320_731_51,
    -0.242_294_887_066_382_031_86,
    -0.032_244_869_584_638_374_648,
    0.077_571_493_840_045_713_523,
    -0.006_241_490_212_798_274_274_2,
    -0.012_580_751_999_081_999_469,
    0.003_335_725_285_473_771_278,
];

#[allow(clippy::excessive_precision)]
const SYM8: [f64; 8] = [
    0.032_223_100_604_051_467_872,
    -0.012_603_967_262_031_303_754,
    -0.099_219_543_576_633_532_585,
    0.297_857_795_605_306_051_4,
    0.803_738_751_805_132_080_88,
    0.497_618_667_632_774_989_98,
    -0.029_635_527_646_002_491_764,
    -0.075_765_714_789_502_213_228,
];

#[allow(clippy::excessive_precision)]
const SYM10: [f64; 10] = [
    0.019_538_882_735_249_826_776,
    -0.021_101_834_024_689_041_001,
    -0.175_328_089_908_056_224_24,
    0.016_602_105_764_510_848_133,
    0.633_978_963_456_792_063_72,
    0.723_407_690_404_040_792_07,
    0.199_397_533_976_855_596_9,
    -0.039_134_249_302_313_843_624,
    0.029_519_490_925_706_261_25,
    0.027_333_068_344_998_768_818,
];

/// Every name accepted by [`make_filter`].
pub const FILTER_NAMES: &[&str] = &[
    "haar", "db2", "db4", "db6", "db8", "db10", "sym4", "sym6", "sym8", "sym10",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveletFilter {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    vanishing_moments: usize,
}

impl WaveletFilter {
    /// Builds a filter from its lowpass taps; the highpass is the quadrature
    /// mirror `g_i = (-1)^i h_{L-1-i}`.
    pub fn from_lowpass(name: &str, lowpass: Vec<f64>, vanishing_moments: usize) -> Result<Self> {
        let len = lowpass.len();
        let highpass = (0..len)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - i]
            })
            .collect();
        let filter = Self {
            name: name.to_string(),
            lowpass,
            highpass,
            vanishing_moments,
        };
        filter.validate()?;
        Ok(filter)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    /// Short-memory condition on the detail coefficients: `M > H + 1/2`.
    pub fn decorrelates(&self, hurst: f64) -> bool {
        self.vanishing_moments as f64 > hurst + 0.5
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HurstError::Internal(format!("filter {}: {msg}", self.name)));
        let len = self.lowpass.len();
        if len == 0 || !len.is_multiple_of(2) {
            return bad(format!("length {len} is not even"));
        }
        if self.highpass.len() != len {
            return bad("highpass length differs from lowpass".into());
        }
        let sum: f64 = self.lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-12 {
            return bad(format!("lowpass sums to {sum}"));
        }
        // Orthonormality of even shifts: Σ h_i h_{i+2m} = δ_m.
        for shift in (0..len).step_by(2) {
            let dot: f64 = (0..len - shift)
                .map(|i| self.lowpass[i] * self.lowpass[i + shift])
                .sum();
            let target = if shift == 0 { 1.0 } else { 0.0 };
            if (dot - target).abs() > 1e-12 {
                return bad(format!("shift-{shift} autocorrelation is {dot}"));
            }
        }
        for (i, g) in self.highpass.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            if *g != sign * self.lowpass[len - 1 - i] {
                return bad(format!("highpass tap {i} breaks the QMF relation"));
            }
        }
        for m in 0..self.vanishing_moments {
            let moment: f64 = self
                .highpass
                .iter()
                .enumerate()
                .map(|(i, g)| (i as f64).powi(m as i32) * g)
                .sum();
            if moment.abs() > 1e-8 {
                return bad(format!("moment {m} of the highpass is {moment}"));
            }
        }
        Ok(())
    }
}

/// Looks up a filter by name (see [`FILTER_NAMES`]).
pub fn make_filter(name: &str) -> Result<WaveletFilter> {
    let key = name.to_ascii_lowercase();
    let (taps, moments): (&[f64], usize) = match key.as_str() {
        "haar" | "db2" => (&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], 1),
        // The two- and three-moment Symmlets coincide with Daubechies filters.
        "db4" | "sym4" => (&DB4, 2),
        "db6" | "sym6" => (&DB6, 3),
        "db8" => (&DB8, 4),
        "sym8" => (&SYM8, 4),
        "db10" => (&DB10, 5),
        "sym10" => (&SYM10, 5),
        _ => {
            return Err(HurstError::Lookup {
                kind: "wavelet filter",
                name: name.to_string(),
            })
        }
    };
    WaveletFilter::from_lowpass(&key, taps.to_vec(), moments)
}
