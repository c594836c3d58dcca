//! Fractional Brownian motion synthesis and additive Gaussian noise.
//!
//! Paths are built from fractional Gaussian noise generated by circulant
//! embedding (Davies–Harte): the fGn autocovariance is wrapped into a circulant
//! of length `2(N - 1)`, diagonalised with an FFT, and a complex Gaussian vector
//! is coloured by the square-root eigenvalues. The cumulative sum of the
//! increments, started at zero, is the fBm path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlannerScalar;
use serde::{Deserialize, Serialize};

use crate::error::{HurstError, Result};

/// XOR-ed into the seed to derive the noise stream from the path stream.
pub const NOISE_SEED_DOMAIN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Relative tolerance for negative circulant eigenvalues before the embedding
/// is declared broken.
const EIGENVALUE_TOLERANCE: f64 = 1e-9;

/// Time axis of a synthesized path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Samples at `t = 0, 1, ..., N-1`; increments have variance `σ_X²`.
    UnitStep,
    /// Samples at `t = k/N` on `[0, 1)`; increments have variance `σ_X² N^{-2H}`.
    #[default]
    UnitInterval,
}

impl std::str::FromStr for Sampling {
    type Err = HurstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "unit_step" => Ok(Self::UnitStep),
            "unit_interval" => Ok(Self::UnitInterval),
            _ => Err(HurstError::Lookup {
                kind: "sampling",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub length: usize,
    pub hurst: f64,
    pub sigma_x: f64,
    pub sigma_eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
}

impl SignalSpec {
    pub fn new(length: usize, hurst: f64, seed: u64) -> Self {
        Self {
            length,
            hurst,
            sigma_x: 1.0,
            sigma_eps: 0.0,
            seed,
            sampling: Sampling::default(),
        }
    }

    pub fn with_noise(mut self, sigma_eps: f64) -> Self {
        self.sigma_eps = sigma_eps;
        self
    }

    pub fn with_sigma_x(mut self, sigma_x: f64) -> Self {
        self.sigma_x = sigma_x;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 || !self.length.is_power_of_two() {
            return Err(HurstError::shape(format!(
                "signal length must be a power of two >= 2, got {}",
                self.length
            )));
        }
        check_hurst(self.hurst)?;
        if !(self.sigma_x.is_finite() && self.sigma_x > 0.0) {
            return Err(HurstError::domain(format!(
                "sigma_x must be positive, got {}",
                self.sigma_x
            )));
        }
        if !(self.sigma_eps.is_finite() && self.sigma_eps >= 0.0) {
            return Err(HurstError::domain(format!(
                "sigma_eps must be nonnegative, got {}",
                self.sigma_eps
            )));
        }
        Ok(())
    }

    /// Standard deviation of one increment of the noise-free path.
    pub fn increment_scale(&self) -> f64 {
        match self.sampling {
            Sampling::UnitStep => self.sigma_x,
            Sampling::UnitInterval => self.sigma_x * (self.length as f64).powf(-self.hurst),
        }
    }
}

/// A finite real-valued sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    spec: Option<SignalSpec>,
}

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(HurstError::domain(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            spec: None,
        })
    }

    fn with_spec(samples: Vec<f64>, spec: SignalSpec) -> Self {
        debug_assert_eq!(samples.len(), spec.length);
        Self {
            samples,
            spec: Some(spec),
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn spec(&self) -> Option<&SignalSpec> {
        self.spec.as_ref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Multiplies every sample by `a`; the spec, if any, is dropped.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|v| v * a).collect())
    }
}

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(HurstError::domain(format!(
            "Hurst exponent must lie in (0, 1), got {hurst}"
        )))
    }
}

/// Autocovariance of unit-variance fractional Gaussian noise at `lag`.
pub fn fgn_autocovariance(hurst: f64, lag: usize) -> Result<f64> {
    check_hurst(hurst)?;
    Ok(fgn_autocovariance_unchecked(hurst, lag))
}

fn fgn_autocovariance_unchecked(hurst: f64, lag: usize) -> f64 {
    let two_h = 2.0 * hurst;
    let k = lag as f64;
    let below = if lag == 0 { 1.0 } else { (k - 1.0).powf(two_h) };
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + below)
}

/// `count` samples of unit-variance fGn.
fn fgn_unit(hurst: f64, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if count == 1 {
        return Ok(vec![rng.sample::<f64, _>(StandardNormal)]);
    }
    // First row of the circulant: γ(0..=count-1) followed by γ(count-2..=1).
    let m = 2 * (count - 1);
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
    for k in 0..count {
        row.push(Complex::new(fgn_autocovariance_unchecked(hurst, k), 0.0));
    }
    for k in (1..count - 1).rev() {
        row.push(Complex::new(fgn_autocovariance_unchecked(hurst, k), 0.0));
    }
    let mut planner = FftPlannerScalar::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
    let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if min < -EIGENVALUE_TOLERANCE * max {
        return Err(HurstError::Internal(format!(
            "circulant embedding has negative eigenvalue {min:e} (max {max:e})"
        )));
    }

    let mf = m as f64;
    let mut coloured: Vec<Complex<f64>> = row
        .iter()
        .map(|lambda| {
            let scale = (lambda.re.max(0.0) / mf).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(scale * re, scale * im)
        })
        .collect();
    fft.process(&mut coloured);
    Ok(coloured.iter().take(count).map(|c| c.re).collect())
}

/// Zero-start fBm path described by `spec`; deterministic in `spec.seed`.
///
/// `spec.sigma_eps` is ignored here, see [`synthesize`] and [`add_noise`].
pub fn generate_fbm(spec: &SignalSpec) -> Result<Signal> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let increments = fgn_unit(spec.hurst, spec.length - 1, &mut rng)?;
    let scale = spec.increment_scale();
    let mut samples = Vec::with_capacity(spec.length);
    let mut acc = 0.0;
    samples.push(0.0);
    for inc in increments {
        acc += scale * inc;
        samples.push(acc);
    }
    Ok(Signal::with_spec(samples, spec.clone()))
}

/// Adds i.i.d. `N(0, σ_ε²)` noise drawn from the stream `seed ^ NOISE_SEED_DOMAIN`.
pub fn add_noise(signal: &Signal, sigma_eps: f64, seed: u64) -> Result<Signal> {
    if !(sigma_eps.is_finite() && sigma_eps >= 0.0) {
        return Err(HurstError::domain(format!(
            "sigma_eps must be nonnegative, got {sigma_eps}"
        )));
    }
    if sigma_eps == 0.0 {
        return Ok(signal.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SEED_DOMAIN);
    let samples = signal
        .samples
        .iter()
        .map(|v| v + sigma_eps * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let spec = signal.spec.clone().map(|mut s| {
        s.sigma_eps = sigma_eps;
        s
    });
    Ok(Signal { samples, spec })
}

/// fBm path plus noise, both as described by `spec`.
pub fn synthesize(spec: &SignalSpec) -> Result<Signal> {
    let path = generate_fbm(spec)?;
    add_noise(&path, spec.sigma_eps, spec.seed)
}
