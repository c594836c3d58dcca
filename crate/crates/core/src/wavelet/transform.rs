use serde::Serialize;

use super::filters::WaveletFilter;
use crate::error::{HurstError, Result};
use crate::fbm::Signal;

/// Output of the periodic pyramid transform.
///
/// Level `j` holds `2^j` detail coefficients; larger `j` is a finer scale.
/// The approximation block has `2^{j0}` entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveletDecomposition {
    j0: usize,
    approx: Vec<f64>,
    /// `details[i]` is level `j0 + i`.
    details: Vec<Vec<f64>>,
}

impl WaveletDecomposition {
    /// Assembles a decomposition from its blocks, checking dyadic sizes.
    pub fn from_parts(j0: usize, approx: Vec<f64>, details: Vec<Vec<f64>>) -> Result<Self> {
        if details.is_empty() {
            return Err(HurstError::shape(
                "decomposition needs at least one detail level",
            ));
        }
        if approx.len() != 1 << j0 {
            return Err(HurstError::shape(format!(
                "approximation block has {} entries, expected 2^{j0}",
                approx.len()
            )));
        }
        for (i, block) in details.iter().enumerate() {
            let level = j0 + i;
            if block.len() != 1 << level {
                return Err(HurstError::shape(format!(
                    "detail level {level} has {} entries, expected {}",
                    block.len(),
                    1usize << level
                )));
            }
        }
        Ok(Self {
            j0,
            approx,
            details,
        })
    }

    pub fn j0(&self) -> usize {
        self.j0
    }

    /// Finest detail level, `J - 1`.
    pub fn j_max(&self) -> usize {
        self.j0 + self.details.len() - 1
    }

    /// Length of the transformed signal.
    pub fn signal_len(&self) -> usize {
        1 << (self.j_max() + 1)
    }

    pub fn approx(&self) -> &[f64] {
        &self.approx
    }

    pub fn detail(&self, level: usize) -> Option<&[f64]> {
        level
            .checked_sub(self.j0)
            .and_then(|i| self.details.get(i))
            .map(Vec::as_slice)
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<usize> {
        self.j0..=self.j_max()
    }

    /// Coefficients in pyramid order `(c_{j0}, d_{j0}, d_{j0+1}, ..., d_{J-1})`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.signal_len());
        out.extend_from_slice(&self.approx);
        for block in &self.details {
            out.extend_from_slice(block);
        }
        out
    }

    /// Inverse of [`to_vec`](Self::to_vec).
    pub fn from_vec(j0: usize, coefficients: &[f64]) -> Result<Self> {
        let n = coefficients.len();
        if !n.is_power_of_two() || n < 2 {
            return Err(HurstError::shape(format!(
                "{n} coefficients is not a dyadic length >= 2"
            )));
        }
        let big_j = n.trailing_zeros() as usize;
        if j0 >= big_j {
            return Err(HurstError::domain(format!(
                "j0 = {j0} out of range for N = {n}"
            )));
        }
        let mut offset = 1 << j0;
        let approx = coefficients[..offset].to_vec();
        let mut details = Vec::with_capacity(big_j - j0);
        for level in j0..big_j {
            let size = 1 << level;
            details.push(coefficients[offset..offset + size].to_vec());
            offset += size;
        }
        Self::from_parts(j0, approx, details)
    }
}

fn dyadic_exponent(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(HurstError::shape(format!(
            "signal length {n} is not a power of two >= 2"
        )));
    }
    Ok(n.trailing_zeros() as usize)
}

/// One analysis step with circular convolution and downsampling by two.
fn analysis_step(input: &[f64], filter: &WaveletFilter) -> (Vec<f64>, Vec<f64>) {
    let n = input.len();
    let half = n / 2;
    let h = filter.lowpass();
    let g = filter.highpass();
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (i, (hi, gi)) in h.iter().zip(g).enumerate() {
            let x = input[(2 * k + i) % n];
            a += hi * x;
            d += gi * x;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// Adjoint of [`analysis_step`].
fn synthesis_step(approx: &[f64], detail: &[f64], filter: &WaveletFilter) -> Vec<f64> {
    let n = 2 * approx.len();
    let mut out = vec![0.0; n];
    for (k, (a, d)) in approx.iter().zip(detail).enumerate() {
        for (i, (hi, gi)) in filter.lowpass().iter().zip(filter.highpass()).enumerate() {
            out[(2 * k + i) % n] += hi * a + gi * d;
        }
    }
    out
}

/// Periodic Mallat pyramid down to the coarsest level `j0`.
pub fn dwt(samples: &[f64], filter: &WaveletFilter, j0: usize) -> Result<WaveletDecomposition> {
    let big_j = dyadic_exponent(samples.len())?;
    if j0 >= big_j {
        return Err(HurstError::domain(format!(
            "j0 = {j0} must be below J = {big_j} for a signal of length {}",
            samples.len()
        )));
    }
    let mut details = Vec::with_capacity(big_j - j0);
    let mut current = samples.to_vec();
    for _ in j0..big_j {
        let (approx, detail) = analysis_step(&current, filter);
        details.push(detail);
        current = approx;
    }
    details.reverse();
    Ok(WaveletDecomposition {
        j0,
        approx: current,
        details,
    })
}

/// Inverse pyramid transform. Block sizes are validated when the
/// decomposition is assembled ([`WaveletDecomposition::from_parts`]).
pub fn idwt(decomp: &WaveletDecomposition, filter: &WaveletFilter) -> Result<Signal> {
    let mut current = decomp.approx.clone();
    for detail in &decomp.details {
        current = synthesis_step(&current, detail, filter);
    }
    Signal::new(current)
}

#[cfg(test)]
mod tests {
    use super::super::filters::make_filter;
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn constant_signal_has_no_detail() {
        let haar = make_filter("haar").unwrap();
        let d = dwt(&[1.0; 8], &haar, 0).unwrap();
        for level in d.levels() {
            assert!(d.detail(level).unwrap().iter().all(|v| v.abs() < 1e-15));
        }
        let energy: f64 = d.approx().iter().map(|v| v * v).sum();
        assert!((energy - 8.0).abs() < 1e-12);
    }

    #[test]
    fn two_sample_haar_by_hand() {
        let haar = make_filter("haar").unwrap();
        let d = dwt(&[1.0, -1.0], &haar, 0).unwrap();
        assert!((d.detail(0).unwrap()[0] - SQRT_2).abs() < 1e-15);
        assert!(d.approx()[0].abs() < 1e-15);
    }

    #[test]
    fn block_sizes_are_dyadic() {
        let f = make_filter("sym6").unwrap();
        let x: Vec<f64> = (0..1024).map(|i| ((i * 37) % 11) as f64).collect();
        let d = dwt(&x, &f, 3).unwrap();
        assert_eq!(d.approx().len(), 8);
        assert_eq!(d.j_max(), 9);
        for level in d.levels() {
            assert_eq!(d.detail(level).unwrap().len(), 1 << level);
        }
        assert_eq!(d.to_vec().len(), 1024);
        assert_eq!(WaveletDecomposition::from_vec(3, &d.to_vec()).unwrap(), d);
    }

    #[test]
    fn shape_and_domain_errors() {
        let f = make_filter("db4").unwrap();
        assert!(matches!(dwt(&[0.0; 12], &f, 0), Err(HurstError::Shape(_))));
        assert!(matches!(dwt(&[0.0; 16], &f, 4), Err(HurstError::Domain(_))));
        assert!(WaveletDecomposition::from_parts(1, vec![0.0; 2], vec![vec![0.0; 3]]).is_err());
    }

    #[test]
    fn zero_decomposition_inverts_to_zero() {
        let f = make_filter("sym8").unwrap();
        let d = WaveletDecomposition::from_vec(2, &[0.0; 64]).unwrap();
        assert!(idwt(&d, &f).unwrap().samples().iter().all(|v| *v == 0.0));
    }
}
