use hurst_core::fbm::{add_noise, fgn_autocovariance, generate_fbm, Sampling, Signal, SignalSpec};
use proptest::prelude::*;
use rayon::prelude::*;

fn unit_step(length: usize, hurst: f64, seed: u64) -> Vec<f64> {
    let spec = SignalSpec::new(length, hurst, seed).with_sampling(Sampling::UnitStep);
    generate_fbm(&spec).unwrap().into_samples()
}

fn increments(path: &[f64]) -> Vec<f64> {
    path.windows(2).map(|w| w[1] - w[0]).collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn brownian_increments_have_unit_variance() {
    let per_seed: Vec<f64> = (0..100)
        .map(|seed| {
            let inc = increments(&unit_step(1 << 12, 0.5, seed));
            inc.iter().map(|v| v * v).sum::<f64>() / inc.len() as f64
        })
        .collect();
    let (mean, se) = mean_and_se(&per_seed);
    assert!(
        (mean - 1.0).abs() <= 3.0 * se,
        "increment variance {mean} ± {se}"
    );
}

#[test]
fn lag_one_correlation_matches_fgn() {
    let target = fgn_autocovariance(0.8, 1).unwrap();
    let per_seed: Vec<f64> = (0..200)
        .map(|seed| {
            let inc = increments(&unit_step(1 << 10, 0.8, 1000 + seed));
            // The mean is known to be zero; subtracting the sample mean would
            // bias the estimate by about n^{2H-2}.
            let c0 = inc.iter().map(|v| v * v).sum::<f64>();
            let c1: f64 = inc.windows(2).map(|w| w[0] * w[1]).sum();
            c1 / c0
        })
        .collect();
    let (mean, se) = mean_and_se(&per_seed);
    assert!(
        (mean - target).abs() <= 3.0 * se,
        "lag-1 {mean} ± {se} vs {target}"
    );
    assert!((target - 0.5157).abs() < 1e-4);
}

#[test]
fn covariance_matches_self_similar_kernel() {
    let paths = 500;
    let n = 64;
    for (h, seed0) in [(0.2, 0u64), (0.5, 10_000), (0.8, 20_000)] {
        let samples: Vec<Vec<f64>> = (0..paths)
            .map(|p| unit_step(n, h, seed0 + p as u64))
            .collect();
        let kernel = |s: f64, t: f64| {
            0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (s - t).abs().powf(2.0 * h))
        };
        let mut worst: f64 = 0.0;
        for s in (1..n).step_by(7) {
            for t in (s..n).step_by(5) {
                let emp = samples.iter().map(|x| x[s] * x[t]).sum::<f64>() / paths as f64;
                let (ss, tt, st) = (
                    kernel(s as f64, s as f64),
                    kernel(t as f64, t as f64),
                    kernel(s as f64, t as f64),
                );
                // Exact variance of a product of jointly Gaussian variables.
                let se = ((ss * tt + st * st) / paths as f64).sqrt();
                let z = (emp - st).abs() / se;
                worst = worst.max(z);
            }
        }
        assert!(worst <= 4.0, "H = {h}: worst z {worst}");
    }
}

/// Dense Cholesky factor of the fBm covariance, used as an independent oracle
/// for the variance of sums of increments.
#[test]
fn path_variance_agrees_with_cholesky_oracle() {
    let n = 256;
    let h = 0.3;
    let cov = |i: usize, j: usize| {
        let (s, t) = (i as f64, j as f64);
        0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (s - t).abs().powf(2.0 * h))
    };
    // Factor the covariance of X(1..n) and check it reproduces Var X(n).
    let m = n - 1;
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut sum = cov(i + 1, j + 1);
            for k in 0..j {
                sum -= l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = if i == j {
                sum.sqrt()
            } else {
                sum / l[j * m + j]
            };
        }
    }
    let oracle_var: f64 = (0..m).map(|k| l[(m - 1) * m + k].powi(2)).sum();
    assert!((oracle_var - ((n - 1) as f64).powf(2.0 * h)).abs() < 1e-8 * oracle_var);

    let ends: Vec<f64> = (0..2000)
        .map(|seed| unit_step(n, h, seed).last().copied().unwrap())
        .collect();
    let emp = ends.iter().map(|v| v * v).sum::<f64>() / ends.len() as f64;
    let se = oracle_var * (2.0 / ends.len() as f64).sqrt();
    assert!(
        (emp - oracle_var).abs() <= 3.0 * se,
        "Var X(n) {emp} vs {oracle_var}"
    );
}

#[test]
fn increments_are_gaussian() {
    let inc = increments(&unit_step(1 << 16, 0.7, 99));
    let n = inc.len() as f64;
    let m = inc.iter().sum::<f64>() / n;
    let m2 = inc.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = inc.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = inc.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    assert!(skew.abs() < 0.1, "skewness {skew}");
    assert!(kurt.abs() < 0.2, "excess kurtosis {kurt}");
}

#[test]
fn generation_is_independent_of_threads() {
    let specs: Vec<SignalSpec> = (0..16).map(|s| SignalSpec::new(1 << 11, 0.35, s)).collect();
    let serial: Vec<Signal> = specs.iter().map(|s| generate_fbm(s).unwrap()).collect();
    let parallel: Vec<Signal> = specs.par_iter().map(|s| generate_fbm(s).unwrap()).collect();
    assert_eq!(serial, parallel);
}

#[test]
fn noise_calls_are_reproducible() {
    let path = generate_fbm(&SignalSpec::new(1 << 10, 0.6, 3)).unwrap();
    assert_eq!(
        add_noise(&path, 0.7, 11).unwrap(),
        add_noise(&path, 0.7, 11).unwrap()
    );
    assert_ne!(
        add_noise(&path, 0.7, 11).unwrap(),
        add_noise(&path, 0.7, 12).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_path_starts_at_zero(seed in any::<u64>(), h in 0.05f64..0.95, log_n in 1u32..12) {
        let path = generate_fbm(&SignalSpec::new(1 << log_n, h, seed)).unwrap();
        prop_assert_eq!(path.samples()[0], 0.0);
        prop_assert_eq!(path.len(), 1usize << log_n);
        prop_assert!(path.samples().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigma_x_scales_the_path(seed in any::<u64>(), h in 0.05f64..0.95, sx in 0.1f64..10.0) {
        let base = SignalSpec::new(256, h, seed);
        let a = generate_fbm(&base).unwrap();
        let b = generate_fbm(&base.clone().with_sigma_x(sx)).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            prop_assert!((x * sx - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}
