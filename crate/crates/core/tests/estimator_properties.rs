use hurst_core::estimators::{
    all_pair_estimates, alphee_pair, nc_alphee_pair, InvalidReason, Method, NoiseEstimate,
};
use hurst_core::fbm::{synthesize, SignalSpec};
use hurst_core::pipeline::{analyze, Analysis, Detrend, NoiseSource};
use hurst_core::wavelet::{make_filter, LevelEnergy};
use hurst_core::HurstError;
use proptest::prelude::*;
use rayon::prelude::*;

fn analysis(length: usize, h: f64, sigma: f64, seed: u64) -> Analysis {
    let signal = synthesize(&SignalSpec::new(length, h, seed).with_noise(sigma)).unwrap();
    analyze(
        signal.samples(),
        &make_filter("sym6").unwrap(),
        Detrend::Endpoint,
        NoiseSource::Estimate,
    )
    .unwrap()
}

fn energy(level: usize) -> impl Strategy<Value = LevelEnergy> {
    (1e-6f64..1e3).prop_map(move |m| LevelEnergy::dyadic(level, m))
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

proptest! {
    #[test]
    fn zero_noise_reduces_to_alphee(j1 in 3usize..10, gap in 1usize..5, m1 in 1e-6f64..1e3, m2 in 1e-6f64..1e3) {
        let (e1, e2) = (LevelEnergy::dyadic(j1, m1), LevelEnergy::dyadic(j1 + gap, m2));
        let a = alphee_pair(&e1, &e2).unwrap().h_hat().unwrap();
        let b = nc_alphee_pair(&e1, &e2, &NoiseEstimate::zero()).unwrap().h_hat().unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn rescaling_leaves_estimates_unchanged(
        e1 in energy(4), e2 in energy(7), c in 1e-4f64..1e4, s2 in 0.0f64..1e-3,
    ) {
        let scaled = |e: &LevelEnergy| LevelEnergy::dyadic(e.level, e.mean_sq * c);
        let a = alphee_pair(&e1, &e2).unwrap().h_hat().unwrap();
        let b = alphee_pair(&scaled(&e1), &scaled(&e2)).unwrap().h_hat().unwrap();
        prop_assert!((a - b).abs() <= 1e-9);

        let noise = NoiseEstimate::fixed(s2).unwrap();
        let noise_c = NoiseEstimate::fixed(s2 * c).unwrap();
        let p = nc_alphee_pair(&e1, &e2, &noise).unwrap();
        let q = nc_alphee_pair(&scaled(&e1), &scaled(&e2), &noise_c).unwrap();
        prop_assert_eq!(p.is_valid(), q.is_valid());
        if let (Some(x), Some(y)) = (p.h_hat(), q.h_hat()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn nc_variance_is_never_below_alphee(e1 in energy(5), e2 in energy(9), s2 in 0.0f64..1e-2) {
        let a = alphee_pair(&e1, &e2).unwrap();
        let b = nc_alphee_pair(&e1, &e2, &NoiseEstimate::fixed(s2).unwrap()).unwrap();
        if let Some(v) = b.variance() {
            prop_assert!(v >= a.variance().unwrap() * (1.0 - 1e-12));
            prop_assert!(v.is_finite() && v > 0.0);
        }
    }
}

#[test]
fn misuse_is_reported() {
    let e = [LevelEnergy::dyadic(3, 1.0), LevelEnergy::dyadic(4, 0.5)];
    assert!(matches!(
        alphee_pair(&e[1], &e[0]),
        Err(HurstError::Domain(_))
    ));
    assert!(matches!(
        all_pair_estimates(&e, 3, 4, Method::NcAlphee, None),
        Err(HurstError::Config(_))
    ));
    assert!(all_pair_estimates(&e, 3, 5, Method::Alphee, None).is_err());
    let tiny = [LevelEnergy::dyadic(2, 1.0), LevelEnergy::dyadic(3, 1.0)];
    let p = nc_alphee_pair(&tiny[0], &tiny[1], &NoiseEstimate::zero()).unwrap();
    assert_eq!(p.invalid_reason(), Some(InvalidReason::InsufficientDof));
}

#[test]
fn noise_estimate_tracks_true_variance() {
    let values: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|seed| analysis(1 << 16, 0.2, 0.5, seed).noise.sigma_eps_sq)
        .collect();
    let (mean, _) = mean_and_se(&values);
    assert!((0.24..=0.27).contains(&mean), "mean noise variance {mean}");
}

#[test]
fn standard_method_recovers_moderate_h() {
    let values: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            analysis(1 << 14, 0.6, 0.0, 500 + seed)
                .spectrum_fit(3, 13)
                .unwrap()
                .h_hat
        })
        .collect();
    let (mean, _) = mean_and_se(&values);
    assert!((mean - 0.6).abs() <= 0.05, "mean {mean}");
}

/// Pair (6, 9) has 64 and 512 coefficients: large enough for the log-moment
/// correction, coarse enough for the discretisation of the path not to matter.
#[test]
fn alphee_pair_is_unbiased() {
    for h in [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8] {
        let values: Vec<f64> = (0..500u64)
            .into_par_iter()
            .map(|seed| {
                let a = analysis(1 << 16, h, 0.0, 7_000 + seed);
                alphee_pair(&a.energies[6], &a.energies[9])
                    .unwrap()
                    .h_hat()
                    .unwrap()
            })
            .collect();
        let (mean, se) = mean_and_se(&values);
        assert!((mean - h).abs() <= 3.0 * se, "H = {h}: mean {mean} ± {se}");
    }
}

#[test]
fn finest_pair_is_often_swamped_by_noise() {
    let reasons: Vec<Option<InvalidReason>> = (0..40u64)
        .into_par_iter()
        .map(|seed| {
            let a = analysis(1 << 16, 0.3, 1.0, 300 + seed);
            nc_alphee_pair(&a.energies[13], &a.energies[15], &a.noise)
                .unwrap()
                .invalid_reason()
        })
        .collect();
    let swamped = reasons
        .iter()
        .filter(|r| **r == Some(InvalidReason::NoiseDominates))
        .count();
    assert!(
        swamped * 4 >= reasons.len(),
        "{swamped} of {} invalid",
        reasons.len()
    );
}
