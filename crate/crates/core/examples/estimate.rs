use hurst_core::aggregation::Aggregate;
use hurst_core::estimators::Method;
use hurst_core::fbm::{synthesize, SignalSpec};
use hurst_core::pipeline::{analyze, Detrend, NoiseSource};
use hurst_core::wavelet::make_filter;

fn main() -> hurst_core::Result<()> {
    let x = synthesize(&SignalSpec::new(1 << 16, 0.7, 42).with_noise(0.01))?;
    let filter = make_filter("sym6")?;
    let analysis = analyze(
        x.samples(),
        &filter,
        Detrend::Endpoint,
        NoiseSource::Estimate,
    )?;
    for method in [Method::Alphee, Method::NcAlphee] {
        let est = analysis.estimate(method, Aggregate::Wmedian, 3, 10)?;
        println!(
            "{method}: {:?} ({} valid pairs)",
            est.h_hat, est.valid_pairs
        );
    }
    Ok(())
}
