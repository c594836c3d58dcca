//! The `hurst` command-line tool.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! data errors (unreadable or malformed input, failed estimation).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use hurst_core::aggregation::{
    hyperparam_search, mlp_train, preset, Aggregate, MlpModel, SearchRanges, TrainConfig,
};
use hurst_core::estimators::Method;
use hurst_core::fbm::{synthesize, Sampling, SignalSpec};
use hurst_core::harness::{
    build_training_matrix, evaluate_metrics, pair_reliability, read_results_csv,
    run_sweep_detailed, write_metrics_csv, write_results_csv, ExperimentConfig,
};
use hurst_core::io::{read_signal, write_decomposition_bin, write_energies_csv, write_signal};
use hurst_core::pipeline::{
    analyze, detrend_endpoint, nn_features, Detrend, Estimate, NoiseSource,
};
use hurst_core::wavelet::{all_level_energies, dwt, make_filter};
use hurst_core::HurstError;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "hurst",
    version,
    about = "Wavelet-based Hurst exponent estimation"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a (noisy) fractional Brownian motion path.
    Synth {
        #[arg(long, default_value_t = 1 << 14)]
        length: usize,
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_x: f64,
        /// Standard deviation of the additive white noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `unit-interval` or `unit-step`.
        #[arg(long, default_value = "unit-interval")]
        sampling: Sampling,
        /// Output path; `.bin` selects the binary container, anything else CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decompose a signal and write its coefficients and level energies.
    Dwt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "sym6")]
        filter: String,
        #[arg(long, default_value_t = 0)]
        j0: usize,
        #[arg(long, default_value = "endpoint")]
        detrend: Detrend,
        /// Binary decomposition output.
        #[arg(long)]
        out: PathBuf,
        /// Energies CSV; printed to stdout when omitted.
        #[arg(long)]
        energies: Option<PathBuf>,
    },
    /// Estimate the Hurst exponent of one signal; prints JSON.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "nc-alphee")]
        method: Method,
        #[arg(long, default_value = "sym6")]
        filter: String,
        #[arg(long, default_value_t = 3)]
        jmin: usize,
        #[arg(long, default_value_t = 13)]
        jmax: usize,
        /// `estimate` or `fixed:<sigma>`.
        #[arg(long, default_value = "estimate")]
        noise: NoiseSource,
        /// Defaults to `ols` for the standard method and `wmedian` otherwise.
        #[arg(long)]
        aggregate: Option<Aggregate>,
        #[arg(long, default_value = "endpoint")]
        detrend: Detrend,
        /// Trained model for `--aggregate nn`; its pair order overrides the level range.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep and write one record per estimate.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Build a training matrix and fit the learned aggregator.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Noise level of the training data; must appear in the config's noise grid.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value = "nc-alphee")]
        method: Method,
        /// Fixed architecture instead of a random search (e.g. `sigma0.50`).
        #[arg(long, conflicts_with = "trials")]
        preset: Option<String>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Seed of the split, initialization, shuffling and search.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch training log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Summarize a results CSV per (H, noise, method, aggregate).
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count how often each level pair lands in the 2-sigma band of an aggregate.
    Pairmap {
        #[arg(long)]
        config: PathBuf,
        /// Run only this H, as a one-value grid.
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value = "nc-alphee")]
        method: Method,
        #[arg(long, default_value = "wmedian")]
        aggregate: Aggregate,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(h) = cause.downcast_ref::<HurstError>() {
            return match h {
                HurstError::Config(_) | HurstError::Lookup { .. } => 1,
                _ => 2,
            };
        }
    }
    2
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("config {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth {
            length,
            hurst,
            sigma_x,
            noise,
            seed,
            sampling,
            out,
        } => {
            let spec = SignalSpec::new(length, hurst, seed)
                .with_noise(noise)
                .with_sigma_x(sigma_x)
                .with_sampling(sampling);
            let signal = synthesize(&spec)?;
            write_signal(&signal, &out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Dwt {
            input,
            filter,
            j0,
            detrend,
            out,
            energies,
        } => {
            let signal =
                read_signal(&input).with_context(|| format!("reading {}", input.display()))?;
            let filter = make_filter(&filter)?;
            let samples = match detrend {
                Detrend::Endpoint => detrend_endpoint(signal.samples()),
                Detrend::None => signal.into_samples(),
            };
            let decomp = dwt(&samples, &filter, j0)?;
            write_decomposition_bin(&decomp, create(&out)?)?;
            write_energies_csv(&all_level_energies(&decomp), output(energies.as_deref())?)?;
        }
        Command::Estimate {
            input,
            method,
            filter,
            jmin,
            jmax,
            noise,
            aggregate,
            detrend,
            model,
            out,
        } => {
            let signal =
                read_signal(&input).with_context(|| format!("reading {}", input.display()))?;
            let filter = make_filter(&filter)?;
            let analysis = analyze(signal.samples(), &filter, detrend, noise)?;
            let aggregate = aggregate.unwrap_or(if method == Method::Standard {
                Aggregate::Ols
            } else {
                Aggregate::Wmedian
            });
            let estimate = if aggregate == Aggregate::Nn {
                let Some(path) = model else {
                    bail!(HurstError::Config("--aggregate nn needs --model".into()));
                };
                let model =
                    MlpModel::load(&path).with_context(|| format!("model {}", path.display()))?;
                nn_estimate(&analysis, &model, method)?
            } else {
                analysis.estimate(method, aggregate, jmin, jmax)?
            };
            write_json(&estimate, out.as_deref())?;
        }
        Command::Simulate {
            config,
            out,
            seed,
            threads,
        } => {
            let mut config = load_config(&config)?;
            if let Some(s) = seed {
                config.base_seed = s;
            }
            let records = run_sweep_detailed(&config, threads, false)?.records;
            write_results_csv(&records, create(&out)?)?;
            log::info!("{} records written to {}", records.len(), out.display());
        }
        Command::Train {
            config,
            sigma,
            method,
            preset: preset_name,
            trials,
            seed,
            out,
            log,
            threads,
        } => {
            let config = load_config(&config)?;
            let Some(index) = config
                .noise_grid
                .iter()
                .position(|s| (s - sigma).abs() < 1e-12)
            else {
                bail!(HurstError::Config(format!(
                    "noise level {sigma} is not in the config's noise grid {:?}",
                    config.noise_grid
                )));
            };
            let data = build_training_matrix(&config, index, method, threads)?;
            let (model, report, chosen) = match preset_name {
                Some(name) => {
                    let c = TrainConfig {
                        seed,
                        ..preset(&name)?
                    };
                    let (m, r) = mlp_train(data.features.view(), &data.targets, &c)?;
                    (m, r, c)
                }
                None => {
                    let base = TrainConfig {
                        seed,
                        search_trials: trials,
                        ..TrainConfig::default()
                    };
                    let s = hyperparam_search(
                        data.features.view(),
                        &data.targets,
                        trials,
                        seed,
                        &base,
                        &SearchRanges::default(),
                    )?;
                    (s.model, s.report, s.config)
                }
            };
            let model =
                model.with_metadata(data.pair_order.clone(), data.sigma_eps, method.as_str());
            model
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = log {
                report.write_csv(create(&path)?)?;
            }
            write_json(
                &TrainSummary {
                    rows: data.targets.len(),
                    features: data.pair_order.len(),
                    config: chosen,
                    mean_cv_mse: report.mean_cv_mse,
                    test_mse: report.test_mse,
                    final_epochs: report.final_epochs,
                },
                None,
            )?;
        }
        Command::Evaluate { results, out } => {
            let file =
                File::open(&results).with_context(|| format!("reading {}", results.display()))?;
            let records =
                read_results_csv(file).with_context(|| format!("reading {}", results.display()))?;
            write_metrics_csv(&evaluate_metrics(&records), output(out.as_deref())?)?;
        }
        Command::Pairmap {
            config,
            hurst,
            method,
            aggregate,
            seed,
            threads,
            out,
        } => {
            let mut config = load_config(&config)?;
            config.h_grid = vec![hurst];
            config.methods = vec![method];
            config.aggregates = vec![aggregate];
            if let Some(s) = seed {
                config.base_seed = s;
            }
            let sweep = run_sweep_detailed(&config, threads, true)?;
            let map = pair_reliability(&sweep.records, &sweep.details, hurst, method, aggregate)?;
            log::info!(
                "band {:.4} ± {:.4} over {} replicates",
                map.band_center,
                map.band_half_width,
                map.replicates
            );
            map.write_csv(output(out.as_deref())?)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    rows: usize,
    features: usize,
    config: TrainConfig,
    mean_cv_mse: f64,
    test_mse: f64,
    final_epochs: usize,
}

fn nn_estimate(
    analysis: &hurst_core::pipeline::Analysis,
    model: &MlpModel,
    method: Method,
) -> anyhow::Result<Estimate> {
    if model.feature_method() != method.as_str() {
        log::warn!(
            "model was trained on {} features, applying it to {method}",
            model.feature_method()
        );
    }
    let order = model.pair_order();
    let (Some(first), Some(last)) = (order.first(), order.last()) else {
        bail!(HurstError::Incompatible("model has no pair order".into()));
    };
    let (j_min, j_max) = (first.0, last.1);
    let pairs = analysis.pairs(method, j_min, j_max)?;
    if pairs.iter().map(|p| (p.j1, p.j2)).ne(order.iter().copied()) {
        bail!(HurstError::Incompatible(
            "model pair order is not a full lexicographic range".into()
        ));
    }
    let valid_pairs = pairs.iter().filter(|p| p.is_valid()).count();
    let h_hat = model.forward(&nn_features(&pairs)?)?;
    Ok(Estimate {
        method,
        aggregate: Aggregate::Nn,
        h_hat: Some(h_hat),
        valid_pairs,
        excluded_pairs: pairs.len() - valid_pairs,
        j_min,
        j_max,
        noise: (method == Method::NcAlphee).then_some(analysis.noise),
        fit: None,
        pairs,
    })
}
