use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::aggregation::{aggregate_pairs, Aggregate, MlpModel};
use crate::error::{HurstError, Result};
use crate::estimators::{pair_order, Method, PairEstimate};
use crate::fbm::{synthesize, SignalSpec};
use crate::pipeline::{analyze, nn_features, Analysis};
use crate::wavelet::{make_filter, WaveletFilter};

/// Environment variable capping the number of sweep workers.
pub const THREADS_ENV: &str = "HURST_THREADS";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed of one replicate. Each coordinate is folded in separately so
/// that growing the grid never changes the seeds of existing cells.
pub fn replicate_seed(base_seed: u64, h_index: usize, sigma_index: usize, replicate: usize) -> u64 {
    [h_index, sigma_index, replicate].iter().enumerate().fold(
        splitmix64(base_seed),
        |acc, (slot, &v)| {
            splitmix64(acc ^ splitmix64((v as u64).wrapping_mul(4).wrapping_add(slot as u64)))
        },
    )
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub h_true: f64,
    pub sigma_eps: f64,
    pub method: Method,
    pub aggregate: Aggregate,
    pub replicate: usize,
    /// Empty when the replicate produced no estimate.
    pub h_hat: Option<f64>,
    pub valid_pairs: usize,
    pub excluded_pairs: usize,
    pub seed: u64,
}

/// Pair estimates of one replicate and method, kept for reliability maps.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDetail {
    pub h_true: f64,
    pub sigma_eps: f64,
    pub method: Method,
    pub replicate: usize,
    pub pairs: Vec<PairEstimate>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<ResultRecord>,
    pub details: Vec<PairDetail>,
}

pub fn write_results_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(HurstError::from))
        .collect()
}

/// Worker count from `HURST_THREADS`, defaulting to the hardware parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a pool of `threads` workers (or [`worker_count`]).
pub fn with_workers<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or_else(worker_count))
        .build()
        .map_err(|e| HurstError::Internal(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

struct Models {
    models: Vec<MlpModel>,
}

impl Models {
    fn load(config: &ExperimentConfig) -> Result<Self> {
        let models = config
            .nn_models
            .iter()
            .map(|p| {
                MlpModel::load(p).map_err(|e| match e {
                    HurstError::Io(io) => HurstError::Io(std::io::Error::new(
                        io.kind(),
                        format!("{}: {io}", p.display()),
                    )),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let top = config.finest_level();
        for (m, path) in models.iter().zip(&config.nn_models) {
            if m.pair_order().iter().any(|&(_, j2)| j2 > top) {
                return Err(HurstError::Config(format!(
                    "model {} uses levels beyond the finest level {top}",
                    path.display()
                )));
            }
        }
        Ok(Self { models })
    }

    /// Model for `method` trained closest to `sigma`.
    fn pick(&self, method: Method, sigma: f64) -> Option<&MlpModel> {
        self.models
            .iter()
            .filter(|m| m.feature_method() == method.as_str())
            .min_by(|a, b| {
                (a.trained_noise_level() - sigma)
                    .abs()
                    .total_cmp(&(b.trained_noise_level() - sigma).abs())
            })
    }
}

fn nn_estimate(
    analysis: &Analysis,
    model: &MlpModel,
    method: Method,
) -> Result<(f64, usize, usize)> {
    let order = model.pair_order();
    let (lo, hi) = (
        order.first().map_or(0, |p| p.0),
        order.last().map_or(0, |p| p.1),
    );
    if order != pair_order(lo, hi).as_slice() {
        return Err(HurstError::Incompatible(
            "model pair order is not a full lexicographic range".into(),
        ));
    }
    let pairs = analysis.pairs(method, lo, hi)?;
    let valid = pairs.iter().filter(|p| p.is_valid()).count();
    let features = nn_features(&pairs)?;
    Ok((model.forward(&features)?, valid, pairs.len() - valid))
}

struct Task {
    h_index: usize,
    sigma_index: usize,
    replicate: usize,
}

fn run_task(
    config: &ExperimentConfig,
    filter: &WaveletFilter,
    models: &Models,
    task: &Task,
    keep_pairs: bool,
) -> (Vec<ResultRecord>, Vec<PairDetail>) {
    let h = config.h_grid[task.h_index];
    let sigma = config.noise_grid[task.sigma_index];
    let seed = replicate_seed(
        config.base_seed,
        task.h_index,
        task.sigma_index,
        task.replicate,
    );
    let record = |method, aggregate, h_hat, valid_pairs, excluded_pairs| ResultRecord {
        h_true: h,
        sigma_eps: sigma,
        method,
        aggregate,
        replicate: task.replicate,
        h_hat,
        valid_pairs,
        excluded_pairs,
        seed,
    };
    let spec = SignalSpec::new(config.signal_length, h, seed)
        .with_noise(sigma)
        .with_sampling(config.sampling);
    let analysis = synthesize(&spec)
        .and_then(|s| analyze(s.samples(), filter, config.detrend, config.noise_source));
    let mut records = Vec::new();
    let mut details = Vec::new();
    let analysis = match analysis {
        Ok(a) => a,
        Err(e) => {
            log::warn!("H={h} sigma={sigma} replicate {}: {e}", task.replicate);
            for &m in &config.methods {
                if m == Method::Standard {
                    records.push(record(m, Aggregate::Ols, None, 0, 0));
                } else {
                    records.extend(config.aggregates.iter().map(|&a| record(m, a, None, 0, 0)));
                }
            }
            return (records, details);
        }
    };
    for &method in &config.methods {
        let (lo, hi) = config.level_range.for_method(method);
        if method == Method::Standard {
            let h_hat = analysis.spectrum_fit(lo, hi).ok().map(|f| f.h_hat);
            records.push(record(method, Aggregate::Ols, h_hat, 0, 0));
            continue;
        }
        let pairs = match analysis.pairs(method, lo, hi) {
            Ok(p) => p,
            Err(e) => {
                log::warn!(
                    "H={h} sigma={sigma} replicate {} {method}: {e}",
                    task.replicate
                );
                records.extend(
                    config
                        .aggregates
                        .iter()
                        .map(|&a| record(method, a, None, 0, 0)),
                );
                continue;
            }
        };
        let valid = pairs.iter().filter(|p| p.is_valid()).count();
        for &aggregate in &config.aggregates {
            if aggregate == Aggregate::Nn {
                let out = models
                    .pick(method, sigma)
                    .ok_or_else(|| HurstError::Config(format!("no nn model for method {method}")))
                    .and_then(|m| nn_estimate(&analysis, m, method));
                records.push(match out {
                    Ok((h_hat, v, x)) => record(method, aggregate, Some(h_hat), v, x),
                    Err(e) => {
                        log::debug!("nn aggregate failed: {e}");
                        record(method, aggregate, None, 0, 0)
                    }
                });
            } else {
                let h_hat = aggregate_pairs(&pairs, aggregate).ok();
                records.push(record(method, aggregate, h_hat, valid, pairs.len() - valid));
            }
        }
        if keep_pairs {
            details.push(PairDetail {
                h_true: h,
                sigma_eps: sigma,
                method,
                replicate: task.replicate,
                pairs,
            });
        }
    }
    (records, details)
}

/// Runs every (H, σ, replicate) cell of `config` on up to `threads` workers.
///
/// Output order is (H index, σ index, replicate, method, aggregate) whatever
/// the worker count.
pub fn run_sweep_detailed(
    config: &ExperimentConfig,
    threads: Option<usize>,
    keep_pairs: bool,
) -> Result<SweepOutput> {
    config.validate()?;
    let filter = make_filter(&config.filter)?;
    let models = Models::load(config)?;
    let mut tasks =
        Vec::with_capacity(config.h_grid.len() * config.noise_grid.len() * config.replicates);
    for h_index in 0..config.h_grid.len() {
        for sigma_index in 0..config.noise_grid.len() {
            for replicate in 0..config.replicates {
                tasks.push(Task {
                    h_index,
                    sigma_index,
                    replicate,
                });
            }
        }
    }
    let results: Vec<(Vec<ResultRecord>, Vec<PairDetail>)> = with_workers(threads, || {
        tasks
            .par_iter()
            .map(|t| run_task(config, &filter, &models, t, keep_pairs))
            .collect()
    })?;
    let mut out = SweepOutput::default();
    for (r, d) in results {
        out.records.extend(r);
        out.details.extend(d);
    }
    Ok(out)
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    Ok(run_sweep_detailed(config, None, false)?.records)
}

/// Feature matrix for the learned aggregator.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub features: Array2<f64>,
    pub targets: Vec<f64>,
    pub pair_order: Vec<(usize, usize)>,
    pub method: Method,
    pub sigma_eps: f64,
    /// `(H index, replicate)` of each row.
    pub rows: Vec<(usize, usize)>,
}

/// One row per (H, replicate) at noise level `noise_grid[sigma_index]`: the
/// pair estimates of `method` over the `nn` level range, invalid pairs imputed.
pub fn build_training_matrix(
    config: &ExperimentConfig,
    sigma_index: usize,
    method: Method,
    threads: Option<usize>,
) -> Result<TrainingSet> {
    config.validate()?;
    config.check_range("nn", config.level_range.nn)?;
    if !method.is_pairwise() {
        return Err(HurstError::Config(
            "training features need a pairwise method".into(),
        ));
    }
    let sigma = *config
        .noise_grid
        .get(sigma_index)
        .ok_or_else(|| HurstError::Config(format!("noise index {sigma_index} out of range")))?;
    let filter = make_filter(&config.filter)?;
    let (lo, hi) = config.level_range.nn;
    let order = pair_order(lo, hi);
    let tasks: Vec<(usize, usize)> = (0..config.h_grid.len())
        .flat_map(|h| (0..config.replicates).map(move |r| (h, r)))
        .collect();
    let rows: Vec<Option<Vec<f64>>> = with_workers(threads, || {
        tasks
            .par_iter()
            .map(|&(hi_, rep)| {
                let seed = replicate_seed(config.base_seed, hi_, sigma_index, rep);
                let spec = SignalSpec::new(config.signal_length, config.h_grid[hi_], seed)
                    .with_noise(sigma)
                    .with_sampling(config.sampling);
                let features = synthesize(&spec)
                    .and_then(|s| {
                        analyze(s.samples(), &filter, config.detrend, config.noise_source)
                    })
                    .and_then(|a| a.pairs(method, lo, hi))
                    .and_then(|p| nn_features(&p));
                match features {
                    Ok(f) => Some(f),
                    Err(e) => {
                        log::warn!(
                            "training row H={} replicate {rep} dropped: {e}",
                            config.h_grid[hi_]
                        );
                        None
                    }
                }
            })
            .collect()
    })?;
    let mut flat = Vec::with_capacity(tasks.len() * order.len());
    let mut targets = Vec::with_capacity(tasks.len());
    let mut kept = Vec::with_capacity(tasks.len());
    for (&(h_index, rep), row) in tasks.iter().zip(rows) {
        if let Some(row) = row {
            flat.extend(row);
            targets.push(config.h_grid[h_index]);
            kept.push((h_index, rep));
        }
    }
    let features =
        Array2::from_shape_vec((targets.len(), order.len()), flat).expect("rows have equal length");
    Ok(TrainingSet {
        features,
        targets,
        pair_order: order,
        method,
        sigma_eps: sigma,
        rows: kept,
    })
}
