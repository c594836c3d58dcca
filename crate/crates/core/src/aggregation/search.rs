use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, MlpModel};
use super::train::{mlp_train, TrainConfig, TrainReport};
use crate::error::{HurstError, Result};

/// Sampling ranges of the random search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRanges {
    pub hidden_layers: (usize, usize),
    pub neurons: (usize, usize),
    pub activations: Vec<Activation>,
    pub learning_rate: (f64, f64),
    pub batch_sizes: Vec<usize>,
    pub weight_decay: (f64, f64),
}

impl Default for SearchRanges {
    fn default() -> Self {
        Self {
            hidden_layers: (2, 5),
            neurons: (4, 512),
            activations: Activation::ALL.to_vec(),
            learning_rate: (1e-4, 1e-2),
            batch_sizes: vec![16, 32, 64],
            weight_decay: (1e-6, 1e-4),
        }
    }
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

impl SearchRanges {
    /// Draws one configuration; epoch, fold and split settings come from `base`.
    pub fn sample<R: Rng>(&self, rng: &mut R, base: &TrainConfig) -> TrainConfig {
        let depth = rng.random_range(self.hidden_layers.0..=self.hidden_layers.1);
        let hidden_layers = (0..depth)
            .map(|_| rng.random_range(self.neurons.0..=self.neurons.1))
            .collect();
        TrainConfig {
            hidden_layers,
            activation: self.activations[rng.random_range(0..self.activations.len())],
            learning_rate: log_uniform(rng, self.learning_rate),
            batch_size: self.batch_sizes[rng.random_range(0..self.batch_sizes.len())],
            weight_decay: log_uniform(rng, self.weight_decay),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub config: TrainConfig,
    pub mean_cv_mse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub config: TrainConfig,
    pub model: MlpModel,
    pub report: TrainReport,
    pub trials: Vec<TrialSummary>,
}

/// Seeded random search; the trial with the lowest mean cross-validation MSE wins.
///
/// Configurations are drawn sequentially from `seed` before any training, and
/// each trial trains with its own derived seed, so the selection does not
/// depend on the number of worker threads.
pub fn hyperparam_search(
    features: ArrayView2<f64>,
    targets: &[f64],
    budget: usize,
    seed: u64,
    base: &TrainConfig,
    ranges: &SearchRanges,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(HurstError::Config(
            "search budget must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<TrainConfig> = (0..budget)
        .map(|t| {
            let mut c = ranges.sample(&mut rng, base);
            c.seed = seed.wrapping_add(0x5851_F42D_4C95_7F2D_u64.wrapping_mul(t as u64 + 1));
            c
        })
        .collect();
    let results: Vec<Result<(MlpModel, TrainReport)>> = configs
        .par_iter()
        .map(|c| mlp_train(features, targets, c))
        .collect();

    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(usize, f64)> = None;
    for (t, (config, result)) in configs.iter().zip(&results).enumerate() {
        let (score, error) = match result {
            Ok((_, report)) if report.mean_cv_mse.is_finite() => (Some(report.mean_cv_mse), None),
            Ok(_) => (None, Some("non-finite validation MSE".to_string())),
            Err(e) => (None, Some(e.to_string())),
        };
        log::info!(
            "trial {t}: layers {:?} {:?} lr {:.2e} batch {} wd {:.2e} -> {}",
            config.hidden_layers,
            config.activation,
            config.learning_rate,
            config.batch_size,
            config.weight_decay,
            score.map_or_else(|| error.clone().unwrap_or_default(), |s| format!("{s:.4e}"))
        );
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((t, s));
            }
        }
        trials.push(TrialSummary {
            trial: t,
            config: config.clone(),
            mean_cv_mse: score,
            error,
        });
    }
    let Some((winner, _)) = best else {
        let detail: Vec<String> = trials
            .iter()
            .map(|t| format!("trial {}: {}", t.trial, t.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(HurstError::SearchFailed(detail.join("; ")));
    };
    let (model, report) = results
        .into_iter()
        .nth(winner)
        .expect("winner index")
        .expect("winner trained");
    Ok(SearchOutcome {
        config: configs[winner].clone(),
        model,
        report,
        trials,
    })
}

/// Names of the shipped architectures, one per noise level of the reference grid.
pub const PRESET_NAMES: &[&str] = &[
    "sigma0.00",
    "sigma0.25",
    "sigma0.50",
    "sigma0.75",
    "sigma1.00",
];

/// A fixed architecture and optimizer setting tuned for one noise level.
pub fn preset(name: &str) -> Result<TrainConfig> {
    use Activation::{LeakyRelu, Tanh};
    let (hidden, lr, act, batch, wd): (&[usize], f64, Activation, usize, f64) = match name {
        "sigma0.00" => (&[484, 68, 228, 324, 324], 5.8e-4, LeakyRelu, 64, 9.18e-6),
        "sigma0.25" => (&[132, 260, 68, 4, 164], 9.5e-3, Tanh, 32, 7.12e-6),
        "sigma0.50" => (&[292, 164, 324, 484], 3.94e-4, LeakyRelu, 16, 1.10e-6),
        "sigma0.75" => (&[388, 4, 324, 228, 484], 4.71e-4, LeakyRelu, 16, 2.29e-6),
        "sigma1.00" => (&[324, 132, 356, 196], 5.52e-4, LeakyRelu, 16, 1.07e-6),
        _ => {
            return Err(HurstError::Lookup {
                kind: "model preset",
                name: name.to_string(),
            })
        }
    };
    Ok(TrainConfig {
        hidden_layers: hidden.to_vec(),
        activation: act,
        learning_rate: lr,
        batch_size: batch,
        weight_decay: wd,
        ..TrainConfig::default()
    })
}
