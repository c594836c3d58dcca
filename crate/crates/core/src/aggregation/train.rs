use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, FeatureScaler, Gradients, MlpModel};
use crate::error::{HurstError, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub folds: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub search_trials: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![64, 32],
            activation: Activation::LeakyRelu,
            learning_rate: 1e-3,
            batch_size: 32,
            weight_decay: 1e-5,
            max_epochs: 100,
            patience: 5,
            folds: 5,
            train_fraction: 0.85,
            seed: 0,
            search_trials: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HurstError::Config(m));
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return fail(format!(
                "hidden layers {:?} must be non-empty and positive",
                self.hidden_layers
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.batch_size == 0
            || self.max_epochs == 0
            || self.patience == 0
            || self.search_trials == 0
        {
            return fail("batch size, epochs, patience and trial count must be positive".into());
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return fail(format!(
                "weight decay {} must be nonnegative",
                self.weight_decay
            ));
        }
        if self.patience > self.max_epochs {
            return fail("patience exceeds max_epochs".into());
        }
        if self.folds < 2 {
            return fail("cross-validation needs at least 2 folds".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!(
                "train fraction {} must lie in (0, 1)",
                self.train_fraction
            ));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, inputs: usize) -> Vec<usize> {
        let mut sizes = vec![inputs];
        sizes.extend(&self.hidden_layers);
        sizes.push(1);
        sizes
    }
}

/// One line of the training log. `fold` is `None` for the final refit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRow {
    pub fold: Option<usize>,
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub rows: Vec<TrainRow>,
    /// Best validation MSE of each fold.
    pub fold_val_mse: Vec<f64>,
    pub mean_cv_mse: f64,
    /// Epoch budget of the final refit (mean best epoch over folds).
    pub final_epochs: usize,
    pub test_mse: f64,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Adam state mirroring the parameter shapes.
struct Adam {
    lr: f64,
    weight_decay: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    fn new(model: &MlpModel, lr: f64, weight_decay: f64) -> Self {
        let zeros = Gradients {
            weights: model
                .layers()
                .iter()
                .map(|l| Array2::zeros(l.weights.dim()))
                .collect(),
            bias: model
                .layers()
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
        };
        Self {
            lr,
            weight_decay,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let (lr, wd) = (self.lr, self.weight_decay);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            let g = g + wd * *p;
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        for (i, layer) in model.layers_mut().iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weights)
                .and(&grads.weights[i])
                .and(&mut self.m.weights[i])
                .and(&mut self.v.weights[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&grads.bias[i])
                .and(&mut self.m.bias[i])
                .and(&mut self.v.bias[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

fn mse(model: &MlpModel, x: ArrayView2<f64>, y: &[f64]) -> f64 {
    let pred = model.predict_standardized(x);
    pred.iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64
}

/// One pass over `rows` in shuffled mini-batches; returns the mean batch loss.
#[allow(clippy::too_many_arguments)]
fn run_epoch(
    model: &mut MlpModel,
    adam: &mut Adam,
    x: &Array2<f64>,
    y: &[f64],
    rows: &mut [usize],
    batch_size: usize,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    rows.shuffle(rng);
    let mut total = 0.0;
    for (b, batch) in rows.chunks(batch_size).enumerate() {
        let xb = x.select(Axis(0), batch);
        let yb: Vec<f64> = batch.iter().map(|&r| y[r]).collect();
        let (loss, grads) = model.loss_and_gradients(xb.view(), &yb);
        if !loss.is_finite() {
            return Err(HurstError::Divergence { epoch, batch: b });
        }
        adam.step(model, &grads);
        total += loss * batch.len() as f64;
    }
    Ok(total / rows.len() as f64)
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Trains a regressor with k-fold early stopping and a final refit.
///
/// Rows are shuffled once and split into a training part and a held-out test
/// part. Each fold trains on the other folds until the validation MSE has not
/// improved for `patience` epochs. The final model is refit on the whole
/// training part for the mean best epoch count and scored on the test part.
pub fn mlp_train(
    features: ArrayView2<f64>,
    targets: &[f64],
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    config.validate()?;
    let n = features.nrows();
    if targets.len() != n {
        return Err(HurstError::shape(format!(
            "{n} feature rows but {} targets",
            targets.len()
        )));
    }
    if n < 10 * config.folds {
        return Err(HurstError::InsufficientData(format!(
            "{n} samples, need at least {} for {}-fold validation",
            10 * config.folds,
            config.folds
        )));
    }
    if features.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(HurstError::domain(
            "training data contains non-finite values",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((n as f64) * config.train_fraction).round() as usize;
    let (train_rows, test_rows) = order.split_at(n_train.clamp(config.folds, n - 1));

    let scaler = FeatureScaler::fit(features.select(Axis(0), train_rows).view())?;
    let x = scaler.transform(features);
    let sizes = config.layer_sizes(features.ncols());

    let mut rows = Vec::new();
    let mut fold_val_mse = Vec::with_capacity(config.folds);
    let mut best_epochs = Vec::with_capacity(config.folds);
    for fold in 0..config.folds {
        let lo = fold * train_rows.len() / config.folds;
        let hi = (fold + 1) * train_rows.len() / config.folds;
        let val: Vec<usize> = train_rows[lo..hi].to_vec();
        let mut fit: Vec<usize> = train_rows[..lo]
            .iter()
            .chain(&train_rows[hi..])
            .copied()
            .collect();
        let xv = x.select(Axis(0), &val);
        let yv: Vec<f64> = val.iter().map(|&r| targets[r]).collect();

        let mut fold_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, fold as u64));
        let mut model = MlpModel::init(&sizes, config.activation, scaler.clone(), &mut fold_rng)?;
        let mut adam = Adam::new(&model, config.learning_rate, config.weight_decay);
        let mut best = (f64::INFINITY, 0);
        for epoch in 1..=config.max_epochs {
            let train_mse = run_epoch(
                &mut model,
                &mut adam,
                &x,
                targets,
                &mut fit,
                config.batch_size,
                epoch,
                &mut fold_rng,
            )?;
            let val_mse = mse(&model, xv.view(), &yv);
            rows.push(TrainRow {
                fold: Some(fold),
                epoch,
                train_mse,
                val_mse: Some(val_mse),
            });
            if val_mse < best.0 {
                best = (val_mse, epoch);
            } else if epoch - best.1 >= config.patience {
                break;
            }
        }
        log::debug!(
            "fold {fold}: best validation MSE {:.3e} at epoch {}",
            best.0,
            best.1
        );
        fold_val_mse.push(best.0);
        best_epochs.push(best.1);
    }
    let mean_cv_mse = fold_val_mse.iter().sum::<f64>() / config.folds as f64;
    let final_epochs =
        ((best_epochs.iter().sum::<usize>() as f64 / config.folds as f64).round() as usize).max(1);

    let mut final_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, config.folds as u64));
    let mut model = MlpModel::init(&sizes, config.activation, scaler, &mut final_rng)?;
    let mut adam = Adam::new(&model, config.learning_rate, config.weight_decay);
    let mut fit = train_rows.to_vec();
    for epoch in 1..=final_epochs {
        let train_mse = run_epoch(
            &mut model,
            &mut adam,
            &x,
            targets,
            &mut fit,
            config.batch_size,
            epoch,
            &mut final_rng,
        )?;
        rows.push(TrainRow {
            fold: None,
            epoch,
            train_mse,
            val_mse: None,
        });
    }
    let xt = x.select(Axis(0), test_rows);
    let yt: Vec<f64> = test_rows.iter().map(|&r| targets[r]).collect();
    let test_mse = mse(&model, xt.view(), &yt);
    Ok((
        model,
        TrainReport {
            rows,
            fold_val_mse,
            mean_cv_mse,
            final_epochs,
            test_mse,
            train_rows: train_rows.to_vec(),
            test_rows: test_rows.to_vec(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_config(seed: u64) -> TrainConfig {
        TrainConfig {
            hidden_layers: vec![8, 8],
            learning_rate: 5e-3,
            batch_size: 16,
            max_epochs: 60,
            seed,
            ..TrainConfig::default()
        }
    }

    fn dataset(rows: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((rows, 4), |_| rng.random_range(-1.0..1.0));
        let y = x
            .rows()
            .into_iter()
            .map(|r| 0.5 + 0.2 * r[0] - 0.1 * r[2])
            .collect();
        (x, y)
    }

    #[test]
    fn learns_a_constant() {
        let (x, _) = dataset(200, 1);
        let y = vec![0.5; 200];
        let (model, report) = mlp_train(x.view(), &y, &small_config(3)).unwrap();
        assert!(report.test_mse <= 1e-4, "test MSE {}", report.test_mse);
        assert!(model.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap().is_finite());
    }

    #[test]
    fn learns_a_linear_map() {
        let (x, y) = dataset(400, 2);
        let (_, report) = mlp_train(x.view(), &y, &small_config(4)).unwrap();
        assert!(report.test_mse < 1e-3, "test MSE {}", report.test_mse);
        assert_eq!(report.fold_val_mse.len(), 5);
        assert_eq!(report.train_rows.len() + report.test_rows.len(), 400);
        assert_eq!(report.train_rows.len(), 340);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = dataset(120, 5);
        let (a, ra) = mlp_train(x.view(), &y, &small_config(9)).unwrap();
        let (b, rb) = mlp_train(x.view(), &y, &small_config(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let (c, _) = mlp_train(x.view(), &y, &small_config(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn divergence_is_reported() {
        let (x, mut y) = dataset(100, 6);
        y.iter_mut().for_each(|v| *v *= 1e300);
        let config = TrainConfig {
            learning_rate: 1e-2,
            ..small_config(1)
        };
        assert!(matches!(
            mlp_train(x.view(), &y, &config),
            Err(HurstError::Divergence { .. })
        ));
    }

    #[test]
    fn rejects_small_or_bad_input() {
        let (x, y) = dataset(40, 7);
        assert!(matches!(
            mlp_train(x.view(), &y, &small_config(1)),
            Err(HurstError::InsufficientData(_))
        ));
        let (x, y) = dataset(100, 7);
        assert!(mlp_train(x.view(), &y[..99], &small_config(1)).is_err());
        let bad = TrainConfig {
            patience: 200,
            ..small_config(1)
        };
        assert!(matches!(
            mlp_train(x.view(), &y, &bad),
            Err(HurstError::Config(_))
        ));
    }

    #[test]
    fn report_csv_has_fixed_header() {
        let (x, y) = dataset(100, 8);
        let config = TrainConfig {
            max_epochs: 6,
            ..small_config(2)
        };
        let (_, report) = mlp_train(x.view(), &y, &config).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("fold,epoch,train_mse,val_mse\n"));
        assert!(text.lines().any(|l| l.starts_with(",1,")));
    }
}
