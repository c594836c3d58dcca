use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HurstError, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Slope of the leaky ReLU on the negative half-line.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::LeakyRelu, Activation::Tanh];

    fn apply(self, z: f64, slope: f64) -> f64 {
        match self {
            Self::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Self::Relu => z.max(0.0),
            Self::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64, slope: f64) -> f64 {
        match self {
            Self::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - a * a,
        }
    }
}

/// Per-feature standardization fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    /// Column means and population standard deviations; constant columns are rejected.
    pub fn fit(features: ArrayView2<f64>) -> Result<Self> {
        let rows = features.nrows();
        if rows < 2 {
            return Err(HurstError::InsufficientData(
                "scaler needs at least two rows".into(),
            ));
        }
        let mut means = Vec::with_capacity(features.ncols());
        let mut stds = Vec::with_capacity(features.ncols());
        for (k, col) in features.axis_iter(Axis(1)).enumerate() {
            let mean = col.sum() / rows as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
            let std = var.sqrt();
            if !(std > 1e-12 * (1.0 + mean.abs())) {
                return Err(HurstError::domain(format!(
                    "feature {k} is constant across training rows"
                )));
            }
            means.push(mean);
            stds.push(std);
        }
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, features: ArrayView2<f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for (k, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[k], self.stds[k]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

/// Dense layer `a = W x + b` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

/// Fully connected regressor from candidate estimates to a Hurst value.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    activation: Activation,
    leaky_slope: f64,
    scaler: FeatureScaler,
    pair_order: Vec<(usize, usize)>,
    trained_noise_level: f64,
    feature_method: String,
}

impl MlpModel {
    /// Uniform `U(-1/√fan_in, 1/√fan_in)` initialization of weights and biases.
    pub fn init<R: Rng>(
        layer_sizes: &[usize],
        activation: Activation,
        scaler: FeatureScaler,
        rng: &mut R,
    ) -> Result<Self> {
        check_sizes(layer_sizes)?;
        if scaler.dim() != layer_sizes[0] {
            return Err(HurstError::shape(format!(
                "scaler has {} features, input layer has {}",
                scaler.dim(),
                layer_sizes[0]
            )));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_fn((w[1], w[0]), |_| {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::from_shape_fn(w[1], |_| rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Ok(Self {
            layers,
            activation,
            leaky_slope: LEAKY_SLOPE,
            scaler,
            pair_order: Vec::new(),
            trained_noise_level: 0.0,
            feature_method: String::new(),
        })
    }

    /// Assembles a model from explicit layers.
    pub fn from_layers(
        layers: Vec<Layer>,
        activation: Activation,
        scaler: FeatureScaler,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(HurstError::shape("model needs at least one layer"));
        }
        let mut sizes = vec![layers[0].weights.ncols()];
        for (i, l) in layers.iter().enumerate() {
            if l.weights.ncols() != *sizes.last().unwrap() || l.bias.len() != l.weights.nrows() {
                return Err(HurstError::shape(format!(
                    "layer {i} does not chain with its predecessor"
                )));
            }
            sizes.push(l.weights.nrows());
        }
        check_sizes(&sizes)?;
        if scaler.dim() != sizes[0] || scaler.stds.iter().any(|s| !(*s > 0.0)) {
            return Err(HurstError::shape("scaler does not match the input layer"));
        }
        Ok(Self {
            layers,
            activation,
            leaky_slope: LEAKY_SLOPE,
            scaler,
            pair_order: Vec::new(),
            trained_noise_level: 0.0,
            feature_method: String::new(),
        })
    }

    pub fn with_metadata(
        mut self,
        pair_order: Vec<(usize, usize)>,
        trained_noise_level: f64,
        feature_method: &str,
    ) -> Self {
        self.pair_order = pair_order;
        self.trained_noise_level = trained_noise_level;
        self.feature_method = feature_method.to_string();
        self
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn pair_order(&self) -> &[(usize, usize)] {
        &self.pair_order
    }

    pub fn trained_noise_level(&self) -> f64 {
        self.trained_noise_level
    }

    /// Method whose pair estimates the model consumes (e.g. `nc_alphee`).
    pub fn feature_method(&self) -> &str {
        &self.feature_method
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Prediction for one raw (unstandardized) feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.input_dim() {
            return Err(HurstError::shape(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                features.len()
            )));
        }
        let x = ArrayView2::from_shape((1, features.len()), features).expect("row vector");
        Ok(self.predict_standardized(self.scaler.transform(x).view())[0])
    }

    /// Predictions for raw feature rows.
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        if features.ncols() != self.input_dim() {
            return Err(HurstError::shape(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                features.ncols()
            )));
        }
        Ok(self.predict_standardized(self.scaler.transform(features).view()))
    }

    /// Predictions for already-standardized rows.
    pub fn predict_standardized(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights.t());
            z += &layer.bias;
            if i < last {
                let (act, slope) = (self.activation, self.leaky_slope);
                z.mapv_inplace(|v| act.apply(v, slope));
            }
            a = z;
        }
        a.column(0).to_owned()
    }

    /// Mean squared error on standardized rows and its gradient.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, y: &[f64]) -> (f64, Gradients) {
        let rows = x.nrows();
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = post[i].dot(&layer.weights.t());
            z += &layer.bias;
            let a = if i < last {
                let (act, slope) = (self.activation, self.leaky_slope);
                z.mapv(|v| act.apply(v, slope))
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(a);
        }
        let out = post[last + 1].column(0);
        let mut loss = 0.0;
        let mut delta = Array2::zeros((rows, 1));
        for r in 0..rows {
            let e = out[r] - y[r];
            loss += e * e;
            delta[[r, 0]] = 2.0 * e / rows as f64;
        }
        loss /= rows as f64;

        let mut gw = Vec::with_capacity(self.layers.len());
        let mut gb = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            gw.push(delta.t().dot(&post[i]));
            gb.push(delta.sum_axis(Axis(0)));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                let (act, slope) = (self.activation, self.leaky_slope);
                ndarray::Zip::from(&mut back)
                    .and(&pre[i - 1])
                    .and(&post[i])
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a, slope));
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        (
            loss,
            Gradients {
                weights: gw,
                bias: gb,
            },
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: self.layer_sizes(),
            activation: self.activation,
            leaky_slope: self.leaky_slope,
            scaler_means: self.scaler.means.clone(),
            scaler_stds: self.scaler.stds.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.outer_iter().map(|row| row.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            pair_order: self.pair_order.clone(),
            trained_noise_level: self.trained_noise_level,
            feature_method: self.feature_method.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| HurstError::Internal(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct VersionProbe {
            format_version: u32,
        }
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(HurstError::Incompatible(format!(
                "model format version {} (this build reads version {MODEL_FORMAT_VERSION})",
                probe.format_version
            )));
        }
        let file: ModelFile = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        let layers = file
            .layers
            .into_iter()
            .map(|l| {
                let rows = l.weights.len();
                let cols = l.weights.first().map_or(0, Vec::len);
                let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
                let weights = Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|_| HurstError::shape("ragged weight matrix in model file"))?;
                Ok(Layer {
                    weights,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scaler = FeatureScaler {
            means: file.scaler_means,
            stds: file.scaler_stds,
        };
        let mut model = Self::from_layers(layers, file.activation, scaler)?;
        if model.layer_sizes() != file.layer_sizes {
            return Err(HurstError::shape(
                "layer_sizes disagree with the stored layers",
            ));
        }
        if !file.pair_order.is_empty() && file.pair_order.len() != model.input_dim() {
            return Err(HurstError::shape(
                "pair_order length differs from the input layer",
            ));
        }
        model.leaky_slope = file.leaky_slope;
        Ok(model.with_metadata(
            file.pair_order,
            file.trained_noise_level,
            &file.feature_method,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(HurstError::shape(format!("invalid layer sizes {sizes:?}")));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(HurstError::shape("output layer must have one unit"));
    }
    Ok(())
}

/// Converts a serde_json line/column position into a byte offset.
fn parse_error(text: &str, e: &serde_json::Error) -> HurstError {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(e.line().saturating_sub(1))
        .map(str::len)
        .sum();
    let offset = (line_start + e.column().saturating_sub(1)).min(text.len());
    HurstError::Parse {
        offset: offset as u64,
        message: e.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    layer_sizes: Vec<usize>,
    activation: Activation,
    leaky_slope: f64,
    scaler_means: Vec<f64>,
    scaler_stds: Vec<f64>,
    layers: Vec<LayerFile>,
    pair_order: Vec<(usize, usize)>,
    trained_noise_level: f64,
    #[serde(default)]
    feature_method: String,
}
