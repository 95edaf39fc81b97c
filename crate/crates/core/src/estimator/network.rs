use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AdamState, EstimatorConfig};
use crate::error::{Error, Result};

/// All weights and biases in one flat buffer, layer by layer: weight matrix
/// (rows × cols, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorParams {
    config: EstimatorConfig,
    values: Vec<f64>,
    pub adam: AdamState,
}

/// Gradients laid out exactly like [`EstimatorParams`] values.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    config: EstimatorConfig,
    values: Vec<f64>,
}

fn offsets(config: &EstimatorConfig) -> [(usize, usize, usize, usize); 4] {
    let mut off = 0;
    config.layer_shapes().map(|(rows, cols)| {
        let w = off;
        let b = w + rows * cols;
        off = b + rows;
        (w, b, rows, cols)
    })
}

fn layer_view<'a>(
    config: &EstimatorConfig,
    values: &'a [f64],
    layer: usize,
) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
    let (w, b, rows, cols) = offsets(config)[layer];
    (
        ArrayView2::from_shape((rows, cols), &values[w..b]).unwrap(),
        ArrayView1::from(&values[b..b + rows]),
    )
}

fn layer_view_mut<'a>(
    config: &EstimatorConfig,
    values: &'a mut [f64],
    layer: usize,
) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
    let (w, b, rows, cols) = offsets(config)[layer];
    let (weights, rest) = values[w..b + rows].split_at_mut(b - w);
    (
        ArrayViewMut2::from_shape((rows, cols), weights).unwrap(),
        ArrayViewMut1::from(rest),
    )
}

impl EstimatorParams {
    /// Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases.
    pub fn init(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut values = vec![0.0; config.param_count()];
        for layer in 0..4 {
            let (mut w, _) = layer_view_mut(&config, &mut values, layer);
            let (fan_out, fan_in) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.iter_mut()
                .for_each(|v| *v = rng.random_range(-limit..limit));
        }
        Ok(Self::from_values(config, values))
    }

    pub fn zeros(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::from_values(config, vec![0.0; config.param_count()]))
    }

    pub(crate) fn from_values(config: EstimatorConfig, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), config.param_count());
        let adam = AdamState::new(values.len());
        Self {
            config,
            values,
            adam,
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Weight matrix and bias of layer 0..4 (trunk 1, trunk 2, ratio head, binary head).
    pub fn layer(&self, layer: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        layer_view(&self.config, &self.values, layer)
    }

    pub fn layer_mut(&mut self, layer: usize) -> (ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>) {
        layer_view_mut(&self.config, &mut self.values, layer)
    }
}

impl Gradients {
    pub fn zeros(config: EstimatorConfig) -> Self {
        Self {
            config,
            values: vec![0.0; config.param_count()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn layer(&self, layer: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        layer_view(&self.config, &self.values, layer)
    }

    fn layer_mut(&mut self, layer: usize) -> (ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>) {
        layer_view_mut(&self.config, &mut self.values, layer)
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    config: EstimatorConfig,
    input: Array2<f64>,
    hidden1: Array2<f64>,
    hidden2: Array2<f64>,
    irm: Array2<f64>,
    tbm: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub irm: Array2<f64>,
    pub tbm: Array2<f64>,
    pub cache: ForwardCache,
}

fn affine(x: ArrayView2<f64>, w: ArrayView2<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    z += &b;
    z
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Runs the network on one row of features per frame.
pub fn forward(params: &EstimatorParams, features: ArrayView2<f64>) -> Result<ForwardOutput> {
    let cfg = params.config;
    if features.ncols() != cfg.feature_dim() {
        return Err(Error::invalid(format!(
            "features have width {}, network expects {}",
            features.ncols(),
            cfg.feature_dim()
        )));
    }
    let (w1, b1) = params.layer(0);
    let (w2, b2) = params.layer(1);
    let (wi, bi) = params.layer(2);
    let (wt, bt) = params.layer(3);

    let hidden1 = affine(features, w1, b1).mapv_into(|v| v.max(0.0));
    let hidden2 = affine(hidden1.view(), w2, b2).mapv_into(|v| v.max(0.0));
    let irm = affine(hidden2.view(), wi, bi).mapv_into(sigmoid);
    let tbm = affine(hidden2.view(), wt, bt).mapv_into(sigmoid);
    Ok(ForwardOutput {
        irm: irm.clone(),
        tbm: tbm.clone(),
        cache: ForwardCache {
            config: cfg,
            input: features.to_owned(),
            hidden1,
            hidden2,
            irm,
            tbm,
        },
    })
}

fn accumulate(grads: &mut Gradients, layer: usize, delta: ArrayView2<f64>, input: ArrayView2<f64>) {
    let (mut gw, mut gb) = grads.layer_mut(layer);
    gw.assign(&delta.t().dot(&input));
    gb.assign(&delta.sum_axis(Axis(0)));
}

/// Back-propagates loss gradients with respect to both head outputs. The trunk
/// receives the sum of both heads' contributions.
pub fn backward(
    params: &EstimatorParams,
    cache: &ForwardCache,
    grad_irm: ArrayView2<f64>,
    grad_tbm: ArrayView2<f64>,
) -> Result<Gradients> {
    let cfg = params.config;
    if cache.config != cfg {
        return Err(Error::invalid(
            "forward cache was produced by a different network",
        ));
    }
    if grad_irm.dim() != cache.irm.dim() || grad_tbm.dim() != cache.tbm.dim() {
        return Err(Error::invalid(format!(
            "loss gradients {:?}/{:?} do not match outputs {:?}",
            grad_irm.dim(),
            grad_tbm.dim(),
            cache.irm.dim()
        )));
    }
    let sigmoid_delta = |g: ArrayView2<f64>, y: &Array2<f64>| {
        Zip::from(g).and(y).map_collect(|&g, &y| g * y * (1.0 - y))
    };
    let delta_irm = sigmoid_delta(grad_irm, &cache.irm);
    let delta_tbm = sigmoid_delta(grad_tbm, &cache.tbm);

    let mut grads = Gradients::zeros(cfg);
    accumulate(&mut grads, 2, delta_irm.view(), cache.hidden2.view());
    accumulate(&mut grads, 3, delta_tbm.view(), cache.hidden2.view());

    let (wi, _) = params.layer(2);
    let (wt, _) = params.layer(3);
    let mut delta2 = delta_irm.dot(&wi) + delta_tbm.dot(&wt);
    Zip::from(&mut delta2)
        .and(&cache.hidden2)
        .for_each(|d, &h| {
            if h <= 0.0 {
                *d = 0.0
            }
        });
    accumulate(&mut grads, 1, delta2.view(), cache.hidden1.view());

    let (w2, _) = params.layer(1);
    let mut delta1 = delta2.dot(&w2);
    Zip::from(&mut delta1)
        .and(&cache.hidden1)
        .for_each(|d, &h| {
            if h <= 0.0 {
                *d = 0.0
            }
        });
    accumulate(&mut grads, 0, delta1.view(), cache.input.view());

    Ok(grads)
}

impl ForwardCache {
    pub fn frames(&self) -> usize {
        self.input.nrows()
    }
}
