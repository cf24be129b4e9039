//! Fully connected feed-forward network trained with ADAM.
//!
//! Hidden layers use the rectifier and share one width; the output layer is
//! linear. Parameters live in one flat vector (per layer: the weight matrix
//! row-major by output unit, then the bias), which keeps the optimizer and
//! the gradient checks simple.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;
use crate::timeseries::{DailySeries, Samples, ScalingSpec};

const INIT_STREAM: u64 = 10;
const SHUFFLE_STREAM: u64 = 11;
const DROPOUT_STREAM: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_width: usize,
    pub hidden_layers: usize,
    pub nodes_per_layer: usize,
    pub output_width: usize,
    /// Fraction of hidden units dropped during training.
    pub dropout: f64,
}

impl MlpArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.hidden_layers == 0 || self.nodes_per_layer == 0 || self.output_width == 0 {
            return Err(Error::Config(format!(
                "architecture needs positive widths and at least one hidden layer: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_width;
        for _ in 0..self.hidden_layers {
            shapes.push((fan_in, self.nodes_per_layer));
            fan_in = self.nodes_per_layer;
        }
        shapes.push((fan_in, self.output_width));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Inverse-time learning-rate decay per update.
    pub decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            learning_rate: 0.001,
            decay: 0.0,
            seed,
        }
    }
}

/// ADAM with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub decay: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64, decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let lr = self.learning_rate / (1.0 + self.decay * self.t as f64);
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

/// Network weights together with their architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    arch: MlpArchitecture,
    params: Vec<f64>,
    /// Training-set mean squared error after the last call to [`train`].
    pub final_loss: Option<f64>,
}

/// Scratch space for forward and backward passes.
struct Workspace {
    /// Post-activation outputs per layer; `acts[0]` is unused (the input is
    /// borrowed), `acts[l + 1]` is the output of layer `l`.
    acts: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(arch: &MlpArchitecture) -> Self {
        let shapes = arch.layer_shapes();
        let mut acts = vec![Vec::new()];
        acts.extend(shapes.iter().map(|&(_, o)| vec![0.0; o]));
        Self {
            masks: shapes.iter().map(|&(_, o)| vec![1.0; o]).collect(),
            deltas: shapes.iter().map(|&(_, o)| vec![0.0; o]).collect(),
            acts,
        }
    }
}

/// Initializes a network with scaled-uniform weights
/// (`±sqrt(6 / (fan_in + fan_out))`) and zero biases.
pub fn build_mlp(arch: MlpArchitecture, seed: u64) -> Result<Mlp> {
    arch.validate()?;
    let mut rng = rng_from(seed, &[INIT_STREAM]);
    let mut params = Vec::with_capacity(arch.parameter_count());
    for (fan_in, fan_out) in arch.layer_shapes() {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
        params.extend(std::iter::repeat_n(0.0, fan_out));
    }
    Ok(Mlp {
        arch,
        params,
        final_loss: None,
    })
}

impl Mlp {
    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.params.len());
        self.params.copy_from_slice(params);
    }

    /// `(weights, bias)` of layer `l` (weights are `fan_out × fan_in`, row-major).
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let shapes = self.arch.layer_shapes();
        let offset: usize = shapes[..l].iter().map(|(i, o)| i * o + o).sum();
        let (fi, fo) = shapes[l];
        (
            &self.params[offset..offset + fi * fo],
            &self.params[offset + fi * fo..offset + fi * fo + fo],
        )
    }

    fn forward_into(&self, input: &[f64], ws: &mut Workspace, train_dropout: bool) {
        let shapes = self.arch.layer_shapes();
        let last = shapes.len() - 1;
        let mut offset = 0;
        for (l, &(fi, fo)) in shapes.iter().enumerate() {
            let (w, rest) = self.params[offset..].split_at(fi * fo);
            let b = &rest[..fo];
            offset += fi * fo + fo;
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let x: &[f64] = if l == 0 { input } else { &before[l] };
            let out = &mut after[0];
            for o in 0..fo {
                let row = &w[o * fi..(o + 1) * fi];
                let mut s = b[o];
                for (wi, xi) in row.iter().zip(x) {
                    s += wi * xi;
                }
                out[o] = s;
            }
            if l < last {
                let mask = &ws.masks[l];
                for (v, m) in out.iter_mut().zip(mask) {
                    *v = if *v > 0.0 { *v } else { 0.0 };
                    if train_dropout {
                        *v *= m;
                    }
                }
            }
        }
    }

    /// Network output for one input row.
    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.arch.input_width, "input width mismatch");
        let mut ws = Workspace::new(&self.arch);
        self.forward_into(input, &mut ws, false);
        ws.acts.pop().expect("output layer")
    }

    /// Adds the gradient of `scale · Σ (y − t)²` for one sample to `grad`
    /// and returns the sample's summed squared error.
    fn backprop(&self, input: &[f64], target: &[f64], scale: f64, ws: &mut Workspace, grad: &mut [f64], dropout: bool) -> f64 {
        self.forward_into(input, ws, dropout);
        let shapes = self.arch.layer_shapes();
        let last = shapes.len() - 1;
        let out = &ws.acts[last + 1];
        let mut sse = 0.0;
        for ((d, y), t) in ws.deltas[last].iter_mut().zip(out).zip(target) {
            let e = y - t;
            sse += e * e;
            *d = 2.0 * scale * e;
        }
        let offsets: Vec<usize> = shapes
            .iter()
            .scan(0, |acc, (i, o)| {
                let start = *acc;
                *acc += i * o + o;
                Some(start)
            })
            .collect();
        for l in (0..=last).rev() {
            let (fi, fo) = shapes[l];
            let off = offsets[l];
            let x: &[f64] = if l == 0 { input } else { &ws.acts[l] };
            let delta = &ws.deltas[l];
            {
                let g = &mut grad[off..off + fi * fo + fo];
                let (gw, gb) = g.split_at_mut(fi * fo);
                for o in 0..fo {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (gwi, xi) in gw[o * fi..(o + 1) * fi].iter_mut().zip(x) {
                        *gwi += d * xi;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[off..off + fi * fo];
                let (lower, upper) = ws.deltas.split_at_mut(l);
                let prev = &mut lower[l - 1];
                prev.iter_mut().for_each(|v| *v = 0.0);
                for (o, &d) in upper[0].iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, wi) in prev.iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                        *p += wi * d;
                    }
                }
                // rectifier and dropout mask of layer l - 1
                let act = &ws.acts[l];
                let mask = &ws.masks[l - 1];
                for ((p, a), m) in prev.iter_mut().zip(act).zip(mask) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    } else if dropout {
                        *p *= m;
                    }
                }
            }
        }
        sse
    }

    /// Mean squared error over `samples` and its gradient (no dropout).
    pub fn loss_and_gradient(&self, samples: Samples<'_>) -> (f64, Vec<f64>) {
        let mut ws = Workspace::new(&self.arch);
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / (samples.len() * samples.output_width) as f64;
        let mut sse = 0.0;
        for i in 0..samples.len() {
            sse += self.backprop(samples.input(i), samples.target(i), scale, &mut ws, &mut grad, false);
        }
        (sse * scale, grad)
    }
}

/// Mean over samples and outputs of the squared error (dropout disabled).
pub fn evaluate_loss(model: &Mlp, samples: Samples<'_>) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut ws = Workspace::new(&model.arch);
    let last = model.arch.hidden_layers + 1;
    let mut sse = 0.0;
    for i in 0..samples.len() {
        model.forward_into(samples.input(i), &mut ws, false);
        for (y, t) in ws.acts[last].iter().zip(samples.target(i)) {
            sse += (y - t) * (y - t);
        }
    }
    sse / (samples.len() * samples.output_width) as f64
}

/// Minimizes the training mean squared error with mini-batch ADAM.
///
/// Each epoch visits the samples in a permutation seeded by `(seed, epoch)`; the last
/// batch may be partial. Dropout is inverted (surviving units are scaled by
/// `1 / (1 − rate)`) and active only here.
pub fn train(mut model: Mlp, samples: Samples<'_>, cfg: &TrainConfig) -> Result<Mlp> {
    if samples.input_width != model.arch.input_width || samples.output_width != model.arch.output_width {
        return Err(Error::DimensionMismatch {
            expected: model.arch.input_width,
            got: samples.input_width,
        });
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let n = samples.len();
    if n == 0 {
        return Err(Error::Config("no training samples".into()));
    }
    let rate = model.arch.dropout;
    let use_dropout = rate > 0.0;
    let keep_scale = 1.0 / (1.0 - rate);
    let mut ws = Workspace::new(&model.arch);
    let mut grad = vec![0.0; model.params.len()];
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate, cfg.decay);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        let mut dropout_rng = rng_from(cfg.seed, &[DROPOUT_STREAM, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut rng_from(cfg.seed, &[SHUFFLE_STREAM, epoch as u64]));
        let mut epoch_sse = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / (batch.len() * samples.output_width) as f64;
            for &i in batch {
                if use_dropout {
                    for mask in ws.masks[..model.arch.hidden_layers].iter_mut() {
                        for m in mask.iter_mut() {
                            *m = if dropout_rng.random::<f64>() < rate { 0.0 } else { keep_scale };
                        }
                    }
                }
                epoch_sse += model.backprop(samples.input(i), samples.target(i), scale, &mut ws, &mut grad, use_dropout);
            }
            adam.step(&mut model.params, &grad);
        }
        if !epoch_sse.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: epoch_sse / (n * samples.output_width) as f64,
            });
        }
    }
    let loss = evaluate_loss(&model, samples);
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            loss,
        });
    }
    model.final_loss = Some(loss);
    Ok(model)
}

impl Mlp {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let model: Self = serde_json::from_reader(file)?;
        model.arch.validate()?;
        if model.params.len() != model.arch.parameter_count() {
            return Err(Error::Config("parameter count does not match architecture".into()));
        }
        Ok(model)
    }
}

/// Multi-step forecast where predicted levels replace observed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// Index of the first forecast day in the series.
    pub start: usize,
    /// Normalized predictions, one row per day, one entry per target column.
    pub normalized: Vec<Vec<f64>>,
    /// Predictions in level units.
    pub levels: Vec<Vec<f64>>,
    /// Input window used for each day (only when traced).
    pub windows: Vec<Vec<f64>>,
}

/// Forecasts `horizon` days starting at day `start`, feeding the model's
/// own groundwater predictions back into later input windows while the
/// other variables keep their observed values.
///
/// The prediction for day `k` uses the window of days `k − 1 − G ..= k − 1`,
/// so `start` must be at least `G + 1` and `start + horizon` may not exceed
/// the series length.
pub fn dynamic_forecast(
    model: &Mlp,
    series: &DailySeries,
    scaling: &ScalingSpec,
    target_columns: &[usize],
    start: usize,
    horizon: usize,
) -> Result<Forecast> {
    forecast_impl(model, series, scaling, target_columns, start, horizon, false)
}

/// Like [`dynamic_forecast`] but also records every input window.
pub fn dynamic_forecast_traced(
    model: &Mlp,
    series: &DailySeries,
    scaling: &ScalingSpec,
    target_columns: &[usize],
    start: usize,
    horizon: usize,
) -> Result<Forecast> {
    forecast_impl(model, series, scaling, target_columns, start, horizon, true)
}

fn forecast_impl(
    model: &Mlp,
    series: &DailySeries,
    scaling: &ScalingSpec,
    target_columns: &[usize],
    start: usize,
    horizon: usize,
    traced: bool,
) -> Result<Forecast> {
    let v = series.variable_count();
    let arch = &model.arch;
    if arch.input_width % v != 0 || arch.input_width < 2 * v {
        return Err(Error::Config(format!(
            "model input width {} does not match {v} variables per day",
            arch.input_width
        )));
    }
    if arch.output_width != target_columns.len() {
        return Err(Error::DimensionMismatch {
            expected: arch.output_width,
            got: target_columns.len(),
        });
    }
    let lag = arch.input_width / v - 1;
    if start < lag + 1 {
        return Err(Error::Series(format!(
            "forecast start {start} leaves fewer than {} days of history",
            lag + 1
        )));
    }
    if start + horizon > series.len() {
        return Err(Error::Series(format!(
            "exogenous data missing: horizon ends on day {} but the series has {} days",
            start + horizon,
            series.len()
        )));
    }
    let mut buf = scaling.transform(series)?;
    let mut ws = Workspace::new(arch);
    let last = arch.hidden_layers + 1;
    let mut out = Forecast {
        start,
        normalized: Vec::with_capacity(horizon),
        levels: Vec::with_capacity(horizon),
        windows: Vec::new(),
    };
    for day in start..start + horizon {
        let from = (day - 1 - lag) * v;
        let window = &buf[from..from + arch.input_width];
        model.forward_into(window, &mut ws, false);
        if traced {
            out.windows.push(window.to_vec());
        }
        let pred = ws.acts[last].clone();
        for (&c, &p) in target_columns.iter().zip(&pred) {
            buf[day * v + c] = p;
        }
        out.levels.push(
            target_columns
                .iter()
                .zip(&pred)
                .map(|(&c, &p)| scaling.invert_groundwater(c, p))
                .collect(),
        );
        out.normalized.push(pred);
    }
    Ok(out)
}
