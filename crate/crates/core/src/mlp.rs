//! Small MLP classifier with quantization-aware training.
//!
//! The forward pass uses power-of-two weights at a configurable fixed-point
//! decimal-point position and ADC-quantized inputs. Gradients flow to float
//! shadow weights through a straight-through estimator: the quantizer is
//! treated as the identity on the way back.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adc::AdcKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const WEIGHT_BITS: u32 = 8;

const HIDDEN_BIAS_INIT: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpTopology {
    pub layer_sizes: Vec<usize>,
}

impl MlpTopology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("topology needs an input and an output layer"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(Self { layer_sizes })
    }

    /// One hidden layer of `max(3, classes)` neurons.
    pub fn default_for(n_features: usize, n_classes: usize) -> Self {
        Self {
            layer_sizes: vec![n_features, n_classes.max(3), n_classes],
        }
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty topology")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasQuant {
    /// Full `weight_bits` fixed point at the same decimal-point position.
    #[default]
    FixedPoint,
    PowerOfTwo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantConfig {
    pub weight_bits: u32,
    /// Fractional bits of the fixed-point coefficient format.
    pub dpos: u32,
    pub bias: BiasQuant,
}

impl QuantConfig {
    pub fn new(dpos: u32) -> Result<Self> {
        let cfg = Self {
            weight_bits: WEIGHT_BITS,
            dpos,
            bias: BiasQuant::FixedPoint,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.weight_bits) {
            return Err(Error::invalid(format!(
                "weight width {} outside 2..=16 bits",
                self.weight_bits
            )));
        }
        if self.dpos >= self.weight_bits {
            return Err(Error::invalid(format!(
                "decimal-point position {} must be below {}",
                self.dpos, self.weight_bits
            )));
        }
        Ok(())
    }

    pub fn min_exp(&self) -> i32 {
        -(self.dpos as i32)
    }

    /// Largest power of two representable in signed fixed point.
    pub fn max_exp(&self) -> i32 {
        self.weight_bits as i32 - 2 - self.dpos as i32
    }

    fn fixed_range(&self) -> (i64, i64) {
        let half = 1i64 << (self.weight_bits - 1);
        (-half, half - 1)
    }

    fn lsb<T: Scalar>(&self) -> T {
        T::lit(2f64.powi(-(self.dpos as i32)))
    }
}

/// Power-of-two weight as `(sign, exponent)`; sign 0 with no exponent is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pow2Code(pub i8, pub Option<i32>);

impl Pow2Code {
    pub const ZERO: Pow2Code = Pow2Code(0, None);

    pub fn value<T: Scalar>(self) -> T {
        match self {
            Pow2Code(s, Some(e)) if s != 0 => T::lit(f64::from(s) * 2f64.powi(e)),
            _ => T::zero(),
        }
    }

    fn validate(self, cfg: &QuantConfig) -> Result<()> {
        match self {
            Pow2Code(0, None) => Ok(()),
            Pow2Code(s, Some(e)) if (s == 1 || s == -1) && (cfg.min_exp()..=cfg.max_exp()).contains(&e) => Ok(()),
            other => Err(Error::invalid(format!("weight code {other:?} outside format"))),
        }
    }
}

fn pow2<T: Scalar>(e: i32) -> T {
    T::lit(2f64.powi(e))
}

/// Nearest power of two in the log domain (ties toward the smaller exponent),
/// clamped to the representable range. Magnitudes below half the smallest
/// representable one become zero.
pub fn pow2_code<T: Scalar>(w: T, cfg: &QuantConfig) -> Result<Pow2Code> {
    if w.is_nan() {
        return Err(Error::invalid("NaN weight"));
    }
    let mag = w.abs();
    if mag < pow2::<T>(cfg.min_exp()) / T::lit(2.0) {
        return Ok(Pow2Code::ZERO);
    }
    let sign = if w < T::zero() { -1 } else { 1 };
    if mag.is_infinite() {
        return Ok(Pow2Code(sign, Some(cfg.max_exp())));
    }
    let mut e = mag.log2().floor().to_i32().unwrap_or(cfg.max_exp());
    while pow2::<T>(e) > mag {
        e -= 1;
    }
    while pow2::<T>(e + 1) <= mag {
        e += 1;
    }
    if mag > pow2::<T>(e) * T::lit(std::f64::consts::SQRT_2) {
        e += 1;
    }
    Ok(Pow2Code(sign, Some(e.clamp(cfg.min_exp(), cfg.max_exp()))))
}

pub fn quantize_weight_pow2<T: Scalar>(w: T, cfg: &QuantConfig) -> Result<T> {
    pow2_code(w, cfg).map(Pow2Code::value)
}

/// Integer fixed-point code of a bias, value `code * 2^-dpos`.
pub fn bias_code<T: Scalar>(b: T, cfg: &QuantConfig) -> Result<i64> {
    if b.is_nan() {
        return Err(Error::invalid("NaN bias"));
    }
    let (lo, hi) = cfg.fixed_range();
    match cfg.bias {
        BiasQuant::FixedPoint => {
            let scaled = (b / cfg.lsb::<T>()).round();
            let code = scaled.to_f64().unwrap_or(0.0).clamp(lo as f64, hi as f64);
            Ok(code as i64)
        }
        BiasQuant::PowerOfTwo => Ok(match pow2_code(b, cfg)? {
            Pow2Code(s, Some(e)) => i64::from(s) << (e + cfg.dpos as i32),
            _ => 0,
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn affine(&self, x: &[T]) -> Vec<T> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v))
            .collect()
    }
}

fn check_layers<T: Scalar>(topology: &MlpTopology, layers: &[Layer<T>]) -> Result<()> {
    let sizes = &topology.layer_sizes;
    if layers.len() + 1 != sizes.len() {
        return Err(Error::DimensionMismatch {
            expected: sizes.len() - 1,
            got: layers.len(),
        });
    }
    for (l, w) in layers.iter().zip(sizes.windows(2)) {
        if l.inputs != w[0] || l.outputs != w[1] || l.weights.len() != w[0] * w[1] || l.bias.len() != w[1] {
            return Err(Error::invalid("layer shape does not match topology"));
        }
    }
    Ok(())
}

/// Forward pass with ReLU on hidden layers; returns output logits.
pub fn forward_layers<T: Scalar>(layers: &[Layer<T>], x: &[T]) -> Result<Vec<T>> {
    let first = layers.first().ok_or(Error::Empty("layer stack"))?;
    if x.len() != first.inputs {
        return Err(Error::DimensionMismatch {
            expected: first.inputs,
            got: x.len(),
        });
    }
    let mut act = x.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        act = layer.affine(&act);
        if i + 1 < layers.len() {
            act.iter_mut().for_each(|a| *a = a.max(T::zero()));
        }
    }
    Ok(act)
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax<T: Scalar>(logits: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over `rows` and its gradient with respect to every
/// weight and bias of `layers`.
pub fn loss_and_grad<T: Scalar>(
    layers: &[Layer<T>],
    inputs: &[Vec<T>],
    labels: &[usize],
    rows: &[usize],
) -> (T, Vec<Layer<T>>) {
    let mut grads: Vec<Layer<T>> = layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();
    let mut total = T::zero();
    for &r in rows {
        // keep every activation for the backward pass
        let mut acts: Vec<Vec<T>> = vec![inputs[r].clone()];
        for (i, layer) in layers.iter().enumerate() {
            let mut z = layer.affine(acts.last().expect("input activation"));
            if i + 1 < layers.len() {
                z.iter_mut().for_each(|a| *a = a.max(T::zero()));
            }
            acts.push(z);
        }
        let logits = acts.last().expect("output activation");
        let peak = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&z| (z - peak).exp()).collect();
        let norm: T = exps.iter().copied().sum();
        total = total + norm.ln() + peak - logits[labels[r]];

        let mut delta: Vec<T> = exps.iter().map(|&e| e / norm).collect();
        delta[labels[r]] = delta[labels[r]] - T::one();
        for li in (0..layers.len()).rev() {
            let layer = &layers[li];
            let input = &acts[li];
            let g = &mut grads[li];
            for o in 0..layer.outputs {
                g.bias[o] = g.bias[o] + delta[o];
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &a) in row.iter_mut().zip(input) {
                    *gw = *gw + delta[o] * a;
                }
            }
            if li > 0 {
                let mut back = vec![T::zero(); layer.inputs];
                for o in 0..layer.outputs {
                    for (i, b) in back.iter_mut().enumerate() {
                        *b = *b + layer.weights[o * layer.inputs + i] * delta[o];
                    }
                }
                // ReLU derivative of the hidden activation feeding this layer
                for (b, &a) in back.iter_mut().zip(input) {
                    if a <= T::zero() {
                        *b = T::zero();
                    }
                }
                delta = back;
            }
        }
    }
    let scale = T::one() / T::lit(rows.len().max(1) as f64);
    for g in &mut grads {
        g.weights.iter_mut().for_each(|w| *w = *w * scale);
        g.bias.iter_mut().for_each(|b| *b = *b * scale);
    }
    (total * scale, grads)
}

pub trait Classifier<T: Scalar> {
    fn logits(&self, x: &[T]) -> Result<Vec<T>>;

    fn predict(&self, x: &[T]) -> Result<usize> {
        self.logits(x).map(|l| argmax(&l))
    }
}

/// Float network; in QAT these are the shadow weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub topology: MlpTopology,
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// He-uniform weights, zero biases.
    pub fn init(topology: &MlpTopology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = topology
            .layer_sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                let mut l = Layer::zeros(w[0], w[1]);
                l.weights
                    .iter_mut()
                    .for_each(|v| *v = T::lit(rng.random_range(-limit..limit)));
                l.bias.iter_mut().for_each(|b| *b = T::lit(HIDDEN_BIAS_INIT));
                l
            })
            .collect();
        Self {
            topology: topology.clone(),
            layers,
        }
    }

    pub fn from_layers(topology: MlpTopology, layers: Vec<Layer<T>>) -> Result<Self> {
        check_layers(&topology, &layers)?;
        Ok(Self { topology, layers })
    }

    pub fn quantize(&self, cfg: &QuantConfig) -> Result<QuantizedMlp<T>> {
        let weight_codes = self
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|&w| pow2_code(w, cfg)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let bias_codes = self
            .layers
            .iter()
            .map(|l| l.bias.iter().map(|&b| bias_code(b, cfg)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        QuantizedMlp::from_codes(self.topology.clone(), *cfg, weight_codes, bias_codes)
    }
}

impl<T: Scalar> Classifier<T> for Mlp<T> {
    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        forward_layers(&self.layers, x)
    }
}

/// Deployable network: every weight is `0` or `±2^k` and every bias an
/// integer multiple of `2^-dpos`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedMlp<T> {
    pub topology: MlpTopology,
    pub cfg: QuantConfig,
    pub weight_codes: Vec<Vec<Pow2Code>>,
    pub bias_codes: Vec<Vec<i64>>,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> QuantizedMlp<T> {
    pub fn from_codes(
        topology: MlpTopology,
        cfg: QuantConfig,
        weight_codes: Vec<Vec<Pow2Code>>,
        bias_codes: Vec<Vec<i64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        let (lo, hi) = cfg.fixed_range();
        let lsb = cfg.lsb::<T>();
        let mut layers = Vec::with_capacity(weight_codes.len());
        for ((w, b), dims) in weight_codes.iter().zip(&bias_codes).zip(topology.layer_sizes.windows(2)) {
            for c in w {
                c.validate(&cfg)?;
            }
            if let Some(bad) = b.iter().find(|&&c| c < lo || c > hi) {
                return Err(Error::invalid(format!("bias code {bad} outside fixed-point range")));
            }
            layers.push(Layer {
                inputs: dims[0],
                outputs: dims[1],
                weights: w.iter().map(|c| c.value()).collect(),
                bias: b.iter().map(|&c| T::lit(c as f64) * lsb).collect(),
            });
        }
        check_layers(&topology, &layers)?;
        Ok(Self {
            topology,
            cfg,
            weight_codes,
            bias_codes,
            layers,
        })
    }

    /// Effective (dequantized) layers used by inference.
    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        forward_layers(&self.layers, x)
    }
}

impl<T: Scalar> Classifier<T> for QuantizedMlp<T> {
    fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.forward(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.05,
            batch: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub epochs: usize,
    pub train_accuracy: f64,
    pub final_loss: f64,
    /// Mean minibatch loss of every epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedModel<T> {
    pub shadow: Mlp<T>,
    pub quantized: QuantizedMlp<T>,
    pub seed: u64,
    pub metrics: TrainMetrics,
}

/// ADC representation values for every row of a normalized dataset.
pub fn encode_inputs<T: Scalar>(ds: &Dataset, adcs: &[AdcKind]) -> Result<Vec<Vec<T>>> {
    if adcs.len() != ds.n_features() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_features(),
            got: adcs.len(),
        });
    }
    ds.features
        .iter()
        .map(|row| {
            row.iter()
                .zip(adcs)
                .map(|(&v, adc)| adc.quantize(T::lit(v)).map(|q| q.repr))
                .collect()
        })
        .collect()
}

pub fn raw_inputs<T: Scalar>(ds: &Dataset) -> Vec<Vec<T>> {
    ds.features
        .iter()
        .map(|row| row.iter().map(|&v| T::lit(v)).collect())
        .collect()
}

fn check_hyper(hyper: &TrainHyper) -> Result<()> {
    if hyper.batch == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if !(hyper.lr.is_finite() && hyper.lr > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    Ok(())
}

/// Minibatch SGD. With a quantization config the loss is taken at the
/// quantized weights and the gradient is applied unchanged to the shadow
/// weights, which are clipped to the representable range.
fn sgd<T: Scalar>(
    mut model: Mlp<T>,
    inputs: &[Vec<T>],
    labels: &[usize],
    quant: Option<&QuantConfig>,
    hyper: &TrainHyper,
) -> Result<(Mlp<T>, Vec<f64>)> {
    check_hyper(hyper)?;
    let lr = T::lit(hyper.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for rows in order.chunks(hyper.batch) {
            let (loss, grads) = match quant {
                Some(cfg) => {
                    let q = model.quantize(cfg)?;
                    loss_and_grad(q.layers(), inputs, labels, rows)
                }
                None => loss_and_grad(&model.layers, inputs, labels, rows),
            };
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            total += loss * rows.len() as f64;
            for (layer, g) in model.layers.iter_mut().zip(&grads) {
                for (w, &gw) in layer.weights.iter_mut().zip(&g.weights) {
                    *w = *w - lr * gw;
                }
                for (b, &gb) in layer.bias.iter_mut().zip(&g.bias) {
                    *b = *b - lr * gb;
                }
            }
            if let Some(cfg) = quant {
                clip_shadow(&mut model, cfg);
            }
        }
        history.push(total / inputs.len() as f64);
    }
    Ok((model, history))
}

fn clip_shadow<T: Scalar>(model: &mut Mlp<T>, cfg: &QuantConfig) {
    let w_max = pow2::<T>(cfg.max_exp());
    let (lo, hi) = cfg.fixed_range();
    let lsb = cfg.lsb::<T>();
    let (b_lo, b_hi) = (T::lit(lo as f64) * lsb, T::lit(hi as f64) * lsb);
    for layer in &mut model.layers {
        layer.weights.iter_mut().for_each(|w| *w = w.max(-w_max).min(w_max));
        layer.bias.iter_mut().for_each(|b| *b = b.max(b_lo).min(b_hi));
    }
}

fn check_training_set(ds: &Dataset, topology: &MlpTopology) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if topology.inputs() != ds.n_features() {
        return Err(Error::DimensionMismatch {
            expected: topology.inputs(),
            got: ds.n_features(),
        });
    }
    if topology.outputs() < ds.n_classes() {
        return Err(Error::invalid(format!(
            "{} outputs cannot represent {} classes",
            topology.outputs(),
            ds.n_classes()
        )));
    }
    Ok(())
}

fn accuracy<T: Scalar, M: Classifier<T>>(model: &M, inputs: &[Vec<T>], labels: &[usize]) -> Result<f64> {
    let mut correct = 0usize;
    for (x, &y) in inputs.iter().zip(labels) {
        if model.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / inputs.len() as f64)
}

/// Float-weight reference model on the raw normalized features.
pub fn train_float<T: Scalar>(
    train: &Dataset,
    topology: &MlpTopology,
    hyper: &TrainHyper,
) -> Result<(Mlp<T>, TrainMetrics)> {
    check_training_set(train, topology)?;
    let inputs = raw_inputs::<T>(train);
    let (model, history) = sgd(Mlp::init(topology, hyper.seed), &inputs, &train.labels, None, hyper)?;
    let metrics = TrainMetrics {
        epochs: hyper.epochs,
        train_accuracy: accuracy(&model, &inputs, &train.labels)?,
        final_loss: history.last().copied().unwrap_or(f64::NAN),
        loss_history: history,
    };
    Ok((model, metrics))
}

/// Quantization-aware training from a seeded random initialization.
pub fn train_qat<T: Scalar>(
    train: &Dataset,
    topology: &MlpTopology,
    cfg: &QuantConfig,
    adcs: &[AdcKind],
    hyper: &TrainHyper,
) -> Result<TrainedModel<T>> {
    fine_tune_qat(&Mlp::init(topology, hyper.seed), train, cfg, adcs, hyper)
}

/// Quantization-aware training starting from existing shadow weights.
pub fn fine_tune_qat<T: Scalar>(
    init: &Mlp<T>,
    train: &Dataset,
    cfg: &QuantConfig,
    adcs: &[AdcKind],
    hyper: &TrainHyper,
) -> Result<TrainedModel<T>> {
    cfg.validate()?;
    check_training_set(train, &init.topology)?;
    let inputs = encode_inputs::<T>(train, adcs)?;
    let mut start = init.clone();
    clip_shadow(&mut start, cfg);
    let (shadow, history) = sgd(start, &inputs, &train.labels, Some(cfg), hyper)?;
    let quantized = shadow.quantize(cfg)?;
    let metrics = TrainMetrics {
        epochs: hyper.epochs,
        train_accuracy: accuracy(&quantized, &inputs, &train.labels)?,
        final_loss: history.last().copied().unwrap_or(f64::NAN),
        loss_history: history,
    };
    Ok(TrainedModel {
        shadow,
        quantized,
        seed: hyper.seed,
        metrics,
    })
}

/// Fraction of rows whose ADC-quantized features are classified correctly.
pub fn evaluate<T: Scalar, M: Classifier<T>>(model: &M, test: &Dataset, adcs: &[AdcKind]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let inputs = encode_inputs::<T>(test, adcs)?;
    accuracy(model, &inputs, &test.labels)
}

/// Like [`evaluate`] but on the raw normalized features.
pub fn evaluate_raw<T: Scalar, M: Classifier<T>>(model: &M, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    accuracy(model, &raw_inputs::<T>(test), &test.labels)
}

pub const MODEL_FORMAT: &str = "bsadc-model/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    /// One row per output neuron.
    pub weights: Vec<Vec<Pow2Code>>,
    pub bias: Vec<i64>,
}

/// On-disk form of a quantized model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub topology: Vec<usize>,
    pub weight_bits: u32,
    pub dpos: u32,
    pub bias_quant: BiasQuant,
    pub layers: Vec<LayerFile>,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

impl ModelFile {
    pub fn from_model<T: Scalar>(model: &QuantizedMlp<T>, seed: u64, metrics: BTreeMap<String, f64>) -> Self {
        let layers = model
            .weight_codes
            .iter()
            .zip(&model.bias_codes)
            .zip(model.topology.layer_sizes.windows(2))
            .map(|((w, b), dims)| LayerFile {
                weights: w.chunks(dims[0]).map(<[Pow2Code]>::to_vec).collect(),
                bias: b.clone(),
            })
            .collect();
        Self {
            format: MODEL_FORMAT.into(),
            topology: model.topology.layer_sizes.clone(),
            weight_bits: model.cfg.weight_bits,
            dpos: model.cfg.dpos,
            bias_quant: model.cfg.bias,
            layers,
            seed,
            metrics,
        }
    }

    pub fn to_model<T: Scalar>(&self) -> Result<QuantizedMlp<T>> {
        if self.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("unsupported model format `{}`", self.format)));
        }
        let cfg = QuantConfig {
            weight_bits: self.weight_bits,
            dpos: self.dpos,
            bias: self.bias_quant,
        };
        QuantizedMlp::from_codes(
            MlpTopology::new(self.topology.clone())?,
            cfg,
            self.layers.iter().map(|l| l.weights.concat()).collect(),
            self.layers.iter().map(|l| l.bias.clone()).collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
