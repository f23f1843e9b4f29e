//! Fully connected ReLU network with a softmax output, trained by plain
//! mini-batch gradient descent on cross-entropy, plus perturbation-based
//! feature importance.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureStats;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            hidden_layers: vec![5],
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden_layers must be a non-empty list of positive sizes".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be a finite non-negative number".into()));
        }
        Ok(())
    }
}

/// Dense layer; `weights` is row-major `[fan_out][fan_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Layer {
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Layer {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Layer {
            weights: (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect(),
            biases: vec![0.0; fan_out],
            fan_in,
            fan_out,
        }
    }

    fn zeros_like(&self) -> Layer {
        Layer {
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
            fan_in: self.fan_in,
            fan_out: self.fan_out,
        }
    }

    #[inline]
    fn forward(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.fan_in).zip(&self.biases)) {
            *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub input_dim: usize,
    pub output_dim: usize,
    pub spec: MlpSpec,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Per-sample activations kept for the backward pass.
struct Trace {
    /// Layer inputs: `acts[0]` is the sample, `acts[l]` the post-ReLU output of layer l-1.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of every layer; the last one holds the logits.
    pre: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Glorot-uniform weights and zero biases, drawn from the spec's seed.
    pub fn init(input_dim: usize, output_dim: usize, spec: &MlpSpec) -> MlpModel {
        let mut rng = seed::rng(spec.seed, &[seed::tag::MLP, 0]);
        let mut dims = vec![input_dim];
        dims.extend(&spec.hidden_layers);
        dims.push(output_dim);
        let layers = dims.windows(2).map(|w| Layer::glorot(w[0], w[1], &mut rng)).collect();
        MlpModel {
            layers,
            input_dim,
            output_dim,
            spec: spec.clone(),
        }
    }

    fn new_trace(&self) -> Trace {
        Trace {
            acts: std::iter::once(self.input_dim)
                .chain(self.layers.iter().map(|l| l.fan_out))
                .map(|n| vec![0.0; n])
                .collect(),
            pre: self.layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
        }
    }

    fn forward_into(&self, x: &[f64], t: &mut Trace) {
        t.acts[0].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (inputs, outputs) = t.acts.split_at_mut(l + 1);
            layer.forward(&inputs[l], &mut t.pre[l]);
            let out = &mut outputs[0];
            if l < last {
                for (o, &z) in out.iter_mut().zip(&t.pre[l]) {
                    *o = z.max(0.0);
                }
            } else {
                out.copy_from_slice(&t.pre[l]);
            }
        }
    }

    /// Logits for one input row.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut t = self.new_trace();
        self.forward_into(x, &mut t);
        t.pre.pop().unwrap_or_default()
    }

    fn check_input(&self, rows: &Matrix) -> Result<()> {
        if rows.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: rows.cols(),
                context: "network input columns",
            });
        }
        Ok(())
    }

    /// Class predictions; ties go to the smallest class index.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<usize>> {
        self.check_input(rows)?;
        let mut t = self.new_trace();
        Ok((0..rows.rows())
            .map(|i| {
                self.forward_into(rows.row(i), &mut t);
                argmax(&t.pre[self.layers.len() - 1])
            })
            .collect())
    }

    /// Sums the cross-entropy of `x` into `loss` and its gradient into `grad`.
    fn backprop(&self, x: &[f64], y: usize, t: &mut Trace, grad: &mut [Layer], loss: &mut f64) {
        self.forward_into(x, t);
        let last = self.layers.len() - 1;
        let logits = &t.pre[last];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        *loss += log_total - logits[y];

        let mut delta: Vec<f64> = logits.iter().map(|z| (z - log_total).exp()).collect();
        delta[y] -= 1.0;
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let input = &t.acts[l];
            let g = &mut grad[l];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                        for (p, &w) in prev.iter_mut().zip(row) {
                            *p += w * d;
                        }
                    }
                }
                for (p, &z) in prev.iter_mut().zip(&t.pre[l - 1]) {
                    if z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Mean cross-entropy over the rows.
    pub fn loss(&self, x: &Matrix, y: &[usize]) -> f64 {
        self.loss_and_gradient(x, y).0
    }

    /// Mean cross-entropy and its gradient, flattened in [`Self::params`] order.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[usize]) -> (f64, Vec<f64>) {
        let mut grad: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let mut t = self.new_trace();
        let mut loss = 0.0;
        for (i, &label) in y.iter().enumerate() {
            self.backprop(x.row(i), label, &mut t, &mut grad, &mut loss);
        }
        let n = y.len() as f64;
        let flat = grad
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.biases))
            .map(|v| v / n)
            .collect();
        (loss / n, flat)
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .copied()
            .collect()
    }

    /// Panics if `params` has the wrong length.
    pub fn set_params(&mut self, params: &[f64]) {
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = *it.next().expect("too few parameters");
            }
        }
        assert!(it.next().is_none(), "too many parameters");
    }

    fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

/// Trains a fresh network on `x` (rows) and labels in `0..n_classes`.
///
/// Each epoch visits the rows in a seeded shuffled order, in batches of
/// `batch_size`; the step uses the batch-mean gradient.
pub fn train_mlp(x: &Matrix, y: &[usize], n_classes: usize, spec: &MlpSpec) -> Result<MlpModel> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
            context: "training rows vs labels",
        });
    }
    if x.rows() == 0 {
        return Err(Error::InvalidDataset("cannot train on zero rows".into()));
    }
    if n_classes < 2 || y.iter().any(|&c| c >= n_classes) {
        return Err(Error::invalid("labels must lie in 0..n_classes with n_classes >= 2"));
    }
    let mut model = MlpModel::init(x.cols(), n_classes, spec);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut grad: Vec<Layer> = model.layers.iter().map(Layer::zeros_like).collect();
    let mut trace = model.new_trace();
    for epoch in 0..spec.epochs {
        order.shuffle(&mut seed::rng(spec.seed, &[seed::tag::MLP, 1, epoch as u64]));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(spec.batch_size) {
            for g in &mut grad {
                g.weights.iter_mut().for_each(|v| *v = 0.0);
                g.biases.iter_mut().for_each(|v| *v = 0.0);
            }
            let mut loss = 0.0;
            for &i in batch {
                model.backprop(x.row(i), y[i], &mut trace, &mut grad, &mut loss);
            }
            epoch_loss += loss;
            let step = spec.learning_rate / batch.len() as f64;
            for (layer, g) in model.layers.iter_mut().zip(&grad) {
                for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                    *w -= step * gw;
                }
                for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                    *b -= step * gb;
                }
            }
        }
        if !epoch_loss.is_finite() || !model.all_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
    }
    Ok(model)
}

/// Softmax class probabilities for every row.
pub fn predict_proba(m: &MlpModel, rows: &Matrix) -> Result<Vec<Vec<f64>>> {
    m.check_input(rows)?;
    let mut t = m.new_trace();
    Ok((0..rows.rows())
        .map(|i| {
            m.forward_into(rows.row(i), &mut t);
            softmax(&t.pre[m.layers.len() - 1])
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// F1 of class 1.
    BinaryPositive,
    /// Unweighted mean of per-class F1 over classes seen in either vector.
    Macro,
}

impl Averaging {
    pub fn for_classes(n_classes: usize) -> Averaging {
        if n_classes == 2 {
            Averaging::BinaryPositive
        } else {
            Averaging::Macro
        }
    }
}

fn class_f1(y_true: &[usize], y_pred: &[usize], class: usize) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Per-class F1 for every class in `0..=max label`.
pub fn per_class_f1(y_true: &[usize], y_pred: &[usize]) -> Vec<f64> {
    let k = y_true.iter().chain(y_pred).max().map_or(0, |m| m + 1);
    (0..k).map(|c| class_f1(y_true, y_pred, c)).collect()
}

pub fn f1_score(y_true: &[usize], y_pred: &[usize], averaging: Averaging) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
            context: "f1 label vectors",
        });
    }
    if y_true.is_empty() {
        return Err(Error::invalid("f1 score of empty label vectors"));
    }
    Ok(match averaging {
        Averaging::BinaryPositive => class_f1(y_true, y_pred, 1),
        Averaging::Macro => {
            let mut present: Vec<usize> = y_true.iter().chain(y_pred).copied().collect();
            present.sort_unstable();
            present.dedup();
            present.iter().map(|&c| class_f1(y_true, y_pred, c)).sum::<f64>() / present.len() as f64
        }
    })
}

/// How a column is disturbed before it is shuffled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    /// Add the constant `1 + n * sigma`.
    #[default]
    Shift,
    /// Add Gaussian noise with standard deviation `n * sigma`.
    Gaussian,
}

/// Copy of `rows` whose column `f` is disturbed per `mode` and then shuffled.
pub fn perturb_feature(rows: &Matrix, f: usize, n: f64, sigma_f: f64, mode: PerturbMode, seed: u64) -> Result<Matrix> {
    if f >= rows.cols() {
        return Err(Error::invalid(format!("feature index {f} out of range for {} columns", rows.cols())));
    }
    let mut rng = seed::rng(seed, &[seed::tag::PERTURB]);
    let mut col = rows.column(f);
    match mode {
        PerturbMode::Shift => {
            let shift = 1.0 + n * sigma_f;
            col.iter_mut().for_each(|v| *v += shift);
        }
        PerturbMode::Gaussian => {
            let sd = n * sigma_f;
            col.iter_mut().for_each(|v| *v += sd * rng.sample::<f64, _>(StandardNormal));
        }
    }
    col.shuffle(&mut rng);
    let mut out = rows.clone();
    out.set_column(f, &col);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationScore {
    pub baseline_f1: f64,
    /// `max(baseline - perturbed, 0)` per column.
    pub raw_drops: Vec<f64>,
    /// Raw drops divided by their sum, or all zero when the sum is zero.
    pub normalized: Vec<f64>,
    pub n_multiplier: f64,
    /// No column lowered the score.
    pub degenerate: bool,
}

/// Drop in F1 when each column in turn is perturbed and shuffled.
///
/// `stats.std` supplies the per-column sigma. Column `f` uses the stream
/// `seed / [f]`, so columns may be scored in parallel.
pub fn perturbation_importance(
    m: &MlpModel,
    rows: &Matrix,
    labels: &[usize],
    stats: &FeatureStats,
    n: f64,
    mode: PerturbMode,
    seed: u64,
) -> Result<PerturbationScore> {
    m.check_input(rows)?;
    if stats.n_features() != rows.cols() {
        return Err(Error::DimensionMismatch {
            expected: rows.cols(),
            actual: stats.n_features(),
            context: "stats vs scored columns",
        });
    }
    if labels.len() != rows.rows() {
        return Err(Error::DimensionMismatch {
            expected: rows.rows(),
            actual: labels.len(),
            context: "scored rows vs labels",
        });
    }
    if !(n > 0.0) {
        return Err(Error::invalid("perturbation multiplier must be positive"));
    }
    let averaging = Averaging::for_classes(m.output_dim);
    let baseline_f1 = f1_score(labels, &m.predict(rows)?, averaging)?;
    let raw_drops = (0..rows.cols())
        .into_par_iter()
        .map(|f| {
            let perturbed = perturb_feature(rows, f, n, stats.std[f], mode, seed::derive(seed, &[f as u64]))?;
            let score = f1_score(labels, &m.predict(&perturbed)?, averaging)?;
            Ok((baseline_f1 - score).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = raw_drops.iter().sum();
    let degenerate = total <= 0.0;
    let normalized = if degenerate {
        vec![0.0; raw_drops.len()]
    } else {
        raw_drops.iter().map(|d| d / total).collect()
    };
    Ok(PerturbationScore {
        baseline_f1,
        raw_drops,
        normalized,
        n_multiplier: n,
        degenerate,
    })
}
