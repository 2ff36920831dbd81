//! The four-block VGG-style classifier: build, train, evaluate, persist.
//!
//! Layer stack, for filters `[32, 64, 128, 256]`:
//!
//! ```text
//! [Conv2D(f, 2x2, same) -> ReLU -> MaxPool 2x2 -> Dropout(0.15)] x 4
//! GlobalAvgPool -> Dense(64) -> ReLU -> Dense(classes) -> Softmax
//! ```

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::nn::checkpoint::{self, CheckpointHeader, FORMAT_VERSION};
use crate::nn::rng::{rng_for, Stream};
use crate::nn::{ops, AdamState, Init, Layer, LayerSpec, Scalar, Sequential, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VggbConfig {
    pub input_bands: usize,
    pub input_frames: usize,
    pub conv_filters: Vec<usize>,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
    pub dense_units: usize,
    pub classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
}

impl Default for VggbConfig {
    fn default() -> Self {
        Self {
            input_bands: 40,
            input_frames: 174,
            conv_filters: vec![32, 64, 128, 256],
            kernel: 2,
            pool: 2,
            dropout: 0.15,
            dense_units: 64,
            classes: 5,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            learning_rate: 1e-3,
        }
    }
}

impl VggbConfig {
    /// Spatial size entering each conv block, plus the size after the last pool.
    pub fn spatial_chain(&self) -> Vec<(usize, usize)> {
        let mut chain = vec![(self.input_bands, self.input_frames)];
        for _ in &self.conv_filters {
            let (h, w) = *chain.last().expect("nonempty");
            chain.push((h / self.pool, w / self.pool));
        }
        chain
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_filters.len() != 4 {
            return Err(Error::Config(format!(
                "expected 4 conv blocks, got {}",
                self.conv_filters.len()
            )));
        }
        if self.conv_filters.contains(&0) || self.dense_units == 0 {
            return Err(Error::Config("filter and unit counts must be positive".into()));
        }
        if self.kernel == 0 {
            return Err(Error::Config("kernel size must be positive".into()));
        }
        if self.pool != 2 {
            return Err(Error::Config(format!(
                "only 2x2 pooling is supported, got {}",
                self.pool
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        let chain = self.spatial_chain();
        for (block, &(h, w)) in chain[..self.conv_filters.len()].iter().enumerate() {
            if h < self.pool || w < self.pool {
                return Err(Error::Config(format!(
                    "input {}x{} shrinks to {h}x{w} before pooling in block {}; too small for four 2x2 pools",
                    self.input_bands,
                    self.input_frames,
                    block + 1
                )));
            }
        }
        Ok(())
    }

    /// Closed-form trainable parameter count.
    pub fn param_count(&self) -> usize {
        let k2 = self.kernel * self.kernel;
        let mut c_in = 1;
        let mut total = 0;
        for &f in &self.conv_filters {
            total += k2 * c_in * f + f;
            c_in = f;
        }
        total + c_in * self.dense_units + self.dense_units + self.dense_units * self.classes + self.classes
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut c_in = 1;
        for &f in &self.conv_filters {
            specs.push(LayerSpec::Conv2D {
                in_channels: c_in,
                filters: f,
                kernel: self.kernel,
            });
            specs.push(LayerSpec::Relu);
            specs.push(LayerSpec::MaxPool2D {
                pool: self.pool,
                stride: self.pool,
            });
            specs.push(LayerSpec::Dropout { rate: self.dropout });
            c_in = f;
        }
        specs.extend([
            LayerSpec::GlobalAvgPool2D,
            LayerSpec::Dense {
                inputs: c_in,
                units: self.dense_units,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: self.dense_units,
                units: self.classes,
            },
            LayerSpec::Softmax,
        ]);
        specs
    }
}

/// A built network plus its configuration.
#[derive(Debug, Clone)]
pub struct Model<T> {
    cfg: VggbConfig,
    net: Sequential<T>,
}

/// Builds the network with seeded He-uniform (conv, hidden dense) and
/// Glorot-uniform (output dense) weights and zero biases.
pub fn build<T: Scalar>(cfg: &VggbConfig) -> Result<Model<T>> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, Stream::Init);
    let specs = cfg.layer_specs();
    let last_dense = specs.iter().rposition(|s| matches!(s, LayerSpec::Dense { .. }));
    let mut layers = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let layer = match *spec {
            LayerSpec::Conv2D {
                in_channels,
                filters,
                kernel,
            } => Layer::conv2d(in_channels, filters, kernel, &mut rng),
            LayerSpec::Dense { inputs, units } => {
                let init = if Some(i) == last_dense {
                    Init::GlorotUniform
                } else {
                    Init::HeUniform
                };
                Layer::dense(inputs, units, init, &mut rng)
            }
            ref other => Layer::stateless(other)?,
        };
        layers.push(layer);
    }
    Ok(Model {
        cfg: cfg.clone(),
        net: Sequential::new(layers)?,
    })
}

impl<T: Scalar> Model<T> {
    pub fn config(&self) -> &VggbConfig {
        &self.cfg
    }

    pub fn network(&self) -> &Sequential<T> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Sequential<T> {
        &mut self.net
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Class probabilities for a `[N, 1, bands, frames]` batch, inference mode.
    pub fn predict_proba(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut rng = rng_for(self.cfg.seed, Stream::Init);
        let p = self.net.forward(x, false, &mut rng);
        self.net.clear_context();
        p
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            cfg: self.cfg.clone(),
            net: self.net.cast(),
        }
    }

    fn check_input(&self, m: &FeatureMatrix) -> Result<()> {
        if m.bands() != self.cfg.input_bands || m.frames() != self.cfg.input_frames {
            return Err(Error::Shape(format!(
                "feature '{}' is {}x{}, model expects {}x{}",
                m.clip_id(),
                m.bands(),
                m.frames(),
                self.cfg.input_bands,
                self.cfg.input_frames
            )));
        }
        Ok(())
    }

    /// Stacks features into a `[N, 1, bands, frames]` tensor.
    pub fn batch_tensor(&self, items: &[&FeatureMatrix]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(items.len() * self.cfg.input_bands * self.cfg.input_frames);
        for m in items {
            self.check_input(m)?;
            data.extend(m.values().iter().map(|&v| T::from_f32(v).expect("f32 converts")));
        }
        Tensor::new(vec![items.len(), 1, self.cfg.input_bands, self.cfg.input_frames], data)
    }
}

/// One labeled training/evaluation example.
pub type Example<'a> = (&'a FeatureMatrix, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub wall_clock_secs: f64,
    pub seed: u64,
    pub steps: u64,
    pub param_count: usize,
}

impl TrainReport {
    /// `epoch,train_loss,train_acc,val_acc`, one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
        for e in &self.epochs {
            let val = e.val_acc.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.train_acc, val));
        }
        out
    }

    pub fn final_val_acc(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_acc)
    }
}

fn check_labels(set: &[Example<'_>], classes: usize) -> Result<()> {
    match set.iter().find(|(_, l)| *l >= classes) {
        Some((m, l)) => Err(Error::Config(format!(
            "label {l} of '{}' outside 0..{classes}",
            m.clip_id()
        ))),
        None => Ok(()),
    }
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains with Adam on mean categorical cross-entropy.
///
/// Each epoch reshuffles with its own seeded stream and runs
/// `ceil(n / batch_size)` steps; dropout masks come from a per-step stream.
/// Validation accuracy is measured after every epoch when `val` is nonempty.
pub fn train(model: &mut Model<f32>, train_set: &[Example<'_>], val_set: &[Example<'_>]) -> Result<TrainReport> {
    let cfg = model.cfg.clone();
    if train_set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    check_labels(train_set, cfg.classes)?;
    check_labels(val_set, cfg.classes)?;
    for (m, _) in train_set.iter().chain(val_set) {
        model.check_input(m)?;
    }
    let started = Instant::now();
    let mut adam = AdamState::<f32>::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(cfg.seed, Stream::Shuffle { epoch: epoch as u64 }));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let items: Vec<&FeatureMatrix> = chunk.iter().map(|&i| train_set[i].0).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set[i].1).collect();
            let x = model.batch_tensor(&items)?;
            model.net.zero_grad();
            let mut drop_rng = rng_for(cfg.seed, Stream::Dropout { step });
            let probs = model.net.forward(&x, true, &mut drop_rng)?;
            let loss = ops::cross_entropy(&probs, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numerics(format!(
                    "non-finite loss at epoch {} step {step}",
                    epoch + 1
                )));
            }
            model.net.backward_cross_entropy(&probs, &labels)?;
            adam.step(&mut model.net.params_mut())?;
            step += 1;
            loss_sum += f64::from(loss) * labels.len() as f64;
            let k = cfg.classes;
            correct += probs
                .data()
                .chunks_exact(k)
                .zip(&labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
        }
        model.net.clear_context();
        let val_acc = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(model, val_set)?.0)
        };
        let n = train_set.len() as f64;
        log::debug!(
            "epoch {}: loss {:.4} acc {:.4} val {:?}",
            epoch + 1,
            loss_sum / n,
            correct as f64 / n,
            val_acc
        );
        epochs.push(EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_acc,
        });
    }
    Ok(TrainReport {
        epochs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
        steps: step,
        param_count: model.param_count(),
    })
}

/// Counts of (true class, predicted class) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_pairs(classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::new(classes);
        for (t, p) in pairs {
            m.record(t, p);
        }
        m
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    /// Adds the counts of `other`, which must have the same class count.
    pub fn absorb(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes(), other.classes(), "confusion matrices of different sizes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.classes()).map(|k| self.counts[k][k]).sum();
        diag as f64 / total as f64
    }

    /// Rows normalized over true labels; empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if s == 0 { 0.0 } else { c as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    /// Recall of each class (`None` for classes absent from the test set).
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.classes())
            .map(|k| {
                let s = self.support(k);
                (s > 0).then(|| self.counts[k][k] as f64 / s as f64)
            })
            .collect()
    }

    /// Row-normalized matrix as CSV with `labels` naming the classes.
    pub fn to_csv(&self, labels: &[&str]) -> String {
        let mut out = String::from("true\\predicted");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in labels.iter().zip(self.row_normalized()) {
            out.push_str(label);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

const EVAL_BATCH: usize = 32;

/// Accuracy and confusion matrix in inference mode (dropout off).
pub fn evaluate<T: Scalar>(model: &mut Model<T>, test_set: &[Example<'_>]) -> Result<(f64, ConfusionMatrix)> {
    if test_set.is_empty() {
        return Err(Error::Config("empty test set".into()));
    }
    check_labels(test_set, model.cfg.classes)?;
    let k = model.cfg.classes;
    let mut cm = ConfusionMatrix::new(k);
    for chunk in test_set.chunks(EVAL_BATCH) {
        let items: Vec<&FeatureMatrix> = chunk.iter().map(|(m, _)| *m).collect();
        let probs = model.predict_proba(&model.batch_tensor(&items)?)?;
        for (row, (_, label)) in probs.data().chunks_exact(k).zip(chunk) {
            cm.record(*label, argmax(row));
        }
    }
    Ok((cm.accuracy(), cm))
}

/// Saves an `f32` model with its configuration and the epoch it reached.
pub fn save_checkpoint(model: &Model<f32>, epoch: usize, path: &Path) -> Result<()> {
    let params = model.net.params();
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        layers: model.net.specs(),
        shapes: params.iter().map(|p| p.shape().to_vec()).collect(),
        seed: model.cfg.seed,
        epoch,
        config: serde_json::to_value(&model.cfg)?,
    };
    checkpoint::save(path, &header, &params)
}

/// Rebuilds a model from a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, CheckpointHeader)> {
    let (header, params) = checkpoint::load(path)?;
    let cfg: VggbConfig = serde_json::from_value(header.config.clone())?;
    let mut model = build::<f32>(&cfg)?;
    if model.net.specs() != header.layers {
        return Err(Error::Format(
            "checkpoint layer list does not match its configuration".into(),
        ));
    }
    let mut slots = model.net.params_mut();
    if slots.len() != params.len() {
        return Err(Error::Format("checkpoint parameter count mismatch".into()));
    }
    for (slot, p) in slots.iter_mut().zip(&params) {
        if slot.shape() != p.shape() {
            return Err(Error::Format(format!(
                "parameter shape {:?} vs {:?}",
                slot.shape(),
                p.shape()
            )));
        }
        slot.data_mut().copy_from_slice(p.data());
    }
    Ok((model, header))
}
