//! Feed-forward pattern classifier over feature vectors.
//!
//! One hidden layer of `tanh` units and a softmax readout, trained by
//! full-batch gradient descent with momentum on mean cross-entropy, with
//! early stopping on a validation split. Inputs are standardized with the
//! training split's mean and standard deviation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::{feature_vector, Feature};
use crate::phantom::{ClassLabel, LabeledItem};
use crate::{Error, Result};

/// How phantom class labels map onto classifier outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassScheme {
    /// `with_eyes` vs `without_eyes`.
    TwoClass,
    /// `eyes`, `brain_no_eyes`, `no_brain`.
    ThreeClass,
}

impl ClassScheme {
    pub fn from_count(n: usize) -> Result<Self> {
        match n {
            2 => Ok(ClassScheme::TwoClass),
            3 => Ok(ClassScheme::ThreeClass),
            other => Err(Error::InvalidArgument(format!("{other} classes; expected 2 or 3"))),
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            ClassScheme::TwoClass => 2,
            ClassScheme::ThreeClass => 3,
        }
    }

    pub fn class_index(self, label: ClassLabel) -> usize {
        match (self, label) {
            (ClassScheme::TwoClass, ClassLabel::Eyes) => 0,
            (ClassScheme::TwoClass, _) => 1,
            (ClassScheme::ThreeClass, ClassLabel::Eyes) => 0,
            (ClassScheme::ThreeClass, ClassLabel::BrainNoEyes) => 1,
            (ClassScheme::ThreeClass, ClassLabel::NoBrain) => 2,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            ClassScheme::TwoClass => &["with_eyes", "without_eyes"],
            ClassScheme::ThreeClass => &["eyes", "brain_no_eyes", "no_brain"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub class: usize,
}

pub fn samples(items: &[LabeledItem], features: &[Feature], scheme: ClassScheme) -> Vec<Sample> {
    items
        .iter()
        .map(|i| Sample { x: feature_vector(&i.record, features), class: scheme.class_index(i.label) })
        .collect()
}

pub const TRAIN_PERCENT: usize = 55;
pub const VALIDATION_PERCENT: usize = 10;
pub const TEST_PERCENT: usize = 35;

/// Partition sizes for `n` items by largest-remainder rounding of
/// 55% / 10% / 35%; remainder ties go to the earlier partition.
pub fn split_sizes(n: usize) -> [usize; 3] {
    let shares = [TRAIN_PERCENT, VALIDATION_PERCENT, TEST_PERCENT];
    let mut sizes = shares.map(|s| n * s / 100);
    let remainders = shares.map(|s| n * s % 100);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
    let left = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        sizes[i] += 1;
    }
    sizes
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Random train / validation / test partition, deterministic per seed.
pub fn split<T: Clone>(items: &[T], seed: u64) -> Result<Split<T>> {
    if items.len() < 20 {
        return Err(Error::DatasetTooSmall(items.len()));
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [n_train, n_val, _] = split_sizes(items.len());
    let pick = |range: &[usize]| range.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok(Split {
        train: pick(&idx[..n_train]),
        validation: pick(&idx[n_train..n_train + n_val]),
        test: pick(&idx[n_train + n_val..]),
    })
}

/// A two-layer perceptron with parameters in one flat vector laid out as
/// hidden weights (row per hidden unit), hidden biases, output weights
/// (row per class), output biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(input_dim: usize, hidden_dim: usize, output_dim: usize) -> usize {
        hidden_dim * (input_dim + 1) + output_dim * (hidden_dim + 1)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; Self::param_count(input_dim, hidden_dim, output_dim)];
        let a1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        for p in &mut params[..hidden_dim * input_dim] {
            *p = rng.gen_range(-a1..a1);
        }
        let a2 = (6.0 / (hidden_dim + output_dim) as f64).sqrt();
        let w2 = hidden_dim * (input_dim + 1);
        for p in &mut params[w2..w2 + output_dim * hidden_dim] {
            *p = rng.gen_range(-a2..a2);
        }
        Self { input_dim, hidden_dim, output_dim, params }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (b1, w2, b2)
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let (b1, _, _) = self.offsets();
        (0..self.hidden_dim)
            .map(|j| {
                let row = &self.params[j * self.input_dim..(j + 1) * self.input_dim];
                let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + j];
                a.tanh()
            })
            .collect()
    }

    fn logits_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        let (_, w2, b2) = self.offsets();
        (0..self.output_dim)
            .map(|k| {
                let row = &self.params[w2 + k * self.hidden_dim..w2 + (k + 1) * self.hidden_dim];
                row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.params[b2 + k]
            })
            .collect()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.logits_from_hidden(&self.hidden(x))
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Mean cross-entropy over `samples` and its gradient with respect to
    /// `params`.
    pub fn loss_and_gradient(&self, samples: &[Sample]) -> (f64, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let n = samples.len().max(1) as f64;
        for s in samples {
            let h = self.hidden(&s.x);
            let p = softmax(&self.logits_from_hidden(&h));
            loss -= p[s.class].max(f64::MIN_POSITIVE).ln();
            let dz: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(k, &pk)| (pk - if k == s.class { 1.0 } else { 0.0 }) / n)
                .collect();
            let mut dh = vec![0.0; self.hidden_dim];
            for (k, &d) in dz.iter().enumerate() {
                let row = w2 + k * self.hidden_dim;
                for j in 0..self.hidden_dim {
                    grad[row + j] += d * h[j];
                    dh[j] += d * self.params[row + j];
                }
                grad[b2 + k] += d;
            }
            for j in 0..self.hidden_dim {
                let da = dh[j] * (1.0 - h[j] * h[j]);
                let row = j * self.input_dim;
                for (i, &xi) in s.x.iter().enumerate() {
                    grad[row + i] += da * xi;
                }
                grad[b1 + j] += da;
            }
        }
        (loss / n, grad)
    }

    pub fn loss(&self, samples: &[Sample]) -> f64 {
        let n = samples.len().max(1) as f64;
        samples
            .iter()
            .map(|s| -self.probabilities(&s.x)[s.class].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { hidden_units: 10, learning_rate: 0.05, momentum: 0.9, max_epochs: 2000, patience: 20 }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained classifier with its input standardization and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub features: Vec<Feature>,
    pub class_names: Vec<String>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub mlp: Mlp,
    pub seed: u64,
    pub epochs_run: usize,
}

impl NetworkModel {
    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_mean.iter().zip(&self.input_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.mlp.probabilities(&self.standardize(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.mlp.logits(&self.standardize(x)))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument::from(self);
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    hidden_activation: String,
    output_activation: String,
    features: Vec<Feature>,
    classes: Vec<String>,
    input_mean: Vec<f64>,
    input_scale: Vec<f64>,
    hidden_weights: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<Vec<f64>>,
    output_bias: Vec<f64>,
    seed: u64,
    epochs_run: usize,
}

impl From<&NetworkModel> for ModelDocument {
    fn from(m: &NetworkModel) -> Self {
        let mlp = &m.mlp;
        let (b1, w2, b2) = mlp.offsets();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: mlp.input_dim,
            hidden_dim: mlp.hidden_dim,
            output_dim: mlp.output_dim,
            hidden_activation: "tanh".into(),
            output_activation: "softmax".into(),
            features: m.features.clone(),
            classes: m.class_names.clone(),
            input_mean: m.input_mean.clone(),
            input_scale: m.input_scale.clone(),
            hidden_weights: mlp.params[..b1].chunks(mlp.input_dim.max(1)).map(<[f64]>::to_vec).collect(),
            hidden_bias: mlp.params[b1..w2].to_vec(),
            output_weights: mlp.params[w2..b2].chunks(mlp.hidden_dim.max(1)).map(<[f64]>::to_vec).collect(),
            output_bias: mlp.params[b2..].to_vec(),
            seed: m.seed,
            epochs_run: m.epochs_run,
        }
    }
}

impl TryFrom<ModelDocument> for NetworkModel {
    type Error = Error;

    fn try_from(d: ModelDocument) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("model document: {msg}")));
        if d.format_version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported format version {}", d.format_version));
        }
        if d.hidden_activation != "tanh" || d.output_activation != "softmax" {
            return bad(format!("unsupported activations {}/{}", d.hidden_activation, d.output_activation));
        }
        let shape_ok = d.features.len() == d.input_dim
            && d.classes.len() == d.output_dim
            && d.input_mean.len() == d.input_dim
            && d.input_scale.len() == d.input_dim
            && d.hidden_weights.len() == d.hidden_dim
            && d.hidden_weights.iter().all(|r| r.len() == d.input_dim)
            && d.hidden_bias.len() == d.hidden_dim
            && d.output_weights.len() == d.output_dim
            && d.output_weights.iter().all(|r| r.len() == d.hidden_dim)
            && d.output_bias.len() == d.output_dim;
        if !shape_ok {
            return bad("array lengths disagree with declared dimensions".into());
        }
        let mut params = Vec::with_capacity(Mlp::param_count(d.input_dim, d.hidden_dim, d.output_dim));
        params.extend(d.hidden_weights.into_iter().flatten());
        params.extend(d.hidden_bias);
        params.extend(d.output_weights.into_iter().flatten());
        params.extend(d.output_bias);
        Ok(NetworkModel {
            features: d.features,
            class_names: d.classes,
            input_mean: d.input_mean,
            input_scale: d.input_scale,
            mlp: Mlp { input_dim: d.input_dim, hidden_dim: d.hidden_dim, output_dim: d.output_dim, params },
            seed: d.seed,
            epochs_run: d.epochs_run,
        })
    }
}

fn check_dims(samples: &[Sample], dim: usize, classes: usize) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if s.x.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "sample {i} has {} features, model expects {dim}",
                s.x.len()
            )));
        }
        if s.class >= classes {
            return Err(Error::DimensionMismatch(format!("sample {i} has class {} of {classes}", s.class)));
        }
    }
    Ok(())
}

fn standardization(train: &[Sample], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = train.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|i| train.iter().map(|s| s.x[i]).sum::<f64>() / n).collect();
    let scale = (0..dim)
        .map(|i| {
            let var = train.iter().map(|s| (s.x[i] - mean[i]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Trains a network on `train`, stopping early on `validation` loss and
/// keeping the best weights seen.
pub fn train(
    train: &[Sample],
    validation: &[Sample],
    features: &[Feature],
    scheme: ClassScheme,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<NetworkModel> {
    let dim = features.len();
    let classes = scheme.num_classes();
    if train.is_empty() {
        return Err(Error::SingleClassTrainSet);
    }
    check_dims(train, dim, classes)?;
    check_dims(validation, dim, classes)?;
    let first = train[0].class;
    if train.iter().all(|s| s.class == first) {
        return Err(Error::SingleClassTrainSet);
    }

    let (input_mean, input_scale) = standardization(train, dim);
    let scale = |set: &[Sample]| -> Vec<Sample> {
        set.iter()
            .map(|s| Sample {
                x: s.x.iter().zip(input_mean.iter().zip(&input_scale)).map(|(v, (m, d))| (v - m) / d).collect(),
                class: s.class,
            })
            .collect()
    };
    let train_std = scale(train);
    let val_std = scale(validation);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mlp = Mlp::random(dim, cfg.hidden_units, classes, &mut rng);
    let mut velocity = vec![0.0; mlp.params.len()];
    let mut best = mlp.params.clone();
    let mut best_val = if val_std.is_empty() { f64::INFINITY } else { mlp.loss(&val_std) };
    let mut since_best = 0;
    let mut epochs_run = 0;
    for _ in 0..cfg.max_epochs {
        epochs_run += 1;
        let (_, grad) = mlp.loss_and_gradient(&train_std);
        for ((p, v), g) in mlp.params.iter_mut().zip(&mut velocity).zip(&grad) {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *p += *v;
        }
        if val_std.is_empty() {
            continue;
        }
        let val = mlp.loss(&val_std);
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&mlp.params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if !val_std.is_empty() {
        mlp.params = best;
    }
    Ok(NetworkModel {
        features: features.to_vec(),
        class_names: scheme.class_names(),
        input_mean,
        input_scale,
        mlp,
        seed,
        epochs_run,
    })
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("true\\predicted");
        for name in class_names {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for (name, row) in class_names.iter().zip(&self.counts) {
            out.push_str(name);
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        writeln!(out, "accuracy,{:.6}", self.accuracy()).unwrap();
        out
    }
}

pub fn evaluate(model: &NetworkModel, samples: &[Sample]) -> Result<ConfusionMatrix> {
    check_dims(samples, model.input_dim(), model.mlp.output_dim)?;
    let mut cm = ConfusionMatrix::new(model.mlp.output_dim);
    for s in samples {
        cm.record(s.class, model.predict(&s.x));
    }
    Ok(cm)
}

/// Accuracies of one trial, as fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialAccuracy {
    pub training: f64,
    pub test: f64,
    pub all: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trials: Vec<TrialAccuracy>,
    pub mean: TrialAccuracy,
    /// Sample standard deviation (n - 1 denominator).
    pub std_dev: TrialAccuracy,
}

fn column_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

impl TrialSummary {
    pub fn from_trials(trials: Vec<TrialAccuracy>) -> Self {
        let col = |f: fn(&TrialAccuracy) -> f64| column_stats(&trials.iter().map(f).collect::<Vec<_>>());
        let (tr, te, al) = (col(|t| t.training), col(|t| t.test), col(|t| t.all));
        Self {
            mean: TrialAccuracy { training: tr.0, test: te.0, all: al.0 },
            std_dev: TrialAccuracy { training: tr.1, test: te.1, all: al.1 },
            trials,
        }
    }

    /// Percent accuracies, one row per trial, then `Average` and `std. dev.`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,training,test,all\n");
        let line = |label: &str, t: &TrialAccuracy| {
            format!("{label},{:.2},{:.2},{:.2}\n", 100.0 * t.training, 100.0 * t.test, 100.0 * t.all)
        };
        for (i, t) in self.trials.iter().enumerate() {
            out.push_str(&line(&(i + 1).to_string(), t));
        }
        out.push_str(&line("Average", &self.mean));
        out.push_str(&line("std. dev.", &self.std_dev));
        out
    }
}

/// Runs `n_trials` independent split/train/evaluate rounds; trial `t` uses
/// seed `base_seed + t` for both the split and the weight initialization.
pub fn run_trials(
    items: &[LabeledItem],
    features: &[Feature],
    scheme: ClassScheme,
    n_trials: usize,
    base_seed: u64,
    cfg: &TrainConfig,
) -> Result<TrialSummary> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("at least one trial required".into()));
    }
    let all = samples(items, features, scheme);
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let seed = base_seed.wrapping_add(t as u64);
            let parts = split(&all, seed)?;
            let model = train(&parts.train, &parts.validation, features, scheme, seed, cfg)?;
            Ok(TrialAccuracy {
                training: evaluate(&model, &parts.train)?.accuracy(),
                test: evaluate(&model, &parts.test)?.accuracy(),
                all: evaluate(&model, &all)?.accuracy(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialSummary::from_trials(trials))
}
