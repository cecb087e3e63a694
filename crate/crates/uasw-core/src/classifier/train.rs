//! Training: backpropagation through the shared trunk, Adam updates,
//! early stopping on validation loss.
//!
//! The loss is the sum of the three heads' categorical cross-entropies.
//! Softmax plus cross-entropy collapses to the well-known `p − onehot`
//! output gradient; the trunk receives the sum of the heads' back-signals.
//! Everything runs single-threaded in f64, so a fixed seed yields
//! byte-identical weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    softmax, ClassifierError, DenseLayer, FeatureVector, MlpModel, Scaler, Topology, HEAD_SIZES,
};
use crate::datastore::LabeledDataset;
use crate::label::ObstacleLabel;

/// Floor for probabilities inside log() to keep the loss finite.
const LOG_FLOOR: f64 = 1e-15;

/// Optimiser and schedule hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

/// Per-epoch summary appended to the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean summed-cross-entropy over the training split.
    pub train_loss: f64,
    /// Mean summed-cross-entropy over the validation split.
    pub val_loss: f64,
    /// Validation accuracy per head: material, surface, movement.
    pub val_accuracy: [f64; 3],
}

/// Training history plus which epoch the returned weights come from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Gradient of one dense layer, same shapes as the layer itself.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerGrad {
    fn zeroed(layer: &DenseLayer) -> LayerGrad {
        LayerGrad {
            weights: vec![0.0; layer.weights.len()],
            biases: vec![0.0; layer.biases.len()],
        }
    }

    fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }
}

/// Gradients for every layer of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub trunk: Vec<LayerGrad>,
    pub heads: Vec<LayerGrad>,
}

impl Gradients {
    fn zeroed(model: &MlpModel) -> Gradients {
        Gradients {
            trunk: model.trunk.iter().map(LayerGrad::zeroed).collect(),
            heads: model.heads.iter().map(LayerGrad::zeroed).collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for g in self.trunk.iter_mut().chain(self.heads.iter_mut()) {
            g.scale(factor);
        }
    }
}

fn head_targets(label: &ObstacleLabel) -> [usize; 3] {
    [
        label.material.index(),
        label.surface.index(),
        label.movement.index(),
    ]
}

/// Forward pass for one sample plus loss and (optionally) gradient
/// accumulation into `grads`. Returns the summed cross-entropy.
fn sample_pass(
    model: &MlpModel,
    features: &FeatureVector,
    label: &ObstacleLabel,
    grads: Option<&mut Gradients>,
) -> Result<f64, ClassifierError> {
    if features.values.len() != model.n_features() {
        return Err(ClassifierError::FeatureLen {
            got: features.values.len(),
            expected: model.n_features(),
        });
    }
    let acts = model.trunk_activations(model.scaler.apply(&features.values));
    let last = acts.last().unwrap();
    let targets = head_targets(label);

    let mut loss = 0.0;
    let mut head_probs: Vec<Vec<f64>> = Vec::with_capacity(model.heads.len());
    for (head, &target) in model.heads.iter().zip(&targets) {
        let mut probs = head.forward(last);
        softmax(&mut probs);
        loss -= probs[target].max(LOG_FLOOR).ln();
        head_probs.push(probs);
    }

    let Some(grads) = grads else {
        return Ok(loss);
    };

    // Softmax + cross-entropy: dlogit = p − onehot. The trunk's top
    // activation receives the sum of all heads' back-signals.
    let mut dlast = vec![0.0; last.len()];
    for (h, (head, probs)) in model.heads.iter().zip(&head_probs).enumerate() {
        let grad = &mut grads.heads[h];
        for o in 0..head.out_dim {
            let dlogit = probs[o] - if o == targets[h] { 1.0 } else { 0.0 };
            grad.biases[o] += dlogit;
            let row = o * head.in_dim;
            for i in 0..head.in_dim {
                grad.weights[row + i] += dlogit * last[i];
                dlast[i] += head.weights[row + i] * dlogit;
            }
        }
    }

    // Back through the ReLU trunk. acts[l] is layer l's input.
    let mut dout = dlast;
    for l in (0..model.trunk.len()).rev() {
        let layer = &model.trunk[l];
        let input = &acts[l];
        let output = &acts[l + 1];
        let grad = &mut grads.trunk[l];
        let mut dinput = vec![0.0; layer.in_dim];
        for o in 0..layer.out_dim {
            // ReLU gate: the post-activation is 0 exactly where the
            // pre-activation was clamped.
            let dpre = if output[o] > 0.0 { dout[o] } else { 0.0 };
            if dpre == 0.0 {
                continue;
            }
            grad.biases[o] += dpre;
            let row = o * layer.in_dim;
            for i in 0..layer.in_dim {
                grad.weights[row + i] += dpre * input[i];
                dinput[i] += layer.weights[row + i] * dpre;
            }
        }
        dout = dinput;
    }
    Ok(loss)
}

/// Mean summed-cross-entropy of a batch under the model's own scaler.
pub fn batch_loss(
    model: &MlpModel,
    samples: &[(FeatureVector, ObstacleLabel)],
) -> Result<f64, ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    model.validate()?;
    let mut total = 0.0;
    for (features, label) in samples {
        total += sample_pass(model, features, label, None)?;
    }
    Ok(total / samples.len() as f64)
}

/// Mean loss and mean analytic gradients over a batch — the exact
/// quantity a finite-difference check differentiates.
pub fn batch_gradients(
    model: &MlpModel,
    samples: &[(FeatureVector, ObstacleLabel)],
) -> Result<(f64, Gradients), ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    model.validate()?;
    let mut grads = Gradients::zeroed(model);
    let mut total = 0.0;
    for (features, label) in samples {
        total += sample_pass(model, features, label, Some(&mut grads))?;
    }
    let scale = 1.0 / samples.len() as f64;
    grads.scale(scale);
    Ok((total * scale, grads))
}

/// Per-parameter Adam state.
struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    fn new(model: &MlpModel) -> AdamState {
        AdamState {
            m: Gradients::zeroed(model),
            v: Gradients::zeroed(model),
            t: 0,
        }
    }

    fn update(&mut self, model: &mut MlpModel, grads: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let layers = model.trunk.iter_mut().chain(model.heads.iter_mut());
        let grads_iter = grads.trunk.iter().chain(grads.heads.iter());
        let m_iter = self.m.trunk.iter_mut().chain(self.m.heads.iter_mut());
        let v_iter = self.v.trunk.iter_mut().chain(self.v.heads.iter_mut());
        for (((layer, grad), m), v) in layers.zip(grads_iter).zip(m_iter).zip(v_iter) {
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            let gs = grad.weights.iter().chain(grad.biases.iter());
            let ms = m.weights.iter_mut().chain(m.biases.iter_mut());
            let vs = v.weights.iter_mut().chain(v.biases.iter_mut());
            for (((p, &g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

fn fit_scaler(
    dataset: &LabeledDataset,
    train_idx: &[usize],
    n_features: usize,
) -> Scaler {
    let mut mean = vec![0.0; n_features];
    for &i in train_idx {
        for (m, x) in mean.iter_mut().zip(&dataset.samples[i].0.values) {
            *m += x;
        }
    }
    let n = train_idx.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; n_features];
    for &i in train_idx {
        for (s, (x, m)) in std
            .iter_mut()
            .zip(dataset.samples[i].0.values.iter().zip(&mean))
        {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
    }
    Scaler { mean, std }
}

fn random_model(
    n_features: usize,
    topology: &Topology,
    rng: &mut ChaCha8Rng,
) -> MlpModel {
    let mut model = MlpModel::zeroed(n_features, topology);
    // He initialisation for the ReLU trunk, Xavier-ish for the heads.
    for layer in &mut model.trunk {
        let dist = Normal::new(0.0, (2.0 / layer.in_dim as f64).sqrt()).unwrap();
        for w in &mut layer.weights {
            *w = dist.sample(rng);
        }
    }
    for head in &mut model.heads {
        let dist = Normal::new(0.0, (1.0 / head.in_dim as f64).sqrt()).unwrap();
        for w in &mut head.weights {
            *w = dist.sample(rng);
        }
    }
    model
}

fn check_split_classes(
    dataset: &LabeledDataset,
    train_idx: &[usize],
) -> Result<(), ClassifierError> {
    let mut seen = [[false; 4], [false; 4], [false; 4]];
    for &i in train_idx {
        let t = head_targets(&dataset.samples[i].1);
        for (h, &class) in t.iter().enumerate() {
            seen[h][class] = true;
        }
    }
    let head_names = ["material", "surface", "movement"];
    let class_names: [&[&str]; 3] = [
        &["glass", "concrete", "wood", "human"],
        &["dry", "wet"],
        &["static", "mobile"],
    ];
    for h in 0..3 {
        for class in 0..HEAD_SIZES[h] {
            if !seen[h][class] {
                return Err(ClassifierError::MissingClass {
                    head: head_names[h],
                    class: class_names[h][class].to_string(),
                });
            }
        }
    }
    Ok(())
}

fn split_view<'a>(
    dataset: &'a LabeledDataset,
    indices: &[usize],
) -> Result<Vec<&'a (FeatureVector, ObstacleLabel)>, ClassifierError> {
    indices
        .iter()
        .map(|&i| {
            dataset.samples.get(i).ok_or(ClassifierError::BadSampleIndex {
                index: i,
                len: dataset.samples.len(),
            })
        })
        .collect()
}

/// Trains a model on the dataset's training split, early-stopping on the
/// validation split, and returns the best-validation-loss weights.
pub fn train(
    dataset: &LabeledDataset,
    topology: &Topology,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport), ClassifierError> {
    if dataset.samples.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    if dataset.split.train.is_empty() {
        return Err(ClassifierError::EmptySplit { split: "train" });
    }
    if dataset.split.validation.is_empty() {
        return Err(ClassifierError::EmptySplit { split: "validation" });
    }
    split_view(dataset, &dataset.split.train)?;
    let val: Vec<&(FeatureVector, ObstacleLabel)> = split_view(dataset, &dataset.split.validation)?;
    check_split_classes(dataset, &dataset.split.train)?;

    let n_features = dataset.samples[0].0.values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = random_model(n_features, topology, &mut rng);
    model.scaler = fit_scaler(dataset, &dataset.split.train, n_features);
    model.validate()?;

    let mut adam = AdamState::new(&model);
    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_weights = model.clone();
    let mut stale_epochs = 0;

    let mut order: Vec<usize> = dataset.split.train.clone();
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut grads = Gradients::zeroed(&model);
            let mut batch_total = 0.0;
            for &i in batch {
                let (features, label) = &dataset.samples[i];
                batch_total += sample_pass(&model, features, label, Some(&mut grads))?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.update(&mut model, &grads, config);
            train_loss += batch_total;
        }
        train_loss /= order.len() as f64;

        let (val_loss, val_accuracy) = evaluate(&model, &val)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_weights = model.clone();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    Ok((
        best_weights,
        TrainReport {
            history,
            best_epoch,
        },
    ))
}

/// Mean loss and per-head accuracy over a set of samples.
fn evaluate(
    model: &MlpModel,
    samples: &[&(FeatureVector, ObstacleLabel)],
) -> Result<(f64, [f64; 3]), ClassifierError> {
    let mut loss = 0.0;
    let mut correct = [0usize; 3];
    for (features, label) in samples {
        loss += sample_pass(model, features, label, None)?;
        let c = super::classify(features, model)?;
        let got = head_targets(&c.label);
        let want = head_targets(label);
        for h in 0..3 {
            if got[h] == want[h] {
                correct[h] += 1;
            }
        }
    }
    let n = samples.len() as f64;
    Ok((
        loss / n,
        [
            correct[0] as f64 / n,
            correct[1] as f64 / n,
            correct[2] as f64 / n,
        ],
    ))
}
