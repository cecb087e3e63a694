//! Multi-head MLP obstacle classifier.
//!
//! One shared ReLU trunk feeds three softmax heads — material (4 classes),
//! surface (2) and movement (2) — so per-attribute accuracies stay
//! individually measurable. The default topology is 15 → 12 → 12 → {4,2,2}.
//! Features are standardized with a scaler fitted on the training split
//! and stored inside the model, so a model file is self-contained.
//!
//! Everything is plain `f64` math implemented here: training (see
//! [`train`]) backpropagates through the shared trunk and optimises with
//! Adam, and gradients are checkable against finite differences.

use thiserror::Error;

use crate::label::{Material, Movement, ObstacleLabel, Surface};

pub mod model_io;
mod train;

pub use train::{batch_gradients, batch_loss, train, EpochStats, Gradients, LayerGrad, TrainConfig, TrainReport};

/// Output widths of the three heads: material, surface, movement.
pub const HEAD_SIZES: [usize; 3] = [4, 2, 2];

/// Classifier failures.
#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("feature vector has {got} entries, model expects {expected}")]
    FeatureLen { got: usize, expected: usize },
    #[error("malformed model: {0}")]
    MalformedModel(&'static str),
    #[error("empty classification history")]
    EmptyHistory,
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("the {split} split is empty")]
    EmptySplit { split: &'static str },
    #[error("{head} class {class:?} missing from the training split")]
    MissingClass { head: &'static str, class: String },
    #[error("sample index {index} out of bounds ({len} samples)")]
    BadSampleIndex { index: usize, len: usize },
}

/// Input features: mean FFT magnitudes for bins B1..B15, pre-standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> FeatureVector {
        FeatureVector { values }
    }
}

/// Per-feature standardization fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Identity scaler (mean 0, std 1).
    pub fn identity(n_features: usize) -> Scaler {
        Scaler {
            mean: vec![0.0; n_features],
            std: vec![1.0; n_features],
        }
    }

    /// `(x − mean) / std` per feature. Constant features (std 0) pass
    /// through shifted only.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { x - m })
            .collect()
    }
}

/// One dense layer, weights in row-major `[out][in]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    pub fn zeroed(in_dim: usize, out_dim: usize) -> DenseLayer {
        DenseLayer {
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// `out = W·x + b`.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (o, out_slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            *out_slot += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
        out
    }
}

/// Hidden-layer widths; the output heads are fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub hidden: Vec<usize>,
}

impl Topology {
    /// The reference topology: two hidden layers of 12 neurons.
    pub fn two_by_twelve() -> Topology {
        Topology {
            hidden: vec![12, 12],
        }
    }

    /// No hidden layers: softmax regression straight off the features.
    pub fn linear() -> Topology {
        Topology { hidden: Vec::new() }
    }
}

impl Default for Topology {
    fn default() -> Self {
        Topology::two_by_twelve()
    }
}

/// The trained classifier: scaler, shared trunk, three softmax heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub scaler: Scaler,
    /// ReLU-activated shared layers; may be empty (linear model).
    pub trunk: Vec<DenseLayer>,
    /// Exactly three output layers sized [`HEAD_SIZES`].
    pub heads: Vec<DenseLayer>,
}

impl MlpModel {
    /// All-zero model of the given shape — softmax of zero logits is
    /// uniform, which makes this the canonical "know-nothing" model.
    pub fn zeroed(n_features: usize, topology: &Topology) -> MlpModel {
        let mut trunk = Vec::new();
        let mut dim = n_features;
        for &width in &topology.hidden {
            trunk.push(DenseLayer::zeroed(dim, width));
            dim = width;
        }
        MlpModel {
            scaler: Scaler::identity(n_features),
            trunk,
            heads: HEAD_SIZES
                .iter()
                .map(|&out| DenseLayer::zeroed(dim, out))
                .collect(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Checks the dimension chain from scaler to heads.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.scaler.mean.len() != self.scaler.std.len() {
            return Err(ClassifierError::MalformedModel("scaler length mismatch"));
        }
        let mut dim = self.n_features();
        for layer in &self.trunk {
            if layer.in_dim != dim {
                return Err(ClassifierError::MalformedModel("trunk dimension chain broken"));
            }
            if layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.biases.len() != layer.out_dim
            {
                return Err(ClassifierError::MalformedModel("layer shape inconsistent"));
            }
            dim = layer.out_dim;
        }
        if self.heads.len() != HEAD_SIZES.len() {
            return Err(ClassifierError::MalformedModel("expected three heads"));
        }
        for (head, &want) in self.heads.iter().zip(&HEAD_SIZES) {
            if head.in_dim != dim || head.out_dim != want {
                return Err(ClassifierError::MalformedModel("head shape mismatch"));
            }
            if head.weights.len() != head.in_dim * head.out_dim
                || head.biases.len() != head.out_dim
            {
                return Err(ClassifierError::MalformedModel("head shape inconsistent"));
            }
        }
        Ok(())
    }

    /// Trunk activations for a standardized input; `acts[0]` is the input
    /// itself, `acts.last()` feeds the heads.
    fn trunk_activations(&self, standardized: Vec<f64>) -> Vec<Vec<f64>> {
        let mut acts = vec![standardized];
        for layer in &self.trunk {
            let mut a = layer.forward(acts.last().unwrap());
            for v in &mut a {
                *v = v.max(0.0);
            }
            acts.push(a);
        }
        acts
    }
}

/// Numerically stable in-place softmax.
pub(crate) fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest value; ties break to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One probability distribution per head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadDistributions {
    pub material: Vec<f64>,
    pub surface: Vec<f64>,
    pub movement: Vec<f64>,
}

/// Full forward pass: standardize, trunk with ReLU, softmax per head.
pub fn forward(
    features: &FeatureVector,
    model: &MlpModel,
) -> Result<HeadDistributions, ClassifierError> {
    model.validate()?;
    if features.values.len() != model.n_features() {
        return Err(ClassifierError::FeatureLen {
            got: features.values.len(),
            expected: model.n_features(),
        });
    }
    let acts = model.trunk_activations(model.scaler.apply(&features.values));
    let last = acts.last().unwrap();
    let mut out: Vec<Vec<f64>> = model
        .heads
        .iter()
        .map(|head| {
            let mut logits = head.forward(last);
            softmax(&mut logits);
            logits
        })
        .collect();
    let movement = out.pop().unwrap();
    let surface = out.pop().unwrap();
    let material = out.pop().unwrap();
    Ok(HeadDistributions {
        material,
        surface,
        movement,
    })
}

/// Max probability per head, reported alongside the label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadConfidence {
    pub material: f64,
    pub surface: f64,
    pub movement: f64,
}

/// A labeled classification with per-head confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: ObstacleLabel,
    pub confidence: HeadConfidence,
}

/// Argmax per head; ties break to the lowest class index.
pub fn classify(
    features: &FeatureVector,
    model: &MlpModel,
) -> Result<Classification, ClassifierError> {
    let dists = forward(features, model)?;
    let material = Material::from_index(argmax(&dists.material)).unwrap();
    let surface = Surface::from_index(argmax(&dists.surface)).unwrap();
    let movement = Movement::from_index(argmax(&dists.movement)).unwrap();
    Ok(Classification {
        label: ObstacleLabel::new(material, surface, movement),
        confidence: HeadConfidence {
            material: dists.material[material.index()],
            surface: dists.surface[surface.index()],
            movement: dists.movement[movement.index()],
        },
    })
}

/// Per-head majority vote over the most recent (up to 3) classifications;
/// ties go to the most recent vote.
pub fn ensemble_classify(history: &[Classification]) -> Result<ObstacleLabel, ClassifierError> {
    if history.is_empty() {
        return Err(ClassifierError::EmptyHistory);
    }
    let recent = &history[history.len().saturating_sub(3)..];

    fn vote<T: Copy + Eq>(votes: impl Iterator<Item = T>) -> T {
        let all: Vec<T> = votes.collect();
        let count = |c: T| all.iter().filter(|&&v| v == c).count();
        let max = all.iter().map(|&v| count(v)).max().unwrap();
        // Newest-first scan: the first class hitting the max wins ties.
        *all.iter().rev().find(|&&v| count(v) == max).unwrap()
    }

    Ok(ObstacleLabel::new(
        vote(recent.iter().map(|c| c.label.material)),
        vote(recent.iter().map(|c| c.label.surface)),
        vote(recent.iter().map(|c| c.label.movement)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features15() -> FeatureVector {
        FeatureVector::new((0..15).map(|i| i as f64 * 3.5 - 10.0).collect())
    }

    fn classification(m: Material, s: Surface, v: Movement) -> Classification {
        Classification {
            label: ObstacleLabel::new(m, s, v),
            confidence: HeadConfidence {
                material: 1.0,
                surface: 1.0,
                movement: 1.0,
            },
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = MlpModel::zeroed(15, &Topology::default());
        let dists = forward(&features15(), &model).unwrap();
        assert_eq!(dists.material, vec![0.25; 4]);
        assert_eq!(dists.surface, vec![0.5; 2]);
        assert_eq!(dists.movement, vec![0.5; 2]);
        // Uniform probabilities tie-break to the lowest class index.
        let c = classify(&features15(), &model).unwrap();
        assert_eq!(
            c.label,
            ObstacleLabel::new(Material::Glass, Surface::Dry, Movement::Static)
        );
    }

    #[test]
    fn softmax_heads_sum_to_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut model = MlpModel::zeroed(15, &Topology::default());
            for layer in model.trunk.iter_mut().chain(model.heads.iter_mut()) {
                for w in &mut layer.weights {
                    *w = rng.random_range(-2.0..2.0);
                }
                for b in &mut layer.biases {
                    *b = rng.random_range(-1.0..1.0);
                }
            }
            let x = FeatureVector::new((0..15).map(|_| rng.random_range(-50.0..50.0)).collect());
            let dists = forward(&x, &model).unwrap();
            for head in [&dists.material, &dists.surface, &dists.movement] {
                let sum: f64 = head.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(head.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn scaler_folds_affine_shifts() {
        let mut model = MlpModel::zeroed(15, &Topology::default());
        let mut rng = {
            use rand::SeedableRng;
            rand_chacha::ChaCha8Rng::seed_from_u64(9)
        };
        {
            use rand::Rng;
            for layer in model.trunk.iter_mut().chain(model.heads.iter_mut()) {
                for w in &mut layer.weights {
                    *w = rng.random_range(-1.0..1.0);
                }
            }
        }
        let raw = features15();
        let baseline = classify(&raw, &model).unwrap();

        // Shift and rescale the input, fold the same transform into the
        // scaler: the classification cannot change.
        let mut shifted_model = model.clone();
        let shift = 12.5;
        let scale = 4.0;
        let shifted = FeatureVector::new(raw.values.iter().map(|v| v * scale + shift).collect());
        for (m, s) in shifted_model
            .scaler
            .mean
            .iter_mut()
            .zip(&mut shifted_model.scaler.std)
        {
            *m = *m * scale + shift;
            *s *= scale;
        }
        let folded = classify(&shifted, &shifted_model).unwrap();
        assert_eq!(folded.label, baseline.label);
    }

    #[test]
    fn feature_length_is_checked() {
        let model = MlpModel::zeroed(15, &Topology::default());
        let short = FeatureVector::new(vec![0.0; 14]);
        assert_eq!(
            forward(&short, &model),
            Err(ClassifierError::FeatureLen {
                got: 14,
                expected: 15
            })
        );
    }

    #[test]
    fn ensemble_majority_and_ties() {
        use Material::*;
        use Movement::*;
        use Surface::*;
        let g = classification(Glass, Dry, Static);
        let w = classification(Wood, Dry, Static);
        let c = classification(Concrete, Dry, Static);

        assert_eq!(
            ensemble_classify(&[g, g, w]).unwrap().material,
            Glass
        );
        // Three-way tie: most recent wins.
        assert_eq!(
            ensemble_classify(&[g, w, c]).unwrap().material,
            Concrete
        );
        // Single vote is the identity.
        assert_eq!(ensemble_classify(&[w]).unwrap(), w.label);
        // Unanimous history equals the single-frame classification.
        assert_eq!(ensemble_classify(&[g, g, g]).unwrap(), g.label);
        assert_eq!(
            ensemble_classify(&[]),
            Err(ClassifierError::EmptyHistory)
        );
        // Longer histories only use the last three.
        assert_eq!(
            ensemble_classify(&[c, c, g, w, w]).unwrap().material,
            Wood
        );
    }

    #[test]
    fn malformed_models_are_rejected() {
        let mut model = MlpModel::zeroed(15, &Topology::default());
        model.heads.pop();
        assert_eq!(
            forward(&features15(), &model),
            Err(ClassifierError::MalformedModel("expected three heads"))
        );

        let mut model = MlpModel::zeroed(15, &Topology::default());
        model.trunk[1].in_dim = 7;
        assert!(forward(&features15(), &model).is_err());
    }
}
