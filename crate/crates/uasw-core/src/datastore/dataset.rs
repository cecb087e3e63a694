//! Labeled-dataset assembly: run the preprocessing pipeline over annotated
//! logs, pair feature vectors with labels, impute non-finite entries with
//! training-split medians, and emit a seeded stratified 70/15/15 split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classifier::FeatureVector;
use crate::config::RadarConfig;
use crate::label::{Material, Movement, ObstacleLabel, Surface};
use crate::pipeline::{calibrate, HopFeatureStream, PipelineError, Windower, BUFFER_DEPTH};

use super::cirlog::{Annotation, CirLog};

/// Fraction of each class combination assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.70;
/// Fraction assigned to the validation split.
pub const VALIDATION_FRACTION: f64 = 0.15;
/// Fraction assigned to the test split (the remainder).
pub const TEST_FRACTION: f64 = 0.15;

/// Disjoint, exhaustive index sets into a dataset's samples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Total number of indexed samples.
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the three sets partition `0..n` exactly.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut all: Vec<usize> = self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .copied()
            .collect();
        all.sort_unstable();
        all.len() == n && all.iter().copied().eq(0..n)
    }
}

/// Feature vectors paired with ground truth, plus the split that training
/// and evaluation must respect.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<(FeatureVector, ObstacleLabel)>,
    pub split: SplitIndices,
}

/// Dataset assembly failures.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no samples produced; logs too short or annotations too narrow")]
    EmptyCorpus,
    #[error("log {log} holds no records")]
    EmptyLog { log: usize },
    #[error("log {log} declares {got} taps, the pipeline config expects {expected}")]
    TapCountMismatch {
        log: usize,
        got: usize,
        expected: usize,
    },
    #[error(
        "log {log}: annotation {start_seq}..={end_seq} outside records {first_seq}..={last_seq}"
    )]
    AnnotationOutOfRange {
        log: usize,
        start_seq: u64,
        end_seq: u64,
        first_seq: u64,
        last_seq: u64,
    },
    #[error("log {log}: annotations {a} and {b} overlap")]
    OverlappingAnnotations { log: usize, a: usize, b: usize },
    #[error("class `{class}` has no samples in the corpus")]
    MissingClass { class: String },
    #[error("log {log}: {source}")]
    Pipeline { log: usize, source: PipelineError },
}

/// A CIR log together with its labeled seq ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedLog {
    pub log: CirLog,
    pub annotations: Vec<Annotation>,
}

/// Stratified 70/15/15 split: within every class combination the indices
/// are shuffled with `seed` and cut proportionally, so each combination's
/// share of every split matches its share of the corpus (±2 pp for any
/// group of ≥ 50 samples total).
pub fn stratified_split(labels: &[ObstacleLabel], seed: u64) -> SplitIndices {
    let combos = Material::ALL.len() * Surface::ALL.len() * Movement::ALL.len();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); combos];
    for (i, label) in labels.iter().enumerate() {
        groups[label.combo_index()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SplitIndices::default();
    for group in &mut groups {
        group.shuffle(&mut rng);
        let g = group.len();
        let n_train = (g as f64 * TRAIN_FRACTION).round() as usize;
        let n_val = ((g as f64 * VALIDATION_FRACTION).round() as usize).min(g - n_train);
        split.train.extend(&group[..n_train]);
        split.validation.extend(&group[n_train..n_train + n_val]);
        split.test.extend(&group[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    split
}

/// Replaces every non-finite feature entry with the training split's
/// per-feature median over finite values (0 when a feature has none).
/// Finite entries are never touched. Returns the number of replacements.
pub fn impute_missing(samples: &mut [(FeatureVector, ObstacleLabel)], train: &[usize]) -> usize {
    let Some(n_features) = samples.first().map(|s| s.0.values.len()) else {
        return 0;
    };
    let mut medians = Vec::with_capacity(n_features);
    for j in 0..n_features {
        let mut finite: Vec<f64> = train
            .iter()
            .map(|&i| samples[i].0.values[j])
            .filter(|v| v.is_finite())
            .collect();
        finite.sort_by(f64::total_cmp);
        medians.push(match finite.len() {
            0 => 0.0,
            n if n % 2 == 1 => finite[n / 2],
            n => (finite[n / 2 - 1] + finite[n / 2]) / 2.0,
        });
    }
    let mut replaced = 0;
    for (features, _) in samples.iter_mut() {
        for (v, m) in features.values.iter_mut().zip(&medians) {
            if !v.is_finite() {
                *v = *m;
                replaced += 1;
            }
        }
    }
    replaced
}

impl LabeledDataset {
    /// Splits, checks class coverage and imputes — the tail end of
    /// [`build_dataset`], usable on samples from any source.
    pub fn from_samples(
        samples: Vec<(FeatureVector, ObstacleLabel)>,
        seed: u64,
    ) -> Result<LabeledDataset, DatasetError> {
        if samples.is_empty() {
            return Err(DatasetError::EmptyCorpus);
        }
        let mut have_material = [false; 4];
        let mut have_surface = [false; 2];
        let mut have_movement = [false; 2];
        for (_, label) in &samples {
            have_material[label.material.index()] = true;
            have_surface[label.surface.index()] = true;
            have_movement[label.movement.index()] = true;
        }
        let mut missing: Vec<String> = Vec::new();
        missing.extend(
            Material::ALL
                .iter()
                .filter(|m| !have_material[m.index()])
                .map(ToString::to_string),
        );
        missing.extend(
            Surface::ALL
                .iter()
                .filter(|s| !have_surface[s.index()])
                .map(ToString::to_string),
        );
        missing.extend(
            Movement::ALL
                .iter()
                .filter(|v| !have_movement[v.index()])
                .map(ToString::to_string),
        );
        if !missing.is_empty() {
            return Err(DatasetError::MissingClass {
                class: missing.join(", "),
            });
        }

        let labels: Vec<ObstacleLabel> = samples.iter().map(|s| s.1).collect();
        let split = stratified_split(&labels, seed);
        let mut dataset = LabeledDataset { samples, split };
        impute_missing(&mut dataset.samples, &dataset.split.train);
        Ok(dataset)
    }
}

/// Builds a labeled dataset from annotated logs.
///
/// Per log: calibrate, stream the frames through the 3-D window, and for
/// every completed buffer whose full CIR span lies inside exactly one
/// annotation, emit (newest spectral frame's mean magnitudes, label).
/// Buffers outside every annotation — including any straddling an
/// annotation boundary — are skipped.
pub fn build_dataset(
    logs: &[AnnotatedLog],
    config: &RadarConfig,
    seed: u64,
) -> Result<LabeledDataset, DatasetError> {
    let span = config.n_cirs_in_cpi + (BUFFER_DEPTH - 1) * config.hop_cirs();
    let mut samples = Vec::new();
    for (li, annotated) in logs.iter().enumerate() {
        let pipe_err = |source| DatasetError::Pipeline { log: li, source };
        let frames = &annotated.log.frames;
        if frames.is_empty() {
            return Err(DatasetError::EmptyLog { log: li });
        }
        if annotated.log.header.taps != config.total_taps {
            return Err(DatasetError::TapCountMismatch {
                log: li,
                got: annotated.log.header.taps,
                expected: config.total_taps,
            });
        }
        let first_seq = annotated.log.first_seq().expect("frames checked non-empty");
        let last_seq = annotated.log.last_seq().expect("frames checked non-empty");
        let mut order: Vec<usize> = (0..annotated.annotations.len()).collect();
        order.sort_by_key(|&i| annotated.annotations[i].start_seq);
        for pair in order.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if annotated.annotations[b].start_seq <= annotated.annotations[a].end_seq {
                return Err(DatasetError::OverlappingAnnotations { log: li, a, b });
            }
        }
        for ann in &annotated.annotations {
            if ann.start_seq < first_seq || ann.end_seq > last_seq {
                return Err(DatasetError::AnnotationOutOfRange {
                    log: li,
                    start_seq: ann.start_seq,
                    end_seq: ann.end_seq,
                    first_seq,
                    last_seq,
                });
            }
        }

        let calib = calibrate(frames, config).map_err(pipe_err)?;
        let mut windower = Windower::new(&calib, config).map_err(pipe_err)?;
        let mut features = HopFeatureStream::new(config);
        for (i, frame) in frames.iter().enumerate() {
            let push = windower.push(frame).map_err(pipe_err)?;
            let Some(buffer) = push.buffer else { continue };
            // The emitting window always holds the last `span` pushed
            // frames, gap-free, so the covered seq range is exactly this.
            let start_seq = frames[i + 1 - span].seq;
            let end_seq = frame.seq;
            let label = annotated
                .annotations
                .iter()
                .find(|a| a.covers(start_seq, end_seq))
                .map(|a| a.label);
            if let Some(label) = label {
                let hop = features.push(&buffer).map_err(pipe_err)?;
                samples.push((FeatureVector::new(hop.newest.mean_mag), label));
            }
        }
    }
    LabeledDataset::from_samples(samples, seed)
}
