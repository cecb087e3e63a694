//! Synthetic corpus generation: drives the simulator across the full
//! 4×2×2 label grid and emits annotated, bit-exact logs.
//!
//! Every combination gets one log assembled from *approach passes*: the
//! sensor closes on the obstacle at walking speed, sweeping the echo from
//! roughly bin 12.5 down to bin 4, which keeps per-hop spectral deltas far
//! above the detection threshold. Pass lengths are multiples of the window
//! hop so annotated sample counts are exact, and every log is verified
//! against a noise-free twin: at least [`MIN_VERIFY_RATE`] of the
//! annotated windows must trip the detector (the envelope of a smoothly
//! approaching echo inevitably stalls across a bin triple now and then),
//! otherwise the combination is redrawn with fresh randomness.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, RadarConfig};
use crate::detector::{detect, DetectorParams};
use crate::label::ObstacleLabel;
use crate::pipeline::{
    calibrate, HopFeatureStream, PipelineError, Windower, BUFFER_DEPTH,
};
use crate::sim::{
    simulate_session, Reflector, Scenario, Scene, Segment, SimError, DEFAULT_LEAKAGE_TAP,
};

use super::cirlog::{
    decode_frame, encode_frame, read_annotations, write_annotations, Annotation,
    AnnotationParseError, CirLog, CirLogError, CirLogHeader, RecordError,
};
use super::dataset::AnnotatedLog;
use super::DEFAULT_SCALE;

/// Samples drawn from one approach pass before the obstacle is respawned.
const MAX_SAMPLES_PER_PASS: usize = 14;

/// Redraws of one combination before generation gives up.
const MAX_ATTEMPTS: usize = 12;

/// Minimum noise-free detection rate over a log's annotated windows.
///
/// Detection wants three *consecutive* per-bin deltas above γ; when the
/// echo envelope's crest parks across a triple for one hop the middle bin's
/// delta collapses, so a handful of stalled windows per pass is inherent to
/// the geometry rather than a defect of the pass.
pub const MIN_VERIFY_RATE: f64 = 0.8;

/// Echo center at pass *end*, in range bins (jittered inside this band).
///
/// Anchoring the end rather than the start keeps short passes entirely
/// inside the far-bin detection band: a pass always finishes here, and its
/// start is wherever the walking speed and pass length put it. Anchoring
/// the start instead would park a short pass at the outer edge, where the
/// trailing lanes clip past the last used bin and detection is weakest.
const PASS_END_BIN: (f64, f64) = (4.3, 4.7);

/// Closing speed of an approach pass (m/s).
const PASS_SPEED_MPS: (f64, f64) = (1.05, 1.25);

/// What to generate: class mix plus simulator knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    /// Annotated samples per (material, surface, movement) combination.
    pub samples_per_combination: usize,
    /// Per-combination overrides of the sample count.
    pub overrides: Vec<(ObstacleLabel, usize)>,
    /// Per-pass noise standard deviation is drawn from this range.
    pub noise_std: (f64, f64),
    /// Fixed-point scale written into the log headers.
    pub scale: f64,
    /// Echo amplitude before material/surface factors.
    pub base_amplitude: f64,
    /// Relative per-pass amplitude jitter (±fraction).
    pub amplitude_jitter: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            samples_per_combination: 50,
            overrides: Vec::new(),
            noise_std: (4.0, 7.0),
            scale: DEFAULT_SCALE,
            base_amplitude: 880.0,
            amplitude_jitter: 0.05,
        }
    }
}

impl CorpusSpec {
    /// Sample count for one combination, overrides applied (last wins).
    pub fn count_for(&self, label: ObstacleLabel) -> usize {
        self.overrides
            .iter()
            .rev()
            .find(|(l, _)| *l == label)
            .map(|(_, n)| *n)
            .unwrap_or(self.samples_per_combination)
    }

    /// Total samples across the label grid.
    pub fn total_samples(&self) -> usize {
        ObstacleLabel::all_combinations()
            .into_iter()
            .map(|l| self.count_for(l))
            .sum()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for label in ObstacleLabel::all_combinations() {
            let count = self.count_for(label);
            if count == 0 {
                return Err(CorpusError::EmptyCombination {
                    label: label_slug(label),
                });
            }
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(CorpusError::BadSpec(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if !(0.0 <= self.noise_std.0 && self.noise_std.0 <= self.noise_std.1) {
            return Err(CorpusError::BadSpec(format!(
                "noise_std range ({}, {}) must satisfy 0 ≤ lo ≤ hi",
                self.noise_std.0, self.noise_std.1
            )));
        }
        if !(self.base_amplitude > 0.0) {
            return Err(CorpusError::BadSpec(format!(
                "base_amplitude must be positive, got {}",
                self.base_amplitude
            )));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(CorpusError::BadSpec(format!(
                "amplitude_jitter must be in [0, 1), got {}",
                self.amplitude_jitter
            )));
        }
        Ok(())
    }
}

/// Corpus generation and I/O failures.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("combination `{label}` requests 0 samples; counts must be ≥ 1")]
    EmptyCombination { label: String },
    #[error("bad corpus spec: {0}")]
    BadSpec(String),
    #[error("no detectable pass layout found for `{label}` after {attempts} attempts")]
    Unverifiable { label: String, attempts: usize },
    #[error("internal coverage mismatch: expected {expected} annotated samples, found {got}")]
    CoverageMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("tap encoding failed: {0}")]
    Record(#[from] RecordError),
    #[error(transparent)]
    Log(#[from] CirLogError),
    #[error(transparent)]
    Annotation(#[from] AnnotationParseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `material_surface_movement`, used for file stems and error messages.
pub fn label_slug(label: ObstacleLabel) -> String {
    format!("{}_{}_{}", label.material, label.surface, label.movement)
}

/// Generates one annotated log per label combination.
///
/// Deterministic per seed; retries a combination with fresh draws when its
/// noise-free twin detects fewer than [`MIN_VERIFY_RATE`] of the annotated
/// windows (rare by construction).
pub fn generate_corpus(
    spec: &CorpusSpec,
    config: &RadarConfig,
    seed: u64,
) -> Result<Vec<AnnotatedLog>, CorpusError> {
    spec.validate()?;
    config.validate()?;
    let header = CirLogHeader::for_config(config, spec.scale);
    let mut corpus = Vec::new();
    for label in ObstacleLabel::all_combinations() {
        let n = spec.count_for(label);
        let mut attempt = 0;
        loop {
            let stream = combo_stream_seed(seed, label.combo_index(), attempt);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let (scenario, annotations, duration_ms) = author_combo(spec, config, label, n, &mut rng);

            let twin = silence(&scenario);
            let clean = quantised_frames(
                simulate_session(&twin, config, duration_ms, 0)?,
                &header,
            )?;
            let clean_log = CirLog {
                header: header.clone(),
                frames: clean,
            };
            let verdicts = detection_coverage(
                &AnnotatedLog {
                    log: clean_log,
                    annotations: annotations.clone(),
                },
                config,
            )?;
            if verdicts.0 != n {
                return Err(CorpusError::CoverageMismatch {
                    expected: n,
                    got: verdicts.0,
                });
            }
            if verdicts.1 as f64 >= MIN_VERIFY_RATE * n as f64 {
                let frames = quantised_frames(
                    simulate_session(&scenario, config, duration_ms, stream ^ 0x5eed)?,
                    &header,
                )?;
                corpus.push(AnnotatedLog {
                    log: CirLog {
                        header: header.clone(),
                        frames,
                    },
                    annotations,
                });
                break;
            }
            attempt += 1;
            if attempt >= MAX_ATTEMPTS {
                return Err(CorpusError::Unverifiable {
                    label: label_slug(label),
                    attempts: attempt,
                });
            }
        }
    }
    Ok(corpus)
}

/// Pipeline + detector over every annotated window of one log.
///
/// Returns `(annotated samples, detected)`; build_dataset uses the same
/// window-to-annotation rule, so the first count equals the number of
/// dataset samples the log yields.
pub fn detection_coverage(
    annotated: &AnnotatedLog,
    config: &RadarConfig,
) -> Result<(usize, usize), CorpusError> {
    let frames = &annotated.log.frames;
    let span = config.n_cirs_in_cpi + (BUFFER_DEPTH - 1) * config.hop_cirs();
    let calib = calibrate(frames, config)?;
    let mut windower = Windower::new(&calib, config)?;
    let mut features = HopFeatureStream::new(config);
    let params = DetectorParams::new(config);
    let mut annotated_count = 0;
    let mut detected = 0;
    for (i, frame) in frames.iter().enumerate() {
        let push = windower.push(frame)?;
        let Some(buffer) = push.buffer else { continue };
        let start_seq = frames[i + 1 - span].seq;
        if !annotated
            .annotations
            .iter()
            .any(|a| a.covers(start_seq, frame.seq))
        {
            continue;
        }
        annotated_count += 1;
        let hop = features.push(&buffer)?;
        if detect(&hop.delta, &params).detected {
            detected += 1;
        }
    }
    Ok((annotated_count, detected))
}

/// Builds the pass timeline for one combination.
fn author_combo(
    spec: &CorpusSpec,
    config: &RadarConfig,
    label: ObstacleLabel,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Scenario, Vec<Annotation>, u64) {
    let hop = config.hop_cirs() as u64;
    let window = config.n_cirs_in_cpi as u64 + (BUFFER_DEPTH as u64 - 1) * hop;
    let mut segments = Vec::new();
    let mut annotations = Vec::new();
    let mut cursor: u64 = 0; // next free CIR seq
    let mut remaining = n;
    while remaining > 0 {
        let k = remaining.min(MAX_SAMPLES_PER_PASS) as u64;
        let pass_cirs = window + hop * (k - 1);
        let speed = rng.random_range(PASS_SPEED_MPS.0..=PASS_SPEED_MPS.1);
        let end_bin = rng.random_range(PASS_END_BIN.0..=PASS_END_BIN.1);
        let travel_bins =
            pass_cirs as f64 * config.rfri_ms / 1000.0 * speed * 100.0 / config.cm_per_tap();
        let start_bin = end_bin + travel_bins;
        let amplitude = spec.base_amplitude
            * (1.0 + spec.amplitude_jitter * rng.random_range(-1.0..=1.0));
        let noise_std = rng.random_range(spec.noise_std.0..=spec.noise_std.1);

        let range_m = start_bin * config.cm_per_tap() / 100.0;
        let mut reflector = Reflector::for_label(label, range_m, amplitude, -speed);
        if let Some(sig) = reflector.signature.as_mut() {
            sig.mod_phase_rad = rng.random_range(0.0..std::f64::consts::TAU);
        }
        segments.push(Segment {
            start_ms: (cursor as f64 * config.rfri_ms) as u64,
            scene: Scene {
                reflectors: vec![reflector],
                noise_std,
                leakage_tap: DEFAULT_LEAKAGE_TAP,
                rx_gain_index: 0,
            },
        });
        annotations.push(Annotation {
            start_seq: cursor,
            end_seq: cursor + pass_cirs - 1,
            label,
        });
        cursor += pass_cirs;
        remaining -= k as usize;
    }
    let duration_ms = (cursor as f64 * config.rfri_ms) as u64;
    (Scenario { segments }, annotations, duration_ms)
}

/// The same scenario with all noise switched off.
fn silence(scenario: &Scenario) -> Scenario {
    let mut twin = scenario.clone();
    for seg in &mut twin.segments {
        seg.scene.noise_std = 0.0;
    }
    twin
}

/// Snaps simulated frames onto the log's fixed-point grid, so in-memory
/// corpora match their on-disk form exactly.
fn quantised_frames(
    frames: Vec<crate::sim::CirFrame>,
    header: &CirLogHeader,
) -> Result<Vec<crate::sim::CirFrame>, CorpusError> {
    frames
        .into_iter()
        .map(|f| {
            let record = encode_frame(&f, header)?;
            Ok(decode_frame(&record, header)?)
        })
        .collect()
}

/// Mixes a per-(combination, attempt) stream id out of the corpus seed.
fn combo_stream_seed(seed: u64, combo: usize, attempt: usize) -> u64 {
    seed.wrapping_add(((combo * 64 + attempt + 1) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Writes `<slug>.uaswcir` and `<slug>.labels` per log into `dir`.
///
/// Logs whose annotations carry several distinct labels (not produced by
/// [`generate_corpus`]) fall back to an index-based stem.
pub fn write_corpus(corpus: &[AnnotatedLog], dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir)?;
    for (i, annotated) in corpus.iter().enumerate() {
        let mut labels: Vec<ObstacleLabel> = annotated.annotations.iter().map(|a| a.label).collect();
        labels.dedup();
        let stem = match labels.as_slice() {
            [single] => label_slug(*single),
            _ => format!("log{i:03}"),
        };
        annotated.log.save(&dir.join(format!("{stem}.uaswcir")))?;
        write_annotations(&annotated.annotations, &dir.join(format!("{stem}.labels")))?;
    }
    Ok(())
}

/// Loads every `.uaswcir` log in `dir` (sorted by file name) with its
/// sibling `.labels` file; a missing labels file means "unannotated".
pub fn read_corpus(dir: &Path) -> Result<Vec<AnnotatedLog>, CorpusError> {
    let mut log_paths: Vec<_> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "uaswcir"))
        .collect();
    log_paths.sort();
    let mut corpus = Vec::new();
    for path in log_paths {
        let log = CirLog::load(&path)?;
        let labels_path = path.with_extension("labels");
        let annotations = if labels_path.exists() {
            read_annotations(&labels_path)?
        } else {
            Vec::new()
        };
        corpus.push(AnnotatedLog { log, annotations });
    }
    Ok(corpus)
}
