//! CIR preprocessing: calibration, windowing, spectra, differences.
//!
//! The stages mirror the acquisition chain: [`calibrate`] locates the
//! zero-distance bin B0 from the leakage peak, [`Windower`] slides a
//! three-dimensional window (N slow-time CIRs × 15 range bins × 4 frames)
//! over the stream, [`spectral_features`] reduces each frame to per-bin
//! mean FFT magnitudes over the coherent processing interval, and
//! [`mean_difference`] turns consecutive features into the detector's
//! input deltas.
//!
//! Two readings baked in here deserve a note: the CPI mean is taken over
//! the magnitudes of the non-DC frequency bins (static clutter lands at
//! DC and would otherwise swamp the mean), and frame differences are
//! between consecutive frames, one ranging interval (40 ms) apart.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::config::RadarConfig;
use crate::sim::CirFrame;

/// Frames per sliding window (the "depth" of the 3-D matrix).
pub const BUFFER_DEPTH: usize = 4;

/// Minimum peak/median ratio for a trusted calibration.
pub const CALIBRATION_CONFIDENCE_MIN: f64 = 3.0;

/// Preprocessing failures.
#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("calibration needs at least {need} frames, got {got}")]
    TooFewFrames { got: usize, need: usize },
    #[error("low-confidence calibration: peak/median {confidence:.2} < {min} (tentative b0 = {b0_index})", min = CALIBRATION_CONFIDENCE_MIN)]
    LowConfidence { b0_index: usize, confidence: f64 },
    #[error("calibrated b0 = {b0_index} leaves no room for {used} used bins within {total} taps")]
    B0OutOfRange {
        b0_index: usize,
        used: usize,
        total: usize,
    },
    #[error("bin {bin} outside 0..={max}")]
    BinOutOfRange { bin: usize, max: usize },
    #[error("frame has {got} taps, config expects {expected}")]
    TapCountMismatch { got: usize, expected: usize },
    #[error("window must be {expected} rows, got {got}")]
    BadWindowShape { got: usize, expected: usize },
    #[error("mean_difference needs consecutive frames: curr {curr}, prev {prev}")]
    FrameIndexMismatch { curr: u64, prev: u64 },
}

/// Where the zero-distance bin sits and how clearly it stood out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    /// Range-bin index of zero distance (the leakage peak).
    pub b0_index: usize,
    /// Peak over median of the slow-time-averaged tap magnitudes (≥ 1).
    pub confidence: f64,
}

/// Locates B0 as the argmax of the slow-time-averaged tap magnitude.
///
/// Needs at least one CPI worth of frames. A peak/median ratio below
/// [`CALIBRATION_CONFIDENCE_MIN`] is reported as an error carrying the
/// tentative result rather than silently accepted.
pub fn calibrate(
    frames: &[CirFrame],
    config: &RadarConfig,
) -> Result<CalibrationResult, PipelineError> {
    if frames.len() < config.n_cirs_in_cpi {
        return Err(PipelineError::TooFewFrames {
            got: frames.len(),
            need: config.n_cirs_in_cpi,
        });
    }
    let mut avg = vec![0.0f64; config.total_taps];
    for frame in frames {
        if frame.taps.len() != config.total_taps {
            return Err(PipelineError::TapCountMismatch {
                got: frame.taps.len(),
                expected: config.total_taps,
            });
        }
        for (acc, tap) in avg.iter_mut().zip(&frame.taps) {
            *acc += tap.norm();
        }
    }
    for acc in &mut avg {
        *acc /= frames.len() as f64;
    }

    let b0_index = avg
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let peak = avg[b0_index];

    let mut sorted = avg.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    let confidence = if median > 0.0 {
        peak / median
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };

    if confidence < CALIBRATION_CONFIDENCE_MIN {
        return Err(PipelineError::LowConfidence {
            b0_index,
            confidence,
        });
    }
    if b0_index + config.used_taps + 1 > config.total_taps {
        return Err(PipelineError::B0OutOfRange {
            b0_index,
            used: config.used_taps,
            total: config.total_taps,
        });
    }
    Ok(CalibrationResult {
        b0_index,
        confidence,
    })
}

/// Distance covered by one range bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBinDistance {
    pub center_cm: f64,
    pub half_width_cm: f64,
}

/// Distance of range bin `bin` (B1..B15 for 1..15; bin 0 is B0 itself).
///
/// `center = bin · η · c / 2`, ± half a bin. The per-tap factor is
/// computed first so the default grid lands on exact multiples of 15 cm.
pub fn tap_distance(bin: usize, config: &RadarConfig) -> Result<RangeBinDistance, PipelineError> {
    if bin > config.used_taps {
        return Err(PipelineError::BinOutOfRange {
            bin,
            max: config.used_taps,
        });
    }
    let cm_per_tap = config.cm_per_tap();
    Ok(RangeBinDistance {
        center_cm: bin as f64 * cm_per_tap,
        half_width_cm: cm_per_tap / 2.0,
    })
}

/// The 3-D sliding window: `BUFFER_DEPTH` spectral frames of N CIRs over
/// the used range bins. Adjacent frames overlap by N − hop CIRs.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffer {
    /// One flattened N×used matrix per frame, row-major (row = CIR).
    frames: Vec<Vec<Complex64>>,
    /// Frame index of `frames[0]`; consecutive within a buffer.
    pub first_frame_index: u64,
    /// CIRs between consecutive frames (N − overlap).
    pub hop_cirs: usize,
    n_cirs: usize,
    used_bins: usize,
}

impl FrameBuffer {
    /// Builds a buffer from a raw window of `n + (depth−1)·hop` rows.
    pub fn from_window(
        rows: &[Vec<Complex64>],
        hop_cirs: usize,
        first_frame_index: u64,
    ) -> Result<FrameBuffer, PipelineError> {
        let depth = BUFFER_DEPTH;
        if rows.len() <= (depth - 1) * hop_cirs {
            return Err(PipelineError::BadWindowShape {
                got: rows.len(),
                expected: (depth - 1) * hop_cirs + 1,
            });
        }
        let n_cirs = rows.len() - (depth - 1) * hop_cirs;
        let used_bins = rows.first().map_or(0, Vec::len);
        let mut frames = Vec::with_capacity(depth);
        for d in 0..depth {
            let mut frame = Vec::with_capacity(n_cirs * used_bins);
            for row in &rows[d * hop_cirs..d * hop_cirs + n_cirs] {
                if row.len() != used_bins {
                    return Err(PipelineError::TapCountMismatch {
                        got: row.len(),
                        expected: used_bins,
                    });
                }
                frame.extend_from_slice(row);
            }
            frames.push(frame);
        }
        Ok(FrameBuffer {
            frames,
            first_frame_index,
            hop_cirs,
            n_cirs,
            used_bins,
        })
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn n_cirs(&self) -> usize {
        self.n_cirs
    }

    pub fn used_bins(&self) -> usize {
        self.used_bins
    }

    /// Frame index of depth slot `d`.
    pub fn frame_index(&self, d: usize) -> u64 {
        self.first_frame_index + d as u64
    }

    /// One sample: frame `d`, slow-time row `row`, range bin `bin`.
    pub fn sample(&self, d: usize, row: usize, bin: usize) -> Complex64 {
        self.frames[d][row * self.used_bins + bin]
    }

    /// Slow-time column of frame `d` at range bin `bin` (length N).
    pub fn column(&self, d: usize, bin: usize) -> Vec<Complex64> {
        (0..self.n_cirs).map(|row| self.sample(d, row, bin)).collect()
    }
}

/// A discontinuity in the input stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqGap {
    pub expected: u64,
    pub got: u64,
}

/// Result of feeding one frame to the [`Windower`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPush {
    /// Complete buffer, when this frame finished one.
    pub buffer: Option<FrameBuffer>,
    /// Gap event, when this frame broke the sequence.
    pub gap: Option<SeqGap>,
}

/// Streaming window accumulator: one per CIR stream.
///
/// The first buffer appears after `N + 3·hop` consecutive frames
/// (88 with defaults), then one per hop. A sequence gap restarts the
/// accumulator; frame indices skip across gaps so no pair of features
/// straddling a gap ever looks consecutive.
#[derive(Debug)]
pub struct Windower {
    b0: usize,
    used: usize,
    hop: usize,
    window_len: usize,
    total_taps: usize,
    rows: VecDeque<Vec<Complex64>>,
    run_len: u64,
    next_seq: Option<u64>,
    next_newest_index: u64,
}

impl Windower {
    pub fn new(calib: &CalibrationResult, config: &RadarConfig) -> Result<Windower, PipelineError> {
        if calib.b0_index + config.used_taps + 1 > config.total_taps {
            return Err(PipelineError::B0OutOfRange {
                b0_index: calib.b0_index,
                used: config.used_taps,
                total: config.total_taps,
            });
        }
        let n = config.n_cirs_in_cpi;
        let hop = config.hop_cirs();
        Ok(Windower {
            b0: calib.b0_index,
            used: config.used_taps,
            hop,
            window_len: n + (BUFFER_DEPTH - 1) * hop,
            total_taps: config.total_taps,
            rows: VecDeque::new(),
            run_len: 0,
            next_seq: None,
            next_newest_index: BUFFER_DEPTH as u64 - 1,
        })
    }

    /// Feeds one frame; returns a completed buffer and/or a gap event.
    pub fn push(&mut self, frame: &CirFrame) -> Result<WindowPush, PipelineError> {
        if frame.taps.len() != self.total_taps {
            return Err(PipelineError::TapCountMismatch {
                got: frame.taps.len(),
                expected: self.total_taps,
            });
        }
        let mut gap = None;
        if let Some(expected) = self.next_seq {
            if frame.seq != expected {
                gap = Some(SeqGap {
                    expected,
                    got: frame.seq,
                });
                self.rows.clear();
                self.run_len = 0;
                // The next emitted buffer holds entirely new frames.
                self.next_newest_index += BUFFER_DEPTH as u64 - 1;
            }
        }
        self.next_seq = Some(frame.seq + 1);

        self.rows
            .push_back(frame.taps[self.b0 + 1..self.b0 + 1 + self.used].to_vec());
        if self.rows.len() > self.window_len {
            self.rows.pop_front();
        }
        self.run_len += 1;

        let buffer = if self.run_len >= self.window_len as u64
            && (self.run_len - self.window_len as u64) % self.hop as u64 == 0
        {
            let rows: Vec<Vec<Complex64>> = self.rows.iter().cloned().collect();
            let newest = self.next_newest_index;
            self.next_newest_index += 1;
            Some(FrameBuffer::from_window(
                &rows,
                self.hop,
                newest - (BUFFER_DEPTH as u64 - 1),
            )?)
        } else {
            None
        };
        Ok(WindowPush { buffer, gap })
    }
}

/// Buffers and gap events produced from a whole stream.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutput {
    pub buffers: Vec<FrameBuffer>,
    pub gaps: Vec<SeqGap>,
}

/// Runs a [`Windower`] over an in-memory stream.
pub fn window_frames(
    stream: &[CirFrame],
    calib: &CalibrationResult,
    config: &RadarConfig,
) -> Result<WindowOutput, PipelineError> {
    let mut windower = Windower::new(calib, config)?;
    let mut out = WindowOutput {
        buffers: Vec::new(),
        gaps: Vec::new(),
    };
    for frame in stream {
        let push = windower.push(frame)?;
        if let Some(b) = push.buffer {
            out.buffers.push(b);
        }
        if let Some(g) = push.gap {
            out.gaps.push(g);
        }
    }
    Ok(out)
}

/// Per-bin mean FFT magnitude of one spectral frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFeature {
    /// One value per used range bin (B1..B15 with defaults).
    pub mean_mag: Vec<f64>,
    pub frame_index: u64,
}

/// Reusable slow-time FFT plan for a fixed N.
pub struct SpectralAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    n: usize,
}

impl SpectralAnalyzer {
    pub fn new(n_cirs: usize) -> SpectralAnalyzer {
        let mut planner = FftPlanner::new();
        SpectralAnalyzer {
            fft: planner.plan_fft_forward(n_cirs),
            n: n_cirs,
        }
    }

    /// Per frame and range bin: N-point slow-time FFT, drop DC, average
    /// the remaining N−1 magnitudes.
    pub fn features(&self, buffer: &FrameBuffer) -> Vec<SpectralFeature> {
        (0..buffer.depth()).map(|d| self.frame(buffer, d)).collect()
    }

    /// Spectral feature of the single depth slot `d`.
    pub fn frame(&self, buffer: &FrameBuffer, d: usize) -> SpectralFeature {
        let mut scratch = vec![Complex64::ZERO; self.n];
        let mut mean_mag = Vec::with_capacity(buffer.used_bins());
        for bin in 0..buffer.used_bins() {
            for (row, slot) in scratch.iter_mut().enumerate() {
                *slot = buffer.sample(d, row, bin);
            }
            self.fft.process(&mut scratch);
            let sum: f64 = scratch[1..].iter().map(|c| c.norm()).sum();
            mean_mag.push(sum / (self.n - 1) as f64);
        }
        SpectralFeature {
            mean_mag,
            frame_index: buffer.frame_index(d),
        }
    }
}

/// One-shot convenience wrapper around [`SpectralAnalyzer`].
pub fn spectral_features(buffer: &FrameBuffer) -> Vec<SpectralFeature> {
    SpectralAnalyzer::new(buffer.n_cirs()).features(buffer)
}

/// Absolute per-bin change between consecutive spectral frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector {
    delta: Vec<f64>,
}

impl DeltaVector {
    /// Wraps raw per-bin deltas (index 0 ↔ B1).
    pub fn from_values(delta: Vec<f64>) -> DeltaVector {
        DeltaVector { delta }
    }

    pub fn values(&self) -> &[f64] {
        &self.delta
    }

    /// Delta of range bin `B<number>`, 1-based: `bin(1)` is B1.
    pub fn bin(&self, number: usize) -> f64 {
        self.delta[number - 1]
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

/// `delta[i] = |curr.mean_mag[i] − prev.mean_mag[i]|` for consecutive frames.
pub fn mean_difference(
    curr: &SpectralFeature,
    prev: &SpectralFeature,
) -> Result<DeltaVector, PipelineError> {
    if curr.frame_index != prev.frame_index + 1 {
        return Err(PipelineError::FrameIndexMismatch {
            curr: curr.frame_index,
            prev: prev.frame_index,
        });
    }
    if curr.mean_mag.len() != prev.mean_mag.len() {
        return Err(PipelineError::TapCountMismatch {
            got: curr.mean_mag.len(),
            expected: prev.mean_mag.len(),
        });
    }
    Ok(DeltaVector {
        delta: curr
            .mean_mag
            .iter()
            .zip(&prev.mean_mag)
            .map(|(c, p)| (c - p).abs())
            .collect(),
    })
}

/// Newest spectral frame of a buffer plus its delta against the previous
/// frame — the per-hop output the detector and classifier consume.
#[derive(Debug, Clone, PartialEq)]
pub struct HopFeatures {
    pub newest: SpectralFeature,
    pub delta: DeltaVector,
}

/// Streaming per-buffer feature extractor.
///
/// Consecutive buffers share all but their newest frame, so the previous
/// frame's spectrum is cached by frame index instead of recomputed. Feed
/// buffers in the order the [`Windower`] emits them.
pub struct HopFeatureStream {
    analyzer: SpectralAnalyzer,
    last: Option<SpectralFeature>,
}

impl HopFeatureStream {
    pub fn new(config: &RadarConfig) -> HopFeatureStream {
        HopFeatureStream {
            analyzer: SpectralAnalyzer::new(config.n_cirs_in_cpi),
            last: None,
        }
    }

    /// Features of one completed buffer.
    pub fn push(&mut self, buffer: &FrameBuffer) -> Result<HopFeatures, PipelineError> {
        let prev_index = buffer.frame_index(buffer.depth() - 2);
        let prev = match self.last.take() {
            Some(f) if f.frame_index == prev_index => f,
            _ => self.analyzer.frame(buffer, buffer.depth() - 2),
        };
        let newest = self.analyzer.frame(buffer, buffer.depth() - 1);
        let delta = mean_difference(&newest, &prev)?;
        self.last = Some(newest.clone());
        Ok(HopFeatures { newest, delta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_cir, Scene};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn cfg() -> RadarConfig {
        RadarConfig::default()
    }

    fn sim_frames(scene: &Scene, count: usize, seed: u64) -> Vec<CirFrame> {
        let config = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| generate_cir(scene, &config, i as f64 * config.rfri_ms, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn tap_distance_matches_bin_geometry() {
        let config = cfg();
        let d1 = tap_distance(1, &config).unwrap();
        assert_eq!(d1.center_cm, 15.0);
        assert_eq!(d1.half_width_cm, 7.5);
        assert_eq!(tap_distance(0, &config).unwrap().center_cm, 0.0);
        assert_eq!(tap_distance(15, &config).unwrap().center_cm, 225.0);
        assert!(matches!(
            tap_distance(16, &config),
            Err(PipelineError::BinOutOfRange { bin: 16, max: 15 })
        ));
    }

    #[test]
    fn tap_distance_is_exactly_linear() {
        let config = cfg();
        let f = |bin: usize| tap_distance(bin, &config).unwrap().center_cm;
        for a in 0..=15 {
            for b in 0..=(15 - a) {
                assert_eq!(f(a + b), f(a) + f(b), "bins {a}+{b}");
            }
        }
    }

    #[test]
    fn calibrate_finds_leakage_bin() {
        let frames = sim_frames(&Scene::empty(), 64, 0);
        let calib = calibrate(&frames, &cfg()).unwrap();
        assert_eq!(calib.b0_index, 3);
        assert!(calib.confidence > 100.0);
        assert_eq!(calibrate(&frames, &cfg()).unwrap(), calib);
    }

    #[test]
    fn calibrate_rejects_short_or_flat_input() {
        let frames = sim_frames(&Scene::empty(), 63, 0);
        assert_eq!(
            calibrate(&frames, &cfg()),
            Err(PipelineError::TooFewFrames { got: 63, need: 64 })
        );

        let mut noise_only = Scene::empty();
        noise_only.leakage_tap = 0;
        noise_only.noise_std = 5.0;
        let mut frames = sim_frames(&noise_only, 64, 1);
        // Strip the leakage so only noise remains.
        for f in &mut frames {
            for tap in &mut f.taps {
                if tap.norm() > 100.0 {
                    *tap = Complex64::ZERO;
                }
            }
        }
        assert!(matches!(
            calibrate(&frames, &cfg()),
            Err(PipelineError::LowConfidence { .. })
        ));
    }

    #[test]
    fn first_buffer_after_88_frames() {
        let config = cfg();
        let calib = CalibrationResult {
            b0_index: 3,
            confidence: 100.0,
        };
        let frames = sim_frames(&Scene::empty(), 88, 0);
        let out = window_frames(&frames[..87], &calib, &config).unwrap();
        assert!(out.buffers.is_empty());
        let out = window_frames(&frames, &calib, &config).unwrap();
        assert_eq!(out.buffers.len(), 1);
        let buffer = &out.buffers[0];
        assert_eq!(buffer.depth(), 4);
        assert_eq!(buffer.n_cirs(), 64);
        assert_eq!(buffer.used_bins(), 15);
        assert_eq!(buffer.first_frame_index, 0);
        assert!(out.gaps.is_empty());
    }

    #[test]
    fn buffers_every_hop_with_shared_rows() {
        let config = cfg();
        let calib = CalibrationResult {
            b0_index: 3,
            confidence: 100.0,
        };
        let mut scene = Scene::empty();
        scene.noise_std = 1.0;
        let frames = sim_frames(&scene, 104, 0);
        let out = window_frames(&frames, &calib, &config).unwrap();
        assert_eq!(out.buffers.len(), 3); // 88, 96, 104
        for buffer in &out.buffers {
            // Adjacent frames share exactly N − hop rows.
            for d in 0..buffer.depth() - 1 {
                for row in 0..buffer.n_cirs() - buffer.hop_cirs {
                    for bin in 0..buffer.used_bins() {
                        assert_eq!(
                            buffer.sample(d, row + buffer.hop_cirs, bin),
                            buffer.sample(d + 1, row, bin)
                        );
                    }
                }
            }
        }
        assert_eq!(out.buffers[1].first_frame_index, 1);
        assert_eq!(out.buffers[2].first_frame_index, 2);
    }

    #[test]
    fn seq_gap_restarts_window() {
        let config = cfg();
        let calib = CalibrationResult {
            b0_index: 3,
            confidence: 100.0,
        };
        let mut frames = sim_frames(&Scene::empty(), 240, 0);
        frames.remove(40);
        let out = window_frames(&frames, &calib, &config).unwrap();
        assert_eq!(out.gaps, vec![SeqGap {
            expected: 40,
            got: 41,
        }]);
        // 40 pre-gap frames: no buffer. 199 post-gap frames: buffers at
        // run lengths 88, 96, ..., 192 → 14 buffers.
        assert_eq!(out.buffers.len(), 14);
        // Frame indices never look consecutive across the gap.
        assert_eq!(out.buffers[0].first_frame_index, 3);
    }

    #[test]
    fn gapless_cir_coverage_bounds() {
        let config = cfg();
        let calib = CalibrationResult {
            b0_index: 0,
            confidence: 100.0,
        };
        let frames = sim_frames(&Scene::empty(), 120, 0);
        let out = window_frames(&frames, &calib, &config).unwrap();
        // Count in how many distinct spectral frames each CIR row lands.
        let mut coverage = vec![0usize; frames.len()];
        let mut seen = std::collections::HashSet::new();
        for buffer in &out.buffers {
            for d in 0..buffer.depth() {
                if !seen.insert(buffer.frame_index(d)) {
                    continue;
                }
                let start = buffer.frame_index(d) as usize * buffer.hop_cirs;
                for row in start..start + buffer.n_cirs() {
                    coverage[row] += 1;
                }
            }
        }
        let max_cover = config.n_cirs_in_cpi.div_ceil(config.hop_cirs());
        assert!(coverage.iter().all(|&c| c >= 1 && c <= max_cover));
    }

    #[test]
    fn spectral_mean_of_tone_and_dc() {
        let n = 64;
        let hop = 8;
        let amplitude = 3.0;
        let freq_bin = 5.0;
        // Bin 0 carries a pure DC column, bin 1 a complex exponential.
        let rows: Vec<Vec<Complex64>> = (0..n + 3 * hop)
            .map(|row| {
                vec![
                    Complex64::new(7.0, 0.0),
                    Complex64::from_polar(amplitude, TAU * freq_bin * row as f64 / n as f64),
                ]
            })
            .collect();
        let buffer = FrameBuffer::from_window(&rows, hop, 0).unwrap();
        let features = spectral_features(&buffer);
        assert_eq!(features.len(), 4);
        for feature in &features {
            assert!(feature.mean_mag[0] < 1e-9, "DC column leaks: {}", feature.mean_mag[0]);
        }
        // A tone at an integer bin concentrates in one FFT bin of
        // magnitude A·N; the non-DC mean is A·N/(N−1). The tone's phase
        // offset differs per frame but the magnitude does not.
        let expected = amplitude * n as f64 / (n as f64 - 1.0);
        for feature in &features {
            assert!(
                (feature.mean_mag[1] - expected).abs() < 1e-9,
                "got {}, want {expected}",
                feature.mean_mag[1]
            );
        }
    }

    #[test]
    fn mean_difference_componentwise() {
        let prev = SpectralFeature {
            mean_mag: vec![1.0; 15],
            frame_index: 6,
        };
        let mut curr = prev.clone();
        curr.frame_index = 7;
        assert!(mean_difference(&curr, &prev)
            .unwrap()
            .values()
            .iter()
            .all(|&d| d == 0.0));

        curr.mean_mag[7] += 20.0;
        let delta = mean_difference(&curr, &prev).unwrap();
        assert_eq!(delta.bin(8), 20.0);
        assert_eq!(delta.values().iter().sum::<f64>(), 20.0);

        // Sign of the change is irrelevant.
        let mut below = prev.clone();
        below.frame_index = 7;
        below.mean_mag[7] -= 20.0;
        let delta_below = mean_difference(&below, &prev).unwrap();
        assert_eq!(delta_below.bin(8), 20.0);

        let stale = SpectralFeature {
            mean_mag: vec![1.0; 15],
            frame_index: 9,
        };
        assert_eq!(
            mean_difference(&stale, &prev),
            Err(PipelineError::FrameIndexMismatch { curr: 9, prev: 6 })
        );
    }

    #[test]
    fn windower_rejects_bad_calibration() {
        let calib = CalibrationResult {
            b0_index: 41,
            confidence: 100.0,
        };
        assert!(matches!(
            Windower::new(&calib, &cfg()),
            Err(PipelineError::B0OutOfRange { .. })
        ));
    }

    #[test]
    fn hop_stream_matches_full_recompute() {
        let config = cfg();
        let mut scene = Scene::empty();
        scene.noise_std = 5.0;
        scene.reflectors.push(crate::sim::Reflector {
            range_m: 1.8,
            amplitude: 200.0,
            radial_velocity_mps: -1.1,
            signature: None,
        });
        let frames = sim_frames(&scene, 140, 11);
        let calib = CalibrationResult {
            b0_index: 3,
            confidence: 100.0,
        };
        let windows = window_frames(&frames, &calib, &config).unwrap();
        assert!(windows.buffers.len() > 3);

        let mut stream = HopFeatureStream::new(&config);
        for buffer in &windows.buffers {
            let hop = stream.push(buffer).unwrap();
            let full = spectral_features(buffer);
            let depth = buffer.depth();
            assert_eq!(hop.newest, full[depth - 1]);
            let expected = mean_difference(&full[depth - 1], &full[depth - 2]).unwrap();
            assert_eq!(hop.delta, expected);
        }
    }
}
