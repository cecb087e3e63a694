//! Per-stage latency measurement over recorded frames.
//!
//! [`run_bench`] replays a frame stream through the live inference path —
//! spectral pre-processing, detection, classification — and times each
//! stage per inference. File I/O, simulation and calibration happen before
//! the clock starts, so the numbers are compute-only.

use std::time::Instant;

use thiserror::Error;

use crate::classifier::{classify, ClassifierError, FeatureVector, MlpModel};
use crate::config::RadarConfig;
use crate::detector::{detect, DetectorParams};
use crate::pipeline::{calibrate, FrameBuffer, HopFeatureStream, PipelineError, Windower};
use crate::sim::CirFrame;

/// Stage labels, in pipeline order.
pub const STAGE_NAMES: [&str; 3] = ["Pre-processing", "Detection", "Classification"];

/// Latency percentiles for one stage (milliseconds).
#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub name: &'static str,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl StageStats {
    /// Nearest-rank percentiles over raw per-iteration durations.
    fn from_samples(name: &'static str, samples: &mut [f64]) -> StageStats {
        samples.sort_by(f64::total_cmp);
        StageStats {
            name,
            p50_ms: percentile(samples, 0.50),
            p95_ms: percentile(samples, 0.95),
            max_ms: *samples.last().unwrap(),
        }
    }
}

/// Nearest-rank percentile of pre-sorted samples.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Result of a bench run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub iterations: usize,
    /// Pre-processing / Detection / Classification, in order.
    pub stages: [StageStats; 3],
    /// Whole-inference time (sum of the three stages per iteration).
    pub total: StageStats,
}

impl BenchReport {
    /// Fixed-width table with one row per stage plus the total.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<16} {:>10} {:>10} {:>10}\n",
            "stage", "p50 (ms)", "p95 (ms)", "max (ms)"
        );
        for stage in self.stages.iter().chain([&self.total]) {
            out.push_str(&format!(
                "{:<16} {:>10.4} {:>10.4} {:>10.4}\n",
                stage.name, stage.p50_ms, stage.p95_ms, stage.max_ms
            ));
        }
        out
    }
}

/// Bench setup failures.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("frame stream produced no full windows; need at least {need} consecutive frames")]
    NoBuffers { need: usize },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Times `iters` inferences over the windows of `frames`, cycling when the
/// recording is shorter than the iteration count.
pub fn run_bench(
    frames: &[CirFrame],
    model: &MlpModel,
    config: &RadarConfig,
    iters: usize,
) -> Result<BenchReport, BenchError> {
    if iters == 0 {
        return Err(BenchError::ZeroIterations);
    }

    // Assemble every emitted window up front; only inference is timed.
    let calib = calibrate(frames, config)?;
    let mut windower = Windower::new(&calib, config)?;
    let mut buffers: Vec<FrameBuffer> = Vec::new();
    for frame in frames {
        if let Some(buffer) = windower.push(frame)?.buffer {
            buffers.push(buffer);
        }
    }
    if buffers.is_empty() {
        return Err(BenchError::NoBuffers {
            need: config.n_cirs_in_cpi + (crate::pipeline::BUFFER_DEPTH - 1) * config.hop_cirs(),
        });
    }

    let params = DetectorParams::new(config);
    let mut stream = HopFeatureStream::new(config);
    let mut pre = Vec::with_capacity(iters);
    let mut det = Vec::with_capacity(iters);
    let mut cls = Vec::with_capacity(iters);
    for k in 0..iters {
        let buffer = &buffers[k % buffers.len()];

        let t = Instant::now();
        let hop = stream.push(buffer)?;
        pre.push(t.elapsed().as_secs_f64() * 1e3);

        let t = Instant::now();
        let verdict = detect(&hop.delta, &params);
        det.push(t.elapsed().as_secs_f64() * 1e3);

        let t = Instant::now();
        let features = FeatureVector::new(hop.newest.mean_mag.clone());
        classify(&features, model)?;
        cls.push(t.elapsed().as_secs_f64() * 1e3);

        // Keep the verdict alive so the detect call cannot be elided.
        std::hint::black_box(verdict);
    }

    let mut totals: Vec<f64> = (0..iters).map(|i| pre[i] + det[i] + cls[i]).collect();
    Ok(BenchReport {
        iterations: iters,
        stages: [
            StageStats::from_samples(STAGE_NAMES[0], &mut pre),
            StageStats::from_samples(STAGE_NAMES[1], &mut det),
            StageStats::from_samples(STAGE_NAMES[2], &mut cls),
        ],
        total: StageStats::from_samples("Total", &mut totals),
    })
}
