//! Rule-based obstacle detection on inter-frame delta vectors.
//!
//! An obstacle is declared present when three consecutive far-bin deltas
//! (B4..B15) all exceed the threshold γ, gated by a near-bin false-positive
//! count: σ counts how many of B1..B3 exceed γ, and σ = 3 vetoes the
//! detection (user-body motion floods the near bins, a genuine obstacle
//! does not). All comparisons are strict, and σ is evaluated fresh per
//! delta vector.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::config::RadarConfig;
use crate::pipeline::DeltaVector;

/// Default detection threshold for the default Rx gain.
pub const DEFAULT_GAMMA: f64 = 20.0;

/// How a triple of consecutive far-bin deltas is compared against γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TripleRule {
    /// Every one of the three deltas exceeds γ (the adopted reading).
    #[default]
    AllExceed,
    /// The mean of the three deltas exceeds γ (alternative reading, kept
    /// for experimentation; not used by the shipped pipeline).
    MeanExceeds,
}

/// Per-gain detection thresholds. Only the default gain's γ is known;
/// other gain indices fall back to the default unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTable {
    pub default_gamma: f64,
    pub overrides: BTreeMap<u8, f64>,
}

impl Default for GammaTable {
    fn default() -> Self {
        GammaTable {
            default_gamma: DEFAULT_GAMMA,
            overrides: BTreeMap::new(),
        }
    }
}

impl GammaTable {
    pub fn gamma_for(&self, rx_gain_index: u8) -> f64 {
        self.overrides
            .get(&rx_gain_index)
            .copied()
            .unwrap_or(self.default_gamma)
    }
}

/// Detector configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Detection threshold γ.
    pub gamma: f64,
    /// Near bins feeding the false-positive count (B-numbers).
    pub near_bins: RangeInclusive<usize>,
    /// Far bins scanned for the obstacle triple (B-numbers).
    pub far_bins: RangeInclusive<usize>,
    /// Highest σ that still allows a detection.
    pub sigma_max: u8,
    pub triple_rule: TripleRule,
    /// Distance per bin, for the range estimate (cm).
    pub cm_per_bin: f64,
}

/// Detector parameter violations.
#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("near bins {near:?} and far bins {far:?} must be disjoint and ordered")]
    OverlappingBins {
        near: RangeInclusive<usize>,
        far: RangeInclusive<usize>,
    },
}

impl DetectorParams {
    /// Default-gain parameters: γ = 20, near B1..B3, far B4 up to the last
    /// used bin, σ ≤ 2.
    pub fn new(config: &RadarConfig) -> DetectorParams {
        DetectorParams::for_gain(config, 0, &GammaTable::default())
    }

    /// Parameters for a specific Rx gain index.
    pub fn for_gain(config: &RadarConfig, rx_gain_index: u8, table: &GammaTable) -> DetectorParams {
        DetectorParams {
            gamma: table.gamma_for(rx_gain_index),
            near_bins: 1..=3,
            far_bins: 4..=config.used_taps,
            sigma_max: 2,
            triple_rule: TripleRule::default(),
            cm_per_bin: config.cm_per_tap(),
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.gamma > 0.0) {
            return Err(DetectorError::NonPositiveGamma(self.gamma));
        }
        if self.near_bins.end() >= self.far_bins.start() || *self.near_bins.start() < 1 {
            return Err(DetectorError::OverlappingBins {
                near: self.near_bins.clone(),
                far: self.far_bins.clone(),
            });
        }
        Ok(())
    }
}

/// Outcome of one detection decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionVerdict {
    pub detected: bool,
    /// Lowest far bin whose triple fired (B-number), when detected.
    pub trigger_bin: Option<usize>,
    /// Near-bin false-positive count, 0..=3.
    pub sigma: u8,
    /// Coarse range of the triggering bin (cm), when detected.
    pub range_estimate_cm: Option<f64>,
}

/// σ: how many near-bin deltas strictly exceed γ.
pub fn false_positive_count(delta: &DeltaVector, params: &DetectorParams) -> u8 {
    let mut sigma = 0;
    for b in params.near_bins.clone() {
        if b >= 1 && b <= delta.len() && delta.bin(b) > params.gamma {
            sigma += 1;
        }
    }
    sigma
}

/// Applies the detection rule to one delta vector.
///
/// Detected iff σ ≤ σ_max and some far bin i has all of delta[i],
/// delta[i+1], delta[i+2] above γ; the smallest such i becomes the
/// trigger bin and range estimate.
pub fn detect(delta: &DeltaVector, params: &DetectorParams) -> DetectionVerdict {
    let sigma = false_positive_count(delta, params);
    let mut trigger_bin = None;
    if sigma <= params.sigma_max {
        let last_start = params.far_bins.end().saturating_sub(2);
        for i in *params.far_bins.start()..=last_start {
            if i + 2 > delta.len() {
                break;
            }
            let fires = match params.triple_rule {
                TripleRule::AllExceed => (0..3).all(|k| delta.bin(i + k) > params.gamma),
                TripleRule::MeanExceeds => {
                    (delta.bin(i) + delta.bin(i + 1) + delta.bin(i + 2)) / 3.0 > params.gamma
                }
            };
            if fires {
                trigger_bin = Some(i);
                break;
            }
        }
    }
    DetectionVerdict {
        detected: trigger_bin.is_some(),
        trigger_bin,
        sigma,
        range_estimate_cm: trigger_bin.map(|b| b as f64 * params.cm_per_bin),
    }
}
