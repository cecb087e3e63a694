//! Radar front-end configuration.
//!
//! One [`RadarConfig`] value travels through the whole stack; the defaults
//! describe the low-power desk-scale operating point (200 Hz PRF, a CIR
//! every 5 ms, 64-CIR coherent processing intervals, 56 one-nanosecond
//! range taps of which the first 15 past the leakage bin are used).

use thiserror::Error;

/// Propagation speed used for tap-to-distance conversion (m/s).
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 3.0e8;

/// Front-end timing and geometry parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarConfig {
    /// Pulse repetition frequency (Hz).
    pub prf_hz: f64,
    /// Ranging-frame repetition interval: one CIR every `rfri_ms` (ms).
    pub rfri_ms: f64,
    /// Ranging interval: spacing between spectral frames (ms).
    pub ranging_interval_ms: f64,
    /// Tap spacing of the sampled CIR (ns).
    pub tap_interval_ns: f64,
    /// Coherent processing interval covered by one spectral frame (ms).
    pub cpi_ms: f64,
    /// Number of CIRs inside one CPI (slow-time FFT length).
    pub n_cirs_in_cpi: usize,
    /// Total taps delivered per CIR.
    pub total_taps: usize,
    /// Range taps kept after calibration (bins B1..B15).
    pub used_taps: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            prf_hz: 200.0,
            rfri_ms: 5.0,
            ranging_interval_ms: 40.0,
            tap_interval_ns: 1.0,
            cpi_ms: 320.0,
            n_cirs_in_cpi: 64,
            total_taps: 56,
            used_taps: 15,
        }
    }
}

/// Configuration consistency failures.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("CPI mismatch: {n} CIRs x {rfri_ms} ms != {cpi_ms} ms")]
    CpiMismatch { n: usize, rfri_ms: f64, cpi_ms: f64 },
    #[error("ranging interval {ranging_interval_ms} ms is not a whole number of {rfri_ms} ms CIR intervals")]
    RaggedHop {
        ranging_interval_ms: f64,
        rfri_ms: f64,
    },
    #[error("used taps ({used}) must leave room for a leakage bin within {total} total taps")]
    TapBudget { used: usize, total: usize },
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
}

impl RadarConfig {
    /// Checks the invariants the rest of the stack relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("prf_hz", self.prf_hz),
            ("rfri_ms", self.rfri_ms),
            ("ranging_interval_ms", self.ranging_interval_ms),
            ("tap_interval_ns", self.tap_interval_ns),
            ("cpi_ms", self.cpi_ms),
        ] {
            if !(value > 0.0) {
                return Err(ConfigError::NonPositive { field });
            }
        }
        if self.n_cirs_in_cpi == 0 {
            return Err(ConfigError::NonPositive {
                field: "n_cirs_in_cpi",
            });
        }
        if self.total_taps == 0 || self.used_taps == 0 {
            return Err(ConfigError::NonPositive {
                field: "total_taps/used_taps",
            });
        }
        if self.n_cirs_in_cpi as f64 * self.rfri_ms != self.cpi_ms {
            return Err(ConfigError::CpiMismatch {
                n: self.n_cirs_in_cpi,
                rfri_ms: self.rfri_ms,
                cpi_ms: self.cpi_ms,
            });
        }
        if (self.ranging_interval_ms / self.rfri_ms).fract() != 0.0 {
            return Err(ConfigError::RaggedHop {
                ranging_interval_ms: self.ranging_interval_ms,
                rfri_ms: self.rfri_ms,
            });
        }
        // The leakage bin B0 sits in front of the used bins, so at least
        // used + 1 taps must exist.
        if self.used_taps + 1 > self.total_taps {
            return Err(ConfigError::TapBudget {
                used: self.used_taps,
                total: self.total_taps,
            });
        }
        Ok(())
    }

    /// CIRs between consecutive spectral frames (the window hop).
    pub fn hop_cirs(&self) -> usize {
        (self.ranging_interval_ms / self.rfri_ms) as usize
    }

    /// One-way distance per tap in centimetres.
    ///
    /// `c * 1e-7` folds the ns->s and m->cm unit changes into one factor of
    /// 30 cm/ns (exact in f64), so the default grid lands on exact
    /// multiples of 15 cm.
    pub fn cm_per_tap(&self) -> f64 {
        self.tap_interval_ns * (SPEED_OF_LIGHT_M_PER_S * 1.0e-7) / 2.0
    }

    /// Timestamp of the `seq`-th CIR in milliseconds.
    pub fn timestamp_ms(&self, seq: u64) -> u64 {
        (seq as f64 * self.rfri_ms).round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RadarConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hop_cirs(), 8);
        assert_eq!(cfg.cm_per_tap(), 15.0);
    }

    #[test]
    fn cpi_mismatch_rejected() {
        let cfg = RadarConfig {
            cpi_ms: 300.0,
            ..RadarConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::CpiMismatch { .. })
        ));
    }

    #[test]
    fn ragged_hop_rejected() {
        let cfg = RadarConfig {
            ranging_interval_ms: 42.0,
            ..RadarConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(ConfigError::RaggedHop { .. })));
    }

    #[test]
    fn tap_budget_enforced() {
        let cfg = RadarConfig {
            total_taps: 15,
            ..RadarConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(ConfigError::TapBudget { .. })));
    }

    #[test]
    fn timestamps_follow_rfri() {
        let cfg = RadarConfig::default();
        assert_eq!(cfg.timestamp_ms(0), 0);
        assert_eq!(cfg.timestamp_ms(7), 35);
    }
}
