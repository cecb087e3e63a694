//! Synthetic IR-UWB front end.
//!
//! Produces channel-impulse-response (CIR) frames from scripted scenes: a
//! constant direct Tx→Rx leakage pulse, one echo per reflector (delayed by
//! the round-trip time, phase-rotated with range so slow-time processing
//! sees motion) and circularly-symmetric complex Gaussian noise.
//!
//! The transmit waveform, carrier frequency and material behaviour of real
//! hardware are not modelled; the stand-ins here (Gaussian pulse, 8 GHz
//! nominal carrier, per-material signatures) are chosen so that downstream
//! stages receive signals with the right structure: tap-resolution echoes,
//! Doppler content under motion, and class-separable spectra.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::RadarConfig;
use crate::label::{Material, Movement, ObstacleLabel, Surface};

mod scenario;
pub use scenario::{Scenario, ScenarioFile, ScenarioParseError, Segment};

/// Amplitude of the direct Tx→Rx leakage pulse (linear units).
///
/// Direct coupling is the strongest return by a wide margin; calibration
/// relies on that to find B0 by argmax, so this must dominate the echo of
/// any plausible scene (the brightest authored echo ridge stays below
/// ~2700). Kept under 3276.7 so taps fit the log's default fixed-point
/// scale.
pub const LEAKAGE_AMPLITUDE: f64 = 3000.0;

/// Nominal carrier wavelength driving slow-time phase rotation (8 GHz).
pub const CARRIER_WAVELENGTH_M: f64 = 0.0375;

/// Echo amplitude multiplier for wet surfaces.
pub const WET_AMPLITUDE_FACTOR: f64 = 1.5;

/// Default range bin of the leakage peak.
pub const DEFAULT_LEAKAGE_TAP: usize = 3;

/// Trailing-tap amplitude multiplier for mobile obstacles.
///
/// A moving body drags extra late-path returns (ground bounce, limb
/// motion) behind its direct echo, strengthening the tail relative to the
/// main return. This keeps the tail *shape* (a material cue) intact while
/// shifting the tail-to-peak ratio (a movement cue).
pub const MOBILE_TAIL_FACTOR: f64 = 1.85;

/// Extra near lane a wet film adds to any obstacle (see
/// [`Signature::for_label`]).
pub const WET_FILM_LANE: TailLane = TailLane {
    offset_bins: 0.7,
    rel_amplitude: 0.44,
};

/// Water films still the slow-time flutter of the surface underneath:
/// modulation depth is scaled by this when the surface is wet. Like the
/// film lane, the damping survives global amplitude scaling, so the
/// surface head keeps a cue even when a dim wet echo and a bright dry one
/// have the same overall magnitude.
pub const WET_MOD_DAMP: f64 = 0.5;

/// Width of the Gaussian transmit pulse (taps).
const PULSE_SIGMA_TAPS: f64 = 0.5;

/// Half-width of the pulse support (taps); samples further out are zero.
const PULSE_SUPPORT_TAPS: f64 = 2.0;

/// One CIR snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CirFrame {
    /// Monotone frame counter (one per ranging-frame interval).
    pub seq: u64,
    /// Milliseconds since session start.
    pub timestamp_ms: u64,
    /// Receiver gain index active when the frame was captured.
    pub rx_gain_index: u8,
    /// Complex taps, `config.total_taps` of them.
    pub taps: Vec<Complex64>,
}

/// One reflecting obstacle in a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    /// Range when the scene becomes active (m).
    pub range_m: f64,
    /// Echo amplitude a_j (linear, dimensionless).
    pub amplitude: f64,
    /// Radial velocity; positive moves away from the radar (m/s).
    pub radial_velocity_mps: f64,
    /// Optional class-dependent micro-structure; bare point targets omit it.
    pub signature: Option<Signature>,
}

/// One trailing multipath lane of a labeled obstacle.
///
/// Offsets are deliberately non-integer: a lane whose excess delay landed
/// exactly on the tap grid would crest in the same frames as the main
/// echo, and during those frames several adjacent bins would sit at their
/// envelope extrema together, starving the inter-frame differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailLane {
    /// Delay behind the main echo (taps).
    pub offset_bins: f64,
    /// Amplitude relative to the main echo.
    pub rel_amplitude: f64,
}

/// Slow-time micro-structure of a labeled obstacle.
///
/// Real materials differ in how their echo decays across taps and flutters
/// over time; these profiles are invented stand-ins tuned so that each
/// class produces a distinct, learnable spectral footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    /// Trailing multipath lanes behind the main echo.
    pub tail: Vec<TailLane>,
    /// Amplitude-modulation depth (fraction of the echo amplitude).
    pub mod_depth: f64,
    /// Amplitude-modulation frequency (Hz).
    pub mod_freq_hz: f64,
    /// Modulation phase at t = 0 (rad).
    pub mod_phase_rad: f64,
    /// Peak self-motion (sway) velocity; 0 for static obstacles (m/s).
    pub sway_mps: f64,
    /// Sway frequency (Hz).
    pub sway_freq_hz: f64,
    /// Excess path-length growth rate of trailing taps. A lane at offset
    /// `o` has electrical length d·(1 + path_drift·o), so its phase drifts
    /// relative to the main echo while the range changes and the per-bin
    /// interference pattern evolves (scintillation).
    pub path_drift: f64,
}

impl Signature {
    /// Baseline signature for a labeled obstacle.
    ///
    /// The tail shape and modulation are per-material; mobility boosts the
    /// material lanes and adds sway; a wet surface appends a fixed film
    /// lane close behind the main echo (on top of the amplitude factor in
    /// [`Reflector::for_label`]), so every head has at least one cue that
    /// survives global amplitude scaling.
    pub fn for_label(label: ObstacleLabel) -> Signature {
        // Tail profiles differ in *direction* (lane-1 : lane-2 ratio) and
        // in lane placement, not just size, so materials stay separable
        // under the global amplitude scaling that surface and movement
        // introduce.
        let (mut tail, mod_depth, mod_freq_hz) = match label.material {
            Material::Glass => (lanes(1.5, 0.08, 2.8, 0.46), 0.12, 3.1),
            Material::Concrete => (lanes(0.95, 0.55, 2.15, 0.20), 0.10, 1.5),
            Material::Wood => (lanes(2.1, 0.40, 3.1, 0.05), 0.14, 5.0),
            Material::Human => (lanes(1.1, 0.26, 3.45, 0.26), 0.22, 2.6),
        };
        let (sway_mps, sway_freq_hz) = match (label.movement, label.material) {
            (Movement::Static, _) => (0.0, 0.0),
            (Movement::Mobile, Material::Human) => (0.40, 1.8),
            (Movement::Mobile, _) => (0.32, 1.1),
        };
        if label.movement == Movement::Mobile {
            for lane in &mut tail {
                lane.rel_amplitude *= MOBILE_TAIL_FACTOR;
            }
        }
        let mut mod_depth = mod_depth;
        if label.surface == Surface::Wet {
            tail.push(WET_FILM_LANE);
            mod_depth *= WET_MOD_DAMP;
        }
        Signature {
            tail,
            mod_depth,
            mod_freq_hz,
            mod_phase_rad: 0.0,
            sway_mps,
            sway_freq_hz,
            path_drift: 0.06,
        }
    }

    /// Slow-time amplitude factor at `t_s`, shifted by `lane_lag` radians.
    ///
    /// The modulation is a three-partial chord on incommensurate multiples
    /// of the base frequency (think gait, limb and fixture harmonics): a
    /// single sinusoid would freeze the envelope around its extrema for a
    /// whole frame hop, flattening the inter-frame differences there. Each
    /// scattering path gets a lagged copy so the lanes flutter out of step.
    fn mod_factor(&self, t_s: f64, lane_lag: f64) -> f64 {
        const PARTIALS: [(f64, f64, f64); 3] =
            [(1.0, 1.0, 0.0), (2.63, 0.55, 0.9), (4.17, 0.35, 2.1)];
        if self.mod_depth <= 0.0 {
            return 1.0;
        }
        let mut factor = 1.0;
        for (k, (f_rel, m_rel, lag)) in PARTIALS.iter().enumerate() {
            let phase = 2.0 * PI * self.mod_freq_hz * f_rel * t_s
                + self.mod_phase_rad * (k + 1) as f64
                + lag
                + lane_lag;
            factor += self.mod_depth * m_rel * phase.sin();
        }
        factor
    }
}

/// Two-lane tail shorthand for [`Signature::for_label`].
fn lanes(o1: f64, a1: f64, o2: f64, a2: f64) -> Vec<TailLane> {
    vec![
        TailLane {
            offset_bins: o1,
            rel_amplitude: a1,
        },
        TailLane {
            offset_bins: o2,
            rel_amplitude: a2,
        },
    ]
}

/// Echo amplitude ratio per material, relative to a nominal target.
pub fn material_amplitude_ratio(material: Material) -> f64 {
    match material {
        Material::Glass => 1.0,
        Material::Concrete => 1.4,
        Material::Wood => 0.8,
        Material::Human => 0.6,
    }
}

impl Reflector {
    /// Builds a labeled reflector: material amplitude ratio and wet factor
    /// applied to `base_amplitude`, signature from the label.
    pub fn for_label(
        label: ObstacleLabel,
        range_m: f64,
        base_amplitude: f64,
        radial_velocity_mps: f64,
    ) -> Reflector {
        let mut amplitude = base_amplitude * material_amplitude_ratio(label.material);
        if label.surface == Surface::Wet {
            amplitude *= WET_AMPLITUDE_FACTOR;
        }
        Reflector {
            range_m,
            amplitude,
            radial_velocity_mps,
            signature: Some(Signature::for_label(label)),
        }
    }

    /// Range at time `t_s` (s): linear motion plus sway displacement.
    fn range_at(&self, t_s: f64) -> f64 {
        let mut d = self.range_m + self.radial_velocity_mps * t_s;
        if let Some(sig) = &self.signature {
            if sig.sway_mps > 0.0 && sig.sway_freq_hz > 0.0 {
                let w = 2.0 * PI * sig.sway_freq_hz;
                d += sig.sway_mps / w * (w * t_s).sin();
            }
        }
        d
    }

    /// Instantaneous echo amplitude of the main path.
    fn amplitude_at(&self, t_s: f64) -> f64 {
        match &self.signature {
            Some(sig) => self.amplitude * sig.mod_factor(t_s, 0.0),
            None => self.amplitude,
        }
    }
}

/// Everything the radar can see at one point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub reflectors: Vec<Reflector>,
    /// Std deviation of the additive complex Gaussian noise per component.
    pub noise_std: f64,
    /// Bin index of the direct Tx→Rx leakage peak.
    pub leakage_tap: usize,
    pub rx_gain_index: u8,
}

impl Scene {
    /// Scene with no reflectors and no noise.
    pub fn empty() -> Scene {
        Scene {
            reflectors: Vec::new(),
            noise_std: 0.0,
            leakage_tap: DEFAULT_LEAKAGE_TAP,
            rx_gain_index: 0,
        }
    }

    /// Checks static scene invariants against the tap window.
    pub fn validate(&self, config: &RadarConfig) -> Result<(), SimError> {
        if !(self.noise_std >= 0.0) {
            return Err(SimError::NegativeNoise(self.noise_std));
        }
        if self.leakage_tap >= config.total_taps {
            return Err(SimError::LeakageTapOutOfRange {
                tap: self.leakage_tap,
                total: config.total_taps,
            });
        }
        let max_m = config.total_taps as f64 * config.cm_per_tap() / 100.0;
        for r in &self.reflectors {
            if !(r.amplitude >= 0.0) {
                return Err(SimError::NegativeAmplitude(r.amplitude));
            }
            if !(0.0..=max_m).contains(&r.range_m) {
                return Err(SimError::RangeOutOfWindow {
                    range_m: r.range_m,
                    max_m,
                });
            }
        }
        Ok(())
    }
}

/// Simulation failures.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("noise_std must be non-negative, got {0}")]
    NegativeNoise(f64),
    #[error("leakage tap {tap} outside the {total}-tap window")]
    LeakageTapOutOfRange { tap: usize, total: usize },
    #[error("reflector range {range_m} m outside the 0..{max_m} m tap window")]
    RangeOutOfWindow { range_m: f64, max_m: f64 },
    #[error("reflector amplitude must be non-negative, got {0}")]
    NegativeAmplitude(f64),
    #[error("reflector left the tap window at t={t_ms} ms (range {range_m:.3} m)")]
    ReflectorEscaped { t_ms: f64, range_m: f64 },
    #[error("scenario has no segments")]
    EmptyScenario,
    #[error("scenario segment {index} starts at {start_ms} ms; segments must start at 0 and strictly increase")]
    UnorderedSegments { index: usize, start_ms: u64 },
}

/// Unit-peak transmit pulse sampled at tap resolution.
///
/// Gaussian with σ = 0.5 taps, truncated at ±2 taps.
pub fn pulse_shape(offset_taps: f64) -> f64 {
    if offset_taps.abs() > PULSE_SUPPORT_TAPS {
        return 0.0;
    }
    (-offset_taps * offset_taps / (2.0 * PULSE_SIGMA_TAPS * PULSE_SIGMA_TAPS)).exp()
}

/// Adds `weight · pulse(k − center)` to every tap the pulse support covers.
fn add_pulse(taps: &mut [Complex64], center: f64, weight: Complex64) {
    if center + PULSE_SUPPORT_TAPS < 0.0 || center - PULSE_SUPPORT_TAPS > (taps.len() - 1) as f64 {
        return;
    }
    let lo = (center - PULSE_SUPPORT_TAPS).ceil().max(0.0) as usize;
    let hi = ((center + PULSE_SUPPORT_TAPS).floor() as usize).min(taps.len() - 1);
    for k in lo..=hi {
        taps[k] += weight * pulse_shape(k as f64 - center);
    }
}

/// Generates the CIR the radar would capture at `t_ms`.
///
/// Each tap is the superposition of the leakage pulse, one delayed and
/// phase-rotated copy of the pulse per reflector path, and noise drawn
/// from `rng` (skipped when `noise_std == 0`). The frame's `seq` is
/// `t_ms / rfri_ms`, so frames produced on the ranging grid get
/// consecutive sequence numbers.
pub fn generate_cir(
    scene: &Scene,
    config: &RadarConfig,
    t_ms: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CirFrame, SimError> {
    scene.validate(config)?;
    generate_cir_unchecked(scene, config, t_ms, rng)
}

/// [`generate_cir`] without the static scene validation.
///
/// [`simulate_session`] needs this: it validates *authored* segments once,
/// then rebases each segment's ranges to session start, and a rebased
/// `range_m` may legitimately sit outside the tap window as long as the
/// evaluated range during the segment's active interval stays inside (the
/// per-frame escape check below still enforces that).
fn generate_cir_unchecked(
    scene: &Scene,
    config: &RadarConfig,
    t_ms: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CirFrame, SimError> {
    let mut taps = vec![Complex64::ZERO; config.total_taps];
    add_pulse(
        &mut taps,
        scene.leakage_tap as f64,
        Complex64::new(LEAKAGE_AMPLITUDE, 0.0),
    );

    let t_s = t_ms / 1000.0;
    let m_per_tap = config.cm_per_tap() / 100.0;
    for r in &scene.reflectors {
        let d = r.range_at(t_s);
        let center = scene.leakage_tap as f64 + d / m_per_tap;
        if d < 0.0 || center > (config.total_taps - 1) as f64 {
            return Err(SimError::ReflectorEscaped { t_ms, range_m: d });
        }
        let amp = r.amplitude_at(t_s);
        let phase = Complex64::from_polar(1.0, -4.0 * PI * d / CARRIER_WAVELENGTH_M);
        add_pulse(&mut taps, center, phase.scale(amp));
        if let Some(sig) = &r.signature {
            for (i, lane) in sig.tail.iter().enumerate() {
                // Trailing taps sit at fixed bin offsets but their path
                // length grows faster than the direct one, so their phase
                // drifts relative to the main echo as the range changes.
                let d_i = d * (1.0 + sig.path_drift * lane.offset_bins);
                let phase_i = Complex64::from_polar(1.0, -4.0 * PI * d_i / CARRIER_WAVELENGTH_M);
                let lane_amp =
                    r.amplitude * sig.mod_factor(t_s, (i + 1) as f64 * 2.4) * lane.rel_amplitude;
                add_pulse(&mut taps, center + lane.offset_bins, phase_i.scale(lane_amp));
            }
        }
    }

    if scene.noise_std > 0.0 {
        let normal = Normal::new(0.0, scene.noise_std).expect("noise_std checked non-negative");
        for tap in &mut taps {
            *tap += Complex64::new(normal.sample(rng), normal.sample(rng));
        }
    }

    let seq = (t_ms / config.rfri_ms).round() as u64;
    Ok(CirFrame {
        seq,
        timestamp_ms: t_ms.round() as u64,
        rx_gain_index: scene.rx_gain_index,
        taps,
    })
}

/// Runs a scene timeline and collects every frame up to `duration_ms`.
///
/// Frames are emitted every `rfri_ms`; reflector motion restarts from the
/// authored range whenever a new segment becomes active. The same seed
/// always yields a bit-identical stream.
pub fn simulate_session(
    scenario: &Scenario,
    config: &RadarConfig,
    duration_ms: u64,
    seed: u64,
) -> Result<Vec<CirFrame>, SimError> {
    scenario.validate(config)?;
    // Rebase each segment so `range_m` means "range when the segment
    // starts" while generate_cir keeps seeing global session time.
    let rebased: Vec<Scene> = scenario
        .segments
        .iter()
        .map(|seg| {
            let start_s = seg.start_ms as f64 / 1000.0;
            let mut scene = seg.scene.clone();
            for r in &mut scene.reflectors {
                r.range_m -= r.radial_velocity_mps * start_s;
            }
            scene
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::new();
    let mut i = 0u64;
    loop {
        let t_ms = i as f64 * config.rfri_ms;
        if t_ms >= duration_ms as f64 {
            break;
        }
        let seg = scenario.segment_index_at(t_ms);
        frames.push(generate_cir_unchecked(&rebased[seg], config, t_ms, &mut rng)?);
        i += 1;
    }
    Ok(frames)
}
