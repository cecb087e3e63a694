//! Desk-scale IR-UWB obstacle sensing stack.
//!
//! The crate models the full path from a simulated impulse-radio UWB front
//! end to user-facing alerts:
//!
//! * [`sim`] — deterministic channel-impulse-response (CIR) synthesis for
//!   scripted scenes (leakage, reflectors, noise).
//! * [`pipeline`] — leakage calibration, range-bin bookkeeping, sliding
//!   3-D windowing, slow-time spectra and inter-frame differences.
//! * [`detector`] — the fixed-threshold rule that turns a difference vector
//!   into a detection verdict with a coarse range estimate.
//! * [`classifier`] — a small multi-head MLP (material / surface / movement)
//!   trained with Adam, plus model (de)serialisation.
//! * [`session`] — the walking-session state machine and its power ledger.
//! * [`datastore`] — the CIR log and annotation formats, labeled-dataset
//!   assembly and synthetic corpus generation.
//! * [`bench`] — per-stage latency measurement over recorded frames.
//!
//! All randomness flows through explicitly seeded [`rand_chacha::ChaCha8Rng`]
//! state, so every artifact (logs, datasets, trained models) is reproducible
//! from a seed.

pub mod bench;
pub mod classifier;
pub mod config;
pub mod datastore;
pub mod detector;
pub mod label;
pub mod pipeline;
pub mod session;
pub mod sim;

pub use config::RadarConfig;
pub use label::{Material, Movement, ObstacleLabel, Surface};
