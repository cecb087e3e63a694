//! Scene timelines and their on-disk text format.
//!
//! A scenario file is line-oriented: `key = value` pairs configure the
//! current scene, `reflector` lines add obstacles to it, and `[segment]`
//! headers open a new scene that takes over at its `start_ms`. Keys set
//! before the first `[segment]` act as defaults for every later segment;
//! `#` starts a comment.
//!
//! ```text
//! # walk towards a concrete wall, then a pedestrian appears
//! noise_std = 2.0
//! duration_ms = 4000
//! reflector range_m=1.8 amplitude=150 velocity_mps=-1.1 label=concrete,dry,static
//!
//! [segment]
//! start_ms = 2000
//! reflector range_m=2.0 amplitude=120 velocity_mps=-1.4 label=human,dry,mobile
//! ```
//!
//! Reflector keys: `range_m` and `amplitude` (required), `velocity_mps`
//! (default 0), `label` (`material,surface,movement` — applies the class
//! signature and amplitude ratios), `mod_phase` (radians, labeled only).

use thiserror::Error;

use super::{Reflector, Scene, SimError};
use crate::config::RadarConfig;
use crate::label::ObstacleLabel;

/// One scene plus the time it becomes active.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start_ms: u64,
    pub scene: Scene,
}

/// A timeline of scenes; the active one is the latest whose start has passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub segments: Vec<Segment>,
}

impl Scenario {
    /// Scenario with a single scene active from t = 0.
    pub fn single(scene: Scene) -> Scenario {
        Scenario {
            segments: vec![Segment { start_ms: 0, scene }],
        }
    }

    /// Index of the segment active at `t_ms`.
    pub fn segment_index_at(&self, t_ms: f64) -> usize {
        let mut active = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start_ms as f64 <= t_ms {
                active = i;
            }
        }
        active
    }

    /// Checks ordering and every scene against the radar window.
    pub fn validate(&self, config: &RadarConfig) -> Result<(), SimError> {
        if self.segments.is_empty() {
            return Err(SimError::EmptyScenario);
        }
        let mut prev: Option<u64> = None;
        for (index, seg) in self.segments.iter().enumerate() {
            let ordered = match prev {
                None => seg.start_ms == 0,
                Some(p) => seg.start_ms > p,
            };
            if !ordered {
                return Err(SimError::UnorderedSegments {
                    index,
                    start_ms: seg.start_ms,
                });
            }
            prev = Some(seg.start_ms);
            seg.scene.validate(config)?;
        }
        Ok(())
    }
}

/// A parsed scenario file: the timeline plus optional run length.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub duration_ms: Option<u64>,
}

/// Scenario text-format violations.
#[derive(Debug, Error, PartialEq)]
pub enum ScenarioParseError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: reflector requires range_m and amplitude")]
    IncompleteReflector { line: usize },
    #[error("segment opened at line {line} never sets start_ms")]
    MissingStart { line: usize },
    #[error("scenario file has no segments")]
    Empty,
}

struct SectionState {
    header_line: usize,
    start_ms: Option<u64>,
    scene: Scene,
    explicit: bool,
}

impl ScenarioFile {
    /// Parses the text format described in the module docs.
    pub fn parse(text: &str) -> Result<ScenarioFile, ScenarioParseError> {
        let mut duration_ms = None;
        // sections[0] is the implicit leading section at t = 0.
        let mut sections = vec![SectionState {
            header_line: 0,
            start_ms: Some(0),
            scene: Scene::empty(),
            explicit: false,
        }];

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }

            if line == "[segment]" {
                // New scenes inherit noise/gain settings, not reflectors.
                let inherited = Scene {
                    reflectors: Vec::new(),
                    ..sections.last().unwrap().scene.clone()
                };
                sections.push(SectionState {
                    header_line: line_no,
                    start_ms: None,
                    scene: inherited,
                    explicit: true,
                });
                continue;
            }
            let section = sections.last_mut().unwrap();

            if let Some(rest) = line.strip_prefix("reflector") {
                if !rest.starts_with(char::is_whitespace) {
                    return Err(ScenarioParseError::Malformed {
                        line: line_no,
                        text: line.to_string(),
                    });
                }
                section
                    .scene
                    .reflectors
                    .push(parse_reflector(rest, line_no)?);
                continue;
            }

            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => {
                    return Err(ScenarioParseError::Malformed {
                        line: line_no,
                        text: line.to_string(),
                    })
                }
            };
            match key {
                "noise_std" => section.scene.noise_std = parse_num(key, value, line_no)?,
                "leakage_tap" => {
                    section.scene.leakage_tap = parse_int(key, value, line_no)? as usize
                }
                "rx_gain_index" => {
                    section.scene.rx_gain_index = parse_int(key, value, line_no)? as u8
                }
                "duration_ms" => duration_ms = Some(parse_int(key, value, line_no)?),
                "start_ms" if section.explicit => {
                    section.start_ms = Some(parse_int(key, value, line_no)?)
                }
                _ => {
                    return Err(ScenarioParseError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            }
        }

        // A defaults-only implicit section is dropped once explicit
        // segments exist; on its own it still describes a valid (empty)
        // scene timeline.
        if sections.len() > 1 && sections[0].scene.reflectors.is_empty() {
            sections.remove(0);
        }
        let mut segments = Vec::with_capacity(sections.len());
        for section in sections {
            let start_ms = section.start_ms.ok_or(ScenarioParseError::MissingStart {
                line: section.header_line,
            })?;
            segments.push(Segment {
                start_ms,
                scene: section.scene,
            });
        }
        segments.sort_by_key(|s| s.start_ms);
        if segments.is_empty() {
            return Err(ScenarioParseError::Empty);
        }
        Ok(ScenarioFile {
            scenario: Scenario { segments },
            duration_ms,
        })
    }
}

fn parse_reflector(rest: &str, line: usize) -> Result<Reflector, ScenarioParseError> {
    let mut range_m = None;
    let mut amplitude = None;
    let mut velocity = 0.0;
    let mut label: Option<ObstacleLabel> = None;
    let mut mod_phase: Option<f64> = None;

    for token in rest.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| ScenarioParseError::Malformed {
                line,
                text: token.to_string(),
            })?;
        match key {
            "range_m" => range_m = Some(parse_num(key, value, line)?),
            "amplitude" => amplitude = Some(parse_num(key, value, line)?),
            "velocity_mps" => velocity = parse_num(key, value, line)?,
            "label" => {
                label = Some(
                    value
                        .parse()
                        .map_err(|_| ScenarioParseError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                        })?,
                )
            }
            "mod_phase" => mod_phase = Some(parse_num(key, value, line)?),
            _ => {
                return Err(ScenarioParseError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    let (range_m, amplitude) = match (range_m, amplitude) {
        (Some(r), Some(a)) => (r, a),
        _ => return Err(ScenarioParseError::IncompleteReflector { line }),
    };
    let mut reflector = match label {
        Some(label) => Reflector::for_label(label, range_m, amplitude, velocity),
        None => {
            if mod_phase.is_some() {
                return Err(ScenarioParseError::BadValue {
                    line,
                    key: "mod_phase".to_string(),
                    value: "only valid on labeled reflectors".to_string(),
                });
            }
            Reflector {
                range_m,
                amplitude,
                radial_velocity_mps: velocity,
                signature: None,
            }
        }
    };
    if let (Some(phase), Some(sig)) = (mod_phase, reflector.signature.as_mut()) {
        sig.mod_phase_rad = phase;
    }
    Ok(reflector)
}

fn parse_num(key: &str, value: &str, line: usize) -> Result<f64, ScenarioParseError> {
    value.parse().map_err(|_| ScenarioParseError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_int(key: &str, value: &str, line: usize) -> Result<u64, ScenarioParseError> {
    value.parse().map_err(|_| ScenarioParseError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}
