//! Session lifecycle: activation from user activity, radar duty cycling
//! with the 10 s / 2 s cut-off rule, alert generation and a power ledger.
//!
//! One [`SessionState`] is a pure state machine: feed it time-ordered
//! [`SessionInput`]s and it returns the actions a host app would execute
//! (start/stop the radar, surface an alert). Replaying the same inputs
//! always walks the same trajectory.
//!
//! The stop rule reads: once the radar has been continuously active for
//! 10 s *and* no detection fell inside the trailing 2 s window, stop; a
//! detection inside the window keeps the session alive past the 10 s mark.
//! After a rule stop the radar re-arms on the next user event that leaves
//! the session in an active mode.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::detector::DetectionVerdict;
use crate::label::{Movement, ObstacleLabel};

/// Continuous active time after which the stop rule may fire (ms).
pub const SESSION_CAP_MS: u64 = 10_000;

/// Trailing window a detection must fall into to keep the radar on (ms).
pub const CUTOFF_MS: u64 = 2_000;

/// Detection range at or under which any obstacle is a danger (cm); one
/// tap short of the first far bin's outer edge.
pub const DANGER_RANGE_CM: f64 = 60.0;

/// Default radar current while actively ranging (mA).
pub const ACTIVE_CURRENT_MA: f64 = 39.8;

/// What the user is doing, as reported by the host platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    WalkingStarted,
    WalkingStopped,
    ScreenOn,
    ScreenOff,
    AssistRequested,
    AssistCancelled,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::WalkingStarted,
        EventKind::WalkingStopped,
        EventKind::ScreenOn,
        EventKind::ScreenOff,
        EventKind::AssistRequested,
        EventKind::AssistCancelled,
    ];

    fn name(self) -> &'static str {
        match self {
            EventKind::WalkingStarted => "walking_started",
            EventKind::WalkingStopped => "walking_stopped",
            EventKind::ScreenOn => "screen_on",
            EventKind::ScreenOff => "screen_off",
            EventKind::AssistRequested => "assist_requested",
            EventKind::AssistCancelled => "assist_cancelled",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = EventLogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EventLogError::UnknownKind {
                kind: s.to_string(),
            })
    }
}

/// One user-activity event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserEvent {
    pub timestamp_ms: u64,
    pub kind: EventKind,
}

/// Everything the session can react to.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionInput {
    Event(UserEvent),
    /// A detector verdict with the classifier's label for it.
    Detection {
        timestamp_ms: u64,
        verdict: DetectionVerdict,
        label: ObstacleLabel,
    },
    /// Clock tick; drives the stop rule when nothing else is happening.
    Tick { timestamp_ms: u64 },
}

impl SessionInput {
    pub fn timestamp_ms(&self) -> u64 {
        match self {
            SessionInput::Event(e) => e.timestamp_ms,
            SessionInput::Detection { timestamp_ms, .. } => *timestamp_ms,
            SessionInput::Tick { timestamp_ms } => *timestamp_ms,
        }
    }
}

/// Activation state of the assistant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Idle,
    /// Walking with the screen on.
    DistractedWalking,
    /// Explicitly requested assistance; ends only on cancel.
    AssistedWalking,
}

/// How urgent an alert is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Caution,
    Danger,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Caution => "caution",
            Severity::Danger => "danger",
        })
    }
}

/// A notification surfaced to the user.
#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub timestamp_ms: u64,
    pub severity: Severity,
    pub verdict: DetectionVerdict,
    pub label: ObstacleLabel,
    /// Estimated obstacle range; alerts are only emitted for detections,
    /// which always carry one.
    pub range_cm: f64,
}

impl Alert {
    /// One line per alert: `timestamp_ms,severity,material,surface,movement,range_cm`.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.1}",
            self.timestamp_ms,
            self.severity,
            self.label.material,
            self.label.surface,
            self.label.movement,
            self.range_cm
        )
    }
}

/// What the host application should do after a step.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    StartRadar,
    StopRadar,
    Emit(Alert),
}

/// Session stepping failures.
#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("input at {got} ms arrived after {last} ms; inputs must be time-ordered")]
    OutOfOrder { last: u64, got: u64 },
    #[error("zero-duration session has no average power")]
    ZeroDuration,
}

/// The session state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub mode: Mode,
    pub radar_active: bool,
    /// When the current radar run began; meaningful while active.
    pub radar_started_at: u64,
    /// Timestamp of the last positive detection in the current run.
    pub last_detection_at: Option<u64>,
    /// Total time the radar spent ranging (ms).
    pub accumulated_active_ms: u64,
    /// Total time the radar spent off (ms).
    pub accumulated_idle_ms: u64,
    walking: bool,
    screen_on: bool,
    assisted: bool,
    /// Radar stopped by the 10 s / 2 s rule; re-arms on a user event.
    halted: bool,
    started_at: u64,
    last_timestamp: u64,
}

impl SessionState {
    /// Fresh idle session; the ledger starts counting at `start_ms`.
    pub fn new(start_ms: u64) -> SessionState {
        SessionState {
            mode: Mode::Idle,
            radar_active: false,
            radar_started_at: 0,
            last_detection_at: None,
            accumulated_active_ms: 0,
            accumulated_idle_ms: 0,
            walking: false,
            screen_on: false,
            assisted: false,
            halted: false,
            started_at: start_ms,
            last_timestamp: start_ms,
        }
    }

    /// Time covered by the ledger so far (ms).
    pub fn elapsed_ms(&self) -> u64 {
        self.last_timestamp - self.started_at
    }

    /// Milliseconds of continuous radar activity at `now`.
    pub fn continuous_active_ms(&self, now: u64) -> u64 {
        if self.radar_active {
            now.saturating_sub(self.radar_started_at)
        } else {
            0
        }
    }

    fn target_mode(&self) -> Mode {
        if self.assisted {
            Mode::AssistedWalking
        } else if self.walking && self.screen_on {
            Mode::DistractedWalking
        } else {
            Mode::Idle
        }
    }

    fn start_radar(&mut self, now: u64, actions: &mut Vec<Action>) {
        if !self.radar_active {
            self.radar_active = true;
            self.radar_started_at = now;
            self.last_detection_at = None;
            actions.push(Action::StartRadar);
        }
        self.halted = false;
    }

    fn stop_radar(&mut self, actions: &mut Vec<Action>) {
        if self.radar_active {
            self.radar_active = false;
            actions.push(Action::StopRadar);
        }
    }

    /// Advances the machine to the input's timestamp and applies it.
    ///
    /// Processing order: reject out-of-order input, account the elapsed
    /// interval to the power ledger under the *previous* radar state,
    /// apply the input, then evaluate the stop rule.
    pub fn step(&mut self, input: &SessionInput) -> Result<Vec<Action>, SessionError> {
        let now = input.timestamp_ms();
        if now < self.last_timestamp {
            return Err(SessionError::OutOfOrder {
                last: self.last_timestamp,
                got: now,
            });
        }
        let elapsed = now - self.last_timestamp;
        if self.radar_active {
            self.accumulated_active_ms += elapsed;
        } else {
            self.accumulated_idle_ms += elapsed;
        }
        self.last_timestamp = now;

        let mut actions = Vec::new();
        match input {
            SessionInput::Event(event) => {
                match event.kind {
                    EventKind::WalkingStarted => self.walking = true,
                    EventKind::WalkingStopped => self.walking = false,
                    EventKind::ScreenOn => self.screen_on = true,
                    EventKind::ScreenOff => self.screen_on = false,
                    EventKind::AssistRequested => self.assisted = true,
                    EventKind::AssistCancelled => self.assisted = false,
                }
                let target = self.target_mode();
                self.mode = target;
                if target == Mode::Idle {
                    // Fig. 3 step (4): leaving distracted/assisted walking
                    // shuts the radar down immediately.
                    self.stop_radar(&mut actions);
                    self.halted = false;
                } else {
                    // Any event that lands in an active mode (re)arms the
                    // radar, including after a rule stop.
                    self.start_radar(now, &mut actions);
                }
            }
            SessionInput::Detection {
                timestamp_ms,
                verdict,
                label,
            } => {
                // Verdicts only count while the radar is ranging; an idle
                // session never alerts.
                if self.radar_active && verdict.detected {
                    self.last_detection_at = Some(*timestamp_ms);
                    let severity = severity_of(verdict, *label);
                    if severity > Severity::Info {
                        actions.push(Action::Emit(Alert {
                            timestamp_ms: *timestamp_ms,
                            severity,
                            verdict: verdict.clone(),
                            label: *label,
                            range_cm: verdict.range_estimate_cm.unwrap_or(f64::INFINITY),
                        }));
                    }
                }
            }
            SessionInput::Tick { .. } => {}
        }

        if self.radar_active && self.continuous_active_ms(now) >= SESSION_CAP_MS {
            let stale = match self.last_detection_at {
                None => true,
                Some(t) => now.saturating_sub(t) >= CUTOFF_MS,
            };
            if stale {
                self.stop_radar(&mut actions);
                self.halted = true;
            }
        }
        Ok(actions)
    }

    /// True when the radar was stopped by the 10 s / 2 s rule and waits
    /// for a user event to re-arm.
    pub fn halted_by_rule(&self) -> bool {
        self.halted
    }
}

/// Alert severity for a verdict.
///
/// Danger: detected and either the obstacle itself is moving or it is
/// within [`DANGER_RANGE_CM`]. Caution: any other detection. Info: no
/// detection (callers suppress these; the session never emits them).
pub fn severity_of(verdict: &DetectionVerdict, label: ObstacleLabel) -> Severity {
    if !verdict.detected {
        return Severity::Info;
    }
    let close = verdict
        .range_estimate_cm
        .is_some_and(|cm| cm <= DANGER_RANGE_CM);
    if label.movement == Movement::Mobile || close {
        Severity::Danger
    } else {
        Severity::Caution
    }
}

/// Time-weighted average current over the session's ledger (mA).
pub fn power_estimate(
    state: &SessionState,
    active_ma: f64,
    idle_ma: f64,
) -> Result<f64, SessionError> {
    let active = state.accumulated_active_ms as f64;
    let idle = state.accumulated_idle_ms as f64;
    let total = active + idle;
    if total == 0.0 {
        return Err(SessionError::ZeroDuration);
    }
    Ok((active * active_ma + idle * idle_ma) / total)
}

/// Parses an event-log file: one `timestamp_ms,kind` per line; blank
/// lines and `#` comments are skipped.
pub fn parse_event_log(text: &str) -> Result<Vec<UserEvent>, EventLogError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = || -> Result<UserEvent, EventLogError> {
            let (ts, kind) = line
                .split_once(',')
                .ok_or_else(|| EventLogError::MissingComma {
                    text: line.to_string(),
                })?;
            Ok(UserEvent {
                timestamp_ms: ts.parse().map_err(|_| EventLogError::BadTimestamp {
                    value: ts.to_string(),
                })?,
                kind: kind.parse()?,
            })
        };
        events.push(parse().map_err(|source| EventLogError::AtLine {
            line: i + 1,
            source: Box::new(source),
        })?);
    }
    Ok(events)
}

/// Renders an event log (inverse of [`parse_event_log`]).
pub fn render_event_log(events: &[UserEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&format!("{},{}\n", e.timestamp_ms, e.kind));
    }
    out
}

/// Event-log format violations.
#[derive(Debug, Error, PartialEq)]
pub enum EventLogError {
    #[error("expected `timestamp_ms,kind`, got {text:?}")]
    MissingComma { text: String },
    #[error("bad timestamp `{value}`")]
    BadTimestamp { value: String },
    #[error("unknown event kind {kind:?}")]
    UnknownKind { kind: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        source: Box<EventLogError>,
    },
}
