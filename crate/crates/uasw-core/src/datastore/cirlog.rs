//! The `.uaswcir` log format and its label annotations.
//!
//! A log is plain text: one header line, then one record per CIR.
//!
//! ```text
//! #UASWCIR v1 prf=200 rfri_ms=5 taps=56 scale=10
//! 0,0,0,<56 taps × 8 lowercase hex chars>
//! 1,5,0,…
//! ```
//!
//! Each tap is stored as two 16-bit two's-complement integers (real, then
//! imaginary), each four lowercase hex chars, after multiplying by the
//! header's fixed-point `scale` and rounding. Decoding divides back out,
//! so `encode(decode(record)) == record` byte-exactly and
//! `decode(encode(frame)) == frame` for frames whose taps sit on the
//! `1/scale` grid.
//!
//! Annotations live in a separate text file, one labeled seq range per
//! line: `start_seq,end_seq,material,surface,movement`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::config::RadarConfig;
use crate::label::{LabelParseError, ObstacleLabel};
use crate::sim::CirFrame;

/// Tag opening every log file; the `v1` is part of the format version.
pub const FORMAT_TAG: &str = "#UASWCIR v1";

/// Default fixed-point scale: 0.1 amplitude resolution, ±3276.7 range.
pub const DEFAULT_SCALE: f64 = 10.0;

/// Hex chars per tap: 4 for the real part, 4 for the imaginary part.
const HEX_PER_TAP: usize = 8;

/// Problems with a single record line.
#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("expected {expected} taps, record encodes {got}")]
    WrongTapCount { got: usize, expected: usize },
    #[error("tap data contains a non-hex (or uppercase) character")]
    NonHex,
    #[error("missing `{0}` field")]
    MissingField(&'static str),
    #[error("bad {field} value `{value}`")]
    BadField { field: &'static str, value: String },
    #[error("tap component {value} overflows i16 at scale {scale}")]
    Overflow { value: f64, scale: f64 },
}

/// Problems with a whole log file.
#[derive(Debug, Error)]
pub enum CirLogError {
    #[error("missing `{FORMAT_TAG}` header line")]
    MissingHeader,
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("line {line}: {source}")]
    Record { line: usize, source: RecordError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Header line contents: enough acquisition context to replay the log.
#[derive(Debug, Clone, PartialEq)]
pub struct CirLogHeader {
    pub prf_hz: f64,
    pub rfri_ms: f64,
    pub taps: usize,
    /// Fixed-point scale applied before the i16 quantisation.
    pub scale: f64,
}

impl CirLogHeader {
    /// Header snapshotting `config`, with the given fixed-point scale.
    pub fn for_config(config: &RadarConfig, scale: f64) -> CirLogHeader {
        CirLogHeader {
            prf_hz: config.prf_hz,
            rfri_ms: config.rfri_ms,
            taps: config.total_taps,
            scale,
        }
    }

    /// Renders the normative header line (no trailing newline).
    pub fn to_line(&self) -> String {
        format!(
            "{FORMAT_TAG} prf={} rfri_ms={} taps={} scale={}",
            self.prf_hz, self.rfri_ms, self.taps, self.scale
        )
    }

    /// Parses a header line; field order is normative.
    pub fn parse(line: &str) -> Result<CirLogHeader, CirLogError> {
        let Some(rest) = line.strip_prefix(FORMAT_TAG) else {
            return Err(CirLogError::MissingHeader);
        };
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(CirLogError::BadHeader(format!(
                "expected 4 fields after `{FORMAT_TAG}`, got {}",
                fields.len()
            )));
        }
        fn keyed<T: std::str::FromStr>(field: &str, key: &str) -> Result<T, CirLogError> {
            let value = field
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .ok_or_else(|| CirLogError::BadHeader(format!("expected `{key}=…`, got `{field}`")))?;
            value
                .parse()
                .map_err(|_| CirLogError::BadHeader(format!("bad `{key}` value `{value}`")))
        }
        let header = CirLogHeader {
            prf_hz: keyed(fields[0], "prf")?,
            rfri_ms: keyed(fields[1], "rfri_ms")?,
            taps: keyed(fields[2], "taps")?,
            scale: keyed(fields[3], "scale")?,
        };
        if !(header.scale > 0.0 && header.scale.is_finite()) {
            return Err(CirLogError::BadHeader(format!(
                "scale must be positive and finite, got {}",
                header.scale
            )));
        }
        if header.taps == 0 {
            return Err(CirLogError::BadHeader("taps must be ≥ 1".into()));
        }
        Ok(header)
    }
}

fn quantise(value: f64, scale: f64) -> Result<i16, RecordError> {
    let scaled = (value * scale).round();
    if !scaled.is_finite() || !(i16::MIN as f64..=i16::MAX as f64).contains(&scaled) {
        return Err(RecordError::Overflow { value, scale });
    }
    Ok(scaled as i16)
}

/// Encodes one frame as a record line (no trailing newline).
pub fn encode_frame(frame: &CirFrame, header: &CirLogHeader) -> Result<String, RecordError> {
    if frame.taps.len() != header.taps {
        return Err(RecordError::WrongTapCount {
            got: frame.taps.len(),
            expected: header.taps,
        });
    }
    let mut line = format!("{},{},{},", frame.seq, frame.timestamp_ms, frame.rx_gain_index);
    line.reserve(header.taps * HEX_PER_TAP);
    for tap in &frame.taps {
        let re = quantise(tap.re, header.scale)?;
        let im = quantise(tap.im, header.scale)?;
        write!(line, "{:04x}{:04x}", re as u16, im as u16).expect("writing to String");
    }
    Ok(line)
}

fn int_field<T: std::str::FromStr>(
    parts: &mut std::str::SplitN<'_, char>,
    field: &'static str,
) -> Result<T, RecordError> {
    let raw = parts.next().ok_or(RecordError::MissingField(field))?;
    raw.parse().map_err(|_| RecordError::BadField {
        field,
        value: raw.to_string(),
    })
}

/// Decodes one record line back into a frame.
pub fn decode_frame(record: &str, header: &CirLogHeader) -> Result<CirFrame, RecordError> {
    let mut parts = record.splitn(4, ',');
    let seq = int_field(&mut parts, "seq")?;
    let timestamp_ms = int_field(&mut parts, "timestamp_ms")?;
    let rx_gain_index = int_field(&mut parts, "rx_gain")?;
    let hex = parts.next().ok_or(RecordError::MissingField("taps"))?;
    if hex.len() != header.taps * HEX_PER_TAP {
        return Err(RecordError::WrongTapCount {
            got: hex.len() / HEX_PER_TAP,
            expected: header.taps,
        });
    }
    // Lowercase is normative; from_str_radix alone would accept "FFFF".
    if !hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(RecordError::NonHex);
    }
    let mut taps = Vec::with_capacity(header.taps);
    for tap_hex in hex.as_bytes().chunks_exact(HEX_PER_TAP) {
        let component = |bytes: &[u8]| -> f64 {
            let raw = u16::from_str_radix(std::str::from_utf8(bytes).unwrap(), 16)
                .expect("hex checked above");
            raw as i16 as f64 / header.scale
        };
        taps.push(Complex64::new(component(&tap_hex[..4]), component(&tap_hex[4..])));
    }
    Ok(CirFrame {
        seq,
        timestamp_ms,
        rx_gain_index,
        taps,
    })
}

/// An in-memory `.uaswcir` log.
#[derive(Debug, Clone, PartialEq)]
pub struct CirLog {
    pub header: CirLogHeader,
    pub frames: Vec<CirFrame>,
}

impl CirLog {
    pub fn new(header: CirLogHeader) -> CirLog {
        CirLog {
            header,
            frames: Vec::new(),
        }
    }

    pub fn first_seq(&self) -> Option<u64> {
        self.frames.first().map(|f| f.seq)
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.frames.last().map(|f| f.seq)
    }

    /// Renders the whole log (header + records, trailing newline).
    pub fn to_text(&self) -> Result<String, CirLogError> {
        let mut out = self.header.to_line();
        out.push('\n');
        for (i, frame) in self.frames.iter().enumerate() {
            let record = encode_frame(frame, &self.header)
                .map_err(|source| CirLogError::Record { line: i + 2, source })?;
            out.push_str(&record);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses a full log. Blank lines and `#` comments after the header
    /// are skipped; encoding never produces them.
    pub fn parse(text: &str) -> Result<CirLog, CirLogError> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(CirLogError::MissingHeader)?;
        let header = CirLogHeader::parse(first)?;
        let mut frames = Vec::new();
        for (i, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            frames.push(
                decode_frame(line, &header)
                    .map_err(|source| CirLogError::Record { line: i + 1, source })?,
            );
        }
        Ok(CirLog { header, frames })
    }

    pub fn save(&self, path: &Path) -> Result<(), CirLogError> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CirLog, CirLogError> {
        CirLog::parse(&fs::read_to_string(path)?)
    }
}

/// A labeled seq range inside one log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annotation {
    /// First annotated CIR (inclusive).
    pub start_seq: u64,
    /// Last annotated CIR (inclusive).
    pub end_seq: u64,
    pub label: ObstacleLabel,
}

impl Annotation {
    /// True when the whole `start..=end` span lies inside this annotation.
    pub fn covers(&self, start: u64, end: u64) -> bool {
        self.start_seq <= start && end <= self.end_seq
    }

    /// Renders the normative annotation line.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.start_seq, self.end_seq, self.label.material, self.label.surface,
            self.label.movement
        )
    }

    pub fn parse(line: &str) -> Result<Annotation, AnnotationParseError> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(AnnotationParseError::WrongFieldCount { got: fields.len() });
        }
        let seq = |raw: &str, field: &'static str| {
            raw.parse::<u64>().map_err(|_| AnnotationParseError::BadSeq {
                field,
                value: raw.to_string(),
            })
        };
        let start_seq = seq(fields[0], "start_seq")?;
        let end_seq = seq(fields[1], "end_seq")?;
        if end_seq < start_seq {
            return Err(AnnotationParseError::EmptyRange { start_seq, end_seq });
        }
        Ok(Annotation {
            start_seq,
            end_seq,
            label: ObstacleLabel::new(
                fields[2].parse()?,
                fields[3].parse()?,
                fields[4].parse()?,
            ),
        })
    }
}

/// Problems with an annotation file.
#[derive(Debug, Error)]
pub enum AnnotationParseError {
    #[error("expected 5 comma-separated fields, got {got}")]
    WrongFieldCount { got: usize },
    #[error("bad {field} value `{value}`")]
    BadSeq { field: &'static str, value: String },
    #[error("end_seq {end_seq} before start_seq {start_seq}")]
    EmptyRange { start_seq: u64, end_seq: u64 },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        source: Box<AnnotationParseError>,
    },
    #[error(transparent)]
    Label(#[from] LabelParseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Renders an annotation file (one line per annotation).
pub fn render_annotations(annotations: &[Annotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        out.push_str(&a.to_line());
        out.push('\n');
    }
    out
}

/// Parses an annotation file; blank lines and `#` comments are skipped.
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>, AnnotationParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(Annotation::parse(line).map_err(|source| AnnotationParseError::AtLine {
            line: i + 1,
            source: Box::new(source),
        })?);
    }
    Ok(out)
}

pub fn write_annotations(annotations: &[Annotation], path: &Path) -> Result<(), AnnotationParseError> {
    fs::write(path, render_annotations(annotations))?;
    Ok(())
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, AnnotationParseError> {
    parse_annotations(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{Material, Movement, Surface};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn header(scale: f64) -> CirLogHeader {
        CirLogHeader::for_config(&RadarConfig::default(), scale)
    }

    /// Frame whose taps sit exactly on the 1/scale grid.
    fn grid_frame(seq: u64, scale: f64, rng: &mut ChaCha8Rng) -> CirFrame {
        let config = RadarConfig::default();
        let taps = (0..config.total_taps)
            .map(|_| {
                Complex64::new(
                    rng.random_range(-32768..=32767i32) as f64 / scale,
                    rng.random_range(-32768..=32767i32) as f64 / scale,
                )
            })
            .collect();
        CirFrame {
            seq,
            timestamp_ms: config.timestamp_ms(seq),
            rx_gain_index: (seq % 4) as u8,
            taps,
        }
    }

    #[test]
    fn unit_tap_example() {
        let mut frame = grid_frame(0, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        frame.taps = vec![Complex64::new(1.0, -1.0); 56];
        frame.timestamp_ms = 0;
        frame.rx_gain_index = 0;
        let record = encode_frame(&frame, &header(1.0)).unwrap();
        assert!(record.starts_with("0,0,0,0001ffff"));
        assert_eq!(&record[6..14], "0001ffff");
        assert_eq!(record.len(), 6 + 56 * 8);
        assert_eq!(decode_frame(&record, &header(1.0)).unwrap(), frame);
    }

    #[test]
    fn frame_roundtrips_on_grid() {
        for scale in [1.0, 10.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let h = header(scale);
            for seq in 0..50 {
                let frame = grid_frame(seq, scale, &mut rng);
                let record = encode_frame(&frame, &h).unwrap();
                let back = decode_frame(&record, &h).unwrap();
                assert_eq!(back, frame, "scale {scale} seq {seq}");
                // Re-encode is byte-exact.
                assert_eq!(encode_frame(&back, &h).unwrap(), record);
            }
        }
    }

    #[test]
    fn encode_rejects_bad_frames() {
        let h = header(10.0);
        let mut frame = grid_frame(3, 10.0, &mut ChaCha8Rng::seed_from_u64(1));
        frame.taps.pop();
        assert_eq!(
            encode_frame(&frame, &h),
            Err(RecordError::WrongTapCount {
                got: 55,
                expected: 56
            })
        );

        let mut big = grid_frame(3, 10.0, &mut ChaCha8Rng::seed_from_u64(1));
        big.taps[0].re = 4000.0; // 40 000 > 32 767 after scaling
        assert!(matches!(
            encode_frame(&big, &h),
            Err(RecordError::Overflow { .. })
        ));
    }

    #[test]
    fn decode_rejects_malformed_records() {
        let h = header(10.0);
        let frame = grid_frame(9, 10.0, &mut ChaCha8Rng::seed_from_u64(2));
        let good = encode_frame(&frame, &h).unwrap();

        // 55 taps.
        let short = &good[..good.len() - 8];
        assert_eq!(
            decode_frame(short, &h),
            Err(RecordError::WrongTapCount {
                got: 55,
                expected: 56
            })
        );

        let mut nonhex = good.clone();
        nonhex.replace_range(good.len() - 1..good.len(), "g");
        assert_eq!(decode_frame(&nonhex, &h), Err(RecordError::NonHex));

        let mut upper = good.clone();
        upper.replace_range(good.len() - 4..good.len(), "FFFF");
        assert_eq!(decode_frame(&upper, &h), Err(RecordError::NonHex));

        assert_eq!(
            decode_frame("5,25", &h),
            Err(RecordError::MissingField("rx_gain"))
        );
        assert!(matches!(
            decode_frame("x,25,0,00", &h),
            Err(RecordError::BadField { field: "seq", .. })
        ));
    }

    #[test]
    fn log_text_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut log = CirLog::new(header(10.0));
        for seq in 100..140 {
            log.frames.push(grid_frame(seq, 10.0, &mut rng));
        }
        let text = log.to_text().unwrap();
        assert!(text.starts_with("#UASWCIR v1 prf=200 rfri_ms=5 taps=56 scale=10\n"));
        let back = CirLog::parse(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_text().unwrap(), text);
        assert_eq!(back.first_seq(), Some(100));
        assert_eq!(back.last_seq(), Some(139));
    }

    #[test]
    fn log_parse_errors_carry_line_numbers() {
        assert!(matches!(CirLog::parse(""), Err(CirLogError::MissingHeader)));
        assert!(matches!(
            CirLog::parse("#WRONG v1 prf=200 rfri_ms=5 taps=56 scale=10\n"),
            Err(CirLogError::MissingHeader)
        ));
        assert!(matches!(
            CirLog::parse("#UASWCIR v1 prf=200 rfri_ms=5 taps=56\n"),
            Err(CirLogError::BadHeader(_))
        ));
        assert!(matches!(
            CirLog::parse("#UASWCIR v1 prf=200 rfri_ms=5 taps=56 scale=0\n"),
            Err(CirLogError::BadHeader(_))
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut log = CirLog::new(header(10.0));
        log.frames.push(grid_frame(0, 10.0, &mut rng));
        log.frames.push(grid_frame(1, 10.0, &mut rng));
        let mut text = log.to_text().unwrap();
        text.truncate(text.len() - 10); // mangle the last record
        match CirLog::parse(&text).unwrap_err() {
            CirLogError::Record { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn annotation_roundtrip_and_errors() {
        let ann = Annotation {
            start_seq: 140,
            end_seq: 3979,
            label: ObstacleLabel::new(Material::Concrete, Surface::Wet, Movement::Static),
        };
        let line = ann.to_line();
        assert_eq!(line, "140,3979,concrete,wet,static");
        assert_eq!(Annotation::parse(&line).unwrap(), ann);
        assert!(ann.covers(140, 3979));
        assert!(ann.covers(200, 300));
        assert!(!ann.covers(139, 200));
        assert!(!ann.covers(3900, 3980));

        assert!(matches!(
            Annotation::parse("1,2,concrete,wet"),
            Err(AnnotationParseError::WrongFieldCount { got: 4 })
        ));
        assert!(matches!(
            Annotation::parse("9,2,concrete,wet,static"),
            Err(AnnotationParseError::EmptyRange { .. })
        ));
        assert!(matches!(
            Annotation::parse("1,2,steel,wet,static"),
            Err(AnnotationParseError::Label(_))
        ));

        let text = render_annotations(&[ann]);
        assert_eq!(parse_annotations(&text).unwrap(), vec![ann]);
        let bad = "140,3979,concrete,wet,static\n1,2,3\n";
        match parse_annotations(bad).unwrap_err() {
            AnnotationParseError::AtLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn file_io_roundtrip() {
        let dir = std::env::temp_dir().join("uasw_cirlog_test");
        std::fs::create_dir_all(&dir).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut log = CirLog::new(header(10.0));
        for seq in 0..10 {
            log.frames.push(grid_frame(seq, 10.0, &mut rng));
        }
        let log_path = dir.join("t.uaswcir");
        log.save(&log_path).unwrap();
        assert_eq!(CirLog::load(&log_path).unwrap(), log);

        let anns = vec![Annotation {
            start_seq: 0,
            end_seq: 9,
            label: ObstacleLabel::new(Material::Human, Surface::Dry, Movement::Mobile),
        }];
        let ann_path = dir.join("t.labels");
        write_annotations(&anns, &ann_path).unwrap();
        assert_eq!(read_annotations(&ann_path).unwrap(), anns);

        std::fs::remove_dir_all(&dir).unwrap();
    }
}
