//! Line-delimited JSON records for detections, annotations and tracks, plus
//! the single-document motion report.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytics::MotionMetrics;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ScoredBox};
use crate::tracking::Provenance;

/// A scored detector output on one frame of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub video_id: String,
    pub frame: u64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
}

impl Detection {
    pub fn scored(&self) -> ScoredBox {
        ScoredBox::new(self.bbox, self.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Handedness {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
    #[default]
    #[serde(rename = "U")]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandBox {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub side: Handedness,
}

/// Ground truth for one frame. `rev` counts accepted saves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub video_id: String,
    pub frame: u64,
    pub hands: Vec<HandBox>,
    pub annotator: String,
    pub rev: u64,
}

impl FrameAnnotation {
    pub fn empty(video_id: impl Into<String>, frame: u64) -> Self {
        Self {
            video_id: video_id.into(),
            frame,
            hands: Vec::new(),
            annotator: String::new(),
            rev: 0,
        }
    }

    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.hands.iter().map(|h| h.bbox).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackProvenance {
    #[serde(rename = "det")]
    Detected,
    #[serde(rename = "pred")]
    Predicted,
}

impl From<Provenance> for TrackProvenance {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Detected => TrackProvenance::Detected,
            Provenance::Predicted => TrackProvenance::Predicted,
        }
    }
}

impl From<TrackProvenance> for Provenance {
    fn from(p: TrackProvenance) -> Self {
        match p {
            TrackProvenance::Detected => Provenance::Detected,
            TrackProvenance::Predicted => Provenance::Predicted,
        }
    }
}

/// One tracked box. Predicted boxes carry the score of the track's last
/// matched detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub video_id: String,
    pub frame: u64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
    pub identity: u64,
    pub provenance: TrackProvenance,
}

/// Per-video motion statistics document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionReport {
    pub video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    pub tracks: Vec<MotionMetrics>,
}

/// A record kind stored one JSON object per line.
pub trait LineRecord: Serialize + DeserializeOwned {
    const FIELDS: &'static [&'static str];

    /// Invariants serde cannot express.
    fn check(&self) -> Result<(), String> {
        Ok(())
    }
}

fn check_score(score: f64) -> Result<(), String> {
    if (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(format!("score {score} outside [0, 1]"))
    }
}

fn check_video_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        Err("video_id must not be empty".into())
    } else {
        Ok(())
    }
}

impl LineRecord for Detection {
    const FIELDS: &'static [&'static str] = &["video_id", "frame", "box", "score"];

    fn check(&self) -> Result<(), String> {
        check_video_id(&self.video_id)?;
        check_score(self.score)
    }
}

impl LineRecord for FrameAnnotation {
    const FIELDS: &'static [&'static str] = &["video_id", "frame", "hands", "annotator", "rev"];

    fn check(&self) -> Result<(), String> {
        check_video_id(&self.video_id)
    }
}

impl LineRecord for TrackRecord {
    const FIELDS: &'static [&'static str] =
        &["video_id", "frame", "box", "score", "identity", "provenance"];

    fn check(&self) -> Result<(), String> {
        check_video_id(&self.video_id)?;
        check_score(self.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReadOptions {
    /// Reject records carrying keys outside the documented field set.
    pub strict: bool,
}

fn parse_line<T: LineRecord>(line: &str, lineno: usize, opts: ReadOptions) -> Result<T> {
    let err = |message: String| Error::Parse {
        line: lineno,
        message,
    };
    let value: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
    if opts.strict {
        check_known_fields(&value, T::FIELDS).map_err(err)?;
        if let Some(hands) = value.get("hands").and_then(Value::as_array) {
            for (i, h) in hands.iter().enumerate() {
                check_known_fields(h, &["box", "side"])
                    .map_err(|m| err(format!("hands[{i}]: {m}")))?;
            }
        }
    }
    let record: T = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
    record.check().map_err(err)?;
    Ok(record)
}

fn check_known_fields(value: &Value, fields: &[&str]) -> Result<(), String> {
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    match obj.keys().find(|k| !fields.contains(&k.as_str())) {
        Some(k) => Err(format!("unknown field `{k}`")),
        None => Ok(()),
    }
}

/// Reads one record per non-blank line. Errors carry the 1-based line number.
pub fn read_records<T: LineRecord>(reader: impl BufRead, opts: ReadOptions) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, i + 1, opts)?);
    }
    Ok(out)
}

/// Canonical form: one compact JSON object per line, keys in declaration
/// order, shortest round-trip float formatting.
pub fn write_records<T: LineRecord>(mut writer: impl Write, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn to_canonical_line<T: LineRecord>(record: &T) -> String {
    serde_json::to_string(record).expect("records serialize infallibly")
}

pub fn read_detections(reader: impl BufRead, opts: ReadOptions) -> Result<Vec<Detection>> {
    read_records(reader, opts)
}

pub fn write_detections(writer: impl Write, records: &[Detection]) -> Result<()> {
    write_records(writer, records)
}

pub fn read_annotations(reader: impl BufRead, opts: ReadOptions) -> Result<Vec<FrameAnnotation>> {
    read_records(reader, opts)
}

pub fn write_annotations(writer: impl Write, records: &[FrameAnnotation]) -> Result<()> {
    write_records(writer, records)
}

pub fn read_tracks(reader: impl BufRead, opts: ReadOptions) -> Result<Vec<TrackRecord>> {
    read_records(reader, opts)
}

pub fn write_tracks(writer: impl Write, records: &[TrackRecord]) -> Result<()> {
    write_records(writer, records)
}

pub fn read_report(reader: impl std::io::Read) -> Result<MotionReport> {
    serde_json::from_reader(reader).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_report(mut writer: impl Write, report: &MotionReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, report).map_err(std::io::Error::from)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

/// Ground-truth boxes of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub video_id: String,
    pub frame: u64,
    pub boxes: Vec<BoundingBox>,
}

/// Reads ground truth given either as annotation records or as detection
/// records (one box per line). Records for the same frame are merged in
/// file order.
pub fn read_ground_truth(reader: impl BufRead, opts: ReadOptions) -> Result<Vec<GroundTruthFrame>> {
    let mut frames: Vec<GroundTruthFrame> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let is_annotation = serde_json::from_str::<Value>(&line)
            .map(|v| v.get("hands").is_some())
            .unwrap_or(false);
        let (video_id, frame, boxes) = if is_annotation {
            let a: FrameAnnotation = parse_line(&line, i + 1, opts)?;
            let boxes = a.boxes();
            (a.video_id, a.frame, boxes)
        } else {
            let d: Detection = parse_line(&line, i + 1, opts)?;
            (d.video_id, d.frame, vec![d.bbox])
        };
        let slot = *index.entry((video_id.clone(), frame)).or_insert_with(|| {
            frames.push(GroundTruthFrame {
                video_id,
                frame,
                boxes: Vec::new(),
            });
            frames.len() - 1
        });
        frames[slot].boxes.extend(boxes);
    }
    Ok(frames)
}

/// Validation failure pinned to a JSON path such as `hands[1].box`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Parses and validates an annotation document, reporting the first
/// offending field by path. Unknown fields are rejected.
pub fn parse_annotation_document(text: &str) -> Result<FrameAnnotation, FieldError> {
    let fe = |path: &str, message: String| FieldError {
        path: path.to_string(),
        message,
    };
    let value: Value = serde_json::from_str(text).map_err(|e| fe("$", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| fe("$", "expected a JSON object".into()))?;
    if let Some(k) = obj
        .keys()
        .find(|k| !FrameAnnotation::FIELDS.contains(&k.as_str()))
    {
        return Err(fe(k, "unknown field".into()));
    }
    let video_id = obj
        .get("video_id")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| fe("video_id", "expected a non-empty string".into()))?;
    let frame = obj
        .get("frame")
        .and_then(Value::as_u64)
        .ok_or_else(|| fe("frame", "expected a non-negative integer".into()))?;
    let annotator = obj
        .get("annotator")
        .and_then(Value::as_str)
        .ok_or_else(|| fe("annotator", "expected a string".into()))?;
    let rev = obj
        .get("rev")
        .and_then(Value::as_u64)
        .ok_or_else(|| fe("rev", "expected a non-negative integer".into()))?;
    let hands_val = obj
        .get("hands")
        .and_then(Value::as_array)
        .ok_or_else(|| fe("hands", "expected an array".into()))?;
    let mut hands = Vec::with_capacity(hands_val.len());
    for (i, h) in hands_val.iter().enumerate() {
        let base = format!("hands[{i}]");
        let hobj = h
            .as_object()
            .ok_or_else(|| fe(&base, "expected an object".into()))?;
        if let Some(k) = hobj.keys().find(|k| !["box", "side"].contains(&k.as_str())) {
            return Err(fe(&format!("{base}.{k}"), "unknown field".into()));
        }
        let box_path = format!("{base}.box");
        let coords: [f64; 4] = hobj
            .get("box")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| fe(&box_path, "expected [x1, y1, x2, y2]".into()))?;
        let bbox = BoundingBox::try_from(coords).map_err(|e| fe(&box_path, e.to_string()))?;
        let side_path = format!("{base}.side");
        let side: Handedness = hobj
            .get("side")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| fe(&side_path, "expected \"L\", \"R\" or \"U\"".into()))?;
        hands.push(HandBox { bbox, side });
    }
    Ok(FrameAnnotation {
        video_id: video_id.to_string(),
        frame,
        hands,
        annotator: annotator.to_string(),
        rev,
    })
}
