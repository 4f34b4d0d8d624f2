//! Line-oriented file formats: recordings (`.rec`), ground truth (`.truth`),
//! alert events (`.alerts`), prediction dumps (`.pred`), latency logs
//! (`.latency`) and metrics (`.metrics`).
//!
//! Every line-oriented file is a header object followed by body objects, one
//! JSON object per line, each tagged with a `"type"` field. Floats are written
//! in shortest round-trip form, so reading back a written file reproduces it
//! bit for bit. The field-level layout is frozen in `FORMATS.md`.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::collision::{AlertEvent, AlertKind, RiskTier};
use crate::eval::MetricsReport;
use crate::geometry::{CameraIntrinsics, Pose, UnitQuaternion, Vec2, WorldPoint};
use crate::scalar::Scalar;
use crate::scenario::{CollisionInterval, GroundTruth, PedestrianTruth};
use crate::tracking::{BBox, Detection};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot open {}", path.display())]
    Open { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: truncated (no line terminator)")]
    Truncated { line: usize },
    #[error("line {line}: unsupported format version {found} (expected {FORMAT_VERSION})")]
    Version { line: usize, found: u32 },
    #[error("missing header")]
    MissingHeader,
    #[error("line {line}: frame {found} out of sequence (expected {expected})")]
    NonContiguous { line: usize, expected: u64, found: u64 },
    #[error("line {line}: time {t} is not after {last}")]
    NonMonotonic { line: usize, t: f64, last: f64 },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    fn malformed(line: usize, msg: impl Into<String>) -> Self {
        IoError::Malformed { line, msg: msg.into() }
    }

    /// 1-based line number the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            IoError::Malformed { line, .. }
            | IoError::Truncated { line }
            | IoError::Version { line, .. }
            | IoError::NonContiguous { line, .. }
            | IoError::NonMonotonic { line, .. } => Some(*line),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, IoError>;

/// One timestamped frame: ego pose plus the detections seen in it.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord<T> {
    pub frame: u64,
    pub t: T,
    pub pose: Pose<T>,
    pub detections: Vec<Detection<T>>,
}

impl FrameRecord<f64> {
    /// Converts to another scalar type (lossy for `f32`).
    pub fn cast<T: Scalar>(&self) -> FrameRecord<T> {
        let c = |v: f64| T::lit(v);
        let [w, x, y, z] = self.pose.rotation.wxyz();
        let tr = self.pose.translation;
        FrameRecord {
            frame: self.frame,
            t: c(self.t),
            pose: Pose::new(
                UnitQuaternion::new_normalized(c(w), c(x), c(y), c(z)).unwrap_or_else(|_| UnitQuaternion::identity()),
                WorldPoint::new(c(tr.x), c(tr.y), c(tr.z)),
            ),
            detections: self
                .detections
                .iter()
                .map(|d| Detection {
                    bbox: BBox {
                        u_min: c(d.bbox.u_min),
                        v_min: c(d.bbox.v_min),
                        u_max: c(d.bbox.u_max),
                        v_max: c(d.bbox.v_max),
                    },
                    confidence: c(d.confidence),
                    center_depth: d.center_depth.map(c),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMetadata {
    pub preset: String,
    pub seed: u64,
    pub generator_version: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordingHeader {
    pub format_version: u32,
    pub intrinsics: CameraIntrinsics<f64>,
    pub native_fps: f64,
    pub metadata: RecordingMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsWire {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: f64,
    height: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecHeaderWire {
    #[serde(rename = "type")]
    kind: String,
    format_version: u32,
    intrinsics: IntrinsicsWire,
    native_fps: f64,
    metadata: RecordingMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseWire {
    rotation: [f64; 4],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionWire {
    bbox: [f64; 4],
    confidence: f64,
    center_depth: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameWire {
    #[serde(rename = "type")]
    kind: String,
    frame: u64,
    t: f64,
    pose: PoseWire,
    detections: Vec<DetectionWire>,
}

/// Reads lines, enforcing a terminator on each and tracking line numbers.
struct Lines<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
        }
    }

    /// Next non-empty line parsed as JSON, with its tag and line number.
    fn next_value(&mut self) -> Result<Option<(usize, String, Value)>> {
        loop {
            self.buf.clear();
            let n = self.inner.read_line(&mut self.buf)?;
            if n == 0 {
                return Ok(None);
            }
            self.line += 1;
            if !self.buf.ends_with('\n') {
                return Err(IoError::Truncated { line: self.line });
            }
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let value: Value =
                serde_json::from_str(text).map_err(|e| IoError::malformed(self.line, e.to_string()))?;
            let tag = value
                .get("type")
                .and_then(Value::as_str)
                .ok_or_else(|| IoError::malformed(self.line, "missing \"type\" field"))?
                .to_string();
            return Ok(Some((self.line, tag, value)));
        }
    }
}

fn decode<T: DeserializeOwned>(line: usize, value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| IoError::malformed(line, e.to_string()))
}

fn check_version(line: usize, value: &Value) -> Result<()> {
    let v = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| IoError::malformed(line, "missing format_version"))?;
    if v != FORMAT_VERSION as u64 {
        return Err(IoError::Version {
            line,
            found: v.min(u32::MAX as u64) as u32,
        });
    }
    Ok(())
}

fn read_header<R: BufRead>(lines: &mut Lines<R>) -> Result<(usize, Value)> {
    let (line, tag, value) = lines.next_value()?.ok_or(IoError::MissingHeader)?;
    if tag != "header" {
        return Err(IoError::malformed(line, format!("expected header, found {tag:?}")));
    }
    check_version(line, &value)?;
    Ok((line, value))
}

fn write_line<W: Write, S: Serialize>(w: &mut W, value: &S) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::Open {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `path` through a sibling temporary file that is renamed into place
/// only on success, so failures never leave a partial output behind.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).map_err(|source| IoError::Open {
        path: tmp.clone(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let result = body(&mut w).and_then(|_| w.flush().map_err(IoError::from));
    drop(w);
    match result {
        Ok(()) => fs::rename(&tmp, path).map_err(IoError::from),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

// ---------------------------------------------------------------- recording

fn header_to_wire(h: &RecordingHeader) -> RecHeaderWire {
    let k = &h.intrinsics;
    RecHeaderWire {
        kind: "header".into(),
        format_version: h.format_version,
        intrinsics: IntrinsicsWire {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        },
        native_fps: h.native_fps,
        metadata: h.metadata.clone(),
    }
}

fn frame_to_wire(f: &FrameRecord<f64>) -> FrameWire {
    FrameWire {
        kind: "frame".into(),
        frame: f.frame,
        t: f.t,
        pose: PoseWire {
            rotation: f.pose.rotation.wxyz(),
            translation: f.pose.translation.to_array(),
        },
        detections: f
            .detections
            .iter()
            .map(|d| DetectionWire {
                bbox: d.bbox.to_f64_array(),
                confidence: d.confidence,
                center_depth: d.center_depth,
            })
            .collect(),
    }
}

fn frame_from_wire(line: usize, w: FrameWire, k: &CameraIntrinsics<f64>) -> Result<FrameRecord<f64>> {
    let [qw, qx, qy, qz] = w.pose.rotation;
    let rotation =
        UnitQuaternion::new_normalized(qw, qx, qy, qz).map_err(|e| IoError::malformed(line, e.to_string()))?;
    if !w.t.is_finite() || !w.pose.translation.iter().all(|v| v.is_finite()) {
        return Err(IoError::malformed(line, "non-finite time or translation"));
    }
    let mut detections = Vec::with_capacity(w.detections.len());
    for (i, d) in w.detections.into_iter().enumerate() {
        let [a, b, c, e] = d.bbox;
        let bbox = BBox::new(a, b, c, e).map_err(|err| IoError::malformed(line, format!("detection {i}: {err}")))?;
        if !bbox.within(k) {
            return Err(IoError::malformed(line, format!("detection {i}: box outside the image")));
        }
        if !(0.0..=1.0).contains(&d.confidence) {
            return Err(IoError::malformed(line, format!("detection {i}: confidence outside [0, 1]")));
        }
        if let Some(depth) = d.center_depth {
            if !depth.is_finite() {
                return Err(IoError::malformed(line, format!("detection {i}: non-finite depth")));
            }
        }
        detections.push(Detection {
            bbox,
            confidence: d.confidence,
            center_depth: d.center_depth,
        });
    }
    Ok(FrameRecord {
        frame: w.frame,
        t: w.t,
        pose: Pose::new(rotation, WorldPoint::from_array(w.pose.translation)),
        detections,
    })
}

/// Streaming recording writer. Frames must be contiguous and strictly
/// increasing in time.
pub struct RecordingWriter<W: Write> {
    inner: W,
    next_frame: u64,
    last_t: Option<f64>,
}

impl<W: Write> RecordingWriter<W> {
    pub fn new(mut inner: W, header: &RecordingHeader) -> Result<Self> {
        write_line(&mut inner, &header_to_wire(header))?;
        Ok(Self {
            inner,
            next_frame: 0,
            last_t: None,
        })
    }

    pub fn write_frame(&mut self, frame: &FrameRecord<f64>) -> Result<()> {
        let line = self.next_frame as usize + 2;
        if frame.frame != self.next_frame {
            return Err(IoError::NonContiguous {
                line,
                expected: self.next_frame,
                found: frame.frame,
            });
        }
        if let Some(last) = self.last_t {
            if !(frame.t > last) {
                return Err(IoError::NonMonotonic { line, t: frame.t, last });
            }
        }
        write_line(&mut self.inner, &frame_to_wire(frame))?;
        self.next_frame += 1;
        self.last_t = Some(frame.t);
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming recording reader; yields validated frames in order.
pub struct RecordingReader<R: BufRead> {
    lines: Lines<R>,
    header: RecordingHeader,
    next_frame: u64,
    last_t: Option<f64>,
}

impl<R: BufRead> RecordingReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut lines = Lines::new(inner);
        let (line, value) = read_header(&mut lines)?;
        let w: RecHeaderWire = decode(line, value)?;
        let k = &w.intrinsics;
        let intrinsics = CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)
            .map_err(|e| IoError::malformed(line, e.to_string()))?;
        if !(w.native_fps > 0.0) {
            return Err(IoError::malformed(line, "native_fps must be positive"));
        }
        Ok(Self {
            lines,
            header: RecordingHeader {
                format_version: w.format_version,
                intrinsics,
                native_fps: w.native_fps,
                metadata: w.metadata,
            },
            next_frame: 0,
            last_t: None,
        })
    }

    pub fn header(&self) -> &RecordingHeader {
        &self.header
    }

    pub fn next_frame(&mut self) -> Result<Option<FrameRecord<f64>>> {
        let Some((line, tag, value)) = self.lines.next_value()? else {
            return Ok(None);
        };
        if tag != "frame" {
            return Err(IoError::malformed(line, format!("expected frame, found {tag:?}")));
        }
        let frame = frame_from_wire(line, decode(line, value)?, &self.header.intrinsics)?;
        if frame.frame != self.next_frame {
            return Err(IoError::NonContiguous {
                line,
                expected: self.next_frame,
                found: frame.frame,
            });
        }
        if let Some(last) = self.last_t {
            if !(frame.t > last) {
                return Err(IoError::NonMonotonic { line, t: frame.t, last });
            }
        }
        self.next_frame += 1;
        self.last_t = Some(frame.t);
        Ok(Some(frame))
    }
}

impl<R: BufRead> Iterator for RecordingReader<R> {
    type Item = Result<FrameRecord<f64>>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub fn write_recording_to<W: Write>(w: W, header: &RecordingHeader, frames: &[FrameRecord<f64>]) -> Result<W> {
    let mut writer = RecordingWriter::new(w, header)?;
    for f in frames {
        writer.write_frame(f)?;
    }
    writer.finish()
}

pub fn read_recording_from<R: Read>(r: R) -> Result<(RecordingHeader, Vec<FrameRecord<f64>>)> {
    let mut reader = RecordingReader::new(BufReader::new(r))?;
    let mut frames = Vec::new();
    while let Some(f) = reader.next_frame()? {
        frames.push(f);
    }
    Ok((reader.header, frames))
}

pub fn write_recording(path: &Path, header: &RecordingHeader, frames: &[FrameRecord<f64>]) -> Result<()> {
    write_atomic(path, |w| write_recording_to(w, header, frames).map(|_| ()))
}

pub fn read_recording(path: &Path) -> Result<(RecordingHeader, Vec<FrameRecord<f64>>)> {
    read_recording_from(open(path)?)
}

// ------------------------------------------------------------- ground truth

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthHeaderWire {
    #[serde(rename = "type")]
    kind: String,
    format_version: u32,
    native_fps: f64,
    radius_gt: f64,
    metadata: RecordingMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PedPositionWire {
    id: u64,
    position: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthFrameWire {
    #[serde(rename = "type")]
    kind: String,
    frame: u64,
    t: f64,
    ego: [f64; 3],
    pedestrians: Vec<PedPositionWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalWire {
    #[serde(rename = "type")]
    kind: String,
    pedestrian: u64,
    start_frame: u64,
    end_frame: u64,
    start_t: f64,
    end_t: f64,
}

pub fn write_truth_to<W: Write>(mut w: W, metadata: &RecordingMetadata, truth: &GroundTruth) -> Result<W> {
    write_line(
        &mut w,
        &TruthHeaderWire {
            kind: "header".into(),
            format_version: FORMAT_VERSION,
            native_fps: truth.native_fps,
            radius_gt: truth.radius_gt,
            metadata: metadata.clone(),
        },
    )?;
    for (f, (t, ego)) in truth.times.iter().zip(&truth.ego).enumerate() {
        let pedestrians = truth
            .pedestrians
            .iter()
            .filter_map(|p| {
                p.at_frame(f as u64).map(|pos| PedPositionWire {
                    id: p.id,
                    position: pos.to_array(),
                })
            })
            .collect();
        write_line(
            &mut w,
            &TruthFrameWire {
                kind: "frame".into(),
                frame: f as u64,
                t: *t,
                ego: ego.to_array(),
                pedestrians,
            },
        )?;
    }
    for iv in &truth.intervals {
        write_line(
            &mut w,
            &IntervalWire {
                kind: "interval".into(),
                pedestrian: iv.pedestrian,
                start_frame: iv.start_frame,
                end_frame: iv.end_frame,
                start_t: iv.start_t,
                end_t: iv.end_t,
            },
        )?;
    }
    w.flush()?;
    Ok(w)
}

pub fn read_truth_from<R: Read>(r: R) -> Result<(RecordingMetadata, GroundTruth)> {
    let mut lines = Lines::new(BufReader::new(r));
    let (line, value) = read_header(&mut lines)?;
    let h: TruthHeaderWire = decode(line, value)?;
    let mut truth = GroundTruth {
        native_fps: h.native_fps,
        radius_gt: h.radius_gt,
        times: Vec::new(),
        ego: Vec::new(),
        pedestrians: Vec::new(),
        intervals: Vec::new(),
    };
    while let Some((line, tag, value)) = lines.next_value()? {
        match tag.as_str() {
            "frame" => {
                if !truth.intervals.is_empty() {
                    return Err(IoError::malformed(line, "frame after interval lines"));
                }
                let f: TruthFrameWire = decode(line, value)?;
                let expected = truth.times.len() as u64;
                if f.frame != expected {
                    return Err(IoError::NonContiguous {
                        line,
                        expected,
                        found: f.frame,
                    });
                }
                if let Some(&last) = truth.times.last() {
                    if !(f.t > last) {
                        return Err(IoError::NonMonotonic { line, t: f.t, last });
                    }
                }
                truth.times.push(f.t);
                truth.ego.push(WorldPoint::from_array(f.ego));
                for p in f.pedestrians {
                    let pos = WorldPoint::from_array(p.position);
                    match truth.pedestrians.iter_mut().find(|q| q.id == p.id) {
                        Some(q) => {
                            if q.first_frame + q.positions.len() as u64 != f.frame {
                                return Err(IoError::malformed(line, format!("pedestrian {} has a gap", p.id)));
                            }
                            q.positions.push(pos);
                        }
                        None => truth.pedestrians.push(PedestrianTruth {
                            id: p.id,
                            first_frame: f.frame,
                            positions: vec![pos],
                        }),
                    }
                }
            }
            "interval" => {
                let iv: IntervalWire = decode(line, value)?;
                truth.intervals.push(CollisionInterval {
                    pedestrian: iv.pedestrian,
                    start_frame: iv.start_frame,
                    end_frame: iv.end_frame,
                    start_t: iv.start_t,
                    end_t: iv.end_t,
                });
            }
            other => return Err(IoError::malformed(line, format!("unexpected line type {other:?}"))),
        }
    }
    truth.pedestrians.sort_by_key(|p| p.id);
    Ok((h.metadata, truth))
}

pub fn write_truth(path: &Path, metadata: &RecordingMetadata, truth: &GroundTruth) -> Result<()> {
    write_atomic(path, |w| write_truth_to(w, metadata, truth).map(|_| ()))
}

pub fn read_truth(path: &Path) -> Result<(RecordingMetadata, GroundTruth)> {
    read_truth_from(open(path)?)
}

// ------------------------------------------------------------------- alerts

/// Parameters the alert file was produced with; evaluation needs the
/// horizon to decide whether an alert preceded a collision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertsHeader {
    pub format_version: u32,
    pub radius: f64,
    pub urgent_ttc: f64,
    pub clear_frames: u32,
    pub horizon_seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct AlertsHeaderWire {
    #[serde(rename = "type")]
    kind: String,
    #[serde(flatten)]
    header: AlertsHeader,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventWire {
    #[serde(rename = "type")]
    kind: String,
    t: f64,
    track_id: u64,
    event: String,
    tier: Option<String>,
    ttc: Option<f64>,
    min_distance: Option<f64>,
}

fn event_from_wire(line: usize, e: EventWire) -> Result<AlertEvent<f64>> {
    let kind = match e.event.as_str() {
        "alert" => AlertKind::Alert,
        "escalate" => AlertKind::Escalate,
        "clear" => AlertKind::Clear,
        other => return Err(IoError::malformed(line, format!("unknown event kind {other:?}"))),
    };
    let tier = match e.tier.as_deref() {
        None => None,
        Some("warn") => Some(RiskTier::Warn),
        Some("urgent") => Some(RiskTier::Urgent),
        Some(other) => return Err(IoError::malformed(line, format!("unknown tier {other:?}"))),
    };
    if (kind == AlertKind::Clear) != tier.is_none() {
        return Err(IoError::malformed(line, "tier must be null exactly for clear events"));
    }
    Ok(AlertEvent {
        t: e.t,
        track_id: e.track_id,
        kind,
        tier,
        ttc: e.ttc,
        min_distance: e.min_distance,
    })
}

/// Streaming alert writer; rejects events that go back in time.
pub struct AlertWriter<W: Write> {
    inner: W,
    last_t: Option<f64>,
    line: usize,
}

impl<W: Write> AlertWriter<W> {
    pub fn new(mut inner: W, header: &AlertsHeader) -> Result<Self> {
        write_line(
            &mut inner,
            &AlertsHeaderWire {
                kind: "header".into(),
                header: header.clone(),
            },
        )?;
        Ok(Self {
            inner,
            last_t: None,
            line: 1,
        })
    }

    pub fn write_event(&mut self, e: &AlertEvent<f64>) -> Result<()> {
        self.line += 1;
        if let Some(last) = self.last_t {
            if e.t < last {
                return Err(IoError::NonMonotonic {
                    line: self.line,
                    t: e.t,
                    last,
                });
            }
        }
        self.last_t = Some(e.t);
        write_line(
            &mut self.inner,
            &EventWire {
                kind: "event".into(),
                t: e.t,
                track_id: e.track_id,
                event: e.kind.as_str().into(),
                tier: e.tier.map(|t| t.as_str().to_string()),
                ttc: e.ttc,
                min_distance: e.min_distance,
            },
        )
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_alerts_to<W: Write>(w: W, header: &AlertsHeader, events: &[AlertEvent<f64>]) -> Result<W> {
    let mut writer = AlertWriter::new(w, header)?;
    for e in events {
        writer.write_event(e)?;
    }
    writer.finish()
}

pub fn read_alerts_from<R: Read>(r: R) -> Result<(AlertsHeader, Vec<AlertEvent<f64>>)> {
    let mut lines = Lines::new(BufReader::new(r));
    let (line, value) = read_header(&mut lines)?;
    let header = decode::<AlertsHeaderWire>(line, value)?.header;
    let mut events: Vec<AlertEvent<f64>> = Vec::new();
    while let Some((line, tag, value)) = lines.next_value()? {
        if tag != "event" {
            return Err(IoError::malformed(line, format!("expected event, found {tag:?}")));
        }
        let e = event_from_wire(line, decode(line, value)?)?;
        if let Some(last) = events.last() {
            if e.t < last.t {
                return Err(IoError::NonMonotonic { line, t: e.t, last: last.t });
            }
        }
        events.push(e);
    }
    Ok((header, events))
}

pub fn write_alerts(path: &Path, header: &AlertsHeader, events: &[AlertEvent<f64>]) -> Result<()> {
    write_atomic(path, |w| write_alerts_to(w, header, events).map(|_| ()))
}

pub fn read_alerts(path: &Path) -> Result<(AlertsHeader, Vec<AlertEvent<f64>>)> {
    read_alerts_from(open(path)?)
}

// ---------------------------------------------------------- prediction dump

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredHeader {
    pub format_version: u32,
    pub step: f64,
    pub observe_window: usize,
    pub horizon: usize,
    pub predictor: String,
    pub smoothing: String,
}

/// One prediction instant for one track.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub track_id: u64,
    /// Time of the last observed sample the prediction starts from.
    pub origin_t: f64,
    /// Time of the frame at which the prediction was made.
    pub emitted_t: f64,
    pub points: Vec<Vec2<f64>>,
}

/// Downsampled semi-local history of a finished track.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackRecord {
    pub track_id: u64,
    pub first_frame: u64,
    pub end_t: f64,
    pub times: Vec<f64>,
    /// Window means; `None` for windows without a 3D sample.
    pub observed: Vec<Option<[f64; 3]>>,
    /// Observed history after the configured smoothing.
    pub smoothed: Vec<Option<[f64; 3]>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PredLine {
    Prediction(PredictionRecord),
    Track(TrackRecord),
}

impl PredLine {
    fn t(&self) -> f64 {
        match self {
            PredLine::Prediction(p) => p.emitted_t,
            PredLine::Track(t) => t.end_t,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PredHeaderWire {
    #[serde(rename = "type")]
    kind: String,
    #[serde(flatten)]
    header: PredHeader,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionWire {
    #[serde(rename = "type")]
    kind: String,
    track_id: u64,
    origin_t: f64,
    emitted_t: f64,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackWire {
    #[serde(rename = "type")]
    kind: String,
    track_id: u64,
    first_frame: u64,
    end_t: f64,
    times: Vec<f64>,
    observed: Vec<Option<[f64; 3]>>,
    smoothed: Vec<Option<[f64; 3]>>,
}

pub fn write_pred_to<W: Write>(mut w: W, header: &PredHeader, lines: &[PredLine]) -> Result<W> {
    write_line(
        &mut w,
        &PredHeaderWire {
            kind: "header".into(),
            header: header.clone(),
        },
    )?;
    for (i, l) in lines.iter().enumerate() {
        if i > 0 && l.t() < lines[i - 1].t() {
            return Err(IoError::NonMonotonic {
                line: i + 2,
                t: l.t(),
                last: lines[i - 1].t(),
            });
        }
        match l {
            PredLine::Prediction(p) => write_line(
                &mut w,
                &PredictionWire {
                    kind: "prediction".into(),
                    track_id: p.track_id,
                    origin_t: p.origin_t,
                    emitted_t: p.emitted_t,
                    points: p.points.iter().map(|v| [v.x, v.y]).collect(),
                },
            )?,
            PredLine::Track(t) => write_line(
                &mut w,
                &TrackWire {
                    kind: "track".into(),
                    track_id: t.track_id,
                    first_frame: t.first_frame,
                    end_t: t.end_t,
                    times: t.times.clone(),
                    observed: t.observed.clone(),
                    smoothed: t.smoothed.clone(),
                },
            )?,
        }
    }
    w.flush()?;
    Ok(w)
}

pub fn read_pred_from<R: Read>(r: R) -> Result<(PredHeader, Vec<PredLine>)> {
    let mut lines = Lines::new(BufReader::new(r));
    let (line, value) = read_header(&mut lines)?;
    let header = decode::<PredHeaderWire>(line, value)?.header;
    let mut out = Vec::new();
    while let Some((line, tag, value)) = lines.next_value()? {
        let l = match tag.as_str() {
            "prediction" => {
                let p: PredictionWire = decode(line, value)?;
                PredLine::Prediction(PredictionRecord {
                    track_id: p.track_id,
                    origin_t: p.origin_t,
                    emitted_t: p.emitted_t,
                    points: p.points.iter().map(|a| Vec2::new(a[0], a[1])).collect(),
                })
            }
            "track" => {
                let t: TrackWire = decode(line, value)?;
                if t.observed.len() != t.times.len() || t.smoothed.len() != t.times.len() {
                    return Err(IoError::malformed(line, "track arrays differ in length"));
                }
                PredLine::Track(TrackRecord {
                    track_id: t.track_id,
                    first_frame: t.first_frame,
                    end_t: t.end_t,
                    times: t.times,
                    observed: t.observed,
                    smoothed: t.smoothed,
                })
            }
            other => return Err(IoError::malformed(line, format!("unexpected line type {other:?}"))),
        };
        out.push(l);
    }
    Ok((header, out))
}

pub fn write_pred(path: &Path, header: &PredHeader, lines: &[PredLine]) -> Result<()> {
    write_atomic(path, |w| write_pred_to(w, header, lines).map(|_| ()))
}

pub fn read_pred(path: &Path) -> Result<(PredHeader, Vec<PredLine>)> {
    read_pred_from(open(path)?)
}

/// One compact JSON value per line.
pub fn write_json_lines(path: &Path, values: &[serde_json::Value]) -> Result<()> {
    write_atomic(path, |w| {
        for v in values {
            serde_json::to_writer(&mut *w, v)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

// ------------------------------------------------------------------ latency

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencySample {
    pub frame: u64,
    /// Processing time of the frame (ms).
    pub ms: f64,
    /// Frames waiting when processing of this frame started.
    pub queue_depth: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatencyHeaderWire {
    #[serde(rename = "type")]
    kind: String,
    format_version: u32,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatencyWire {
    #[serde(rename = "type")]
    kind: String,
    frame: u64,
    ms: f64,
    queue_depth: u64,
}

pub fn write_latency_to<W: Write>(mut w: W, rate: f64, samples: &[LatencySample]) -> Result<W> {
    write_line(
        &mut w,
        &LatencyHeaderWire {
            kind: "header".into(),
            format_version: FORMAT_VERSION,
            rate,
        },
    )?;
    for s in samples {
        write_line(
            &mut w,
            &LatencyWire {
                kind: "latency".into(),
                frame: s.frame,
                ms: s.ms,
                queue_depth: s.queue_depth,
            },
        )?;
    }
    w.flush()?;
    Ok(w)
}

pub fn read_latency_from<R: Read>(r: R) -> Result<(f64, Vec<LatencySample>)> {
    let mut lines = Lines::new(BufReader::new(r));
    let (line, value) = read_header(&mut lines)?;
    let h: LatencyHeaderWire = decode(line, value)?;
    let mut out = Vec::new();
    while let Some((line, tag, value)) = lines.next_value()? {
        if tag != "latency" {
            return Err(IoError::malformed(line, format!("expected latency, found {tag:?}")));
        }
        let s: LatencyWire = decode(line, value)?;
        out.push(LatencySample {
            frame: s.frame,
            ms: s.ms,
            queue_depth: s.queue_depth,
        });
    }
    Ok((h.rate, out))
}

pub fn write_latency(path: &Path, rate: f64, samples: &[LatencySample]) -> Result<()> {
    write_atomic(path, |w| write_latency_to(w, rate, samples).map(|_| ()))
}

pub fn read_latency(path: &Path) -> Result<(f64, Vec<LatencySample>)> {
    read_latency_from(open(path)?)
}

// ------------------------------------------------------------------ metrics

pub fn write_metrics_to<W: Write>(mut w: W, report: &MetricsReport) -> Result<W> {
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(w)
}

pub fn read_metrics_from<R: Read>(r: R) -> Result<MetricsReport> {
    let value: Value = serde_json::from_reader(r).map_err(|e| IoError::malformed(e.line(), e.to_string()))?;
    check_version(1, &value)?;
    decode(1, value)
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    write_atomic(path, |w| write_metrics_to(w, report).map(|_| ()))
}

pub fn read_metrics(path: &Path) -> Result<MetricsReport> {
    read_metrics_from(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, Preset, ScenarioSpec};

    fn sample() -> (RecordingHeader, Vec<FrameRecord<f64>>, GroundTruth) {
        let sc = generate(&ScenarioSpec::preset(Preset::Hard, 4, Some(100.0 / 30.0))).unwrap();
        (sc.header, sc.frames, sc.truth)
    }

    fn bytes_of_recording(h: &RecordingHeader, f: &[FrameRecord<f64>]) -> Vec<u8> {
        write_recording_to(Vec::new(), h, f).unwrap()
    }

    #[test]
    fn recording_round_trip_is_exact() {
        let (h, frames, _) = sample();
        assert_eq!(frames.len(), 100);
        let bytes = bytes_of_recording(&h, &frames);
        let (h2, f2) = read_recording_from(bytes.as_slice()).unwrap();
        assert_eq!(h, h2);
        assert_eq!(frames, f2);
        assert_eq!(bytes, bytes_of_recording(&h2, &f2));
    }

    #[test]
    fn header_only_recording() {
        let (h, _, _) = sample();
        let bytes = bytes_of_recording(&h, &[]);
        let (h2, f2) = read_recording_from(bytes.as_slice()).unwrap();
        assert_eq!(h, h2);
        assert!(f2.is_empty());
    }

    #[test]
    fn truncated_line_is_named() {
        let (h, frames, _) = sample();
        let mut bytes = bytes_of_recording(&h, &frames[..5]);
        bytes.truncate(bytes.len() - 10);
        let err = read_recording_from(bytes.as_slice()).unwrap_err();
        assert_eq!(err.line(), Some(6), "{err}");
        assert!(err.to_string().starts_with("line 6"));
    }

    #[test]
    fn corrupt_line_is_named() {
        let (h, frames, _) = sample();
        let text = String::from_utf8(bytes_of_recording(&h, &frames[..4])).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "{\"type\":\"frame\",\"frame\":2,";
        let bad = lines.join("\n") + "\n";
        assert_eq!(read_recording_from(bad.as_bytes()).unwrap_err().line(), Some(4));
    }

    #[test]
    fn version_and_sequence_checks() {
        let (h, frames, _) = sample();
        let text = String::from_utf8(bytes_of_recording(&h, &frames[..3])).unwrap();
        let v2 = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(read_recording_from(v2.as_bytes()), Err(IoError::Version { found: 2, .. })));

        let mut skipped = frames[..3].to_vec();
        skipped.remove(1);
        assert!(matches!(
            write_recording_to(Vec::new(), &h, &skipped),
            Err(IoError::NonContiguous { .. })
        ));
        let mut lines: Vec<&str> = text.lines().collect();
        lines.remove(2);
        let gap = lines.join("\n") + "\n";
        assert!(matches!(
            read_recording_from(gap.as_bytes()),
            Err(IoError::NonContiguous { line: 3, .. })
        ));
    }

    #[test]
    fn invalid_detections_rejected() {
        let (h, frames, _) = sample();
        let mut f = frames[0].clone();
        f.frame = 0;
        f.detections = vec![Detection {
            bbox: BBox {
                u_min: 10.0,
                v_min: 10.0,
                u_max: 20.0,
                v_max: 30.0,
            },
            confidence: 1.5,
            center_depth: Some(3.0),
        }];
        let bytes = write_recording_to(Vec::new(), &h, &[f]).unwrap();
        assert!(read_recording_from(bytes.as_slice()).is_err());
    }

    #[test]
    fn truth_round_trip() {
        let (h, _, truth) = sample();
        let bytes = write_truth_to(Vec::new(), &h.metadata, &truth).unwrap();
        let (m, t2) = read_truth_from(bytes.as_slice()).unwrap();
        assert_eq!(m, h.metadata);
        assert_eq!(t2, truth);
    }

    #[test]
    fn alerts_round_trip_and_order() {
        let header = AlertsHeader {
            format_version: FORMAT_VERSION,
            radius: 0.5,
            urgent_ttc: 1.6,
            clear_frames: 8,
            horizon_seconds: 4.8,
        };
        let bytes = write_alerts_to(Vec::new(), &header, &[]).unwrap();
        assert_eq!(String::from_utf8(bytes.clone()).unwrap().lines().count(), 1);
        assert_eq!(read_alerts_from(bytes.as_slice()).unwrap(), (header.clone(), vec![]));

        let warn = AlertEvent {
            t: 1.0,
            track_id: 3,
            kind: AlertKind::Alert,
            tier: Some(RiskTier::Warn),
            ttc: Some(2.4000000000000004),
            min_distance: Some(0.1),
        };
        let urgent = AlertEvent {
            t: 1.4,
            kind: AlertKind::Escalate,
            tier: Some(RiskTier::Urgent),
            ttc: Some(1.6),
            ..warn
        };
        let bytes = write_alerts_to(Vec::new(), &header, &[warn, urgent]).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().contains("\"event\":\"alert\""));
        assert!(text.lines().nth(2).unwrap().contains("\"event\":\"escalate\""));
        assert_eq!(read_alerts_from(bytes.as_slice()).unwrap().1, vec![warn, urgent]);
        assert!(write_alerts_to(Vec::new(), &header, &[urgent, warn]).is_err());
    }

    #[test]
    fn pred_round_trip() {
        let header = PredHeader {
            format_version: FORMAT_VERSION,
            step: 0.4,
            observe_window: 6,
            horizon: 2,
            predictor: "cv".into(),
            smoothing: "causal".into(),
        };
        let lines = vec![
            PredLine::Prediction(PredictionRecord {
                track_id: 0,
                origin_t: 0.1,
                emitted_t: 0.3,
                points: vec![Vec2::new(1.0, 0.1), Vec2::new(0.5, 1.0 / 3.0)],
            }),
            PredLine::Track(TrackRecord {
                track_id: 0,
                first_frame: 0,
                end_t: 2.0,
                times: vec![0.1, 0.5],
                observed: vec![Some([1.0, 2.0, -0.8]), None],
                smoothed: vec![Some([1.0, 2.0, -0.8]), None],
            }),
        ];
        let bytes = write_pred_to(Vec::new(), &header, &lines).unwrap();
        assert_eq!(read_pred_from(bytes.as_slice()).unwrap(), (header, lines));
    }

    #[test]
    fn latency_round_trip() {
        let s = vec![
            LatencySample {
                frame: 0,
                ms: 0.123,
                queue_depth: 0,
            },
            LatencySample {
                frame: 1,
                ms: 40.5,
                queue_depth: 2,
            },
        ];
        let bytes = write_latency_to(Vec::new(), 1.0, &s).unwrap();
        assert_eq!(read_latency_from(bytes.as_slice()).unwrap(), (1.0, s));
    }

    #[test]
    fn metrics_document_is_total() {
        let report = MetricsReport::default();
        let bytes = write_metrics_to(Vec::new(), &report).unwrap();
        let value: Value = serde_json::from_slice(&bytes).unwrap();
        for key in MetricsReport::KEYS {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert!(value["precision"].is_null());
        assert_eq!(read_metrics_from(bytes.as_slice()).unwrap(), report);
    }

    #[test]
    fn atomic_write_leaves_nothing_on_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.alerts");
        let r = write_atomic(&path, |_| Err(IoError::MissingHeader));
        assert!(r.is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
