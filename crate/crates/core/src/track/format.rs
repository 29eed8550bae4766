//! Line-oriented track file format.
//!
//! Each non-empty line is one record: a record kind followed by
//! whitespace-separated `key=value` pairs. Multi-component values are
//! comma-separated. Lines starting with `#` are comments.
//!
//! ```text
//! meta frame_count=4000 fps=25 width=1280 height=720
//! court quad=340,460,940,460,940,480,340,480 net_x=640 table_y_min=450 table_y_max=490
//! ball frame=12 x=402.5 y=388 conf=0.93
//! pose frame=12 box=260,400,100,240 neck=260,330,0.9 rhand=300,390,0.8
//! score frame=12 a=3 b=2 conf=0.97
//! scene frame=12 in_play=0.91
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::Serialize;

use super::{
    BallSample, BallTrack, CourtRegion, Keypoint, Point, PoseBox, PoseFrame, SceneLabel,
    ScoreReading, TrackError, TrackSet, VideoMeta,
};

/// Scene probabilities at or above this value are read as in-play.
pub const SCENE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestIssueKind {
    Malformed,
    UnknownKind,
    MissingNeck,
    DuplicateRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestIssue {
    pub line: usize,
    pub kind: IngestIssueKind,
    pub message: String,
}

/// Non-fatal problems found while reading a track file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub issues: Vec<IngestIssue>,
}

impl IngestReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, line: usize, kind: IngestIssueKind, message: impl Into<String>) {
        self.issues.push(IngestIssue { line, kind, message: message.into() });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrack {
    pub track_set: TrackSet,
    pub report: IngestReport,
}

struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn parse(tokens: impl Iterator<Item = &'a str>) -> Result<Self, String> {
        let mut pairs = Vec::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{tok}`"))?;
            pairs.push((k, v));
        }
        Ok(Self { pairs })
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn required(&self, key: &str) -> Result<&'a str, String> {
        self.raw(key).ok_or_else(|| format!("missing key `{key}`"))
    }

    fn f64(&self, key: &str) -> Result<f64, String> {
        let v = self.required(key)?;
        let x: f64 = v.parse().map_err(|_| format!("`{key}`: not a number: `{v}`"))?;
        if !x.is_finite() {
            return Err(format!("`{key}`: not finite"));
        }
        Ok(x)
    }

    fn u32(&self, key: &str) -> Result<u32, String> {
        let v = self.required(key)?;
        v.parse().map_err(|_| format!("`{key}`: not a non-negative integer: `{v}`"))
    }

    fn list(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>, String> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let parts: Vec<f64> = v
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| format!("`{key}`: bad number list `{v}`"))?;
        if parts.len() != n {
            return Err(format!("`{key}`: expected {n} values, got {}", parts.len()));
        }
        if parts.iter().any(|x| !x.is_finite()) {
            return Err(format!("`{key}`: not finite"));
        }
        Ok(Some(parts))
    }

    fn keypoint(&self, key: &str) -> Result<Option<Keypoint>, String> {
        Ok(self
            .list(key, 3)?
            .map(|v| Keypoint { x: v[0], y: v[1], confidence: v[2] }))
    }
}

enum Record {
    Meta(VideoMeta),
    Court(CourtRegion),
    Ball(BallSample),
    Pose { frame: u32, pose: Option<PoseBox> },
    Score(ScoreReading),
    Scene(SceneLabel),
}

fn parse_record(kind: &str, f: &Fields<'_>) -> Result<Option<Record>, String> {
    let rec = match kind {
        "meta" => Record::Meta(VideoMeta {
            frame_count: f.u32("frame_count")?,
            fps: f.f64("fps")?,
            width: f.u32("width")?,
            height: f.u32("height")?,
        }),
        "court" => {
            let q = f.list("quad", 8)?.ok_or("missing key `quad`")?;
            Record::Court(CourtRegion {
                table: [
                    Point::new(q[0], q[1]),
                    Point::new(q[2], q[3]),
                    Point::new(q[4], q[5]),
                    Point::new(q[6], q[7]),
                ],
                net_x: f.f64("net_x")?,
                table_y_min: f.f64("table_y_min")?,
                table_y_max: f.f64("table_y_max")?,
            })
        }
        "ball" => Record::Ball(BallSample {
            frame: f.u32("frame")?,
            x: f.f64("x")?,
            y: f.f64("y")?,
            confidence: f.f64("conf")?,
        }),
        "pose" => {
            let frame = f.u32("frame")?;
            let b = f.list("box", 4)?.ok_or("missing key `box`")?;
            let lhand = f.keypoint("lhand")?;
            let rhand = f.keypoint("rhand")?;
            let pose = f.keypoint("neck")?.map(|neck| PoseBox {
                cx: b[0],
                cy: b[1],
                w: b[2],
                h: b[3],
                neck,
                lhand,
                rhand,
            });
            Record::Pose { frame, pose }
        }
        "score" => Record::Score(ScoreReading {
            frame: f.u32("frame")?,
            score_a: f.u32("a")?,
            score_b: f.u32("b")?,
            confidence: f.f64("conf")?,
        }),
        "scene" => Record::Scene(SceneLabel {
            frame: f.u32("frame")?,
            in_play: f.f64("in_play")? >= SCENE_THRESHOLD,
        }),
        _ => return Ok(None),
    };
    Ok(Some(rec))
}

/// Reads a track file. Malformed lines are skipped and listed in the report;
/// a missing `meta` record, an out-of-range frame or a duplicated frame is fatal.
pub fn parse_track_file<R: BufRead>(reader: R) -> Result<ParsedTrack, TrackError> {
    let mut report = IngestReport::default();
    let mut meta: Option<VideoMeta> = None;
    let mut court: Option<CourtRegion> = None;
    let mut balls: Vec<(usize, BallSample)> = Vec::new();
    let mut poses: Vec<(usize, u32, PoseBox)> = Vec::new();
    let mut scores: Vec<(usize, ScoreReading)> = Vec::new();
    let mut scenes: Vec<(usize, SceneLabel)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let kind = tokens.next().unwrap_or_default();
        let fields = match Fields::parse(tokens) {
            Ok(f) => f,
            Err(msg) => {
                report.push(line_no, IngestIssueKind::Malformed, msg);
                continue;
            }
        };
        match parse_record(kind, &fields) {
            Ok(None) => report.push(
                line_no,
                IngestIssueKind::UnknownKind,
                format!("unknown record kind `{kind}`"),
            ),
            Err(msg) => report.push(line_no, IngestIssueKind::Malformed, format!("{kind}: {msg}")),
            Ok(Some(rec)) => match rec {
                Record::Meta(m) => {
                    if meta.is_some() {
                        report.push(line_no, IngestIssueKind::DuplicateRecord, "second `meta` record ignored");
                    } else {
                        meta = Some(m);
                    }
                }
                Record::Court(c) => {
                    if court.is_some() {
                        report.push(line_no, IngestIssueKind::DuplicateRecord, "second `court` record ignored");
                    } else {
                        court = Some(c);
                    }
                }
                Record::Ball(b) => balls.push((line_no, b)),
                Record::Pose { frame, pose: Some(p) } => poses.push((line_no, frame, p)),
                Record::Pose { frame, pose: None } => report.push(
                    line_no,
                    IngestIssueKind::MissingNeck,
                    format!("pose at frame {frame} has no neck keypoint; box rejected"),
                ),
                Record::Score(s) => scores.push((line_no, s)),
                Record::Scene(s) => scenes.push((line_no, s)),
            },
        }
    }

    let meta = meta.ok_or(TrackError::MissingHeader)?;
    let in_range = |line: usize, frame: u32| -> Result<(), TrackError> {
        if frame >= meta.frame_count {
            Err(TrackError::FrameOutOfRange { line, frame, frame_count: meta.frame_count })
        } else {
            Ok(())
        }
    };

    for (line, b) in &balls {
        in_range(*line, b.frame)?;
    }
    for (line, frame, _) in &poses {
        in_range(*line, *frame)?;
    }
    for (line, s) in &scores {
        in_range(*line, s.frame)?;
    }
    for (line, s) in &scenes {
        in_range(*line, s.frame)?;
    }

    let ball = unique_by_frame(balls, "ball", |b| b.frame)?;
    let scores = unique_by_frame(scores, "score", |s| s.frame)?;
    let scenes = unique_by_frame(scenes, "scene", |s| s.frame)?;

    poses.sort_by_key(|(line, frame, _)| (*frame, *line));
    let mut pose_frames: Vec<PoseFrame> = Vec::new();
    for (_, frame, p) in poses {
        match pose_frames.last_mut() {
            Some(pf) if pf.frame == frame => pf.boxes.push(p),
            _ => pose_frames.push(PoseFrame { frame, boxes: vec![p] }),
        }
    }

    Ok(ParsedTrack {
        track_set: TrackSet {
            meta,
            ball: BallTrack::new(ball),
            poses: pose_frames,
            scores,
            scenes,
            court,
        },
        report,
    })
}

fn unique_by_frame<T>(
    mut items: Vec<(usize, T)>,
    kind: &'static str,
    frame: impl Fn(&T) -> u32,
) -> Result<Vec<T>, TrackError> {
    items.sort_by_key(|(line, item)| (frame(item), *line));
    let mut seen = HashSet::with_capacity(items.len());
    let mut out = Vec::with_capacity(items.len());
    for (line, item) in items {
        let f = frame(&item);
        if !seen.insert(f) {
            return Err(TrackError::DuplicateFrame { line, kind, frame: f });
        }
        out.push(item);
    }
    Ok(out)
}

fn push_kp(line: &mut String, key: &str, kp: &Keypoint) {
    let _ = write!(line, " {key}={},{},{}", kp.x, kp.y, kp.confidence);
}

/// Writes a track set in the canonical record order. Parsing the output
/// yields an identical track set.
pub fn write_track_file<W: Write>(ts: &TrackSet, mut out: W) -> std::io::Result<()> {
    let m = &ts.meta;
    writeln!(
        out,
        "meta frame_count={} fps={} width={} height={}",
        m.frame_count, m.fps, m.width, m.height
    )?;
    if let Some(c) = &ts.court {
        let q = &c.table;
        writeln!(
            out,
            "court quad={},{},{},{},{},{},{},{} net_x={} table_y_min={} table_y_max={}",
            q[0].x, q[0].y, q[1].x, q[1].y, q[2].x, q[2].y, q[3].x, q[3].y,
            c.net_x, c.table_y_min, c.table_y_max
        )?;
    }
    for b in ts.ball.samples() {
        writeln!(out, "ball frame={} x={} y={} conf={}", b.frame, b.x, b.y, b.confidence)?;
    }
    let mut line = String::new();
    for pf in &ts.poses {
        for p in &pf.boxes {
            line.clear();
            let _ = write!(line, "pose frame={} box={},{},{},{}", pf.frame, p.cx, p.cy, p.w, p.h);
            push_kp(&mut line, "neck", &p.neck);
            if let Some(h) = &p.lhand {
                push_kp(&mut line, "lhand", h);
            }
            if let Some(h) = &p.rhand {
                push_kp(&mut line, "rhand", h);
            }
            writeln!(out, "{line}")?;
        }
    }
    for s in &ts.scores {
        writeln!(out, "score frame={} a={} b={} conf={}", s.frame, s.score_a, s.score_b, s.confidence)?;
    }
    for s in &ts.scenes {
        writeln!(out, "scene frame={} in_play={}", s.frame, u8::from(s.in_play))?;
    }
    Ok(())
}
