//! Object-level track data: ball trajectory, player poses, scoreboard readings
//! and scene labels for one match video.
//!
//! Coordinates are image pixels with the origin at the top-left corner and
//! `y` growing downward.

mod format;
mod repair;
mod validate;

pub use format::{parse_track_file, write_track_file, IngestIssue, IngestIssueKind, IngestReport, ParsedTrack};
pub use repair::{interpolate_ball, DEFAULT_MAX_GAP};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("track file has no `meta` record")]
    MissingHeader,
    #[error("line {line}: frame {frame} is outside the video (frame_count {frame_count})")]
    FrameOutOfRange { line: usize, frame: u32, frame_count: u32 },
    #[error("line {line}: duplicate {kind} record for frame {frame}")]
    DuplicateFrame { line: usize, kind: &'static str, frame: u32 },
    #[error("reading track file: {0}")]
    Io(#[from] std::io::Error),
}

impl TrackError {
    pub fn code(&self) -> &'static str {
        match self {
            TrackError::MissingHeader => "MissingHeader",
            TrackError::FrameOutOfRange { .. } => "FrameOutOfRange",
            TrackError::DuplicateFrame { .. } => "DuplicateFrame",
            TrackError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub frame_count: u32,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
}

/// What an object-level sample refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Ball,
    PlayerBox,
    Keypoint,
    Score,
    Scene,
}

/// The flat `(object, x, y, t)` view of any ingested record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSample {
    pub object: ObjectKind,
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSample {
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl BallSample {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Ball positions ordered by frame. Frames may be missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BallTrack {
    samples: Vec<BallSample>,
}

impl BallTrack {
    /// Builds a track from samples, sorting them by frame. Later duplicates of
    /// a frame are discarded.
    pub fn new(mut samples: Vec<BallSample>) -> Self {
        samples.sort_by_key(|s| s.frame);
        samples.dedup_by_key(|s| s.frame);
        Self { samples }
    }

    pub fn samples(&self) -> &[BallSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, frame: u32) -> Option<&BallSample> {
        self.samples
            .binary_search_by_key(&frame, |s| s.frame)
            .ok()
            .map(|i| &self.samples[i])
    }

    /// Samples with `start <= frame <= end`.
    pub fn window(&self, start: u32, end: u32) -> BallTrack {
        let lo = self.samples.partition_point(|s| s.frame < start);
        let hi = self.samples.partition_point(|s| s.frame <= end);
        BallTrack {
            samples: self.samples[lo..hi].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// One detected person: bounding box plus the keypoints used for hit detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub neck: Keypoint,
    pub lhand: Option<Keypoint>,
    pub rhand: Option<Keypoint>,
}

impl PoseBox {
    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn hands(&self) -> impl Iterator<Item = &Keypoint> {
        self.lhand.iter().chain(self.rhand.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    pub frame: u32,
    pub boxes: Vec<PoseBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReading {
    pub frame: u32,
    pub score_a: u32,
    pub score_b: u32,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneLabel {
    pub frame: u32,
    pub in_play: bool,
}

/// Table geometry in image space, supplied by configuration rather than detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CourtRegion {
    pub table: [Point; 4],
    pub net_x: f64,
    pub table_y_min: f64,
    pub table_y_max: f64,
}

impl CourtRegion {
    /// Horizontal extent of the table quadrilateral.
    pub fn table_x_range(&self) -> (f64, f64) {
        let xs = self.table.iter().map(|p| p.x);
        let lo = xs.clone().fold(f64::INFINITY, f64::min);
        let hi = xs.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn in_table_band(&self, y: f64) -> bool {
        y >= self.table_y_min && y <= self.table_y_max
    }

    /// True when the quadrilateral (in either winding order) is convex and
    /// non-degenerate.
    pub fn is_convex(&self) -> bool {
        let mut sign = 0.0f64;
        for i in 0..4 {
            let a = self.table[i];
            let b = self.table[(i + 1) % 4];
            let c = self.table[(i + 2) % 4];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if cross == 0.0 {
                return false;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }
}

/// Every object-level record ingested for one match video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSet {
    pub meta: VideoMeta,
    pub ball: BallTrack,
    pub poses: Vec<PoseFrame>,
    pub scores: Vec<ScoreReading>,
    pub scenes: Vec<SceneLabel>,
    pub court: Option<CourtRegion>,
}

impl TrackSet {
    pub fn new(meta: VideoMeta) -> Self {
        Self {
            meta,
            ball: BallTrack::default(),
            poses: Vec::new(),
            scores: Vec::new(),
            scenes: Vec::new(),
            court: None,
        }
    }

    /// Pose frames with `start <= frame <= end`.
    pub fn poses_in(&self, start: u32, end: u32) -> &[PoseFrame] {
        let lo = self.poses.partition_point(|p| p.frame < start);
        let hi = self.poses.partition_point(|p| p.frame <= end);
        &self.poses[lo..hi]
    }

    /// Flattens the track set into object-level samples.
    pub fn object_samples(&self) -> Vec<ObjectSample> {
        let mut out = Vec::new();
        for s in self.ball.samples() {
            out.push(ObjectSample {
                object: ObjectKind::Ball,
                frame: s.frame,
                x: s.x,
                y: s.y,
                confidence: s.confidence,
            });
        }
        for pf in &self.poses {
            for b in &pf.boxes {
                out.push(ObjectSample {
                    object: ObjectKind::PlayerBox,
                    frame: pf.frame,
                    x: b.cx,
                    y: b.cy,
                    confidence: b.neck.confidence,
                });
                for kp in std::iter::once(&b.neck).chain(b.hands()) {
                    out.push(ObjectSample {
                        object: ObjectKind::Keypoint,
                        frame: pf.frame,
                        x: kp.x,
                        y: kp.y,
                        confidence: kp.confidence,
                    });
                }
            }
        }
        for r in &self.scores {
            out.push(ObjectSample {
                object: ObjectKind::Score,
                frame: r.frame,
                x: r.score_a as f64,
                y: r.score_b as f64,
                confidence: r.confidence,
            });
        }
        for l in &self.scenes {
            out.push(ObjectSample {
                object: ObjectKind::Scene,
                frame: l.frame,
                x: if l.in_play { 1.0 } else { 0.0 },
                y: 0.0,
                confidence: 1.0,
            });
        }
        out
    }
}
