//! Anchor and annotation store.
//!
//! A match starts from a base state (the detected rallies and anchors) and
//! changes only through mutations appended to a log. Replaying the log over
//! the base reproduces the live state.

mod export;
mod file;
mod mutation;
mod query;

pub use export::{export, import, ExportFormat, ExportRecord};
pub use file::{read_log, FileSink, Repository};
pub use mutation::{apply, replay, Applied, LogSink, MatchStore, Mutation, MutationKind, MutationRecord};
pub use query::{query_rallies, ContextPredicate, QueryRule};

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EventType;
use crate::score::RallySpan;

#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("anchor `{0}` not found")]
    NotFound(String),
    #[error("anchor `{0}` is deleted")]
    Deleted(String),
    #[error("frames [{start}, {end}] fall outside rally bounds [{rally_start}, {rally_end}]")]
    OutOfRallyBounds { start: i64, end: i64, rally_start: u32, rally_end: u32 },
    #[error("rally `{0}` not found")]
    RallyNotFound(String),
    #[error("anchor `{0}` is already deleted")]
    AlreadyDeleted(String),
    #[error("unknown context type `{0}`")]
    UnknownContextType(String),
    #[error("value `{value}` is not in the vocabulary for `{context_type}`")]
    ValueNotInVocabulary { context_type: String, value: String },
    #[error("event `{0}` not found")]
    EventNotFound(String),
    #[error("match `{0}` not found")]
    MatchNotFound(String),
    #[error("corrupt log at sequence {seq}: {reason}")]
    CorruptLog { seq: u64, reason: String },
    #[error("query rule sets no field")]
    EmptyRule,
    #[error("malformed record on line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound(_) => "NotFound",
            StoreError::Deleted(_) => "Deleted",
            StoreError::OutOfRallyBounds { .. } => "OutOfRallyBounds",
            StoreError::RallyNotFound(_) => "RallyNotFound",
            StoreError::AlreadyDeleted(_) => "AlreadyDeleted",
            StoreError::UnknownContextType(_) => "UnknownContextType",
            StoreError::ValueNotInVocabulary { .. } => "ValueNotInVocabulary",
            StoreError::EventNotFound(_) => "EventNotFound",
            StoreError::MatchNotFound(_) => "MatchNotFound",
            StoreError::CorruptLog { .. } => "CorruptLog",
            StoreError::EmptyRule => "EmptyRule",
            StoreError::BadRecord { .. } => "BadRecord",
            StoreError::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnchorStatus {
    Uncalibrated,
    Calibrated,
    Deleted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    Detected,
    UserAdded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAnchor {
    pub anchor_id: String,
    pub rally_id: String,
    pub event_type: EventType,
    pub frame_start: u32,
    pub frame_end: u32,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub status: AnchorStatus,
    pub origin: Origin,
}

impl EventAnchor {
    pub fn is_live(&self) -> bool {
        self.status != AnchorStatus::Deleted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextAnnotation {
    pub annotation_id: String,
    pub context_type: String,
    pub event_id: String,
    pub value: String,
    pub author: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchInfo {
    pub match_id: String,
    pub frame_count: u32,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub video_url: Option<String>,
}

/// Allowed values per context type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary(pub BTreeMap<String, Vec<String>>);

impl Vocabulary {
    pub fn values(&self, context_type: &str) -> Option<&[String]> {
        self.0.get(context_type).map(Vec::as_slice)
    }

    pub fn check(&self, context_type: &str, value: &str) -> Result<(), StoreError> {
        let values = self
            .values(context_type)
            .ok_or_else(|| StoreError::UnknownContextType(context_type.to_string()))?;
        if values.iter().any(|v| v == value) {
            Ok(())
        } else {
            Err(StoreError::ValueNotInVocabulary {
                context_type: context_type.to_string(),
                value: value.to_string(),
            })
        }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        let entry = |k: &str, vs: &[&str]| (k.to_string(), vs.iter().map(|v| v.to_string()).collect());
        let effect = ["direct_point", "advantage", "neutral", "disadvantage", "direct_loss"];
        Vocabulary(BTreeMap::from([
            entry("stroke_type", &["serve", "push", "flick", "loop", "drive", "chop", "block", "smash", "lob", "other"]),
            entry("spin_type", &["topspin", "backspin", "sidespin", "no_spin"]),
            entry("serve_type", &["pendulum", "reverse_pendulum", "tomahawk", "backhand", "shovel", "other"]),
            entry("serve_effect", &effect),
            entry("receive_type", &["push", "flick", "loop", "block", "drop_shot", "other"]),
            entry("receive_effect", &effect),
            entry("rally_tactic", &["serve_and_attack", "receive_and_attack", "stalemate", "other"]),
        ]))
    }
}

/// Everything known about one match at a point in its log.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchState {
    pub info: MatchInfo,
    /// Ordered by start frame.
    pub rallies: Vec<RallySpan>,
    pub anchors: BTreeMap<String, EventAnchor>,
    /// Keyed by `(event_id, context_type)`; at most one per key.
    pub annotations: BTreeMap<(String, String), ContextAnnotation>,
}

fn max_suffix<'a>(ids: impl Iterator<Item = &'a String>, marker: &str) -> u64 {
    ids.filter_map(|id| id.rsplit_once(marker)?.1.parse::<u64>().ok())
        .max()
        .unwrap_or(0)
}

impl MatchState {
    pub fn new(info: MatchInfo) -> Self {
        Self { info, rallies: Vec::new(), anchors: BTreeMap::new(), annotations: BTreeMap::new() }
    }

    pub fn rally(&self, rally_id: &str) -> Option<&RallySpan> {
        self.rallies.iter().find(|r| r.rally_id == rally_id)
    }

    /// Anchors of one rally ordered by frame, then id.
    pub fn anchors_in(&self, rally_id: &str, include_deleted: bool) -> Vec<&EventAnchor> {
        let mut v: Vec<&EventAnchor> = self
            .anchors
            .values()
            .filter(|a| a.rally_id == rally_id && (include_deleted || a.is_live()))
            .collect();
        v.sort_by(|a, b| (a.frame_start, &a.anchor_id).cmp(&(b.frame_start, &b.anchor_id)));
        v
    }

    /// Live HIT anchors in the rally.
    pub fn strokes(&self, rally_id: &str) -> usize {
        self.anchors
            .values()
            .filter(|a| a.rally_id == rally_id && a.is_live() && a.event_type == EventType::Hit)
            .count()
    }

    /// True for rallies and for anchors that are not deleted.
    pub fn is_live_event(&self, event_id: &str) -> bool {
        self.anchors.get(event_id).map(EventAnchor::is_live).unwrap_or(false) || self.rally(event_id).is_some()
    }

    /// Annotations whose event is still live.
    pub fn live_annotations(&self) -> impl Iterator<Item = &ContextAnnotation> {
        self.annotations.values().filter(|a| self.is_live_event(&a.event_id))
    }

    pub fn anchor_id(&self, n: u64) -> String {
        format!("{}-a{n:05}", self.info.match_id)
    }

    pub fn annotation_id(&self, n: u64) -> String {
        format!("{}-n{n:05}", self.info.match_id)
    }

    pub fn next_anchor_id(&self) -> String {
        self.anchor_id(max_suffix(self.anchors.keys(), "-a") + 1)
    }

    pub fn next_annotation_id(&self) -> String {
        self.annotation_id(max_suffix(self.annotations.values().map(|a| &a.annotation_id), "-n") + 1)
    }
}

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// Always returns the same instant.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}
