//! Detection quality against ground truth.
//!
//! Detected and true events are paired greedily, closest frame distance first,
//! among pairs of the same type at most `g` frames apart. Each event is used
//! at most once.

use serde::{Deserialize, Serialize};

use crate::events::{EventType, RawEvent};
use crate::score::RallySpan;
use crate::store::{EventAnchor, MatchState};
use crate::synth::{GroundTruth, TruthEvent, TruthRally};

/// Default matching tolerance in frames.
pub const DEFAULT_TOLERANCE: u32 = 3;

/// The part of an event the metrics look at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventPoint {
    pub event_type: EventType,
    pub frame: u32,
    pub x: f64,
    pub y: f64,
}

impl From<&RawEvent> for EventPoint {
    fn from(e: &RawEvent) -> Self {
        Self { event_type: e.event_type, frame: e.frame, x: e.x, y: e.y }
    }
}

impl From<&TruthEvent> for EventPoint {
    fn from(e: &TruthEvent) -> Self {
        Self { event_type: e.event_type, frame: e.frame, x: e.x, y: e.y }
    }
}

impl From<&EventAnchor> for EventPoint {
    fn from(a: &EventAnchor) -> Self {
        Self {
            event_type: a.event_type,
            frame: a.frame_start,
            x: a.x.unwrap_or(f64::NAN),
            y: a.y.unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(detected index, truth index)` pairs, ordered by truth index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_detected: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
}

pub fn match_events(detected: &[EventPoint], truth: &[EventPoint], tolerance: u32) -> Matching {
    let mut candidates = Vec::new();
    for (d, de) in detected.iter().enumerate() {
        for (t, te) in truth.iter().enumerate() {
            let gap = de.frame.abs_diff(te.frame);
            if de.event_type == te.event_type && gap <= tolerance {
                candidates.push((gap, te.frame, de.frame, d, t));
            }
        }
    }
    candidates.sort_by_key(|&(gap, tf, df, _, _)| (gap, tf, df));
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, _, _, d, t) in candidates {
        if !used_d[d] && !used_t[t] {
            used_d[d] = true;
            used_t[t] = true;
            pairs.push((d, t));
        }
    }
    pairs.sort_by_key(|p| p.1);
    let unmatched = |used: &[bool]| used.iter().enumerate().filter(|(_, u)| !**u).map(|(i, _)| i).collect();
    Matching { unmatched_detected: unmatched(&used_d), unmatched_truth: unmatched(&used_t), pairs }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// One value per matched pair, ordered by truth index.
    pub errors: Vec<f64>,
    /// Zero when nothing matched.
    pub mean: f64,
    pub max: f64,
    pub unmatched_detected: usize,
    pub unmatched_truth: usize,
}

impl ErrorStats {
    fn from_errors(errors: Vec<f64>, m: &Matching) -> Self {
        let mean = if errors.is_empty() { 0.0 } else { errors.iter().sum::<f64>() / errors.len() as f64 };
        let max = errors.iter().copied().fold(0.0, f64::max);
        Self { errors, mean, max, unmatched_detected: m.unmatched_detected.len(), unmatched_truth: m.unmatched_truth.len() }
    }
}

/// Absolute frame difference per matched event.
pub fn temporal_error(detected: &[EventPoint], truth: &[EventPoint], tolerance: u32) -> ErrorStats {
    let m = match_events(detected, truth, tolerance);
    let errors = m.pairs.iter().map(|&(d, t)| detected[d].frame.abs_diff(truth[t].frame) as f64).collect();
    ErrorStats::from_errors(errors, &m)
}

/// Euclidean pixel distance per matched event.
pub fn spatial_error(detected: &[EventPoint], truth: &[EventPoint], tolerance: u32) -> ErrorStats {
    let m = match_events(detected, truth, tolerance);
    let errors = m
        .pairs
        .iter()
        .map(|&(d, t)| (detected[d].x - truth[t].x).hypot(detected[d].y - truth[t].y))
        .collect();
    ErrorStats::from_errors(errors, &m)
}

/// `(precision, recall)`. An empty detection set has precision 0 unless the
/// truth is empty too; an empty truth set has recall 1.
pub fn precision_recall(detected: &[EventPoint], truth: &[EventPoint], tolerance: u32) -> (f64, f64) {
    let matched = match_events(detected, truth, tolerance).pairs.len() as f64;
    let precision = match (detected.len(), truth.len()) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (n, _) => matched / n as f64,
    };
    let recall = if truth.is_empty() { 1.0 } else { matched / truth.len() as f64 };
    (precision, recall)
}

/// Detection and segmentation quality of a whole match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tolerance: u32,
    pub truth_events: usize,
    pub detected_events: usize,
    pub precision: f64,
    pub recall: f64,
    pub temporal: ErrorStats,
    pub spatial: ErrorStats,
    pub truth_rallies: usize,
    pub detected_rallies: usize,
    /// Truth rallies whose detected counterpart has identical start and end frames.
    pub exact_boundaries: usize,
    /// Truth rallies whose counterpart also has the right winner.
    pub exact_with_winner: usize,
    pub correct_server: usize,
}

impl EvalReport {
    /// Share of truth rallies recovered with exact boundaries and winner.
    pub fn rally_accuracy(&self) -> f64 {
        if self.truth_rallies == 0 {
            1.0
        } else {
            self.exact_with_winner as f64 / self.truth_rallies as f64
        }
    }
}

/// The detected rally overlapping `r` the most, if any overlaps at all.
fn counterpart<'a>(state: &'a MatchState, r: &TruthRally) -> Option<&'a RallySpan> {
    state
        .rallies
        .iter()
        .map(|d| {
            let lo = d.frame_start.max(r.frame_start);
            let hi = d.frame_end.min(r.frame_end);
            (d, (hi + 1).saturating_sub(lo))
        })
        .filter(|(_, overlap)| *overlap > 0)
        .max_by_key(|(d, overlap)| (*overlap, std::cmp::Reverse(d.frame_start)))
        .map(|(d, _)| d)
}

/// Compares the live HIT and BOUNCE anchors and the rallies of `state`
/// against the ground truth.
pub fn evaluate(state: &MatchState, truth: &GroundTruth, tolerance: u32) -> EvalReport {
    let detected: Vec<EventPoint> = state
        .anchors
        .values()
        .filter(|a| a.is_live() && a.event_type != EventType::Rally)
        .map(EventPoint::from)
        .collect();
    let expected: Vec<EventPoint> = truth.events.iter().map(EventPoint::from).collect();
    let (precision, recall) = precision_recall(&detected, &expected, tolerance);

    let mut report = EvalReport {
        tolerance,
        truth_events: expected.len(),
        detected_events: detected.len(),
        precision,
        recall,
        temporal: temporal_error(&detected, &expected, tolerance),
        spatial: spatial_error(&detected, &expected, tolerance),
        truth_rallies: truth.rallies.len(),
        detected_rallies: state.rallies.len(),
        exact_boundaries: 0,
        exact_with_winner: 0,
        correct_server: 0,
    };
    for r in &truth.rallies {
        let Some(d) = counterpart(state, r) else { continue };
        let exact = d.frame_start == r.frame_start && d.frame_end == r.frame_end;
        report.exact_boundaries += usize::from(exact);
        report.exact_with_winner += usize::from(exact && d.winner == Some(r.winner));
        report.correct_server += usize::from(d.server == Some(r.server));
    }
    report
}
