use serde::{Deserialize, Serialize};

use crate::score::PlayerSide;
use crate::track::{BallTrack, CourtRegion};

use super::{DistanceSeries, EventType, VelocitySeries};

/// Frame width the pixel thresholds are calibrated for.
pub const REFERENCE_WIDTH: f64 = 1280.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectParams {
    /// Moving-average width applied before differencing.
    pub smoothing_window: usize,
    /// Half-width, in frames, of the search for a distance minimum around a reversal.
    pub min_window: u32,
    /// Largest ball-to-player distance accepted for a hit, at `REFERENCE_WIDTH`.
    pub d_max_px: f64,
    /// Events of one type closer than this many frames are merged.
    pub merge_gap: u32,
    /// Velocity component whose reversal marks a hit.
    pub hit_axis: Axis,
    /// Longest run of missing ball frames filled before differencing.
    pub max_gap: u32,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            smoothing_window: super::DEFAULT_SMOOTHING,
            min_window: 3,
            d_max_px: 120.0,
            merge_gap: 4,
            hit_axis: Axis::X,
            max_gap: crate::track::DEFAULT_MAX_GAP,
        }
    }
}

impl DetectParams {
    /// Distance gate for a video `width` pixels wide.
    pub fn d_max_for_width(&self, width: u32) -> f64 {
        self.d_max_px * width as f64 / REFERENCE_WIDTH
    }
}

/// An instantaneous detected event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub event_type: EventType,
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub side: Option<PlayerSide>,
    pub confidence: f64,
}

struct Crossing {
    frame: u32,
    rising: bool,
}

fn component(v: super::Velocity, axis: Axis) -> f64 {
    match axis {
        Axis::X => v.vx,
        Axis::Y => v.vy,
    }
}

/// Sign changes of one velocity component between consecutive defined frames.
/// The crossing frame is the linearly interpolated zero, rounded; zero runs
/// are bridged and the crossing placed at their middle.
fn sign_changes(vel: &VelocitySeries, axis: Axis) -> Vec<Crossing> {
    let mut out = Vec::new();
    let mut last_nonzero: Option<(u32, f64)> = None;
    let mut prev_frame: Option<u32> = None;
    for (f, v) in vel.iter() {
        if prev_frame.is_some_and(|p| p + 1 != f) {
            last_nonzero = None;
        }
        prev_frame = Some(f);
        let c = component(v, axis);
        if c == 0.0 {
            continue;
        }
        if let Some((lf, lc)) = last_nonzero {
            if lc.signum() != c.signum() {
                let frame = if f == lf + 1 {
                    (lf as f64 + lc / (lc - c)).round() as u32
                } else {
                    (lf + f).div_ceil(2)
                };
                out.push(Crossing { frame, rising: c > 0.0 });
            }
        }
        last_nonzero = Some((f, c));
    }
    out
}

/// Agreement of the velocity two frames either side of `frame` with a clean
/// reversal, in `[0, 1]`.
fn reversal_sharpness(vel: &VelocitySeries, axis: Axis, frame: u32) -> f64 {
    let before = frame.checked_sub(2).and_then(|f| vel.get(f));
    let after = vel.get(frame + 2);
    match (before, after) {
        (Some(b), Some(a)) => {
            let (b, a) = (component(b, axis), component(a, axis));
            let denom = b.abs() + a.abs();
            if denom == 0.0 {
                0.0
            } else {
                (a - b).abs() / denom
            }
        }
        _ => 0.5,
    }
}

/// Frame within one of `frame` whose coordinate is most extreme.
fn refine(track: &BallTrack, frame: u32, score: impl Fn(f64, f64) -> f64) -> Option<u32> {
    let lo = frame.saturating_sub(1);
    (lo..=frame + 1)
        .filter_map(|f| track.get(f).map(|s| (f, score(s.x, s.y))))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(f, _)| f)
}

fn is_local_min(dist: &DistanceSeries, side: PlayerSide, m: u32) -> Option<f64> {
    let d = dist.get(m, side)?;
    let prev = m.checked_sub(1).and_then(|p| dist.get(p, side));
    let next = dist.get(m + 1, side);
    if prev.is_none() && next.is_none() {
        return None;
    }
    let ok = prev.is_none_or(|p| d <= p) && next.is_none_or(|n| d <= n);
    ok.then_some(d)
}

/// Keeps the most confident event in every group of same-type events closer
/// than `gap` frames. Output is ordered by frame.
pub fn merge_events(mut events: Vec<RawEvent>, gap: u32) -> Vec<RawEvent> {
    events.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.frame.cmp(&b.frame)));
    let mut kept: Vec<RawEvent> = Vec::new();
    for e in events {
        if kept.iter().any(|k| k.event_type == e.event_type && k.frame.abs_diff(e.frame) < gap) {
            continue;
        }
        kept.push(e);
    }
    kept.sort_by_key(|e| (e.frame, e.event_type));
    kept
}

/// Ball-racket contacts: the ball reverses along `params.hit_axis` while its
/// distance to a player reaches a local minimum no larger than `params.d_max_px`.
pub fn detect_hits(
    vel: &VelocitySeries,
    dist: &DistanceSeries,
    track: &BallTrack,
    params: &DetectParams,
) -> Vec<RawEvent> {
    let axis = params.hit_axis;
    let mut candidates = Vec::new();
    for c in sign_changes(vel, axis) {
        // the reversal point is the coordinate extremum: a minimum when the
        // ball turns back toward larger values
        let sign = if c.rising { -1.0 } else { 1.0 };
        let Some(frame) = refine(track, c.frame, |x, y| {
            sign * match axis {
                Axis::X => x,
                Axis::Y => y,
            }
        }) else {
            continue;
        };
        let lo = frame.saturating_sub(params.min_window);
        let hi = frame + params.min_window;
        let mut best: Option<(PlayerSide, f64)> = None;
        for side in [PlayerSide::A, PlayerSide::B] {
            for m in lo..=hi {
                let Some(d) = is_local_min(dist, side, m) else { continue };
                if d <= params.d_max_px && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((side, d));
                }
            }
        }
        let Some((side, _)) = best else { continue };
        let s = track.get(frame).expect("refined frame has a sample");
        candidates.push(RawEvent {
            event_type: EventType::Hit,
            frame,
            x: s.x,
            y: s.y,
            side: Some(side),
            confidence: reversal_sharpness(vel, axis, frame),
        });
    }
    merge_events(candidates, params.merge_gap)
}

/// Ball-table contacts: vertical velocity turns from downward to upward while
/// the ball is inside the table band and over the table.
pub fn detect_bounces(
    vel: &VelocitySeries,
    track: &BallTrack,
    court: &CourtRegion,
    params: &DetectParams,
) -> Vec<RawEvent> {
    let (x_lo, x_hi) = court.table_x_range();
    let mut candidates = Vec::new();
    for c in sign_changes(vel, Axis::Y) {
        if c.rising {
            continue;
        }
        let Some(frame) = refine(track, c.frame, |_, y| y) else { continue };
        let s = track.get(frame).expect("refined frame has a sample");
        if !court.in_table_band(s.y) || s.x < x_lo || s.x > x_hi {
            continue;
        }
        candidates.push(RawEvent {
            event_type: EventType::Bounce,
            frame,
            x: s.x,
            y: s.y,
            side: None,
            confidence: reversal_sharpness(vel, Axis::Y, frame),
        });
    }
    merge_events(candidates, params.merge_gap)
}
