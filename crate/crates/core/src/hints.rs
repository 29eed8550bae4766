//! Playback slowdown windows ahead of anchors that still need review.

use serde::{Deserialize, Serialize};

use crate::events::EventType;
use crate::store::{AnchorStatus, MatchState, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HintParams {
    /// Frames of slowed playback before each anchor.
    pub lead_frames: u32,
    /// Playback-rate multiplier inside a window.
    pub rate: f64,
}

impl Default for HintParams {
    fn default() -> Self {
        Self { lead_frames: 25, rate: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowdownWindow {
    pub anchor_id: String,
    pub frame_from: u32,
    pub frame_to: u32,
    pub rate: f64,
    pub pause_at: u32,
}

/// One window `[frame - L, frame]` per live, uncalibrated HIT or BOUNCE
/// anchor, clamped to the rally start.
///
/// When consecutive windows overlap, the frames they jointly cover are split
/// at the midpoint of the two pause frames (a midpoint frame goes to the later
/// window), so the earlier window may run a few frames past its pause.
/// Anchors sharing a frame yield one window.
pub fn playback_hints(state: &MatchState, rally_id: &str, params: &HintParams) -> Result<Vec<SlowdownWindow>, StoreError> {
    let rally = state.rally(rally_id).ok_or_else(|| StoreError::RallyNotFound(rally_id.to_string()))?;
    let mut pauses: Vec<(u32, &str)> = state
        .anchors_in(rally_id, false)
        .into_iter()
        .filter(|a| a.status == AnchorStatus::Uncalibrated && a.event_type != EventType::Rally)
        .map(|a| (a.frame_start, a.anchor_id.as_str()))
        .collect();
    pauses.dedup_by_key(|p| p.0);

    let mut out: Vec<SlowdownWindow> = Vec::with_capacity(pauses.len());
    for (frame, anchor_id) in pauses {
        let mut from = frame.saturating_sub(params.lead_frames).max(rally.frame_start);
        if let Some(prev) = out.last_mut() {
            if from <= prev.pause_at {
                let mid = (prev.pause_at + frame).div_ceil(2);
                prev.frame_to = mid - 1;
                from = mid;
            }
        }
        out.push(SlowdownWindow { anchor_id: anchor_id.to_string(), frame_from: from, frame_to: frame, rate: params.rate, pause_at: frame });
    }
    Ok(out)
}
