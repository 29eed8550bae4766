use proptest::prelude::*;
use rallyanchor_core::hints::{playback_hints, HintParams, SlowdownWindow};
use rallyanchor_core::store::{AnchorStatus, MatchInfo, Origin};
use rallyanchor_core::{EventAnchor, EventType, MatchState, RallySpan, StoreError};

const RALLY: &str = "m-r001";

fn state(rally: (u32, u32), anchors: &[(u32, AnchorStatus)]) -> MatchState {
    let mut s = MatchState::new(MatchInfo {
        match_id: "m".into(),
        frame_count: 10_000,
        fps: 25.0,
        width: 1280,
        height: 720,
        video_url: None,
    });
    s.rallies.push(RallySpan {
        rally_id: RALLY.into(),
        game_index: 0,
        frame_start: rally.0,
        frame_end: rally.1,
        server: None,
        winner: None,
        score_before: (0, 0),
    });
    s.anchors.insert(
        "m-a00000".into(),
        EventAnchor {
            anchor_id: "m-a00000".into(),
            rally_id: RALLY.into(),
            event_type: EventType::Rally,
            frame_start: rally.0,
            frame_end: rally.1,
            x: None,
            y: None,
            status: AnchorStatus::Uncalibrated,
            origin: Origin::Detected,
        },
    );
    for (i, &(frame, status)) in anchors.iter().enumerate() {
        let id = format!("m-a{:05}", i + 1);
        s.anchors.insert(
            id.clone(),
            EventAnchor {
                anchor_id: id,
                rally_id: RALLY.into(),
                event_type: if i % 2 == 0 { EventType::Hit } else { EventType::Bounce },
                frame_start: frame,
                frame_end: frame,
                x: Some(0.0),
                y: Some(0.0),
                status,
                origin: Origin::Detected,
            },
        );
    }
    s
}

fn spans(w: &[SlowdownWindow]) -> Vec<(u32, u32, u32)> {
    w.iter().map(|w| (w.frame_from, w.frame_to, w.pause_at)).collect()
}

#[test]
fn separate_windows() {
    let s = state((0, 1000), &[(100, AnchorStatus::Uncalibrated), (300, AnchorStatus::Uncalibrated)]);
    let w = playback_hints(&s, RALLY, &HintParams::default()).unwrap();
    assert_eq!(spans(&w), vec![(75, 100, 100), (275, 300, 300)]);
    assert!(w.iter().all(|w| w.rate == 0.25));
}

#[test]
fn overlapping_windows_split_at_the_midpoint() {
    let s = state((0, 1000), &[(100, AnchorStatus::Uncalibrated), (110, AnchorStatus::Uncalibrated)]);
    let w = playback_hints(&s, RALLY, &HintParams::default()).unwrap();
    assert_eq!(spans(&w), vec![(75, 104, 100), (105, 110, 110)]);
}

#[test]
fn calibrated_and_deleted_anchors_get_no_window() {
    let s = state((0, 1000), &[(100, AnchorStatus::Calibrated), (300, AnchorStatus::Deleted)]);
    assert!(playback_hints(&s, RALLY, &HintParams::default()).unwrap().is_empty());
}

#[test]
fn windows_start_no_earlier_than_the_rally() {
    let s = state((90, 1000), &[(100, AnchorStatus::Uncalibrated)]);
    let w = playback_hints(&s, RALLY, &HintParams::default()).unwrap();
    assert_eq!(spans(&w), vec![(90, 100, 100)]);
}

#[test]
fn unknown_rally() {
    let s = state((0, 1000), &[]);
    assert_eq!(playback_hints(&s, "x", &HintParams::default()), Err(StoreError::RallyNotFound("x".into())));
}

/// Frame-by-frame reference: windows that share a frame form a group; every
/// frame covered by a group belongs to its nearest pause, the later pause on
/// a tie.
fn reference(pauses: &[u32], rally_start: u32, lead: u32) -> Vec<(u32, u32, u32)> {
    let mut p: Vec<u32> = pauses.to_vec();
    p.sort();
    p.dedup();
    let windows: Vec<(u32, u32)> = p.iter().map(|&q| (q.saturating_sub(lead).max(rally_start), q)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < windows.len() {
        let mut j = i;
        while j + 1 < windows.len() && windows[j + 1].0 <= windows[j].1 {
            j += 1;
        }
        let (lo, hi) = (windows[i].0, windows[j].1);
        let mut owned: Vec<Vec<u32>> = vec![Vec::new(); j - i + 1];
        for f in lo..=hi {
            let mut best = 0;
            for k in 0..=j - i {
                let d = f.abs_diff(p[i + k]);
                if d <= f.abs_diff(p[i + best]) {
                    best = k;
                }
            }
            owned[best].push(f);
        }
        for (k, frames) in owned.iter().enumerate() {
            out.push((frames[0], *frames.last().unwrap(), p[i + k]));
        }
        i = j + 1;
    }
    out
}

proptest! {
    #[test]
    fn matches_the_nearest_pause_reference(
        frames in prop::collection::vec(0u32..300, 0..12),
        start in 0u32..40,
        lead in 1u32..40,
    ) {
        let frames: Vec<u32> = frames.into_iter().map(|f| f + start).collect();
        let anchors: Vec<(u32, AnchorStatus)> = frames.iter().map(|&f| (f, AnchorStatus::Uncalibrated)).collect();
        let s = state((start, 1000), &anchors);
        let params = HintParams { lead_frames: lead, rate: 0.5 };
        let w = playback_hints(&s, RALLY, &params).unwrap();
        prop_assert_eq!(spans(&w), reference(&frames, start, lead));
        for w in &w {
            prop_assert!(w.frame_from <= w.pause_at && w.pause_at <= w.frame_to);
        }
        for pair in w.windows(2) {
            prop_assert!(pair[0].frame_to < pair[1].frame_from);
        }
    }
}
