//! Track file to anchors: ingest, score cleaning, scene segmentation, rally
//! pairing and per-rally event detection.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::events::{
    assign_players, detect_bounces, detect_hits, hand_distance, velocity_with_window, DetectParams, EventError,
    EventType, RawEvent,
};
use crate::scene::{refine_boundaries, segments, smooth_labels, DEFAULT_MIN_LEN, DEFAULT_WINDOW};
use crate::score::{clean_scores, debounce, detect_games, rally_boundaries, GameSpan, PlayerSide, ScoreError, ServeRotation, DEFAULT_MIN_CONF};
use crate::store::{AnchorStatus, EventAnchor, MatchInfo, MatchState, Origin, Repository, StoreError};
use crate::track::{interpolate_ball, parse_track_file, CourtRegion, IngestReport, TrackError, TrackSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub min_conf: f64,
    pub scene_window: usize,
    pub min_segment: u32,
    /// Score readings must repeat on this many consecutive frames to count.
    pub score_support: usize,
    /// Move segment boundaries to the best local change point in the raw labels.
    pub refine_boundaries: bool,
    pub first_server: PlayerSide,
    pub detect: DetectParams,
    /// Where the annotator loads the video from.
    pub video_url: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_conf: DEFAULT_MIN_CONF,
            scene_window: DEFAULT_WINDOW,
            min_segment: DEFAULT_MIN_LEN,
            score_support: 2,
            refine_boundaries: true,
            first_server: PlayerSide::A,
            detect: DetectParams::default(),
            video_url: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("ingest: {0}")]
    Ingest(#[from] TrackError),
    #[error("clean_scores: {0}")]
    CleanScores(ScoreError),
    #[error("rally_boundaries: {0}")]
    RallyBoundaries(ScoreError),
    #[error("detect: the track file has no court record")]
    MissingCourt,
    #[error("store: {0}")]
    Store(#[from] StoreError),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Ingest(_) => "ingest",
            PipelineError::CleanScores(_) => "clean_scores",
            PipelineError::RallyBoundaries(_) => "rally_boundaries",
            PipelineError::MissingCourt => "detect",
            PipelineError::Store(_) => "store",
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Ingest(e) => e.code(),
            PipelineError::CleanScores(e) | PipelineError::RallyBoundaries(e) => e.code(),
            PipelineError::MissingCourt => "MissingCourt",
            PipelineError::Store(e) => e.code(),
        }
    }
}

/// A rally whose events could not be detected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RallyWarning {
    pub rally_id: String,
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub state: MatchState,
    pub track: TrackSet,
    pub games: Vec<GameSpan>,
    /// Detected events per rally, in rally order.
    pub events: Vec<(String, Vec<RawEvent>)>,
    pub ingest: IngestReport,
    pub warnings: Vec<RallyWarning>,
}

/// `m` followed by the first 16 hex digits of SHA-256 over the track bytes and
/// the canonical JSON of the config.
pub fn match_id(track_bytes: &[u8], cfg: &PipelineConfig) -> String {
    let mut h = Sha256::new();
    h.update(track_bytes);
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    let digest = hex::encode(h.finalize());
    format!("m{}", &digest[..16])
}

/// Hits and bounces inside one in-play segment.
pub fn detect_rally_events(
    ts: &TrackSet,
    court: &CourtRegion,
    frame_start: u32,
    frame_end: u32,
    params: &DetectParams,
) -> Result<Vec<RawEvent>, EventError> {
    let ball = interpolate_ball(&ts.ball.window(frame_start, frame_end), params.max_gap);
    let vel = velocity_with_window(&ball, params.smoothing_window);
    let scaled = DetectParams { d_max_px: params.d_max_for_width(ts.meta.width), ..*params };
    let bounces = detect_bounces(&vel, &ball, court, &scaled);
    let players = assign_players(ts.poses_in(frame_start, frame_end), court)?;
    let dist = hand_distance(&ball, &players);
    let mut events = detect_hits(&vel, &dist, &ball, &scaled);
    events.extend(bounces);
    events.sort_by_key(|e| (e.frame, e.event_type));
    Ok(events)
}

fn insert(state: &mut MatchState, mut a: EventAnchor, n: u64) {
    a.anchor_id = state.anchor_id(n);
    state.anchors.insert(a.anchor_id.clone(), a);
}

pub fn run_pipeline(track_bytes: &[u8], cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let parsed = parse_track_file(track_bytes)?;
    let ts = parsed.track_set;
    let court = ts.court.ok_or(PipelineError::MissingCourt)?;

    let states = clean_scores(&debounce(&ts.scores, cfg.score_support), cfg.min_conf).map_err(PipelineError::CleanScores)?;
    let games = detect_games(&states);
    let labels = smooth_labels(&ts.scenes, cfg.scene_window);
    let mut segs = segments(&labels, cfg.min_segment);
    if cfg.refine_boundaries {
        segs = refine_boundaries(&ts.scenes, &segs, (cfg.scene_window / 2) as u32);
    }
    let rotation = ServeRotation { first_server: cfg.first_server };
    let spans = rally_boundaries(&states, &segs, &rotation).map_err(PipelineError::RallyBoundaries)?;

    let id = match_id(track_bytes, cfg);
    let mut state = MatchState::new(MatchInfo {
        match_id: id.clone(),
        frame_count: ts.meta.frame_count,
        fps: ts.meta.fps,
        width: ts.meta.width,
        height: ts.meta.height,
        video_url: cfg.video_url.clone(),
    });
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    let mut n = 0;
    for mut rally in spans {
        rally.rally_id = format!("{id}-{}", rally.rally_id);
        n += 1;
        insert(
            &mut state,
            EventAnchor {
                anchor_id: String::new(),
                rally_id: rally.rally_id.clone(),
                event_type: EventType::Rally,
                frame_start: rally.frame_start,
                frame_end: rally.frame_end,
                x: None,
                y: None,
                status: AnchorStatus::Uncalibrated,
                origin: Origin::Detected,
            },
            n,
        );
        let detected = match detect_rally_events(&ts, &court, rally.frame_start, rally.frame_end, &cfg.detect) {
            Ok(ev) => ev,
            Err(e) => {
                warnings.push(RallyWarning { rally_id: rally.rally_id.clone(), code: e.code(), message: e.to_string() });
                Vec::new()
            }
        };
        for e in &detected {
            n += 1;
            insert(
                &mut state,
                EventAnchor {
                    anchor_id: String::new(),
                    rally_id: rally.rally_id.clone(),
                    event_type: e.event_type,
                    frame_start: e.frame,
                    frame_end: e.frame,
                    x: Some(e.x),
                    y: Some(e.y),
                    status: AnchorStatus::Uncalibrated,
                    origin: Origin::Detected,
                },
                n,
            );
        }
        events.push((rally.rally_id.clone(), detected));
        state.rallies.push(rally);
    }

    Ok(PipelineOutput { state, track: ts, games, events, ingest: parsed.report, warnings })
}

/// Runs the pipeline and persists the result. Re-running on identical input
/// finds the existing match and leaves it, and its log, untouched.
pub fn run_and_store(repo: &Repository, track_bytes: &[u8], cfg: &PipelineConfig) -> Result<(PipelineOutput, bool), PipelineError> {
    let out = run_pipeline(track_bytes, cfg)?;
    let created = repo.create(&out.state)?;
    Ok((out, created))
}
