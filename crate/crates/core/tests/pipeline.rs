use std::sync::Arc;

use rallyanchor_core::metrics::{match_events, EventPoint};
use rallyanchor_core::pipeline::{match_id, run_and_store};
use rallyanchor_core::store::{export, AnchorStatus, ExportFormat, FixedClock, MatchStore, Repository, Vocabulary};
use rallyanchor_core::synth::{generate_match, NoiseConfig, SynthConfig, SynthMatch};
use rallyanchor_core::track::write_track_file;
use rallyanchor_core::{run_pipeline, EventType, PipelineConfig};

fn encoded(cfg: &SynthConfig) -> (SynthMatch, Vec<u8>) {
    let m = generate_match(cfg).unwrap();
    let mut bytes = Vec::new();
    write_track_file(&m.track, &mut bytes).unwrap();
    (m, bytes)
}

#[test]
fn same_input_same_state() {
    let noise = NoiseConfig { ball_sigma: 1.0, ball_dropout: 0.05, ocr_corruption: 0.1, scene_flip: 0.05, hand_dropout: 0.2, distractors: true };
    let (_, bytes) = encoded(&SynthConfig { seed: 21, games: 2, noise, ..Default::default() });
    let cfg = PipelineConfig::default();
    let a = run_pipeline(&bytes, &cfg).unwrap();
    let b = run_pipeline(&bytes, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(export(&a.state, ExportFormat::Anchors), export(&b.state, ExportFormat::Anchors));
    assert_eq!(a.state.info.match_id, match_id(&bytes, &cfg));

    let other = PipelineConfig { min_conf: 0.6, ..cfg };
    assert_ne!(match_id(&bytes, &other), a.state.info.match_id);
}

#[test]
fn rerun_keeps_the_stored_match() {
    let (_, bytes) = encoded(&SynthConfig { seed: 22, ..Default::default() });
    let dir = tempfile::tempdir().unwrap();
    let repo = Repository::new(dir.path());
    let cfg = PipelineConfig::default();
    let (first, created) = run_and_store(&repo, &bytes, &cfg).unwrap();
    assert!(created);
    let id = first.state.info.match_id.clone();
    let mut s = repo.open(&id, Arc::new(Vocabulary::default()), Arc::new(FixedClock(0))).unwrap();
    let anchor = first.state.anchors.keys().nth(1).unwrap().clone();
    s.calibrate(&anchor, 0).unwrap();
    drop(s);

    let (_, created) = run_and_store(&repo, &bytes, &cfg).unwrap();
    assert!(!created);
    assert_eq!(repo.match_ids().unwrap(), vec![id.clone()]);
    assert_eq!(repo.load_base(&id).unwrap(), first.state);
    assert_eq!(repo.load_log(&id).unwrap().len(), 1);
}

#[test]
fn empty_file_fails_at_ingest() {
    let err = run_pipeline(b"", &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage(), "ingest");
    assert_eq!(err.code(), "MissingHeader");
}

#[test]
fn anchor_counts_equal_the_oracle() {
    for seed in 0..4 {
        let (m, bytes) = encoded(&SynthConfig { seed, ..Default::default() });
        let out = run_pipeline(&bytes, &PipelineConfig::default()).unwrap();
        let state = &out.state;
        assert_eq!(state.rallies.len(), m.truth.rallies.len());
        let count = |t: EventType| state.anchors.values().filter(|a| a.event_type == t).count();
        let truth = |t: EventType| m.truth.events.iter().filter(|e| e.event_type == t).count();
        assert_eq!(count(EventType::Rally), m.truth.rallies.len());
        assert_eq!(count(EventType::Hit), truth(EventType::Hit));
        assert_eq!(count(EventType::Bounce), truth(EventType::Bounce));
        for (r, t) in state.rallies.iter().zip(&m.truth.rallies) {
            assert_eq!(state.strokes(&r.rally_id), t.strokes as usize);
        }
    }
}

#[test]
fn full_calibration_reproduces_the_oracle_events() {
    let noise = NoiseConfig { ball_sigma: 1.0, ball_dropout: 0.05, ..NoiseConfig::none() };
    let (m, bytes) = encoded(&SynthConfig { seed: 30, noise, ..Default::default() });
    let base = run_pipeline(&bytes, &PipelineConfig::default()).unwrap().state;
    let mut store = MatchStore::new(base.clone(), Arc::new(Vocabulary::default()), Arc::new(FixedClock(0)));

    for (i, rally) in base.rallies.iter().enumerate() {
        let anchors: Vec<_> = base.anchors_in(&rally.rally_id, false).into_iter().filter(|a| a.event_type != EventType::Rally).collect();
        let detected: Vec<EventPoint> = anchors.iter().map(|a| EventPoint::from(*a)).collect();
        let truth: Vec<EventPoint> = m.truth.events_in(i).map(EventPoint::from).collect();
        let matching = match_events(&detected, &truth, 3);
        assert!(matching.unmatched_detected.is_empty() && matching.unmatched_truth.is_empty());
        for (d, t) in matching.pairs {
            let delta = truth[t].frame as i64 - detected[d].frame as i64;
            store.calibrate(&anchors[d].anchor_id, delta).unwrap();
        }
    }

    let exported = String::from_utf8(export(&store.state(), ExportFormat::Anchors)).unwrap();
    let mut got: Vec<(String, u32)> = Vec::new();
    for line in exported.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v["record"] == "anchor" && v["event_type"] != "RALLY" {
            assert_eq!(v["status"], "CALIBRATED");
            got.push((v["event_type"].as_str().unwrap().to_string(), v["frame_start"].as_u64().unwrap() as u32));
        }
    }
    let mut want: Vec<(String, u32)> =
        m.truth.events.iter().map(|e| (e.event_type.to_string(), e.frame)).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
    assert!(store.state().anchors.values().filter(|a| a.event_type != EventType::Rally).all(|a| a.status == AnchorStatus::Calibrated));
}
