use serde::Serialize;

use super::{Keypoint, TrackSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Meta,
    Ball,
    Pose,
    Score,
    Scene,
    Court,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub frame: Option<u32>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn add(&mut self, kind: ViolationKind, frame: Option<u32>, detail: impl Into<String>) {
        self.violations.push(Violation { kind, frame, detail: detail.into() });
    }
}

fn unit(c: f64) -> bool {
    (0.0..=1.0).contains(&c)
}

/// Checks every track-set invariant and lists what does not hold.
pub fn validate(ts: &TrackSet) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = ts.meta.frame_count;

    if n == 0 {
        r.add(ViolationKind::Meta, None, "frame_count is zero");
    }
    if !(ts.meta.fps > 0.0) {
        r.add(ViolationKind::Meta, None, format!("fps must be positive, got {}", ts.meta.fps));
    }
    if ts.meta.width == 0 || ts.meta.height == 0 {
        r.add(ViolationKind::Meta, None, "zero frame size");
    }

    let mut prev: Option<u32> = None;
    for b in ts.ball.samples() {
        if b.frame >= n {
            r.add(ViolationKind::Ball, Some(b.frame), "frame beyond frame_count");
        }
        if prev.is_some_and(|p| p >= b.frame) {
            r.add(ViolationKind::Ball, Some(b.frame), "frames not strictly increasing");
        }
        if !unit(b.confidence) {
            r.add(ViolationKind::Ball, Some(b.frame), format!("confidence {} outside [0,1]", b.confidence));
        }
        prev = Some(b.frame);
    }

    let mut prev: Option<u32> = None;
    for pf in &ts.poses {
        if pf.frame >= n {
            r.add(ViolationKind::Pose, Some(pf.frame), "frame beyond frame_count");
        }
        if prev.is_some_and(|p| p >= pf.frame) {
            r.add(ViolationKind::Pose, Some(pf.frame), "pose frames not strictly increasing");
        }
        prev = Some(pf.frame);
        for b in &pf.boxes {
            if !(b.w > 0.0 && b.h > 0.0) {
                r.add(ViolationKind::Pose, Some(pf.frame), "box with non-positive size");
            }
            let kps: Vec<&Keypoint> = std::iter::once(&b.neck).chain(b.hands()).collect();
            if kps.iter().any(|k| !unit(k.confidence)) {
                r.add(ViolationKind::Pose, Some(pf.frame), "keypoint confidence outside [0,1]");
            }
        }
    }

    let mut prev: Option<u32> = None;
    for s in &ts.scores {
        if s.frame >= n {
            r.add(ViolationKind::Score, Some(s.frame), "frame beyond frame_count");
        }
        if prev.is_some_and(|p| p >= s.frame) {
            r.add(ViolationKind::Score, Some(s.frame), "score frames not strictly increasing");
        }
        if !unit(s.confidence) {
            r.add(ViolationKind::Score, Some(s.frame), format!("confidence {} outside [0,1]", s.confidence));
        }
        prev = Some(s.frame);
    }

    let mut prev: Option<u32> = None;
    for s in &ts.scenes {
        if s.frame >= n {
            r.add(ViolationKind::Scene, Some(s.frame), "frame beyond frame_count");
        }
        match prev {
            Some(p) if s.frame <= p => {
                r.add(ViolationKind::Scene, Some(s.frame), "scene frames not strictly increasing")
            }
            Some(p) if s.frame != p + 1 => r.add(
                ViolationKind::Scene,
                Some(s.frame),
                format!("scene labels skip frames {}..{}", p + 1, s.frame - 1),
            ),
            _ => {}
        }
        prev = Some(s.frame);
    }

    if let Some(c) = &ts.court {
        if !c.is_convex() {
            r.add(ViolationKind::Court, None, "table quadrilateral is not convex");
        }
        if !(c.table_y_min < c.table_y_max) {
            r.add(ViolationKind::Court, None, "table_y_min must be below table_y_max");
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::parse_track_file;

    const FIXTURE: &str = "\
meta frame_count=100 fps=25 width=1280 height=720
court quad=340,460,940,460,940,480,340,480 net_x=640 table_y_min=450 table_y_max=490
ball frame=10 x=400 y=380 conf=0.9
ball frame=11 x=420 y=385 conf=0.8
pose frame=10 box=260,400,100,240 neck=260,330,0.9 rhand=300,390,0.7
score frame=0 a=0 b=0 conf=0.95
score frame=1 a=0 b=0 conf=0.99
scene frame=0 in_play=0
scene frame=1 in_play=1
scene frame=2 in_play=1
";

    #[test]
    fn well_formed_fixture_is_clean() {
        let ts = parse_track_file(FIXTURE.as_bytes()).unwrap().track_set;
        assert_eq!(validate(&ts), ValidationReport::default());
    }

    #[test]
    fn out_of_range_confidence() {
        let text = FIXTURE.replace("score frame=1 a=0 b=0 conf=0.99", "score frame=1 a=0 b=0 conf=1.3");
        let ts = parse_track_file(text.as_bytes()).unwrap().track_set;
        let report = validate(&ts);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::Score);
        assert_eq!(report.violations[0].frame, Some(1));
    }

    #[test]
    fn scene_gap_and_bad_court() {
        let text = FIXTURE
            .replace("scene frame=2", "scene frame=5")
            .replace("table_y_min=450 table_y_max=490", "table_y_min=490 table_y_max=450");
        let ts = parse_track_file(text.as_bytes()).unwrap().track_set;
        let kinds: Vec<ViolationKind> = validate(&ts).violations.iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::Scene, ViolationKind::Court]);
    }
}
