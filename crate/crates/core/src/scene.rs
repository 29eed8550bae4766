//! In-play segments from per-frame scene labels.

use serde::{Deserialize, Serialize};

use crate::track::SceneLabel;

pub const DEFAULT_WINDOW: usize = 9;
pub const DEFAULT_MIN_LEN: u32 = 25;

/// Inclusive frame range of continuous live play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InPlaySegment {
    pub frame_start: u32,
    pub frame_end: u32,
}

impl InPlaySegment {
    pub fn len(&self) -> u32 {
        self.frame_end - self.frame_start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Centered majority vote over `window` labels. Windows are truncated at the
/// ends of the sequence; an even split keeps the original label.
pub fn smooth_labels(labels: &[SceneLabel], window: usize) -> Vec<SceneLabel> {
    assert!(window % 2 == 1, "smoothing window must be odd");
    let half = window / 2;
    let n = labels.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for l in labels {
        prefix.push(prefix.last().unwrap() + usize::from(l.in_play));
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let on = prefix[hi] - prefix[lo];
            let off = (hi - lo) - on;
            let in_play = match on.cmp(&off) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => l.in_play,
            };
            SceneLabel { frame: l.frame, in_play }
        })
        .collect()
}

/// Maximal runs of in-play frames at least `min_len` long. A missing frame
/// ends a run.
pub fn segments(labels: &[SceneLabel], min_len: u32) -> Vec<InPlaySegment> {
    let mut out = Vec::new();
    let mut open: Option<InPlaySegment> = None;
    let close = |seg: InPlaySegment, out: &mut Vec<InPlaySegment>| {
        if seg.len() >= min_len {
            out.push(seg);
        }
    };
    for l in labels {
        match (&mut open, l.in_play) {
            (Some(seg), true) if seg.frame_end + 1 == l.frame => seg.frame_end = l.frame,
            (Some(_), true) => {
                close(open.take().unwrap(), &mut out);
                open = Some(InPlaySegment { frame_start: l.frame, frame_end: l.frame });
            }
            (None, true) => open = Some(InPlaySegment { frame_start: l.frame, frame_end: l.frame }),
            (Some(_), false) => close(open.take().unwrap(), &mut out),
            (None, false) => {}
        }
    }
    if let Some(seg) = open {
        close(seg, &mut out);
    }
    out
}

/// Counts of in-play labels over frame ranges of an ordered label sequence.
struct Counter<'a> {
    labels: &'a [SceneLabel],
    prefix: Vec<u32>,
}

impl<'a> Counter<'a> {
    fn new(labels: &'a [SceneLabel]) -> Self {
        let mut prefix = Vec::with_capacity(labels.len() + 1);
        prefix.push(0);
        for l in labels {
            prefix.push(prefix.last().unwrap() + u32::from(l.in_play));
        }
        Self { labels, prefix }
    }

    fn index(&self, frame: i64) -> usize {
        self.labels.partition_point(|l| i64::from(l.frame) < frame)
    }

    /// `(in play, not in play)` over frames `lo..=hi`.
    fn count(&self, lo: i64, hi: i64) -> (u32, u32) {
        if hi < lo {
            return (0, 0);
        }
        let (a, b) = (self.index(lo), self.index(hi + 1));
        let on = self.prefix[b] - self.prefix[a];
        (on, (b - a) as u32 - on)
    }
}

/// Best change point among `candidates`, scored by `score`. Ties go to the
/// candidate closest to `origin`, then the earlier one.
fn best_shift(candidates: std::ops::RangeInclusive<i64>, origin: i64, score: impl Fn(i64) -> u32) -> Option<i64> {
    candidates.max_by_key(|&c| (score(c), std::cmp::Reverse((c - origin).abs()), std::cmp::Reverse(c)))
}

/// Moves each segment boundary by up to `radius` frames to the change point
/// that agrees best with the raw labels within `2 * radius` of it.
///
/// Majority smoothing puts a boundary wherever the vote first tips, which a
/// flipped label next to the true change can move by a frame or two. Refined
/// segments keep their order and stay at least one frame apart.
pub fn refine_boundaries(raw: &[SceneLabel], segs: &[InPlaySegment], radius: u32) -> Vec<InPlaySegment> {
    let (Some(first), Some(last)) = (raw.first(), raw.last()) else {
        return segs.to_vec();
    };
    let c = Counter::new(raw);
    let r = i64::from(radius);
    let mut out: Vec<InPlaySegment> = Vec::with_capacity(segs.len());
    for (k, seg) in segs.iter().enumerate() {
        let (s0, e0) = (i64::from(seg.frame_start), i64::from(seg.frame_end));
        let lim_lo = out.last().map_or(i64::from(first.frame), |p| i64::from(p.frame_end) + 2);
        let lim_hi = segs.get(k + 1).map_or(i64::from(last.frame), |n| i64::from(n.frame_start) - 2);

        let (rlo, rhi) = ((s0 - 2 * r).max(lim_lo), (s0 + 2 * r).min(e0));
        let start = best_shift((s0 - r).max(lim_lo)..=(s0 + r).min(e0), s0, |x| c.count(rlo, x - 1).1 + c.count(x, rhi).0)
            .unwrap_or(s0);

        let (rlo, rhi) = ((e0 - 2 * r).max(start), (e0 + 2 * r).min(lim_hi));
        let end = best_shift((e0 - r).max(start)..=(e0 + r).min(lim_hi), e0, |x| c.count(rlo, x).0 + c.count(x + 1, rhi).1)
            .unwrap_or(e0);

        out.push(InPlaySegment { frame_start: start as u32, frame_end: end as u32 });
    }
    out
}
