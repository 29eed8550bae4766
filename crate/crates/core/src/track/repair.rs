use super::{BallSample, BallTrack};

/// Longest run of missing ball frames that gets filled in.
pub const DEFAULT_MAX_GAP: u32 = 5;

/// Fills runs of at most `max_gap` missing frames by linear interpolation.
/// Filled samples carry confidence 0; existing samples are never touched.
pub fn interpolate_ball(track: &BallTrack, max_gap: u32) -> BallTrack {
    let samples = track.samples();
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        out.push(*s);
        let Some(next) = samples.get(i + 1) else { break };
        let missing = next.frame - s.frame - 1;
        if missing == 0 || missing > max_gap {
            continue;
        }
        let span = (next.frame - s.frame) as f64;
        for k in 1..=missing {
            let t = k as f64 / span;
            out.push(BallSample {
                frame: s.frame + k,
                x: s.x + (next.x - s.x) * t,
                y: s.y + (next.y - s.y) * t,
                confidence: 0.0,
            });
        }
    }
    BallTrack::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(points: &[(u32, f64, f64)]) -> BallTrack {
        BallTrack::new(
            points
                .iter()
                .map(|&(frame, x, y)| BallSample { frame, x, y, confidence: 0.9 })
                .collect(),
        )
    }

    fn xy(t: &BallTrack) -> Vec<(u32, f64, f64)> {
        t.samples().iter().map(|s| (s.frame, s.x, s.y)).collect()
    }

    #[test]
    fn single_missing_frame_gets_midpoint() {
        let out = interpolate_ball(&track(&[(10, 100.0, 50.0), (12, 104.0, 54.0)]), 2);
        assert_eq!(xy(&out), vec![(10, 100.0, 50.0), (11, 102.0, 52.0), (12, 104.0, 54.0)]);
        assert_eq!(out.get(11).unwrap().confidence, 0.0);
    }

    #[test]
    fn long_gap_left_open() {
        let input = track(&[(0, 0.0, 0.0), (9, 9.0, 9.0)]);
        assert_eq!(interpolate_ball(&input, 5), input);
    }

    #[test]
    fn matches_closed_form_line() {
        let out = interpolate_ball(&track(&[(0, 0.0, 0.0), (4, 8.0, 4.0)]), 4);
        // closed form: x = 2t, y = t
        for f in 1..4u32 {
            let s = out.get(f).unwrap();
            assert_eq!((s.x, s.y), (2.0 * f as f64, f as f64));
        }
        assert_eq!(xy(&out)[1..4], [(1, 2.0, 1.0), (2, 4.0, 2.0), (3, 6.0, 3.0)]);
    }

    fn arb_track() -> impl Strategy<Value = BallTrack> {
        prop::collection::btree_map(0u32..200, (0.0f64..1280.0, 0.0f64..720.0), 0..40).prop_map(
            |m| track(&m.into_iter().map(|(f, (x, y))| (f, x, y)).collect::<Vec<_>>()),
        )
    }

    proptest! {
        #[test]
        fn idempotent(t in arb_track(), gap in 1u32..8) {
            let once = interpolate_ball(&t, gap);
            prop_assert_eq!(interpolate_ball(&once, gap), once);
        }

        #[test]
        fn existing_samples_untouched(t in arb_track(), gap in 1u32..8) {
            let out = interpolate_ball(&t, gap);
            for s in t.samples() {
                prop_assert_eq!(out.get(s.frame), Some(s));
            }
        }
    }
}
