use crate::track::{BallTrack, Point};

use super::EventError;

/// Width of the moving average applied before differencing.
pub const DEFAULT_SMOOTHING: usize = 3;

/// Ball velocity in pixels per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
}

impl Velocity {
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Per-frame velocity; frames without enough neighbouring samples are undefined.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VelocitySeries {
    start: u32,
    values: Vec<Option<Velocity>>,
}

impl VelocitySeries {
    pub fn get(&self, frame: u32) -> Option<Velocity> {
        let i = frame.checked_sub(self.start)? as usize;
        self.values.get(i).copied().flatten()
    }

    /// Defined frames in order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, Velocity)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (self.start + i as u32, v)))
    }

    pub fn first_frame(&self) -> u32 {
        self.start
    }

    /// One past the last frame covered.
    pub fn end_frame(&self) -> u32 {
        self.start + self.values.len() as u32
    }
}

fn dense_positions(track: &BallTrack) -> (u32, Vec<Option<Point>>) {
    let samples = track.samples();
    let Some(first) = samples.first() else { return (0, Vec::new()) };
    let last = samples.last().unwrap();
    let mut pos = vec![None; (last.frame - first.frame + 1) as usize];
    for s in samples {
        pos[(s.frame - first.frame) as usize] = Some(s.point());
    }
    (first.frame, pos)
}

pub fn velocity(track: &BallTrack) -> VelocitySeries {
    velocity_with_window(track, DEFAULT_SMOOTHING)
}

/// Centered moving average of width `window`, then the central difference
/// `(p(t+1) - p(t-1)) / 2`.
pub fn velocity_with_window(track: &BallTrack, window: usize) -> VelocitySeries {
    assert!(window % 2 == 1, "smoothing window must be odd");
    let half = window / 2;
    let (start, pos) = dense_positions(track);
    let n = pos.len();

    let smoothed: Vec<Option<Point>> = (0..n)
        .map(|i| {
            if i < half || i + half >= n {
                return None;
            }
            let mut sx = 0.0;
            let mut sy = 0.0;
            for p in &pos[i - half..=i + half] {
                let p = (*p)?;
                sx += p.x;
                sy += p.y;
            }
            Some(Point::new(sx / window as f64, sy / window as f64))
        })
        .collect();

    let values = (0..n)
        .map(|i| {
            if i == 0 || i + 1 >= n {
                return None;
            }
            let (a, b) = (smoothed[i - 1]?, smoothed[i + 1]?);
            Some(Velocity { vx: (b.x - a.x) / 2.0, vy: (b.y - a.y) / 2.0 })
        })
        .collect();
    VelocitySeries { start, values }
}

/// Ball speed in pixels per frame.
pub fn estimate_speed(track: &BallTrack, frame: u32) -> Result<f64, EventError> {
    velocity(track)
        .get(frame)
        .map(|v| v.speed())
        .ok_or(EventError::UndefinedAtFrame(frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::BallSample;

    fn track(f: impl Fn(f64) -> (f64, f64), frames: std::ops::Range<u32>) -> BallTrack {
        BallTrack::new(
            frames
                .map(|t| {
                    let (x, y) = f(t as f64);
                    BallSample { frame: t, x, y, confidence: 1.0 }
                })
                .collect(),
        )
    }

    #[test]
    fn uniform_motion() {
        let v = velocity(&track(|t| (2.0 * t, 100.0), 0..30));
        let defined: Vec<_> = v.iter().collect();
        // both smoothing and differencing need a neighbour on each side
        assert_eq!(defined.first().unwrap().0, 2);
        assert_eq!(defined.last().unwrap().0, 27);
        assert!(defined.iter().all(|(_, v)| v.vx == 2.0 && v.vy == 0.0));
    }

    #[test]
    fn stationary() {
        let v = velocity(&track(|_| (50.0, 60.0), 0..10));
        assert!(v.iter().all(|(_, v)| v == Velocity { vx: 0.0, vy: 0.0 }));
    }

    #[test]
    fn parabola_matches_analytic_derivative() {
        // y(t) = 300 - 12 t + 0.4 t^2, dy/dt = -12 + 0.8 t
        let v = velocity(&track(|t| (10.0 * t, 300.0 - 12.0 * t + 0.4 * t * t), 0..40));
        for (f, vel) in v.iter() {
            let analytic = -12.0 + 0.8 * f as f64;
            assert!((vel.vy - analytic).abs() <= 0.5, "frame {f}: {} vs {analytic}", vel.vy);
        }
    }

    #[test]
    fn gaps_make_velocity_undefined() {
        let mut samples: Vec<BallSample> = (0..20)
            .map(|t| BallSample { frame: t, x: t as f64, y: 0.0, confidence: 1.0 })
            .collect();
        samples.remove(10);
        let v = velocity(&BallTrack::new(samples));
        for f in 8..=12 {
            assert!(v.get(f).is_none(), "frame {f}");
        }
        assert!(v.get(7).is_some());
        assert!(v.get(13).is_some());
    }

    #[test]
    fn speed() {
        let t = track(|t| (3.0 * t, 4.0 * t), 0..10);
        assert_eq!(estimate_speed(&t, 5).unwrap(), 5.0);
        assert_eq!(estimate_speed(&track(|_| (1.0, 1.0), 0..10), 5).unwrap(), 0.0);
        assert_eq!(estimate_speed(&t, 0), Err(EventError::UndefinedAtFrame(0)));
        // constant speed 12 px/frame along a diagonal
        let diag = track(|t| (12.0 * t * 0.6, 12.0 * t * 0.8), 0..20);
        assert!((estimate_speed(&diag, 9).unwrap() - 12.0).abs() <= 0.5);
    }
}
