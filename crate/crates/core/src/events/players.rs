use std::collections::BTreeMap;

use crate::score::PlayerSide;
use crate::track::{BallTrack, CourtRegion, Point, PoseBox, PoseFrame};

use super::EventError;

const MAX_ITERATIONS: usize = 50;

/// The player box chosen for each side in one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SidePlayers {
    pub a: Option<PoseBox>,
    pub b: Option<PoseBox>,
}

impl SidePlayers {
    pub fn get(&self, side: PlayerSide) -> Option<&PoseBox> {
        match side {
            PlayerSide::A => self.a.as_ref(),
            PlayerSide::B => self.b.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerTracks {
    /// Cluster centres for side A and side B.
    pub centroids: [Point; 2],
    /// Acceptance radius around each centre.
    pub radii: [f64; 2],
    pub frames: BTreeMap<u32, SidePlayers>,
}

impl PlayerTracks {
    pub fn get(&self, frame: u32, side: PlayerSide) -> Option<&PoseBox> {
        self.frames.get(&frame)?.get(side)
    }
}

#[derive(Clone, Copy)]
struct Cluster {
    center: Point,
    radius: f64,
}

/// For each cluster, the index of the nearest box assigned to it in this
/// frame, if that box lies inside the cluster radius.
fn pick(boxes: &[PoseBox], clusters: &[Cluster; 2]) -> [Option<usize>; 2] {
    let mut best: [Option<(usize, f64)>; 2] = [None, None];
    for (i, b) in boxes.iter().enumerate() {
        let c = b.center();
        let d0 = c.distance(&clusters[0].center);
        let d1 = c.distance(&clusters[1].center);
        let (k, d) = if d0 <= d1 { (0, d0) } else { (1, d1) };
        if d > clusters[k].radius {
            continue;
        }
        if best[k].is_none_or(|(_, bd)| d < bd) {
            best[k] = Some((i, d));
        }
    }
    best.map(|b| b.map(|(i, _)| i))
}

fn mean(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    Point::new(sx / n, sy / n)
}

fn seeds(poses: &[PoseFrame]) -> [Point; 2] {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for pf in poses.iter().filter(|pf| pf.boxes.len() >= 2) {
        let by_x = |a: &&PoseBox, b: &&PoseBox| a.cx.total_cmp(&b.cx);
        left.push(pf.boxes.iter().min_by(by_x).unwrap().center());
        right.push(pf.boxes.iter().max_by(by_x).unwrap().center());
    }
    if left.is_empty() {
        let all = poses.iter().flat_map(|pf| pf.boxes.iter());
        let lo = all.clone().min_by(|a, b| a.cx.total_cmp(&b.cx)).unwrap();
        let hi = all.max_by(|a, b| a.cx.total_cmp(&b.cx)).unwrap();
        return [lo.center(), hi.center()];
    }
    [mean(&left), mean(&right)]
}

/// Clusters player boxes into the two sides of the table.
///
/// Two-centre k-means seeded from the mean leftmost and mean rightmost box of
/// each frame. Each frame contributes at most one box per cluster (the one
/// nearest the centre), and boxes farther than three standard deviations from
/// their centre are dropped as bystanders. The acceptance radius never falls
/// below half the mean box width.
pub fn assign_players(poses: &[PoseFrame], court: &CourtRegion) -> Result<PlayerTracks, EventError> {
    let total_boxes: usize = poses.iter().map(|p| p.boxes.len()).sum();
    if total_boxes == 0 {
        return Err(EventError::NoPoses);
    }
    let mean_width = poses
        .iter()
        .flat_map(|p| p.boxes.iter().map(|b| b.w))
        .sum::<f64>()
        / total_boxes as f64;
    let min_radius = (mean_width / 2.0).max(1.0);

    let [s0, s1] = seeds(poses);
    let mut clusters = [
        Cluster { center: s0, radius: f64::INFINITY },
        Cluster { center: s1, radius: f64::INFINITY },
    ];
    let mut previous: Option<Vec<[Option<usize>; 2]>> = None;
    for _ in 0..MAX_ITERATIONS {
        let picks: Vec<[Option<usize>; 2]> = poses.iter().map(|pf| pick(&pf.boxes, &clusters)).collect();
        if previous.as_ref() == Some(&picks) {
            break;
        }
        for k in 0..2 {
            let members: Vec<Point> = poses
                .iter()
                .zip(&picks)
                .filter_map(|(pf, p)| p[k].map(|i| pf.boxes[i].center()))
                .collect();
            if members.is_empty() {
                continue;
            }
            let center = mean(&members);
            let var = members.iter().map(|m| m.distance(&center).powi(2)).sum::<f64>() / members.len() as f64;
            clusters[k] = Cluster { center, radius: (3.0 * var.sqrt()).max(min_radius) };
        }
        previous = Some(picks);
    }

    let (ca, cb) = (clusters[0].center, clusters[1].center);
    let a_left = ca.x < court.net_x;
    let b_left = cb.x < court.net_x;
    if a_left == b_left {
        return Err(EventError::DegenerateClusters(ca.x, cb.x));
    }
    // cluster index for side A first
    let order = if a_left { [0, 1] } else { [1, 0] };
    let ordered = [clusters[order[0]], clusters[order[1]]];

    let frames = poses
        .iter()
        .map(|pf| {
            let p = pick(&pf.boxes, &ordered);
            let get = |k: usize| p[k].map(|i| pf.boxes[i]);
            (pf.frame, SidePlayers { a: get(0), b: get(1) })
        })
        .collect();

    Ok(PlayerTracks {
        centroids: [ordered[0].center, ordered[1].center],
        radii: [ordered[0].radius, ordered[1].radius],
        frames,
    })
}

/// Ball-to-player distance per frame and side, indexed `[A, B]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceSeries {
    pub values: BTreeMap<u32, [Option<f64>; 2]>,
}

impl DistanceSeries {
    pub fn get(&self, frame: u32, side: PlayerSide) -> Option<f64> {
        let v = self.values.get(&frame)?;
        match side {
            PlayerSide::A => v[0],
            PlayerSide::B => v[1],
        }
    }
}

fn player_distance(ball: Point, p: &PoseBox) -> f64 {
    p.hands()
        .map(|h| ball.distance(&h.point()))
        .reduce(f64::min)
        .unwrap_or_else(|| ball.distance(&p.neck.point()))
}

/// Distance from the ball to the nearer hand of each player, or to the neck
/// when neither hand was detected.
pub fn hand_distance(track: &BallTrack, players: &PlayerTracks) -> DistanceSeries {
    let values = track
        .samples()
        .iter()
        .filter_map(|s| {
            let sides = players.frames.get(&s.frame)?;
            let ball = s.point();
            Some((
                s.frame,
                [
                    sides.a.as_ref().map(|p| player_distance(ball, p)),
                    sides.b.as_ref().map(|p| player_distance(ball, p)),
                ],
            ))
        })
        .collect();
    DistanceSeries { values }
}
