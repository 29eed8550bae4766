//! Synthetic matches with exact ground truth.
//!
//! The ball follows ballistic arcs (image coordinates, y down) between
//! racket contacts and table bounces. Every rally ends with the last stroke
//! missing the table, so a rally of `n` strokes has `n` bounces: two on the
//! serve, one for each later stroke but the last. The scoreboard, scene labels
//! and poses are rendered from the same timeline, then noise is added from
//! separate random streams so that the ground truth for a seed does not depend
//! on the noise levels.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EventType;
use crate::score::{PlayerSide, ScoreState, ServeRotation};
use crate::store::QueryRule;
use crate::track::{
    BallSample, BallTrack, CourtRegion, Keypoint, Point, PoseBox, PoseFrame, SceneLabel, ScoreReading, TrackSet,
    VideoMeta,
};

const TOSS_FRAMES: u32 = 8;
const TOSS_DRIFT: f64 = 2.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Standard deviation of ball position jitter, pixels.
    pub ball_sigma: f64,
    /// Probability that a ball sample is missing.
    pub ball_dropout: f64,
    /// Probability that a score reading is replaced by a wrong pair.
    pub ocr_corruption: f64,
    /// Probability that a scene label is inverted.
    pub scene_flip: f64,
    /// Probability that a hand keypoint is missing.
    pub hand_dropout: f64,
    /// Add an umpire and occasional spectators to the pose boxes.
    pub distractors: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { ball_sigma: 0.0, ball_dropout: 0.0, ocr_corruption: 0.0, scene_flip: 0.0, hand_dropout: 0.0, distractors: false }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Side-view table tennis court in a 1280x720 frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub width: u32,
    pub height: u32,
    pub table_x: (f64, f64),
    pub net_x: f64,
    /// Table surface height where the ball bounces.
    pub table_y: f64,
    pub band: (f64, f64),
    /// Box centre x of players A and B.
    pub player_x: (f64, f64),
    pub player_y: f64,
    pub box_size: (f64, f64),
    /// Horizontal distance from a player's box centre to the contact point.
    pub reach: f64,
    /// Vertical range of contact points.
    pub contact_y: (f64, f64),
    /// Pixels per frame squared, downward.
    pub gravity: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            table_x: (340.0, 940.0),
            net_x: 640.0,
            table_y: 470.0,
            band: (450.0, 490.0),
            player_x: (260.0, 1020.0),
            player_y: 400.0,
            box_size: (100.0, 240.0),
            reach: 70.0,
            contact_y: (375.0, 405.0),
            gravity: 1.0,
        }
    }
}

impl Geometry {
    pub fn court(&self) -> CourtRegion {
        let (x0, x1) = self.table_x;
        CourtRegion {
            table: [
                Point::new(x0 + 10.0, self.table_y - 8.0),
                Point::new(x1 - 10.0, self.table_y - 8.0),
                Point::new(x1, self.table_y + 8.0),
                Point::new(x0, self.table_y + 8.0),
            ],
            net_x: self.net_x,
            table_y_min: self.band.0,
            table_y_max: self.band.1,
        }
    }

    fn player_x(&self, side: PlayerSide) -> f64 {
        match side {
            PlayerSide::A => self.player_x.0,
            PlayerSide::B => self.player_x.1,
        }
    }

    /// +1 when the net is to the right of `side`.
    fn toward_net(side: PlayerSide) -> f64 {
        match side {
            PlayerSide::A => 1.0,
            PlayerSide::B => -1.0,
        }
    }

    /// Bounce x range on the half of the table belonging to `side`.
    fn half(&self, side: PlayerSide) -> (f64, f64) {
        match side {
            PlayerSide::A => (self.table_x.0 + 60.0, self.net_x - 40.0),
            PlayerSide::B => (self.net_x + 40.0, self.table_x.1 - 60.0),
        }
    }

    fn hand_offset(side: PlayerSide) -> (f64, f64) {
        (-25.0 * Self::toward_net(side), 15.0)
    }

    fn rest_hand(&self, side: PlayerSide) -> Point {
        Point::new(self.player_x(side) + 40.0 * Self::toward_net(side), self.player_y - 5.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub games: u32,
    /// Points played per game: 11 to 20, or an even number of at least 22.
    pub rallies_per_game: u32,
    /// Inclusive range of strokes per rally.
    pub strokes: (u32, u32),
    pub fps: f64,
    pub first_server: PlayerSide,
    pub noise: NoiseConfig,
    pub geometry: Geometry,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            games: 1,
            rallies_per_game: 11,
            strokes: (5, 9),
            fps: 25.0,
            first_server: PlayerSide::A,
            noise: NoiseConfig::default(),
            geometry: Geometry::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        let n = self.rallies_per_game;
        if !((11..=20).contains(&n) || (n >= 22 && n.is_multiple_of(2))) {
            return bad("rallies_per_game must be 11..=20 or an even number >= 22");
        }
        if self.games == 0 {
            return bad("games must be at least 1");
        }
        let (lo, hi) = self.strokes;
        if lo < 2 || hi <= lo {
            return bad("strokes range must satisfy 2 <= min < max");
        }
        if !(self.fps > 0.0) {
            return bad("fps must be positive");
        }
        let n = &self.noise;
        let rates = [n.ball_dropout, n.ocr_corruption, n.scene_flip, n.hand_dropout];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("noise rates must lie in [0, 1]");
        }
        if !(n.ball_sigma >= 0.0) {
            return bad("ball_sigma must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    /// Index into [`GroundTruth::rallies`].
    pub rally: usize,
    pub event_type: EventType,
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub side: Option<PlayerSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRally {
    pub game_index: u32,
    pub frame_start: u32,
    pub frame_end: u32,
    pub server: PlayerSide,
    pub winner: PlayerSide,
    pub strokes: u32,
    pub score_before: (u32, u32),
    /// Frame at which the scoreboard shows the new score.
    pub change_frame: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rallies: Vec<TruthRally>,
    pub events: Vec<TruthEvent>,
    /// Scoreboard as displayed, one entry per change.
    pub scores: Vec<ScoreState>,
}

impl GroundTruth {
    /// Indices of rallies satisfying the server, winner and stroke fields of
    /// `rule`. Context predicates are not modelled and are ignored.
    pub fn qualified(&self, rule: &QueryRule) -> Vec<usize> {
        self.rallies
            .iter()
            .enumerate()
            .filter(|(_, r)| {
                rule.server.is_none_or(|s| s == r.server)
                    && rule.winner.is_none_or(|w| w == r.winner)
                    && rule.min_strokes.is_none_or(|m| r.strokes as usize >= m)
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn events_in(&self, rally: usize) -> impl Iterator<Item = &TruthEvent> {
        self.events.iter().filter(move |e| e.rally == rally)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMatch {
    pub track: TrackSet,
    pub truth: GroundTruth,
}

struct Knot {
    frame: u32,
    p: Point,
    event: Option<(EventType, Option<PlayerSide>)>,
}

struct RallyPlan {
    seg_start: u32,
    seg_end: u32,
    ball: Vec<(u32, Point)>,
    knots: Vec<Knot>,
}

/// Positions at every frame of a ballistic arc from `a` to `b`, excluding `b`.
fn arc(a: &Knot, b: &Knot, gravity: f64, out: &mut Vec<(u32, Point)>) {
    let t_total = (b.frame - a.frame) as f64;
    let vy0 = (b.p.y - a.p.y) / t_total - gravity * t_total / 2.0;
    for f in a.frame..b.frame {
        let t = (f - a.frame) as f64;
        let x = a.p.x + (b.p.x - a.p.x) * t / t_total;
        let y = a.p.y + vy0 * t + gravity * t * t / 2.0;
        out.push((f, Point::new(x, y)));
    }
}

fn plan_rally(rng: &mut ChaCha8Rng, geo: &Geometry, seg_start: u32, server: PlayerSide, strokes: u32) -> RallyPlan {
    let contact = |rng: &mut ChaCha8Rng, side: PlayerSide| {
        let x = geo.player_x(side) + geo.reach * Geometry::toward_net(side);
        Point::new(x, rng.random_range(geo.contact_y.0..=geo.contact_y.1))
    };
    let bounce = |rng: &mut ChaCha8Rng, side: PlayerSide| {
        let (lo, hi) = geo.half(side);
        Point::new(rng.random_range(lo..=hi), geo.table_y)
    };

    let mut knots = Vec::new();
    let mut f = seg_start + rng.random_range(6..=15);
    let c1 = contact(rng, server);
    let toss_from = Point::new(c1.x + TOSS_DRIFT * TOSS_FRAMES as f64 * Geometry::toward_net(server), c1.y);
    knots.push(Knot { frame: f, p: toss_from, event: None });
    f += TOSS_FRAMES;
    knots.push(Knot { frame: f, p: c1, event: Some((EventType::Hit, Some(server))) });
    f += rng.random_range(6..=9);
    knots.push(Knot { frame: f, p: bounce(rng, server), event: Some((EventType::Bounce, None)) });
    f += rng.random_range(9..=13);
    knots.push(Knot { frame: f, p: bounce(rng, server.other()), event: Some((EventType::Bounce, None)) });

    let mut hitter = server;
    for k in 2..=strokes {
        hitter = hitter.other();
        f += rng.random_range(7..=11);
        knots.push(Knot { frame: f, p: contact(rng, hitter), event: Some((EventType::Hit, Some(hitter))) });
        if k < strokes {
            f += rng.random_range(9..=14);
            knots.push(Knot { frame: f, p: bounce(rng, hitter.other()), event: Some((EventType::Bounce, None)) });
        }
    }
    // the last stroke sails past the far end of the table
    f += rng.random_range(10..=14);
    let long = match hitter {
        PlayerSide::A => rng.random_range(geo.table_x.1 + 60.0..=geo.table_x.1 + 180.0),
        PlayerSide::B => rng.random_range(geo.table_x.0 - 180.0..=geo.table_x.0 - 60.0),
    };
    knots.push(Knot { frame: f, p: Point::new(long, geo.table_y + 70.0), event: None });

    let mut ball = Vec::new();
    for w in knots.windows(2) {
        arc(&w[0], &w[1], geo.gravity, &mut ball);
    }
    let last = knots.last().unwrap();
    ball.push((last.frame, last.p));
    let seg_end = last.frame + rng.random_range(3..=10);
    RallyPlan { seg_start, seg_end, ball, knots }
}

/// Winner of each point in a game of `n` points won by `game_winner`, such
/// that nobody wins the game before the last point.
fn point_winners(rng: &mut ChaCha8Rng, n: u32, game_winner: PlayerSide) -> Vec<PlayerSide> {
    let shuffle_in = |w: u32, l: u32, rng: &mut ChaCha8Rng| {
        let mut pts: Vec<PlayerSide> = std::iter::repeat_n(game_winner, w as usize)
            .chain(std::iter::repeat_n(game_winner.other(), l as usize))
            .collect();
        pts.shuffle(rng);
        pts
    };
    if n <= 20 {
        let mut pts = shuffle_in(10, n - 11, rng);
        pts.push(game_winner);
        pts
    } else {
        let mut pts = shuffle_in(10, 10, rng);
        for _ in 0..(n - 22) / 2 {
            let first = if rng.random_bool(0.5) { game_winner } else { game_winner.other() };
            pts.extend([first, first.other()]);
        }
        pts.extend([game_winner, game_winner]);
        pts
    }
}

fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

/// Piecewise-linear position through `(frame, point)` keys, constant outside.
fn interpolate_keys(keys: &[(u32, Point)], frame: u32, rest: Point) -> Point {
    let i = keys.partition_point(|k| k.0 <= frame);
    match (i.checked_sub(1).map(|j| keys[j]), keys.get(i)) {
        (Some((f0, p0)), _) if f0 == frame => p0,
        (Some((f0, p0)), Some(&(f1, p1))) => lerp(p0, p1, (frame - f0) as f64 / (f1 - f0) as f64),
        _ => rest,
    }
}

/// Generates one match. Identical configs give identical output.
pub fn generate_match(cfg: &SynthConfig) -> Result<SynthMatch, SynthError> {
    cfg.validate()?;
    let geo = &cfg.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rotation = ServeRotation { first_server: cfg.first_server };

    let mut rallies = Vec::new();
    let mut events = Vec::new();
    let mut display = vec![ScoreState { frame: 0, score_a: 0, score_b: 0 }];
    let mut ball = Vec::new();
    let mut segments = Vec::new();
    let mut hand_keys: [Vec<(u32, Point)>; 2] = [Vec::new(), Vec::new()];

    let mut f = rng.random_range(40..=80);
    for game in 0..cfg.games {
        let game_winner = if rng.random_bool(0.5) { PlayerSide::A } else { PlayerSide::B };
        let mut score = (0u32, 0u32);
        for winner in point_winners(&mut rng, cfg.rallies_per_game, game_winner) {
            let server = rotation.server(game, score);
            let want_even = winner == server;
            let choices: Vec<u32> = (cfg.strokes.0..=cfg.strokes.1).filter(|s| (s % 2 == 0) == want_even).collect();
            let strokes = choices[rng.random_range(0..choices.len())];
            let plan = plan_rally(&mut rng, geo, f, server, strokes);
            let index = rallies.len();

            for side in [PlayerSide::A, PlayerSide::B] {
                let keys = &mut hand_keys[side as usize];
                let rest = geo.rest_hand(side);
                keys.push((plan.seg_start, rest));
                for k in &plan.knots {
                    if k.event == Some((EventType::Hit, Some(side))) {
                        let (dx, dy) = Geometry::hand_offset(side);
                        keys.push((k.frame, Point::new(k.p.x + dx, k.p.y + dy)));
                    }
                }
                keys.push((plan.seg_end, rest));
            }
            for k in &plan.knots {
                if let Some((event_type, side)) = k.event {
                    events.push(TruthEvent { rally: index, event_type, frame: k.frame, x: k.p.x, y: k.p.y, side });
                }
            }
            let change_frame = plan.seg_end + rng.random_range(8..=25);
            rallies.push(TruthRally {
                game_index: game,
                frame_start: plan.seg_start,
                frame_end: plan.seg_end,
                server,
                winner,
                strokes,
                score_before: score,
                change_frame,
            });
            match winner {
                PlayerSide::A => score.0 += 1,
                PlayerSide::B => score.1 += 1,
            }
            display.push(ScoreState { frame: change_frame, score_a: score.0, score_b: score.1 });
            segments.push((plan.seg_start, plan.seg_end));
            ball.extend(plan.ball);
            f = change_frame + rng.random_range(20..=60);
        }
        if game + 1 < cfg.games {
            let reset = display.last().unwrap().frame + rng.random_range(40..=80);
            display.push(ScoreState { frame: reset, score_a: 0, score_b: 0 });
            f = reset + rng.random_range(40..=80);
        }
    }
    let frame_count = display.last().unwrap().frame + 60;

    let noise = &cfg.noise;
    let mut track = TrackSet::new(VideoMeta { frame_count, fps: cfg.fps, width: geo.width, height: geo.height });
    track.court = Some(geo.court());

    let mut ball_rng = noise_rng(cfg.seed, 1);
    let jitter = Normal::new(0.0, noise.ball_sigma).expect("validated sigma");
    let mut samples = Vec::with_capacity(ball.len());
    for (frame, p) in ball {
        let dropped = ball_rng.random_bool(noise.ball_dropout);
        let (dx, dy) = (jitter.sample(&mut ball_rng), jitter.sample(&mut ball_rng));
        if !dropped {
            samples.push(BallSample { frame, x: p.x + dx, y: p.y + dy, confidence: 0.9 });
        }
    }
    track.ball = BallTrack::new(samples);

    let mut ocr_rng = noise_rng(cfg.seed, 2);
    let mut shown = 0;
    for frame in 0..frame_count {
        while shown + 1 < display.len() && display[shown + 1].frame <= frame {
            shown += 1;
        }
        let truth = display[shown].pair();
        let reading = if ocr_rng.random_bool(noise.ocr_corruption) {
            let mut wrong = truth;
            while wrong == truth {
                wrong = (ocr_rng.random_range(0..=15), ocr_rng.random_range(0..=15));
            }
            ScoreReading { frame, score_a: wrong.0, score_b: wrong.1, confidence: ocr_rng.random_range(0.5..=1.0) }
        } else {
            ScoreReading { frame, score_a: truth.0, score_b: truth.1, confidence: 0.95 }
        };
        track.scores.push(reading);
    }

    let mut scene_rng = noise_rng(cfg.seed, 3);
    let mut seg = 0;
    for frame in 0..frame_count {
        while seg < segments.len() && segments[seg].1 < frame {
            seg += 1;
        }
        let live = seg < segments.len() && segments[seg].0 <= frame;
        let flip = scene_rng.random_bool(noise.scene_flip);
        track.scenes.push(SceneLabel { frame, in_play: live != flip });
    }

    let mut pose_rng = noise_rng(cfg.seed, 4);
    let kp = |p: Point, confidence: f64| Keypoint { x: p.x, y: p.y, confidence };
    for frame in 0..frame_count {
        let mut boxes = Vec::new();
        for side in [PlayerSide::A, PlayerSide::B] {
            let cx = geo.player_x(side) + 4.0 * (frame as f64 * 0.05 + side as u8 as f64).sin();
            let cy = geo.player_y;
            let racket = interpolate_keys(&hand_keys[side as usize], frame, geo.rest_hand(side));
            let free = Point::new(cx - 30.0 * Geometry::toward_net(side), cy + 20.0);
            let keep_r = !pose_rng.random_bool(noise.hand_dropout);
            let keep_l = !pose_rng.random_bool(noise.hand_dropout);
            let rhand = keep_r.then(|| kp(racket, 0.8));
            let lhand = keep_l.then(|| kp(free, 0.8));
            boxes.push(PoseBox {
                cx,
                cy,
                w: geo.box_size.0,
                h: geo.box_size.1,
                neck: kp(Point::new(cx, cy - 70.0), 0.9),
                lhand,
                rhand,
            });
        }
        if noise.distractors {
            let umpire = Point::new(geo.net_x, geo.player_y + 160.0);
            boxes.push(PoseBox {
                cx: umpire.x,
                cy: umpire.y,
                w: 80.0,
                h: 200.0,
                neck: kp(Point::new(umpire.x, umpire.y - 60.0), 0.9),
                lhand: None,
                rhand: None,
            });
            if pose_rng.random_bool(0.1) {
                let x = if pose_rng.random_bool(0.5) { 40.0 } else { geo.width as f64 - 40.0 };
                boxes.push(PoseBox {
                    cx: x,
                    cy: 250.0,
                    w: 60.0,
                    h: 150.0,
                    neck: kp(Point::new(x, 200.0), 0.7),
                    lhand: None,
                    rhand: None,
                });
            }
        }
        track.poses.push(PoseFrame { frame, boxes });
    }

    let mut scores = display;
    scores.dedup_by_key(|s| s.pair());
    Ok(SynthMatch { track, truth: GroundTruth { rallies, events, scores } })
}
