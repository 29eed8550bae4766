//! Match structure from scoreboard readings.
//!
//! OCR readings of the scoreboard are noisy. The clean score history is the
//! longest subsequence of readings in which every step is either a repeat of
//! the same score, a single point for one player, or a reset to 0:0 after a
//! finished game. Score changes then split the in-play segments into rallies.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::InPlaySegment;
use crate::track::ScoreReading;

pub const DEFAULT_MIN_CONF: f64 = 0.5;

/// Points needed to win a game.
pub const GAME_POINTS: u32 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayerSide {
    A,
    B,
}

impl PlayerSide {
    pub fn other(self) -> Self {
        match self {
            PlayerSide::A => PlayerSide::B,
            PlayerSide::B => PlayerSide::A,
        }
    }
}

impl std::fmt::Display for PlayerSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlayerSide::A => "A",
            PlayerSide::B => "B",
        })
    }
}

impl std::str::FromStr for PlayerSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(PlayerSide::A),
            "B" | "b" => Ok(PlayerSide::B),
            other => Err(format!("unknown player side `{other}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("no score readings at or above the confidence threshold")]
    EmptyInput,
    #[error("no in-play segments to pair with score changes")]
    NoSegments,
}

impl ScoreError {
    pub fn code(&self) -> &'static str {
        match self {
            ScoreError::EmptyInput => "EmptyInput",
            ScoreError::NoSegments => "NoSegments",
        }
    }
}

/// A score pair and the first frame at which it is shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreState {
    pub frame: u32,
    pub score_a: u32,
    pub score_b: u32,
}

impl ScoreState {
    pub fn pair(&self) -> (u32, u32) {
        (self.score_a, self.score_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpan {
    pub index: u32,
    pub frame_start: u32,
    pub frame_end: u32,
    pub final_score: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RallySpan {
    pub rally_id: String,
    pub game_index: u32,
    pub frame_start: u32,
    pub frame_end: u32,
    pub server: Option<PlayerSide>,
    /// `None` for in-play segments with no score change (lets, replays).
    pub winner: Option<PlayerSide>,
    pub score_before: (u32, u32),
}

impl RallySpan {
    pub fn contains(&self, frame: u32) -> bool {
        frame >= self.frame_start && frame <= self.frame_end
    }

    pub fn is_unmatched(&self) -> bool {
        self.winner.is_none()
    }
}

/// Whether `(a, b)` is a score at which a game ends: 11 against at most 9, or
/// a two-point lead after 10:10. Scores past the end of a game (such as 14:9)
/// are not final because play would have stopped earlier.
pub fn is_game_over((a, b): (u32, u32)) -> bool {
    let (hi, lo) = (a.max(b), a.min(b));
    (hi == GAME_POINTS && lo <= GAME_POINTS - 2) || (hi > GAME_POINTS && hi - lo == 2)
}

/// Keeps only readings that belong to a run of at least `min_run` consecutive
/// readings showing the same pair. `min_run <= 1` keeps everything.
pub fn debounce(readings: &[ScoreReading], min_run: usize) -> Vec<ScoreReading> {
    let mut out = Vec::with_capacity(readings.len());
    for run in readings.chunk_by(|x, y| (x.score_a, x.score_b) == (y.score_a, y.score_b)) {
        if run.len() >= min_run {
            out.extend_from_slice(run);
        }
    }
    out
}

/// Scores that may directly follow `p` in a clean history, `p` itself included.
fn successors(p: (u32, u32)) -> impl Iterator<Item = (u32, u32)> {
    let over = is_game_over(p);
    let step = (!over).then(|| [(p.0 + 1, p.1), (p.0, p.1 + 1)]);
    std::iter::once(p)
        .chain(step.into_iter().flatten())
        .chain(over.then_some((0, 0)))
}

pub fn is_legal_step(from: (u32, u32), to: (u32, u32)) -> bool {
    successors(from).any(|s| s == to)
}

/// Longest legal subsequence of the readings with `confidence >= min_conf`,
/// collapsed to the first frame of each run of equal scores.
///
/// Among maximum-length subsequences the one with the lexicographically
/// smallest frame sequence wins. Runs in `O(n log n)`.
pub fn clean_scores(readings: &[ScoreReading], min_conf: f64) -> Result<Vec<ScoreState>, ScoreError> {
    let kept: Vec<&ScoreReading> = readings.iter().filter(|r| r.confidence >= min_conf).collect();
    if kept.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    let n = kept.len();
    let pair = |i: usize| (kept[i].score_a, kept[i].score_b);

    // chain[i]: length of the longest legal subsequence starting at reading i.
    let mut chain = vec![0u32; n];
    let mut best_from: HashMap<(u32, u32), u32> = HashMap::new();
    for i in (0..n).rev() {
        let tail = successors(pair(i))
            .filter_map(|s| best_from.get(&s).copied())
            .max()
            .unwrap_or(0);
        chain[i] = tail + 1;
        let e = best_from.entry(pair(i)).or_insert(0);
        *e = (*e).max(chain[i]);
    }

    let mut by_key: HashMap<((u32, u32), u32), Vec<usize>> = HashMap::new();
    for (i, &c) in chain.iter().enumerate() {
        by_key.entry((pair(i), c)).or_default().push(i);
    }

    let longest = *chain.iter().max().expect("non-empty");
    let mut cur = chain.iter().position(|&c| c == longest).expect("max exists");
    let mut picked = Vec::with_capacity(longest as usize);
    picked.push(cur);
    for remaining in (1..longest).rev() {
        cur = successors(pair(cur))
            .filter_map(|s| {
                let idx = by_key.get(&(s, remaining))?;
                let at = idx.partition_point(|&j| j <= cur);
                idx.get(at).copied()
            })
            .min()
            .expect("chain lengths guarantee a successor");
        picked.push(cur);
    }

    let mut states: Vec<ScoreState> = Vec::new();
    for i in picked {
        let (a, b) = pair(i);
        if states.last().is_some_and(|s| s.pair() == (a, b)) {
            continue;
        }
        states.push(ScoreState { frame: kept[i].frame, score_a: a, score_b: b });
    }
    Ok(states)
}

fn starts_new_game(prev: &ScoreState, cur: &ScoreState) -> bool {
    !(cur.score_a >= prev.score_a && cur.score_b >= prev.score_b)
}

/// Game index of each state.
fn game_indices(states: &[ScoreState]) -> Vec<u32> {
    let mut game = 0;
    let mut out = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        if i > 0 && starts_new_game(&states[i - 1], s) {
            game += 1;
        }
        out.push(game);
    }
    out
}

/// Splits the clean score history into games at every score reset.
pub fn detect_games(states: &[ScoreState]) -> Vec<GameSpan> {
    let mut games: Vec<GameSpan> = Vec::new();
    for (s, g) in states.iter().zip(game_indices(states)) {
        match games.last_mut() {
            Some(span) if span.index == g => {
                span.frame_end = s.frame;
                span.final_score = s.pair();
            }
            _ => games.push(GameSpan {
                index: g,
                frame_start: s.frame,
                frame_end: s.frame,
                final_score: s.pair(),
            }),
        }
    }
    games
}

/// Table-tennis service order: two serves each until 10:10, then one each.
/// The first server of each game alternates, starting with `first_server`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServeRotation {
    pub first_server: PlayerSide,
}

impl Default for ServeRotation {
    fn default() -> Self {
        Self { first_server: PlayerSide::A }
    }
}

impl ServeRotation {
    pub fn server(&self, game_index: u32, score_before: (u32, u32)) -> PlayerSide {
        let opener = if game_index.is_multiple_of(2) { self.first_server } else { self.first_server.other() };
        let played = score_before.0 + score_before.1;
        let turn = if played < 2 * (GAME_POINTS - 1) { played / 2 } else { played };
        if turn % 2 == 0 {
            opener
        } else {
            opener.other()
        }
    }
}

/// Pairs every score change with the last in-play segment that ends before it.
///
/// A segment claimed by several changes keeps the earliest one. Segments with
/// no change are still returned, with unknown server and winner.
pub fn rally_boundaries(
    states: &[ScoreState],
    segments: &[InPlaySegment],
    rotation: &ServeRotation,
) -> Result<Vec<RallySpan>, ScoreError> {
    if segments.is_empty() {
        return Err(ScoreError::NoSegments);
    }
    let games = game_indices(states);

    struct Change {
        game: u32,
        before: (u32, u32),
        winner: PlayerSide,
    }
    let mut claimed: Vec<Option<Change>> = (0..segments.len()).map(|_| None).collect();

    for k in 1..states.len() {
        if games[k] != games[k - 1] {
            continue;
        }
        let (prev, cur) = (states[k - 1], states[k]);
        let winner = if cur.score_a == prev.score_a + 1 && cur.score_b == prev.score_b {
            PlayerSide::A
        } else if cur.score_b == prev.score_b + 1 && cur.score_a == prev.score_a {
            PlayerSide::B
        } else {
            continue;
        };
        let ended_before = segments.partition_point(|s| s.frame_end < cur.frame);
        let Some(seg) = ended_before.checked_sub(1) else { continue };
        if claimed[seg].is_none() {
            claimed[seg] = Some(Change { game: games[k], before: prev.pair(), winner });
        }
    }

    let state_at = |frame: u32| -> Option<usize> {
        states.partition_point(|s| s.frame <= frame).checked_sub(1)
    };

    let rallies = segments
        .iter()
        .zip(claimed)
        .enumerate()
        .map(|(i, (seg, change))| {
            let rally_id = format!("r{:03}", i + 1);
            match change {
                Some(c) => RallySpan {
                    rally_id,
                    game_index: c.game,
                    frame_start: seg.frame_start,
                    frame_end: seg.frame_end,
                    server: Some(rotation.server(c.game, c.before)),
                    winner: Some(c.winner),
                    score_before: c.before,
                },
                None => {
                    let (game_index, score_before) = state_at(seg.frame_start)
                        .map(|k| (games[k], states[k].pair()))
                        .unwrap_or((0, (0, 0)));
                    RallySpan {
                        rally_id,
                        game_index,
                        frame_start: seg.frame_start,
                        frame_end: seg.frame_end,
                        server: None,
                        winner: None,
                        score_before,
                    }
                }
            }
        })
        .collect();
    Ok(rallies)
}
