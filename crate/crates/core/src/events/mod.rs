//! Hit and bounce detection from ball kinematics and player poses.

mod detect;
mod kinematics;
mod players;

pub use detect::{detect_bounces, detect_hits, merge_events, Axis, DetectParams, RawEvent};
pub use kinematics::{estimate_speed, velocity, velocity_with_window, Velocity, VelocitySeries, DEFAULT_SMOOTHING};
pub use players::{assign_players, hand_distance, DistanceSeries, PlayerTracks, SidePlayers};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EventType {
    Hit,
    Bounce,
    Rally,
}

impl std::fmt::Display for EventType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EventType::Hit => "HIT",
            EventType::Bounce => "BOUNCE",
            EventType::Rally => "RALLY",
        })
    }
}

impl std::str::FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "HIT" => Ok(EventType::Hit),
            "BOUNCE" => Ok(EventType::Bounce),
            "RALLY" => Ok(EventType::Rally),
            _ => Err(format!("unknown event type `{s}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("no pose boxes to cluster")]
    NoPoses,
    #[error("both player clusters lie on the same side of the net (x {0:.1} and {1:.1})")]
    DegenerateClusters(f64, f64),
    #[error("ball velocity is undefined at frame {0}")]
    UndefinedAtFrame(u32),
}

impl EventError {
    pub fn code(&self) -> &'static str {
        match self {
            EventError::NoPoses => "NoPoses",
            EventError::DegenerateClusters(..) => "DegenerateClusters",
            EventError::UndefinedAtFrame(_) => "UndefinedAtFrame",
        }
    }
}
