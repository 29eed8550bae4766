//! Event anchors for racket-sports video.
//!
//! Object-level tracks (ball, poses, scoreboard readings, scene labels) go in;
//! rally structure and hit and bounce anchors come out, ready for human
//! calibration and context annotation through [`store`].

pub mod events;
pub mod hints;
pub mod metrics;
pub mod pipeline;
pub mod scene;
pub mod score;
pub mod store;
pub mod synth;
pub mod track;

pub use events::{EventType, RawEvent};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError, PipelineOutput};
pub use score::{PlayerSide, RallySpan};
pub use store::{EventAnchor, MatchState, MatchStore, QueryRule, StoreError};
pub use track::TrackSet;
