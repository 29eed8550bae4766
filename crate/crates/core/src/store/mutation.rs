use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    AnchorStatus, Clock, ContextAnnotation, EventAnchor, MatchState, Origin, StoreError, Vocabulary,
};
use crate::events::EventType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Calibrate,
    Add,
    Delete,
    Annotate,
}

/// A state change. Identifiers assigned at the time of the change are part of
/// the payload so that replay can confirm it reproduces them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    Calibrate {
        anchor_id: String,
        delta: i64,
    },
    Add {
        anchor_id: String,
        rally_id: String,
        frame: u32,
        event_type: EventType,
        x: Option<f64>,
        y: Option<f64>,
    },
    Delete {
        anchor_id: String,
    },
    Annotate {
        annotation_id: String,
        event_id: String,
        context_type: String,
        value: String,
        author: String,
    },
}

impl Mutation {
    pub fn kind(&self) -> MutationKind {
        match self {
            Mutation::Calibrate { .. } => MutationKind::Calibrate,
            Mutation::Add { .. } => MutationKind::Add,
            Mutation::Delete { .. } => MutationKind::Delete,
            Mutation::Annotate { .. } => MutationKind::Annotate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub seq: u64,
    pub timestamp: u64,
    #[serde(flatten)]
    pub mutation: Mutation,
}

/// What a mutation produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Applied {
    Anchor(EventAnchor),
    Annotation(ContextAnnotation),
}

fn check_bounds(state: &MatchState, rally_id: &str, start: i64, end: i64) -> Result<(), StoreError> {
    let rally = state.rally(rally_id).ok_or_else(|| StoreError::RallyNotFound(rally_id.to_string()))?;
    if start < rally.frame_start as i64 || end > rally.frame_end as i64 {
        return Err(StoreError::OutOfRallyBounds {
            start,
            end,
            rally_start: rally.frame_start,
            rally_end: rally.frame_end,
        });
    }
    Ok(())
}

fn id_mismatch(expected: String, got: &str) -> StoreError {
    StoreError::CorruptLog { seq: 0, reason: format!("expected id `{expected}`, payload has `{got}`") }
}

/// Applies one mutation. Either the whole change happens or `state` is left
/// untouched.
pub fn apply(
    state: &mut MatchState,
    vocab: &Vocabulary,
    m: &Mutation,
    timestamp: u64,
) -> Result<Applied, StoreError> {
    match m {
        Mutation::Calibrate { anchor_id, delta } => {
            let a = state.anchors.get(anchor_id).ok_or_else(|| StoreError::NotFound(anchor_id.clone()))?;
            if !a.is_live() {
                return Err(StoreError::Deleted(anchor_id.clone()));
            }
            let start = a.frame_start as i64 + delta;
            let end = a.frame_end as i64 + delta;
            check_bounds(state, &a.rally_id, start, end)?;
            let a = state.anchors.get_mut(anchor_id).unwrap();
            a.frame_start = start as u32;
            a.frame_end = end as u32;
            a.status = AnchorStatus::Calibrated;
            Ok(Applied::Anchor(a.clone()))
        }
        Mutation::Add { anchor_id, rally_id, frame, event_type, x, y } => {
            check_bounds(state, rally_id, *frame as i64, *frame as i64)?;
            let expected = state.next_anchor_id();
            if &expected != anchor_id {
                return Err(id_mismatch(expected, anchor_id));
            }
            let a = EventAnchor {
                anchor_id: anchor_id.clone(),
                rally_id: rally_id.clone(),
                event_type: *event_type,
                frame_start: *frame,
                frame_end: *frame,
                x: *x,
                y: *y,
                status: AnchorStatus::Calibrated,
                origin: Origin::UserAdded,
            };
            state.anchors.insert(anchor_id.clone(), a.clone());
            Ok(Applied::Anchor(a))
        }
        Mutation::Delete { anchor_id } => {
            let a = state.anchors.get_mut(anchor_id).ok_or_else(|| StoreError::NotFound(anchor_id.clone()))?;
            if !a.is_live() {
                return Err(StoreError::AlreadyDeleted(anchor_id.clone()));
            }
            a.status = AnchorStatus::Deleted;
            Ok(Applied::Anchor(a.clone()))
        }
        Mutation::Annotate { annotation_id, event_id, context_type, value, author } => {
            vocab.check(context_type, value)?;
            if !state.is_live_event(event_id) {
                return Err(StoreError::EventNotFound(event_id.clone()));
            }
            let expected = state.next_annotation_id();
            if &expected != annotation_id {
                return Err(id_mismatch(expected, annotation_id));
            }
            let n = ContextAnnotation {
                annotation_id: annotation_id.clone(),
                context_type: context_type.clone(),
                event_id: event_id.clone(),
                value: value.clone(),
                author: author.clone(),
                timestamp,
            };
            state.annotations.insert((event_id.clone(), context_type.clone()), n.clone());
            Ok(Applied::Annotation(n))
        }
    }
}

/// Rebuilds the state reached by applying `log` to `base`. Sequence numbers
/// must run 1, 2, 3, ... without gaps, and every record must apply cleanly.
pub fn replay(base: &MatchState, vocab: &Vocabulary, log: &[MutationRecord]) -> Result<MatchState, StoreError> {
    let mut state = base.clone();
    for (i, rec) in log.iter().enumerate() {
        let expected = i as u64 + 1;
        if rec.seq != expected {
            return Err(StoreError::CorruptLog {
                seq: rec.seq,
                reason: format!("expected sequence {expected}"),
            });
        }
        apply(&mut state, vocab, &rec.mutation, rec.timestamp).map_err(|e| StoreError::CorruptLog {
            seq: rec.seq,
            reason: match e {
                StoreError::CorruptLog { reason, .. } => reason,
                other => other.to_string(),
            },
        })?;
    }
    Ok(state)
}

/// Durable destination for accepted mutations.
pub trait LogSink: Send {
    fn append(&mut self, rec: &MutationRecord) -> std::io::Result<()>;
}

/// Live store for one match. Callers serialize mutations (one writer); readers
/// take cheap snapshots through [`MatchStore::state`].
pub struct MatchStore {
    base: Arc<MatchState>,
    state: Arc<MatchState>,
    vocab: Arc<Vocabulary>,
    log: Vec<MutationRecord>,
    clock: Arc<dyn Clock>,
    sink: Option<Box<dyn LogSink>>,
}

impl std::fmt::Debug for MatchStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatchStore")
            .field("match_id", &self.state.info.match_id)
            .field("log_len", &self.log.len())
            .finish()
    }
}

impl MatchStore {
    pub fn new(base: MatchState, vocab: Arc<Vocabulary>, clock: Arc<dyn Clock>) -> Self {
        let base = Arc::new(base);
        Self { state: base.clone(), base, vocab, log: Vec::new(), clock, sink: None }
    }

    /// Restores a store from its base state and log.
    pub fn open(
        base: MatchState,
        vocab: Arc<Vocabulary>,
        log: Vec<MutationRecord>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StoreError> {
        let state = replay(&base, &vocab, &log)?;
        Ok(Self { base: Arc::new(base), state: Arc::new(state), vocab, log, clock, sink: None })
    }

    pub fn with_sink(mut self, sink: Box<dyn LogSink>) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn match_id(&self) -> &str {
        &self.state.info.match_id
    }

    pub fn state(&self) -> Arc<MatchState> {
        self.state.clone()
    }

    pub fn base(&self) -> &MatchState {
        &self.base
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn log(&self) -> &[MutationRecord] {
        &self.log
    }

    /// State after the first `seq` mutations.
    pub fn snapshot_at(&self, seq: u64) -> Result<MatchState, StoreError> {
        let n = (seq as usize).min(self.log.len());
        replay(&self.base, &self.vocab, &self.log[..n])
    }

    fn commit(&mut self, mutation: Mutation) -> Result<(Applied, u64), StoreError> {
        let timestamp = self.clock.now_ms();
        let mut next = (*self.state).clone();
        let applied = apply(&mut next, &self.vocab, &mutation, timestamp)?;
        let rec = MutationRecord { seq: self.log.len() as u64 + 1, timestamp, mutation };
        if let Some(sink) = self.sink.as_mut() {
            sink.append(&rec)?;
        }
        let seq = rec.seq;
        self.log.push(rec);
        self.state = Arc::new(next);
        Ok((applied, seq))
    }

    fn anchor(applied: Applied) -> EventAnchor {
        match applied {
            Applied::Anchor(a) => a,
            Applied::Annotation(_) => unreachable!("anchor mutation produced an annotation"),
        }
    }

    /// Shifts an anchor by `delta` frames and marks it calibrated.
    pub fn calibrate(&mut self, anchor_id: &str, delta: i64) -> Result<EventAnchor, StoreError> {
        self.calibrate_seq(anchor_id, delta).map(|(a, _)| a)
    }

    /// As [`MatchStore::calibrate`], also returning the log sequence number.
    pub fn calibrate_seq(&mut self, anchor_id: &str, delta: i64) -> Result<(EventAnchor, u64), StoreError> {
        let (a, seq) = self.commit(Mutation::Calibrate { anchor_id: anchor_id.to_string(), delta })?;
        Ok((Self::anchor(a), seq))
    }

    pub fn add_anchor(
        &mut self,
        rally_id: &str,
        frame: u32,
        event_type: EventType,
        x: Option<f64>,
        y: Option<f64>,
    ) -> Result<EventAnchor, StoreError> {
        let anchor_id = self.state.next_anchor_id();
        let m = Mutation::Add { anchor_id, rally_id: rally_id.to_string(), frame, event_type, x, y };
        self.commit(m).map(|(a, _)| Self::anchor(a))
    }

    pub fn delete_anchor(&mut self, anchor_id: &str) -> Result<EventAnchor, StoreError> {
        self.commit(Mutation::Delete { anchor_id: anchor_id.to_string() })
            .map(|(a, _)| Self::anchor(a))
    }

    /// Sets the value of one context type on an event, replacing any earlier value.
    pub fn annotate(
        &mut self,
        event_id: &str,
        context_type: &str,
        value: &str,
        author: &str,
    ) -> Result<ContextAnnotation, StoreError> {
        let m = Mutation::Annotate {
            annotation_id: self.state.next_annotation_id(),
            event_id: event_id.to_string(),
            context_type: context_type.to_string(),
            value: value.to_string(),
            author: author.to_string(),
        };
        match self.commit(m)?.0 {
            Applied::Annotation(n) => Ok(n),
            Applied::Anchor(_) => unreachable!("annotate produced an anchor"),
        }
    }
}
