use serde::{Deserialize, Serialize};

use super::{MatchState, StoreError};
use crate::score::{PlayerSide, RallySpan};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextPredicate {
    pub context_type: String,
    pub value: String,
}

/// Conjunction of rally conditions. Unset fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryRule {
    pub server: Option<PlayerSide>,
    pub winner: Option<PlayerSide>,
    /// Rallies with at least this many strokes.
    pub min_strokes: Option<usize>,
    pub context: Vec<ContextPredicate>,
}

impl QueryRule {
    pub fn is_empty(&self) -> bool {
        self.server.is_none() && self.winner.is_none() && self.min_strokes.is_none() && self.context.is_empty()
    }

    /// Whether `rally` satisfies every field. A context predicate holds when
    /// the rally itself or any live anchor in it carries that annotation.
    pub fn matches(&self, state: &MatchState, rally: &RallySpan) -> bool {
        if self.server.is_some_and(|s| rally.server != Some(s)) {
            return false;
        }
        if self.winner.is_some_and(|w| rally.winner != Some(w)) {
            return false;
        }
        if self.min_strokes.is_some_and(|m| state.strokes(&rally.rally_id) < m) {
            return false;
        }
        self.context.iter().all(|p| {
            let has = |event_id: &str| {
                state
                    .annotations
                    .get(&(event_id.to_string(), p.context_type.clone()))
                    .is_some_and(|n| n.value == p.value)
            };
            has(&rally.rally_id)
                || state
                    .anchors_in(&rally.rally_id, false)
                    .iter()
                    .any(|a| has(&a.anchor_id))
        })
    }
}

/// Rallies satisfying `rule`, in match order.
pub fn query_rallies(state: &MatchState, rule: &QueryRule) -> Result<Vec<RallySpan>, StoreError> {
    if rule.is_empty() {
        return Err(StoreError::EmptyRule);
    }
    Ok(state.rallies.iter().filter(|r| rule.matches(state, r)).cloned().collect())
}
