use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ContextAnnotation, EventAnchor, MatchInfo, MatchState, StoreError};
use crate::score::RallySpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExportFormat {
    /// Match header, rallies, and every anchor including deleted ones.
    Anchors,
    /// Match header and every annotation.
    Annotations,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ANCHORS" => Ok(ExportFormat::Anchors),
            "ANNOTATIONS" => Ok(ExportFormat::Annotations),
            _ => Err(format!("unknown export format `{s}`")),
        }
    }
}

/// One line of an export file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ExportRecord {
    Match(MatchInfo),
    Rally(RallySpan),
    Anchor(EventAnchor),
    Annotation(ContextAnnotation),
}

fn line(out: &mut Vec<u8>, rec: &ExportRecord) {
    serde_json::to_writer(&mut *out, rec).expect("export records serialize");
    out.push(b'\n');
}

/// Newline-delimited JSON, one record per line, in a fixed order: the match
/// header, then rallies by start frame, then anchors or annotations by id.
pub fn export(state: &MatchState, format: ExportFormat) -> Vec<u8> {
    let mut out = Vec::new();
    line(&mut out, &ExportRecord::Match(state.info.clone()));
    match format {
        ExportFormat::Anchors => {
            for r in &state.rallies {
                line(&mut out, &ExportRecord::Rally(r.clone()));
            }
            for a in state.anchors.values() {
                line(&mut out, &ExportRecord::Anchor(a.clone()));
            }
        }
        ExportFormat::Annotations => {
            let mut by_id: Vec<&ContextAnnotation> = state.annotations.values().collect();
            by_id.sort_by(|a, b| a.annotation_id.cmp(&b.annotation_id));
            for n in by_id {
                line(&mut out, &ExportRecord::Annotation(n.clone()));
            }
        }
    }
    out
}

/// Rebuilds a state from export lines. Files of both formats may be
/// concatenated; the match header must be present and consistent.
pub fn import(bytes: &[u8]) -> Result<MatchState, StoreError> {
    let text = std::str::from_utf8(bytes).map_err(|e| StoreError::BadRecord { line: 0, reason: e.to_string() })?;
    let mut info: Option<MatchInfo> = None;
    let mut rallies = Vec::new();
    let mut anchors = BTreeMap::new();
    let mut annotations = BTreeMap::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| StoreError::BadRecord { line: i + 1, reason };
        let rec: ExportRecord = serde_json::from_str(l).map_err(|e| bad(e.to_string()))?;
        match rec {
            ExportRecord::Match(m) => match &info {
                Some(prev) if *prev != m => return Err(bad("conflicting match header".into())),
                Some(_) => {}
                None => info = Some(m),
            },
            ExportRecord::Rally(r) => rallies.push(r),
            ExportRecord::Anchor(a) => {
                anchors.insert(a.anchor_id.clone(), a);
            }
            ExportRecord::Annotation(n) => {
                annotations.insert((n.event_id.clone(), n.context_type.clone()), n);
            }
        }
    }
    let info = info.ok_or(StoreError::BadRecord { line: 0, reason: "missing match header".into() })?;
    rallies.sort_by(|a: &RallySpan, b| (a.frame_start, &a.rally_id).cmp(&(b.frame_start, &b.rally_id)));
    Ok(MatchState { info, rallies, anchors, annotations })
}
