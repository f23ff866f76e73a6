//! Interaction events and event-log validation.
//!
//! An event log is the ordered list of exploration actions of one session.
//! On disk each event is one JSON line:
//! `{"event_id":int,"ts":"RFC3339","kind":str,"node_id":str?,"payload":object}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{HypothesisDraft, NodeId, BRANCH_HYPOTHESES, INITIAL_HYPOTHESES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    SessionStart,
    NodeClick,
    BranchGenerate,
    BranchRegenerate,
    ChartExpand,
    ChartCollapse,
    BookmarkSet,
    BookmarkClear,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::SessionStart,
        EventKind::NodeClick,
        EventKind::BranchGenerate,
        EventKind::BranchRegenerate,
        EventKind::ChartExpand,
        EventKind::ChartCollapse,
        EventKind::BookmarkSet,
        EventKind::BookmarkClear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SessionStart => "session_start",
            EventKind::NodeClick => "node_click",
            EventKind::BranchGenerate => "branch_generate",
            EventKind::BranchRegenerate => "branch_regenerate",
            EventKind::ChartExpand => "chart_expand",
            EventKind::ChartCollapse => "chart_collapse",
            EventKind::BookmarkSet => "bookmark_set",
            EventKind::BookmarkClear => "bookmark_clear",
        }
    }

    /// Kinds that move the focus to their target node.
    pub fn sets_focus(self) -> bool {
        matches!(
            self,
            EventKind::NodeClick | EventKind::BranchGenerate | EventKind::BranchRegenerate
        )
    }

    pub fn is_generation(self) -> bool {
        matches!(self, EventKind::BranchGenerate | EventKind::BranchRegenerate)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

impl Serialize for EventKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A created hypothesis as recorded in a generation event, so the tree can
/// be rebuilt without calling the generator again.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedNode {
    pub node_id: NodeId,
    #[serde(flatten)]
    pub draft: HypothesisDraft,
}

/// Kind-specific event data. Absent fields are omitted on the wire.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_id: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_input: Option<String>,
    /// Ids of the nodes created by a generation, in sibling order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub created: Vec<NodeId>,
    /// Tombstones: nodes removed by a regeneration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<CreatedNode>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub event_id: u64,
    pub ts: DateTime<Utc>,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<NodeId>,
    #[serde(default)]
    pub payload: EventPayload,
}

impl InteractionEvent {
    pub fn to_json_line(&self) -> String {
        // Round-trip through Value so keys come out sorted.
        let value = serde_json::to_value(self).expect("event serializes");
        serde_json::to_string(&value).expect("value serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("corrupt event log{}: {reason}", .event_id.map(|id| format!(" at event {id}")).unwrap_or_default())]
pub struct CorruptLog {
    pub event_id: Option<u64>,
    pub reason: String,
}

impl CorruptLog {
    pub fn at(event_id: u64, reason: impl Into<String>) -> Self {
        Self { event_id: Some(event_id), reason: reason.into() }
    }

    pub fn general(reason: impl Into<String>) -> Self {
        Self { event_id: None, reason: reason.into() }
    }
}

/// Parses a JSONL event stream. Blank lines are skipped; any unparsable
/// line (truncated JSON, unknown kind) is a [`CorruptLog`] naming the
/// offending event id when it can be recovered.
pub fn parse_jsonl(text: &str) -> Result<Vec<InteractionEvent>, CorruptLog> {
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: InteractionEvent = serde_json::from_str(line).map_err(|e| {
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("event_id").and_then(Value::as_u64));
            CorruptLog {
                event_id: id,
                reason: format!("line {}: {e}", lineno + 1),
            }
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Checks the structural contract of a full session log: ids gap-free from
/// 1, non-decreasing timestamps, a single leading `session_start` with five
/// created nodes, and per-kind targets and cardinalities.
pub fn validate(events: &[InteractionEvent]) -> Result<(), CorruptLog> {
    let mut prev_ts: Option<DateTime<Utc>> = None;
    for (i, event) in events.iter().enumerate() {
        let expected = i as u64 + 1;
        if event.event_id != expected {
            return Err(CorruptLog::at(
                event.event_id,
                format!("sequence gap: expected event {expected}"),
            ));
        }
        if prev_ts.is_some_and(|p| event.ts < p) {
            return Err(CorruptLog::at(event.event_id, "timestamp went backwards"));
        }
        prev_ts = Some(event.ts);

        let is_start = event.kind == EventKind::SessionStart;
        if is_start != (i == 0) {
            return Err(CorruptLog::at(
                event.event_id,
                "session_start must be exactly the first event",
            ));
        }
        if is_start != event.node_id.is_none() {
            return Err(CorruptLog::at(
                event.event_id,
                "only session_start may omit node_id",
            ));
        }
        let created = event.payload.created.len();
        match event.kind {
            EventKind::SessionStart if created != INITIAL_HYPOTHESES => {
                return Err(CorruptLog::at(
                    event.event_id,
                    format!("session_start created {created} nodes"),
                ));
            }
            EventKind::BranchGenerate if created != BRANCH_HYPOTHESES => {
                return Err(CorruptLog::at(
                    event.event_id,
                    format!("branch_generate created {created} nodes"),
                ));
            }
            EventKind::BranchRegenerate if created == 0 => {
                return Err(CorruptLog::at(event.event_id, "branch_regenerate created nothing"));
            }
            _ => {}
        }
        if !event.payload.nodes.is_empty()
            && !event.payload.nodes.iter().map(|n| &n.node_id).eq(event.payload.created.iter())
        {
            return Err(CorruptLog::at(
                event.event_id,
                "payload nodes disagree with created ids",
            ));
        }
    }
    Ok(())
}
