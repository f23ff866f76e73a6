//! Sessions: a tree plus the event log that produced it.
//!
//! Every mutating operation on [`Session`] changes the tree and emits exactly
//! one [`InteractionEvent`]. [`Session::replay`] applies a persisted log to a
//! fresh tree and is the inverse of that recording.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::events::{
    self, CorruptLog, CreatedNode, EventKind, EventPayload, InteractionEvent,
};
use crate::model::{
    DiagramTree, Focus, HypothesisDraft, HypothesisNode, NodeId, TreeError, BRANCH_HYPOTHESES,
    INITIAL_HYPOTHESES,
};

/// Durable description of a session (session.json).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub dataset_ref: String,
    pub intent_text: String,
    pub created_at: DateTime<Utc>,
    pub event_log_ref: String,
    #[serde(default, flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl SessionMeta {
    pub fn new(session_id: &str, intent_text: &str, created_at: DateTime<Utc>) -> Self {
        Self {
            session_id: session_id.to_owned(),
            dataset_ref: "dataset.csv".into(),
            intent_text: intent_text.to_owned(),
            created_at,
            event_log_ref: "events.jsonl".into(),
            extra: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("expected {expected} hypotheses, got {actual}")]
    WrongDraftCount { expected: usize, actual: usize },
    #[error("branching the intent node is not supported; regenerate it instead")]
    RootNotBranchable,
    #[error("analysis intent is empty")]
    EmptyIntent,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub meta: SessionMeta,
    pub tree: DiagramTree,
    events: Vec<InteractionEvent>,
    focus: Focus,
}

/// Result of a (re)generation call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationOutcome {
    pub created: Vec<NodeId>,
    pub removed: Vec<NodeId>,
}

fn created_nodes(ids: &[NodeId], drafts: &[HypothesisDraft]) -> Vec<CreatedNode> {
    ids.iter()
        .zip(drafts)
        .map(|(id, d)| CreatedNode { node_id: id.clone(), draft: d.clone() })
        .collect()
}

fn expect_count(expected: usize, drafts: &[HypothesisDraft]) -> Result<(), SessionError> {
    if drafts.len() != expected {
        return Err(SessionError::WrongDraftCount { expected, actual: drafts.len() });
    }
    Ok(())
}

impl Session {
    /// Creates a session with the five initial hypotheses under the intent
    /// node and records `session_start`.
    pub fn start(
        meta: SessionMeta,
        initial: &[HypothesisDraft],
        now: DateTime<Utc>,
    ) -> Result<Self, SessionError> {
        if meta.intent_text.trim().is_empty() {
            return Err(SessionError::EmptyIntent);
        }
        expect_count(INITIAL_HYPOTHESES, initial)?;
        let mut tree = DiagramTree::new(&meta.intent_text);
        let root = tree.root_id().clone();
        let created = tree.add_children(&root, initial, None)?;
        let focus = Focus::at_root(&tree);
        let mut session = Self { meta, tree, events: Vec::new(), focus };
        let payload = EventPayload {
            intent: Some(session.meta.intent_text.clone()),
            root_id: Some(root),
            nodes: created_nodes(&created, initial),
            created,
            ..Default::default()
        };
        session.record(EventKind::SessionStart, None, payload, now);
        Ok(session)
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn last_event_id(&self) -> u64 {
        self.events.last().map_or(0, |e| e.event_id)
    }

    pub fn focus(&self) -> &Focus {
        &self.focus
    }

    fn record(
        &mut self,
        kind: EventKind,
        node_id: Option<NodeId>,
        payload: EventPayload,
        now: DateTime<Utc>,
    ) -> &InteractionEvent {
        // Keep timestamps non-decreasing even if the wall clock steps back.
        let ts = self.events.last().map_or(now, |e| e.ts.max(now));
        if kind.sets_focus() {
            if let Some(id) = &node_id {
                self.focus = Focus { current_node_id: id.clone() };
            }
        }
        self.events.push(InteractionEvent {
            event_id: self.last_event_id() + 1,
            ts,
            kind,
            node_id,
            payload,
        });
        self.events.last().expect("just pushed")
    }

    /// Appends three hypotheses under a non-root node.
    pub fn branch(
        &mut self,
        node: &NodeId,
        drafts: &[HypothesisDraft],
        user_input: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<(GenerationOutcome, &InteractionEvent), SessionError> {
        if self.tree.get(node)?.is_root() {
            return Err(SessionError::RootNotBranchable);
        }
        expect_count(BRANCH_HYPOTHESES, drafts)?;
        let created = self.tree.add_children(node, drafts, user_input)?;
        let payload = EventPayload {
            user_input: user_input.map(str::to_owned),
            nodes: created_nodes(&created, drafts),
            created: created.clone(),
            ..Default::default()
        };
        let event = self.record(EventKind::BranchGenerate, Some(node.clone()), payload, now);
        Ok((GenerationOutcome { created, removed: Vec::new() }, event))
    }

    /// Replaces the subtree under `node`. The intent node takes five
    /// drafts, any other node three.
    pub fn regenerate(
        &mut self,
        node: &NodeId,
        drafts: &[HypothesisDraft],
        user_input: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<(GenerationOutcome, &InteractionEvent), SessionError> {
        let expected = if self.tree.get(node)?.is_root() {
            INITIAL_HYPOTHESES
        } else {
            BRANCH_HYPOTHESES
        };
        expect_count(expected, drafts)?;
        let rep = self.tree.replace_children(node, drafts, user_input)?;
        let payload = EventPayload {
            user_input: user_input.map(str::to_owned),
            nodes: created_nodes(&rep.created, drafts),
            created: rep.created.clone(),
            removed: rep.removed.clone(),
            ..Default::default()
        };
        let event = self.record(EventKind::BranchRegenerate, Some(node.clone()), payload, now);
        Ok((GenerationOutcome { created: rep.created, removed: rep.removed }, event))
    }

    pub fn click(&mut self, node: &NodeId, now: DateTime<Utc>) -> Result<&InteractionEvent, SessionError> {
        self.tree.get(node)?;
        Ok(self.record(EventKind::NodeClick, Some(node.clone()), EventPayload::default(), now))
    }

    pub fn expand_chart(&mut self, node: &NodeId, now: DateTime<Utc>) -> Result<&InteractionEvent, SessionError> {
        self.tree.get(node)?;
        Ok(self.record(EventKind::ChartExpand, Some(node.clone()), EventPayload::default(), now))
    }

    pub fn collapse_chart(&mut self, node: &NodeId, now: DateTime<Utc>) -> Result<&InteractionEvent, SessionError> {
        self.tree.get(node)?;
        Ok(self.record(EventKind::ChartCollapse, Some(node.clone()), EventPayload::default(), now))
    }

    pub fn set_bookmark(
        &mut self,
        node: &NodeId,
        flag: bool,
        now: DateTime<Utc>,
    ) -> Result<(HypothesisNode, &InteractionEvent), SessionError> {
        let updated = self.tree.set_bookmark(node, flag)?.clone();
        let kind = if flag { EventKind::BookmarkSet } else { EventKind::BookmarkClear };
        let event = self.record(kind, Some(node.clone()), EventPayload::default(), now);
        Ok((updated, event))
    }

    /// Assembles a session from an already-built tree and its log. The log
    /// is validated but not re-applied.
    pub fn from_parts(
        meta: SessionMeta,
        tree: DiagramTree,
        log: Vec<InteractionEvent>,
    ) -> Result<Self, CorruptLog> {
        events::validate(&log)?;
        let focus = log
            .iter()
            .rev()
            .filter(|e| e.kind.sets_focus())
            .find_map(|e| e.node_id.clone())
            .map_or_else(|| Focus::at_root(&tree), |id| Focus { current_node_id: id });
        Ok(Self { meta, tree, events: log, focus })
    }

    /// Rebuilds a session by applying a validated log to a fresh tree.
    pub fn replay(meta: SessionMeta, log: Vec<InteractionEvent>) -> Result<Self, CorruptLog> {
        events::validate(&log)?;
        let start = log.first().ok_or_else(|| CorruptLog::general("empty event log"))?;
        let intent = start.payload.intent.as_deref().unwrap_or(&meta.intent_text);
        let mut tree = DiagramTree::new(intent);
        if let Some(root) = &start.payload.root_id {
            if root != tree.root_id() {
                return Err(CorruptLog::at(start.event_id, format!("unexpected root id {root}")));
            }
        }
        let mut focus = Focus::at_root(&tree);
        for event in &log {
            apply(&mut tree, event)?;
            if event.kind.sets_focus() {
                if let Some(id) = &event.node_id {
                    focus = Focus { current_node_id: id.clone() };
                }
            }
        }
        Ok(Self { meta, tree, events: log, focus })
    }
}

fn apply(tree: &mut DiagramTree, event: &InteractionEvent) -> Result<(), CorruptLog> {
    let corrupt = |e: TreeError| CorruptLog::at(event.event_id, e.to_string());
    let target = match event.kind {
        EventKind::SessionStart => tree.root_id().clone(),
        _ => event.node_id.clone().ok_or_else(|| CorruptLog::at(event.event_id, "missing node_id"))?,
    };
    if !tree.contains(&target) {
        return Err(CorruptLog::at(event.event_id, format!("event targets unknown node {target}")));
    }
    match event.kind {
        EventKind::SessionStart | EventKind::BranchGenerate | EventKind::BranchRegenerate => {
            if event.payload.nodes.len() != event.payload.created.len() {
                return Err(CorruptLog::at(event.event_id, "generation event lacks node contents"));
            }
            if event.kind == EventKind::BranchRegenerate {
                let removed = tree.remove_descendants(&target).map_err(corrupt)?;
                if removed != event.payload.removed {
                    return Err(CorruptLog::at(event.event_id, "removed set disagrees with tree"));
                }
            }
            let drafts: Vec<HypothesisDraft> =
                event.payload.nodes.iter().map(|n| n.draft.clone()).collect();
            tree.add_children_with_ids(
                &target,
                &drafts,
                event.payload.user_input.as_deref(),
                &event.payload.created,
            )
            .map_err(corrupt)?;
        }
        EventKind::BookmarkSet | EventKind::BookmarkClear => {
            tree.set_bookmark(&target, event.kind == EventKind::BookmarkSet).map_err(corrupt)?;
        }
        EventKind::NodeClick | EventKind::ChartExpand | EventKind::ChartCollapse => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::draft;

    fn t(s: i64) -> DateTime<Utc> {
        DateTime::from_timestamp(1_720_000_000 + s, 0).unwrap()
    }

    fn drafts(n: usize) -> Vec<HypothesisDraft> {
        (0..n).map(|i| draft(&format!("D{i}"))).collect()
    }

    fn started() -> Session {
        Session::start(SessionMeta::new("s1", "income inequality", t(0)), &drafts(5), t(0)).unwrap()
    }

    #[test]
    fn start_records_five_created_nodes() {
        let s = started();
        assert_eq!(s.tree.len(), 6);
        let ev = &s.events()[0];
        assert_eq!((ev.event_id, ev.kind), (1, EventKind::SessionStart));
        assert_eq!(ev.payload.created.len(), 5);
        assert_eq!(s.focus().current_node_id, *s.tree.root_id());
    }

    #[test]
    fn start_rejects_wrong_count_and_empty_intent() {
        let err = Session::start(SessionMeta::new("s", "x", t(0)), &drafts(4), t(0)).unwrap_err();
        assert_eq!(err, SessionError::WrongDraftCount { expected: 5, actual: 4 });
        let err = Session::start(SessionMeta::new("s", "  ", t(0)), &drafts(5), t(0)).unwrap_err();
        assert_eq!(err, SessionError::EmptyIntent);
    }

    #[test]
    fn branch_on_root_is_refused() {
        let mut s = started();
        let root = s.tree.root_id().clone();
        assert_eq!(
            s.branch(&root, &drafts(3), None, t(1)).unwrap_err(),
            SessionError::RootNotBranchable
        );
        assert_eq!(s.events().len(), 1);
    }

    #[test]
    fn event_ids_are_gap_free_and_replay_matches() {
        let mut s = started();
        let lvl1 = s.tree.children(s.tree.root_id()).to_vec();
        s.click(&lvl1[0], t(1)).unwrap();
        let (out, _) = s.branch(&lvl1[0], &drafts(3), Some("why"), t(2)).unwrap();
        s.set_bookmark(&out.created[1], true, t(3)).unwrap();
        s.expand_chart(&out.created[1], t(4)).unwrap();
        s.collapse_chart(&out.created[1], t(5)).unwrap();
        let (regen, _) = s.regenerate(&lvl1[0], &drafts(3), None, t(6)).unwrap();
        assert_eq!(regen.removed.len(), 3);
        s.click(&lvl1[2], t(7)).unwrap();

        let ids: Vec<u64> = s.events().iter().map(|e| e.event_id).collect();
        assert_eq!(ids, (1..=8).collect::<Vec<_>>());

        let replayed = Session::replay(s.meta.clone(), s.events().to_vec()).unwrap();
        assert_eq!(replayed.tree, s.tree);
        assert_eq!(replayed.focus(), s.focus());
    }

    #[test]
    fn timestamps_never_decrease() {
        let mut s = started();
        let lvl1 = s.tree.children(s.tree.root_id()).to_vec();
        s.click(&lvl1[0], t(-50)).unwrap();
        assert!(s.events()[1].ts >= s.events()[0].ts);
    }

    #[test]
    fn replay_rejects_events_on_unknown_nodes() {
        let mut s = started();
        let lvl1 = s.tree.children(s.tree.root_id()).to_vec();
        s.click(&lvl1[0], t(1)).unwrap();
        let mut log = s.events().to_vec();
        log[1].node_id = Some("h999".into());
        assert!(Session::replay(s.meta.clone(), log).is_err());
    }
}
