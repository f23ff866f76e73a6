//! Exploration analytics over event logs and diagrams.
//!
//! Backtracks follow this definition. The focus is the target of the most
//! recent `node_click`, `branch_generate` or `branch_regenerate` (the intent
//! node before any of those). A `node_click` on `N` is a revisit when `N` was
//! clicked before. A revisit is a backtrack when `N` is not on the root path
//! of the focus, is not the focus, and does not share the focus's parent.
//! A backtrack to a shallower level is "high level"; it also counts as
//! "and generate" when the next focus-moving event is a generation on `N`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::events::{CorruptLog, EventKind, InteractionEvent};
use crate::model::{DiagramTree, NodeId};
use crate::session::Session;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramMetrics {
    pub node_count: usize,
    pub max_depth: u32,
    pub max_breadth: usize,
    pub nodes_by_level: BTreeMap<u32, usize>,
}

impl DiagramMetrics {
    /// Levels 0 and 1 always hold the intent and the five initial
    /// hypotheses, so histograms start at level 2.
    pub fn histogram_levels(&self) -> BTreeMap<u32, usize> {
        self.nodes_by_level.range(2..).map(|(k, v)| (*k, *v)).collect()
    }
}

pub fn diagram_metrics(tree: &DiagramTree) -> DiagramMetrics {
    let levels = tree.levels();
    let nodes_by_level: BTreeMap<u32, usize> =
        levels.iter().enumerate().map(|(l, ids)| (l as u32, ids.len())).collect();
    DiagramMetrics {
        node_count: tree.len(),
        max_depth: levels.len().saturating_sub(1) as u32,
        max_breadth: levels.iter().map(Vec::len).max().unwrap_or(0),
        nodes_by_level,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationCounts {
    pub clicks: usize,
    pub generations: usize,
    pub total_explored: usize,
}

/// Ids must increase by one from the first event on.
fn check_sequence(events: &[InteractionEvent]) -> Result<(), CorruptLog> {
    for pair in events.windows(2) {
        if pair[1].event_id != pair[0].event_id + 1 {
            return Err(CorruptLog::at(
                pair[1].event_id,
                format!("sequence gap after event {}", pair[0].event_id),
            ));
        }
    }
    Ok(())
}

pub fn exploration_counts(events: &[InteractionEvent]) -> Result<ExplorationCounts, CorruptLog> {
    check_sequence(events)?;
    let clicks = events.iter().filter(|e| e.kind == EventKind::NodeClick).count();
    let generations = events.iter().filter(|e| e.kind.is_generation()).count();
    Ok(ExplorationCounts { clicks, generations, total_explored: clicks + generations })
}

/// Parent and level of every node that ever existed in a session, removed
/// ones included. Ids are never reused, so this is stable over time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeHistory {
    parent: HashMap<NodeId, Option<NodeId>>,
    level: HashMap<NodeId, u32>,
    root: Option<NodeId>,
}

impl TreeHistory {
    pub fn from_events(events: &[InteractionEvent]) -> Result<Self, CorruptLog> {
        let mut h = Self::default();
        for e in events {
            let parent = match e.kind {
                EventKind::SessionStart => {
                    let root = e.payload.root_id.clone().unwrap_or_else(|| NodeId::new("h0"));
                    h.parent.insert(root.clone(), None);
                    h.level.insert(root.clone(), 0);
                    h.root = Some(root.clone());
                    root
                }
                EventKind::BranchGenerate | EventKind::BranchRegenerate => {
                    e.node_id.clone().ok_or_else(|| CorruptLog::at(e.event_id, "missing node_id"))?
                }
                _ => continue,
            };
            let lvl = *h
                .level
                .get(&parent)
                .ok_or_else(|| CorruptLog::at(e.event_id, format!("unknown node {parent}")))?;
            for id in &e.payload.created {
                if h.level.contains_key(id) {
                    return Err(CorruptLog::at(e.event_id, format!("node id {id} reused")));
                }
                h.parent.insert(id.clone(), Some(parent.clone()));
                h.level.insert(id.clone(), lvl + 1);
            }
        }
        Ok(h)
    }

    pub fn root(&self) -> Option<&NodeId> {
        self.root.as_ref()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.level.contains_key(id)
    }

    pub fn level(&self, id: &NodeId) -> Option<u32> {
        self.level.get(id).copied()
    }

    pub fn parent(&self, id: &NodeId) -> Option<&NodeId> {
        self.parent.get(id).and_then(Option::as_ref)
    }

    /// `[id, parent, ..., root]`.
    pub fn root_path(&self, id: &NodeId) -> Vec<NodeId> {
        let mut path = vec![id.clone()];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            path.push(p.clone());
            cur = p;
        }
        path
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BacktrackCategory {
    HighLevelBacktrackAndGenerate,
    HighLevelBacktrackOnly,
    OtherBacktrack,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktrackInstance {
    pub event_id: u64,
    pub category: BacktrackCategory,
    pub from_node: NodeId,
    pub to_node: NodeId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktrackReport {
    pub high_level_backtrack_and_generate: usize,
    pub high_level_backtrack_only: usize,
    pub other_backtrack: usize,
    pub total: usize,
    pub instances: Vec<BacktrackInstance>,
}

impl BacktrackReport {
    fn push(&mut self, instance: BacktrackInstance) {
        match instance.category {
            BacktrackCategory::HighLevelBacktrackAndGenerate => self.high_level_backtrack_and_generate += 1,
            BacktrackCategory::HighLevelBacktrackOnly => self.high_level_backtrack_only += 1,
            BacktrackCategory::OtherBacktrack => self.other_backtrack += 1,
        }
        self.total += 1;
        self.instances.push(instance);
    }
}

pub fn classify_backtracks(
    events: &[InteractionEvent],
    history: &TreeHistory,
) -> Result<BacktrackReport, CorruptLog> {
    check_sequence(events)?;
    let mut report = BacktrackReport::default();
    let Some(root) = history.root().cloned() else {
        return Ok(report);
    };
    let mut focus = root;
    let mut clicked: HashSet<NodeId> = HashSet::new();
    for (i, e) in events.iter().enumerate() {
        if !e.kind.sets_focus() {
            continue;
        }
        let target = e.node_id.clone().ok_or_else(|| CorruptLog::at(e.event_id, "missing node_id"))?;
        let level = |id: &NodeId| {
            history
                .level(id)
                .ok_or_else(|| CorruptLog::at(e.event_id, format!("unknown node {id}")))
        };
        let target_level = level(&target)?;
        if e.kind == EventKind::NodeClick && !clicked.insert(target.clone()) {
            let focus_level = level(&focus)?;
            let is_backtrack = target != focus
                && !history.root_path(&focus).contains(&target)
                && history.parent(&target) != history.parent(&focus);
            if is_backtrack {
                let category = if target_level < focus_level {
                    let next = events[i + 1..].iter().find(|n| n.kind.sets_focus());
                    match next {
                        Some(n) if n.kind.is_generation() && n.node_id.as_ref() == Some(&target) => {
                            BacktrackCategory::HighLevelBacktrackAndGenerate
                        }
                        _ => BacktrackCategory::HighLevelBacktrackOnly,
                    }
                } else {
                    BacktrackCategory::OtherBacktrack
                };
                report.push(BacktrackInstance {
                    event_id: e.event_id,
                    category,
                    from_node: focus.clone(),
                    to_node: target.clone(),
                });
            }
        }
        focus = target;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngagementReport {
    pub initial_expansions: usize,
    pub re_expansions: usize,
    pub total: usize,
}

pub fn engagement(events: &[InteractionEvent]) -> Result<EngagementReport, CorruptLog> {
    check_sequence(events)?;
    let mut seen: HashSet<&NodeId> = HashSet::new();
    let mut report = EngagementReport::default();
    for e in events.iter().filter(|e| e.kind == EventKind::ChartExpand) {
        let node = e.node_id.as_ref().ok_or_else(|| CorruptLog::at(e.event_id, "missing node_id"))?;
        if seen.insert(node) {
            report.initial_expansions += 1;
        } else {
            report.re_expansions += 1;
        }
    }
    report.total = report.initial_expansions + report.re_expansions;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookmarkEntry {
    pub participant: String,
    pub title: String,
    pub description: String,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub diagram: DiagramMetrics,
    pub exploration: ExplorationCounts,
    pub backtracks: BacktrackReport,
    pub engagement: EngagementReport,
    pub bookmarks: Vec<BookmarkEntry>,
}

pub fn session_report(session: &Session) -> Result<SessionReport, CorruptLog> {
    let events = session.events();
    let history = TreeHistory::from_events(events)?;
    Ok(SessionReport {
        session_id: session.meta.session_id.clone(),
        diagram: diagram_metrics(&session.tree),
        exploration: exploration_counts(events)?,
        backtracks: classify_backtracks(events, &history)?,
        engagement: engagement(events)?,
        bookmarks: session
            .tree
            .bookmarks()
            .into_iter()
            .map(|n| BookmarkEntry {
                participant: session.meta.session_id.clone(),
                title: n.title.clone(),
                description: n.hypothesis_text.clone(),
                level: n.level,
            })
            .collect(),
    })
}

/// A per-session table with a fixed column layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub const BACKTRACK_COLUMNS: [&str; 5] = [
    "ID",
    "High Level Backtrack and Generate",
    "High Level Backtrack Only",
    "Other Backtrack",
    "Total",
];

pub const ENGAGEMENT_COLUMNS: [&str; 4] = [
    "ID",
    "Initial expansion of visual hypotheses",
    "Re-expansion of visual hypotheses",
    "Total",
];

impl Table {
    fn new(columns: &[&str], rows: Vec<Vec<String>>) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Rows as JSON objects; counts become numbers.
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| {
                        let value = v.parse::<u64>().map_or_else(|_| json!(v), |n| json!(n));
                        (c.clone(), value)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json!({ "columns": self.columns, "rows": rows })
    }
}

pub fn backtrack_table(reports: &[SessionReport]) -> Table {
    let rows = reports
        .iter()
        .map(|r| {
            let b = &r.backtracks;
            vec![
                r.session_id.clone(),
                b.high_level_backtrack_and_generate.to_string(),
                b.high_level_backtrack_only.to_string(),
                b.other_backtrack.to_string(),
                b.total.to_string(),
            ]
        })
        .collect();
    Table::new(&BACKTRACK_COLUMNS, rows)
}

pub fn engagement_table(reports: &[SessionReport]) -> Table {
    let rows = reports
        .iter()
        .map(|r| {
            let g = &r.engagement;
            vec![
                r.session_id.clone(),
                g.initial_expansions.to_string(),
                g.re_expansions.to_string(),
                g.total.to_string(),
            ]
        })
        .collect();
    Table::new(&ENGAGEMENT_COLUMNS, rows)
}
