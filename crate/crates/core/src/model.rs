//! Hypothesis tree domain types and navigation primitives.
//!
//! The tree is rooted at a degenerate node holding the analysis intent. Every
//! other node is an AI-generated hypothesis that branches off its parent.
//! Node identifiers are allocated from a per-tree counter and never reused,
//! so a node removed by branch regeneration can still be referenced
//! unambiguously by the event log.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Number of hypotheses generated for a fresh session (level 1).
pub const INITIAL_HYPOTHESES: usize = 5;
/// Number of hypotheses generated per branch.
pub const BRANCH_HYPOTHESES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(raw: impl Into<String>) -> Self {
        Self(raw.into())
    }

    fn from_seq(seq: u64) -> Self {
        Self(format!("h{seq}"))
    }

    /// Counter value encoded in an id produced by this crate, if any.
    fn seq(&self) -> Option<u64> {
        self.0.strip_prefix('h')?.parse().ok()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Which prompt produced a draft.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftSource {
    Initial,
    Branch,
}

/// A parsed, not-yet-placed hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisDraft {
    pub title: String,
    #[serde(rename = "hypothesis")]
    pub hypothesis_text: String,
    #[serde(rename = "visualization")]
    pub visualization_idea: String,
    pub rationale: String,
    #[serde(rename = "relatedWork", default)]
    pub related_work: String,
    pub source_kind: DraftSource,
}

/// One node of the diagram. Serialized with the diagram.json key names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisNode {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    pub level: u32,
    pub title: String,
    #[serde(rename = "hypothesis")]
    pub hypothesis_text: String,
    #[serde(rename = "visualization")]
    pub visualization_idea: String,
    pub rationale: String,
    #[serde(rename = "relatedWork")]
    pub related_work: String,
    #[serde(rename = "userInput")]
    pub user_input: String,
    pub bookmarked: bool,
    pub sibling_index: u32,
    /// Unknown keys read from disk, re-emitted on save.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl HypothesisNode {
    pub fn is_root(&self) -> bool {
        self.parent_id.is_none()
    }
}

/// Center-x / top-y placement of a node, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionedNode {
    pub node_id: NodeId,
    pub x: f64,
    pub y: f64,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no drafts supplied")]
    EmptyDrafts,
    #[error("the analysis intent node cannot be bookmarked")]
    RootNotBookmarkable,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("invalid tree: {0}")]
    Invalid(String),
}

/// Result of a branch regeneration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replacement {
    /// Removed descendants in pre-order.
    pub removed: Vec<NodeId>,
    pub created: Vec<NodeId>,
}

/// Ordered, leveled tree of hypotheses rooted at the intent node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramTree {
    nodes: BTreeMap<NodeId, HypothesisNode>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
    root_id: NodeId,
    next_seq: u64,
    pub layout: Option<BTreeMap<NodeId, PositionedNode>>,
    /// Unknown top-level keys of a loaded diagram document, re-emitted on
    /// save.
    pub extra: BTreeMap<String, Value>,
}

impl DiagramTree {
    /// Fresh tree holding only the intent node.
    pub fn new(intent_text: &str) -> Self {
        let root_id = NodeId::from_seq(0);
        let root = HypothesisNode {
            node_id: root_id.clone(),
            parent_id: None,
            level: 0,
            title: intent_text.to_owned(),
            hypothesis_text: String::new(),
            visualization_idea: String::new(),
            rationale: String::new(),
            related_work: String::new(),
            user_input: String::new(),
            bookmarked: false,
            sibling_index: 0,
            extra: BTreeMap::new(),
        };
        Self::with_root(root)
    }

    fn with_root(root: HypothesisNode) -> Self {
        let root_id = root.node_id.clone();
        let next_seq = root_id.seq().map_or(1, |s| s + 1);
        let mut nodes = BTreeMap::new();
        nodes.insert(root_id.clone(), root);
        let mut children = BTreeMap::new();
        children.insert(root_id.clone(), Vec::new());
        Self { nodes, children, root_id, next_seq, layout: None, extra: BTreeMap::new() }
    }

    /// Rebuilds a tree from a flat node list, validating every structural
    /// invariant. `next_seq` is raised past every id present.
    pub fn from_nodes(
        root_id: NodeId,
        nodes: Vec<HypothesisNode>,
        next_seq: u64,
    ) -> Result<Self, TreeError> {
        let mut by_id = BTreeMap::new();
        for node in nodes {
            let id = node.node_id.clone();
            if by_id.insert(id.clone(), node).is_some() {
                return Err(TreeError::DuplicateNode(id));
            }
        }
        let root = by_id
            .remove(&root_id)
            .ok_or_else(|| TreeError::Invalid(format!("root {root_id} missing")))?;
        if root.parent_id.is_some() || root.level != 0 {
            return Err(TreeError::Invalid("root must have level 0 and no parent".into()));
        }
        let mut tree = Self::with_root(root);
        tree.next_seq = tree.next_seq.max(next_seq);

        let mut pending: Vec<HypothesisNode> = by_id.into_values().collect();
        // Insert parents before children; each pass must make progress.
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for node in pending {
                match node.parent_id.as_ref().map(|p| tree.nodes.get(p)) {
                    Some(Some(parent)) => {
                        if node.level != parent.level + 1 {
                            return Err(TreeError::Invalid(format!(
                                "node {} has level {} under a level-{} parent",
                                node.node_id, node.level, parent.level
                            )));
                        }
                        tree.insert_node(node);
                    }
                    Some(None) => rest.push(node),
                    None => {
                        return Err(TreeError::Invalid(format!(
                            "second root {}",
                            node.node_id
                        )))
                    }
                }
            }
            if rest.len() == before {
                return Err(TreeError::Invalid(format!(
                    "node {} has an unresolved parent or lies on a cycle",
                    rest[0].node_id
                )));
            }
            pending = rest;
        }
        for kids in tree.children.values_mut() {
            kids.sort_by_key(|id| tree.nodes[id].sibling_index);
        }
        for (parent, kids) in &tree.children {
            for (i, id) in kids.iter().enumerate() {
                if tree.nodes[id].sibling_index as usize != i {
                    return Err(TreeError::Invalid(format!(
                        "sibling indices under {parent} are not 0..{}",
                        kids.len()
                    )));
                }
            }
        }
        Ok(tree)
    }

    fn insert_node(&mut self, node: HypothesisNode) {
        if let Some(seq) = node.node_id.seq() {
            self.next_seq = self.next_seq.max(seq + 1);
        }
        let id = node.node_id.clone();
        if let Some(parent) = &node.parent_id {
            self.children.entry(parent.clone()).or_default().push(id.clone());
        }
        self.children.entry(id.clone()).or_default();
        self.nodes.insert(id, node);
    }

    pub fn root_id(&self) -> &NodeId {
        &self.root_id
    }

    pub fn root(&self) -> &HypothesisNode {
        &self.nodes[&self.root_id]
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn get(&self, id: &NodeId) -> Result<&HypothesisNode, TreeError> {
        self.nodes.get(id).ok_or_else(|| TreeError::UnknownNode(id.clone()))
    }

    /// Children in sibling order.
    pub fn children(&self, id: &NodeId) -> &[NodeId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Nodes in pre-order (parent before children, siblings in order).
    pub fn preorder(&self) -> Vec<&HypothesisNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![&self.root_id];
        while let Some(id) = stack.pop() {
            out.push(&self.nodes[id]);
            stack.extend(self.children(id).iter().rev());
        }
        out
    }

    /// Node ids grouped by level, each level in left-to-right tree order.
    pub fn levels(&self) -> Vec<Vec<NodeId>> {
        let mut levels: Vec<Vec<NodeId>> = vec![vec![self.root_id.clone()]];
        loop {
            let next: Vec<NodeId> = levels
                .last()
                .into_iter()
                .flatten()
                .flat_map(|id| self.children(id).iter().cloned())
                .collect();
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    /// `[node_id, parent, ..., root_id]`.
    pub fn root_path(&self, id: &NodeId) -> Result<Vec<NodeId>, TreeError> {
        let mut path = vec![self.get(id)?.node_id.clone()];
        let mut cursor = &self.nodes[id];
        while let Some(parent) = &cursor.parent_id {
            path.push(parent.clone());
            cursor = &self.nodes[parent];
        }
        Ok(path)
    }

    /// Siblings of `id`, excluding itself.
    pub fn siblings(&self, id: &NodeId) -> Result<Vec<NodeId>, TreeError> {
        let node = self.get(id)?;
        Ok(match &node.parent_id {
            Some(parent) => self.children(parent).iter().filter(|c| *c != id).cloned().collect(),
            None => Vec::new(),
        })
    }

    /// All strict descendants of `id` in pre-order.
    pub fn descendants(&self, id: &NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.get(id)?;
        let mut out = Vec::new();
        let mut stack: Vec<&NodeId> = self.children(id).iter().rev().collect();
        while let Some(next) = stack.pop() {
            out.push(next.clone());
            stack.extend(self.children(next).iter().rev());
        }
        Ok(out)
    }

    /// Appends drafts as new children of `parent_id`, in arrival order.
    pub fn add_children(
        &mut self,
        parent_id: &NodeId,
        drafts: &[HypothesisDraft],
        user_input: Option<&str>,
    ) -> Result<Vec<NodeId>, TreeError> {
        let ids: Vec<NodeId> =
            (0..drafts.len() as u64).map(|i| NodeId::from_seq(self.next_seq + i)).collect();
        self.add_children_with_ids(parent_id, drafts, user_input, &ids)?;
        Ok(ids)
    }

    /// Like [`add_children`](Self::add_children) with caller-chosen ids.
    /// Used when replaying a log that already names the created nodes.
    pub fn add_children_with_ids(
        &mut self,
        parent_id: &NodeId,
        drafts: &[HypothesisDraft],
        user_input: Option<&str>,
        ids: &[NodeId],
    ) -> Result<(), TreeError> {
        let parent_level = self.get(parent_id)?.level;
        if drafts.is_empty() {
            return Err(TreeError::EmptyDrafts);
        }
        if ids.len() != drafts.len() {
            return Err(TreeError::Invalid(format!(
                "{} ids for {} drafts",
                ids.len(),
                drafts.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for id in ids {
            if self.nodes.contains_key(id) || !seen.insert(id) {
                return Err(TreeError::DuplicateNode(id.clone()));
            }
        }
        let first_index = self.children(parent_id).len() as u32;
        for (offset, (draft, id)) in drafts.iter().zip(ids).enumerate() {
            self.insert_node(HypothesisNode {
                node_id: id.clone(),
                parent_id: Some(parent_id.clone()),
                level: parent_level + 1,
                title: draft.title.clone(),
                hypothesis_text: draft.hypothesis_text.clone(),
                visualization_idea: draft.visualization_idea.clone(),
                rationale: draft.rationale.clone(),
                related_work: draft.related_work.clone(),
                user_input: user_input.unwrap_or_default().to_owned(),
                bookmarked: false,
                sibling_index: first_index + offset as u32,
                extra: BTreeMap::new(),
            });
        }
        self.layout = None;
        Ok(())
    }

    /// Removes the whole subtree below `parent_id`, then appends drafts.
    pub fn replace_children(
        &mut self,
        parent_id: &NodeId,
        drafts: &[HypothesisDraft],
        user_input: Option<&str>,
    ) -> Result<Replacement, TreeError> {
        if drafts.is_empty() {
            self.get(parent_id)?;
            return Err(TreeError::EmptyDrafts);
        }
        let removed = self.remove_descendants(parent_id)?;
        let created = self.add_children(parent_id, drafts, user_input)?;
        Ok(Replacement { removed, created })
    }

    /// Removes every descendant of `id` and returns them in pre-order.
    pub fn remove_descendants(&mut self, id: &NodeId) -> Result<Vec<NodeId>, TreeError> {
        let removed = self.descendants(id)?;
        for gone in &removed {
            self.nodes.remove(gone);
            self.children.remove(gone);
        }
        self.children.insert(id.clone(), Vec::new());
        if !removed.is_empty() {
            self.layout = None;
        }
        Ok(removed)
    }

    pub fn set_bookmark(&mut self, id: &NodeId, flag: bool) -> Result<&HypothesisNode, TreeError> {
        let node = self.nodes.get_mut(id).ok_or_else(|| TreeError::UnknownNode(id.clone()))?;
        if node.is_root() {
            return Err(TreeError::RootNotBookmarkable);
        }
        node.bookmarked = flag;
        Ok(node)
    }

    /// Bookmarked nodes in pre-order.
    pub fn bookmarks(&self) -> Vec<&HypothesisNode> {
        self.preorder().into_iter().filter(|n| n.bookmarked).collect()
    }

    /// Re-checks every structural invariant. Intended for tests and for
    /// validating trees loaded from disk.
    pub fn check_invariants(&self) -> Result<(), TreeError> {
        let roots: Vec<_> = self.nodes.values().filter(|n| n.is_root()).collect();
        if roots.len() != 1 || roots[0].node_id != self.root_id {
            return Err(TreeError::Invalid("tree must have exactly one root".into()));
        }
        for node in self.nodes.values() {
            if let Some(parent) = &node.parent_id {
                let p = self
                    .nodes
                    .get(parent)
                    .ok_or_else(|| TreeError::Invalid(format!("dangling parent of {}", node.node_id)))?;
                if node.level != p.level + 1 {
                    return Err(TreeError::Invalid(format!("bad level at {}", node.node_id)));
                }
            }
            if node.level as usize + 1 != self.root_path(&node.node_id)?.len() {
                return Err(TreeError::Invalid(format!("cycle through {}", node.node_id)));
            }
            if node.node_id.seq().is_some_and(|s| s >= self.next_seq) {
                return Err(TreeError::Invalid(format!("id {} beyond counter", node.node_id)));
            }
        }
        for (parent, kids) in &self.children {
            for (i, kid) in kids.iter().enumerate() {
                let node = self
                    .nodes
                    .get(kid)
                    .ok_or_else(|| TreeError::Invalid(format!("stale child {kid}")))?;
                if node.parent_id.as_ref() != Some(parent) || node.sibling_index as usize != i {
                    return Err(TreeError::Invalid(format!("bad sibling order under {parent}")));
                }
            }
        }
        Ok(())
    }
}

/// The node the user is currently working from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Focus {
    pub current_node_id: NodeId,
}

impl Focus {
    pub fn at_root(tree: &DiagramTree) -> Self {
        Self { current_node_id: tree.root_id().clone() }
    }
}

#[cfg(test)]
pub(crate) fn draft(title: &str) -> HypothesisDraft {
    HypothesisDraft {
        title: title.to_owned(),
        hypothesis_text: format!("There is a link involving {title}."),
        visualization_idea: format!("bar chart of {title}"),
        rationale: "because".into(),
        related_work: String::new(),
        source_kind: DraftSource::Branch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drafts(n: usize) -> Vec<HypothesisDraft> {
        (0..n).map(|i| draft(&format!("T{i}"))).collect()
    }

    #[test]
    fn root_path_of_root_is_itself() {
        let tree = DiagramTree::new("income inequality");
        assert_eq!(tree.root_path(tree.root_id()).unwrap(), vec![tree.root_id().clone()]);
        assert_eq!(tree.root().title, "income inequality");
        assert!(tree.root().hypothesis_text.is_empty());
    }

    #[test]
    fn root_path_walks_parent_chain() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        let b = tree.add_children(&root, &drafts(5), None).unwrap();
        let c = tree.add_children(&b[1], &drafts(3), None).unwrap();
        assert_eq!(tree.root_path(&c[2]).unwrap(), vec![c[2].clone(), b[1].clone(), root]);
    }

    #[test]
    fn root_path_unknown_node() {
        let tree = DiagramTree::new("x");
        assert_eq!(
            tree.root_path(&"nope".into()),
            Err(TreeError::UnknownNode("nope".into()))
        );
    }

    #[test]
    fn add_children_assigns_levels_and_sibling_order() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        let lvl1 = tree.add_children(&root, &drafts(5), None).unwrap();
        assert_eq!(lvl1.len(), 5);
        for (i, id) in lvl1.iter().enumerate() {
            let n = tree.get(id).unwrap();
            assert_eq!((n.level, n.sibling_index), (1, i as u32));
        }
        let lvl2 = tree.add_children(&lvl1[0], &drafts(3), Some("steer")).unwrap();
        assert!(lvl2.iter().all(|id| tree.get(id).unwrap().level == 2));
        assert_eq!(tree.get(&lvl2[0]).unwrap().user_input, "steer");
        // A second batch continues the sibling range.
        let more = tree.add_children(&lvl1[0], &drafts(3), None).unwrap();
        assert_eq!(tree.get(&more[0]).unwrap().sibling_index, 3);
        tree.check_invariants().unwrap();
    }

    #[test]
    fn add_children_rejects_empty_and_unknown() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        assert_eq!(tree.add_children(&root, &[], None), Err(TreeError::EmptyDrafts));
        assert_eq!(
            tree.add_children(&"zz".into(), &drafts(3), None),
            Err(TreeError::UnknownNode("zz".into()))
        );
    }

    #[test]
    fn replace_children_removes_whole_subtree() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        let lvl1 = tree.add_children(&root, &drafts(5), None).unwrap();
        let lvl2 = tree.add_children(&lvl1[0], &drafts(3), None).unwrap();
        for id in &lvl2 {
            tree.add_children(id, &drafts(3), None).unwrap();
        }
        tree.set_bookmark(&lvl2[1], true).unwrap();
        let rep = tree.replace_children(&lvl1[0], &drafts(3), None).unwrap();
        assert_eq!(rep.removed.len(), 12);
        assert_eq!(rep.created.len(), 3);
        assert!(tree.bookmarks().is_empty());
        assert!(rep.removed.iter().all(|id| !tree.contains(id)));
        // Fresh ids, never recycled.
        assert!(rep.created.iter().all(|id| !rep.removed.contains(id)));
        tree.check_invariants().unwrap();
    }

    #[test]
    fn replace_children_without_children_is_add() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        let lvl1 = tree.add_children(&root, &drafts(5), None).unwrap();
        let rep = tree.replace_children(&lvl1[4], &drafts(3), None).unwrap();
        assert!(rep.removed.is_empty());
        assert_eq!(tree.children(&lvl1[4]), rep.created.as_slice());
    }

    #[test]
    fn root_regeneration_returns_to_initial_shape() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        let lvl1 = tree.add_children(&root, &drafts(5), None).unwrap();
        tree.add_children(&lvl1[2], &drafts(3), None).unwrap();
        tree.replace_children(&root, &drafts(5), None).unwrap();
        assert_eq!(tree.len(), 6);
        assert_eq!(tree.levels().len(), 2);
    }

    #[test]
    fn bookmarks_are_idempotent_and_root_is_rejected() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        let lvl1 = tree.add_children(&root, &drafts(5), None).unwrap();
        tree.set_bookmark(&lvl1[3], true).unwrap();
        let once = tree.clone();
        tree.set_bookmark(&lvl1[3], true).unwrap();
        assert_eq!(once, tree);
        assert_eq!(tree.bookmarks()[0].node_id, lvl1[3]);
        assert_eq!(tree.set_bookmark(&root, true).unwrap_err(), TreeError::RootNotBookmarkable);
        tree.set_bookmark(&lvl1[3], false).unwrap();
        assert!(tree.bookmarks().is_empty());
    }

    #[test]
    fn from_nodes_rejects_broken_structure() {
        let mut tree = DiagramTree::new("x");
        let root = tree.root_id().clone();
        tree.add_children(&root, &drafts(2), None).unwrap();
        let mut nodes: Vec<HypothesisNode> = tree.preorder().into_iter().cloned().collect();
        let rebuilt = DiagramTree::from_nodes(root.clone(), nodes.clone(), 0).unwrap();
        assert_eq!(rebuilt, tree);

        nodes[1].parent_id = Some("ghost".into());
        assert!(DiagramTree::from_nodes(root.clone(), nodes.clone(), 0).is_err());
        nodes[1].parent_id = Some(root.clone());
        nodes[1].level = 4;
        assert!(DiagramTree::from_nodes(root, nodes, 0).is_err());
    }
}
