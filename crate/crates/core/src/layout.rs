//! Screen-fitting layout for the ordered node-link diagram.
//!
//! Levels map to horizontal bands and siblings spread horizontally in
//! sibling order. The layout runs in three passes:
//!
//! 1. Naive placement: the root sits at the viewport center and each node's
//!    children spread symmetrically around it at a fixed pitch
//!    (`node_width + min_gap`).
//! 2. Adjustment, level by level from the top: on each level the children of
//!    the leftmost parent are packed against the left margin and those of the
//!    rightmost parent against the right margin. Every other parent's
//!    children move as a block centered on the mean of their naive
//!    positions, clamped so the block stays between its already-placed
//!    neighbours. A level with a single parent is treated as a middle block.
//! 3. A left-to-right then right-to-left sweep that restores the minimum
//!    pitch and the viewport bounds while keeping left-to-right order.
//!
//! All positions are multiples of half a pixel, so spacing comparisons are
//! exact in `f64`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{DiagramTree, NodeId, PositionedNode};

/// Smallest node width the fitting fallback will shrink to.
pub const MIN_NODE_WIDTH: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub viewport_width: u32,
    pub node_width: u32,
    pub node_height: u32,
    pub min_gap: u32,
    pub level_gap: u32,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self { viewport_width: 1200, node_width: 180, node_height: 60, min_gap: 20, level_gap: 80 }
    }
}

impl LayoutConfig {
    pub fn pitch(&self) -> f64 {
        f64::from(self.node_width + self.min_gap)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let all_positive = [
            self.viewport_width,
            self.node_width,
            self.node_height,
            self.min_gap,
            self.level_gap,
        ]
        .iter()
        .all(|v| *v > 0);
        if !all_positive {
            return Err(LayoutError::InvalidConfig("all dimensions must be positive".into()));
        }
        if self.node_width + self.min_gap > self.viewport_width {
            return Err(LayoutError::InvalidConfig(
                "node_width + min_gap exceeds viewport_width".into(),
            ));
        }
        Ok(())
    }

    fn level_y(&self, level: u32) -> f64 {
        f64::from(level) * f64::from(self.node_height + self.level_gap)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error("invalid layout config: {0}")]
    InvalidConfig(String),
    #[error("level {level} needs {required_width}px, more than the viewport")]
    LevelOverflow { level: u32, required_width: u64 },
}

fn snap(x: f64) -> f64 {
    (x * 2.0).round() / 2.0
}

/// Computes positions for every node of `tree`.
pub fn layout(
    tree: &DiagramTree,
    cfg: &LayoutConfig,
) -> Result<BTreeMap<NodeId, PositionedNode>, LayoutError> {
    cfg.validate()?;
    let levels = tree.levels();
    let pitch = cfg.pitch();
    let width = f64::from(cfg.viewport_width);
    for (level, ids) in levels.iter().enumerate() {
        let required = ids.len() as u64 * u64::from(cfg.node_width + cfg.min_gap);
        if required > u64::from(cfg.viewport_width) {
            return Err(LayoutError::LevelOverflow { level: level as u32, required_width: required });
        }
    }

    // Pass 1.
    let mut naive: HashMap<&NodeId, f64> = HashMap::new();
    naive.insert(tree.root_id(), width / 2.0);
    for ids in &levels {
        for parent in ids {
            let px = naive[parent];
            let kids = tree.children(parent);
            let half_span = (kids.len() as f64 - 1.0) / 2.0;
            for (i, kid) in kids.iter().enumerate() {
                naive.insert(kid, px + (i as f64 - half_span) * pitch);
            }
        }
    }

    let lo = f64::from(cfg.node_width) / 2.0;
    let hi = width - lo;
    let mut placed: HashMap<&NodeId, f64> = HashMap::new();
    placed.insert(tree.root_id(), width / 2.0);

    for window in levels.windows(2) {
        let (parents, level_ids) = (&window[0], &window[1]);
        // Parents are in left-to-right order: the previous level was placed
        // block by block in this same order.
        let blocks: Vec<&[NodeId]> = parents
            .iter()
            .map(|p| tree.children(p))
            .filter(|kids| !kids.is_empty())
            .collect();

        // Pass 2.
        let span = |kids: &[NodeId]| (kids.len() as f64 - 1.0) * pitch;
        let naive_mean = |kids: &[NodeId]| kids.iter().map(|k| naive[k]).sum::<f64>() / kids.len() as f64;
        let mut starts = vec![0.0; blocks.len()];
        let last = blocks.len() - 1;
        if blocks.len() == 1 {
            let f = snap(naive_mean(blocks[0]) - span(blocks[0]) / 2.0);
            starts[0] = f.min(hi - span(blocks[0])).max(lo);
        } else {
            starts[0] = lo;
            starts[last] = hi - span(blocks[last]);
            let mut prev_end = starts[0] + span(blocks[0]);
            for j in 1..last {
                let remaining: usize = blocks[j..last].iter().map(|b| b.len()).sum();
                let lower = prev_end + pitch;
                let upper = starts[last] - pitch * remaining as f64;
                let wanted = snap(naive_mean(blocks[j]) - span(blocks[j]) / 2.0);
                let f = wanted.min(upper).max(lower);
                starts[j] = f;
                prev_end = f + span(blocks[j]);
            }
        }

        let mut xs: Vec<f64> = blocks
            .iter()
            .zip(&starts)
            .flat_map(|(kids, start)| (0..kids.len()).map(move |i| start + i as f64 * pitch))
            .collect();
        debug_assert_eq!(xs.len(), level_ids.len());

        // Pass 3.
        for i in 0..xs.len() {
            let floor = if i == 0 { lo } else { xs[i - 1] + pitch };
            xs[i] = xs[i].max(floor);
        }
        for i in (0..xs.len()).rev() {
            let ceil = if i + 1 == xs.len() { hi } else { xs[i + 1] - pitch };
            xs[i] = xs[i].min(ceil);
        }

        for (id, x) in level_ids.iter().zip(xs) {
            placed.insert(id, x);
        }
    }

    Ok(levels
        .iter()
        .enumerate()
        .flat_map(|(level, ids)| ids.iter().map(move |id| (level as u32, id)))
        .map(|(level, id)| {
            let pos = PositionedNode { node_id: id.clone(), x: placed[id], y: cfg.level_y(level), level };
            (id.clone(), pos)
        })
        .collect())
}

/// Lays out `tree`, shrinking `node_width` (not below [`MIN_NODE_WIDTH`])
/// when a level would overflow the viewport. Returns the config used.
pub fn layout_fitting(
    tree: &DiagramTree,
    cfg: &LayoutConfig,
) -> Result<(BTreeMap<NodeId, PositionedNode>, LayoutConfig), LayoutError> {
    match layout(tree, cfg) {
        Err(LayoutError::LevelOverflow { level, required_width }) => {
            let widest = tree.levels().iter().map(Vec::len).max().unwrap_or(1) as u32;
            let fit = (cfg.viewport_width / widest).saturating_sub(cfg.min_gap);
            if fit < MIN_NODE_WIDTH {
                return Err(LayoutError::LevelOverflow { level, required_width });
            }
            let reduced = LayoutConfig { node_width: fit.min(cfg.node_width), ..*cfg };
            Ok((layout(tree, &reduced)?, reduced))
        }
        other => other.map(|positions| (positions, *cfg)),
    }
}

/// Stores a fitted layout on `tree`, or clears it when even the smallest
/// node width overflows. Returns the config actually used.
pub fn attach_layout(tree: &mut DiagramTree, cfg: &LayoutConfig) -> Result<LayoutConfig, LayoutError> {
    match layout_fitting(tree, cfg) {
        Ok((positions, used)) => {
            tree.layout = Some(positions);
            Ok(used)
        }
        Err(e) => {
            tree.layout = None;
            Err(e)
        }
    }
}

/// Straight link from a parent's bottom-center to a child's top-center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRoute {
    pub parent_id: NodeId,
    pub child_id: NodeId,
    pub from: (f64, f64),
    pub to: (f64, f64),
}

pub fn edge_routes(
    positions: &BTreeMap<NodeId, PositionedNode>,
    tree: &DiagramTree,
    cfg: &LayoutConfig,
) -> Vec<EdgeRoute> {
    tree.preorder()
        .into_iter()
        .filter_map(|node| {
            let parent = node.parent_id.as_ref()?;
            let (p, c) = (positions.get(parent)?, positions.get(&node.node_id)?);
            Some(EdgeRoute {
                parent_id: parent.clone(),
                child_id: node.node_id.clone(),
                from: (p.x, p.y + f64::from(cfg.node_height)),
                to: (c.x, c.y),
            })
        })
        .collect()
}
