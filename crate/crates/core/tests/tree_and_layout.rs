use std::collections::HashSet;

use hypotree_core::layout::{edge_routes, layout, layout_fitting, LayoutConfig, LayoutError};
use hypotree_core::model::{DraftSource, NodeId};
use hypotree_testkit::{drafts, random_tree, simulate_session, subtree_size, ChaCha8Rng, SimConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

proptest! {
    #[test]
    fn random_sessions_keep_tree_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = simulate_session(&mut rng, "p", SimConfig::default());
        s.tree.check_invariants().unwrap();
        prop_assert_eq!(s.tree.children(s.tree.root_id()).len(), 5);
        for node in s.tree.preorder() {
            let kids = s.tree.children(&node.node_id).len();
            // Level-1 nodes and below only ever receive batches of three.
            if !node.is_root() {
                prop_assert_eq!(kids % 3, 0);
            }
            let path = s.tree.root_path(&node.node_id).unwrap();
            prop_assert_eq!(path.len() as u32, node.level + 1);
            prop_assert_eq!(path.last(), Some(s.tree.root_id()));
        }
    }

    #[test]
    fn regeneration_removes_exactly_the_subtree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = random_tree(&mut rng, 40, 6);
        let ids: Vec<NodeId> = tree.preorder().iter().map(|n| n.node_id.clone()).collect();
        let target = ids[rng.gen_range(0..ids.len())].clone();
        let before = tree.len();
        let expected_removed = subtree_size(&tree, &target) - 1;
        let seen: HashSet<NodeId> = ids.iter().cloned().collect();
        let rep = tree.replace_children(&target, &drafts(3, "r", DraftSource::Branch), None).unwrap();
        prop_assert_eq!(rep.removed.len(), expected_removed);
        prop_assert_eq!(tree.len(), before - expected_removed + 3);
        for id in &rep.created {
            prop_assert!(!seen.contains(id), "id {} reused", id);
        }
        tree.check_invariants().unwrap();
    }

    #[test]
    fn layout_has_no_overlaps_and_keeps_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, 40, 6);
        let cfg = LayoutConfig::default();
        check_layout(&tree, &cfg);
    }
}

/// Shared with the acceptance suite's expectations: either a clean layout
/// or a LevelOverflow naming a level that really is too wide.
fn check_layout(tree: &hypotree_core::DiagramTree, cfg: &LayoutConfig) {
    let levels = tree.levels();
    match layout(tree, cfg) {
        Ok(pos) => {
            assert_eq!(pos.len(), tree.len());
            let half = f64::from(cfg.node_width) / 2.0;
            for ids in &levels {
                let xs: Vec<f64> = ids.iter().map(|id| pos[id].x).collect();
                for w in xs.windows(2) {
                    assert!(w[1] - w[0] >= cfg.pitch(), "overlap: {xs:?}");
                }
                for x in xs {
                    assert!(x - half >= 0.0 && x + half <= f64::from(cfg.viewport_width));
                }
            }
            assert_eq!(edge_routes(&pos, tree, cfg).len(), tree.len() - 1);
        }
        Err(LayoutError::LevelOverflow { level, required_width }) => {
            let n = levels[level as usize].len() as u64;
            assert_eq!(required_width, n * u64::from(cfg.node_width + cfg.min_gap));
            assert!(required_width > u64::from(cfg.viewport_width));
        }
        Err(e) => panic!("unexpected {e}"),
    }
}

#[test]
fn fitting_shrinks_until_the_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let tree = random_tree(&mut rng, 40, 6);
        let cfg = LayoutConfig::default();
        if let Ok((_, used)) = layout_fitting(&tree, &cfg) {
            assert!(used.node_width >= 60);
            check_layout(&tree, &used);
        }
    }
}
