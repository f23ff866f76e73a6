//! Synthetic sessions, trees and datasets, plus brute-force reference
//! implementations that the engine is checked against.
//!
//! The oracles are deliberately naive: they recompute everything from
//! scratch at every step and share no code with the engine beyond the
//! event and tree types.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Duration, TimeZone, Utc};
use hypotree_core::events::{EventKind, InteractionEvent};
use hypotree_core::model::{DiagramTree, DraftSource, HypothesisDraft, NodeId};
use hypotree_core::session::{Session, SessionMeta};
use rand::seq::SliceRandom;
use rand::Rng;

pub use rand_chacha::ChaCha8Rng;

pub fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

pub fn draft(title: &str, source: DraftSource) -> HypothesisDraft {
    HypothesisDraft {
        title: title.to_owned(),
        hypothesis_text: format!("[{title}]: outcome varies with {title}."),
        visualization_idea: format!("bar chart of outcome by {title}"),
        rationale: format!("Checks {title}."),
        related_work: String::new(),
        source_kind: source,
    }
}

pub fn drafts(n: usize, prefix: &str, source: DraftSource) -> Vec<HypothesisDraft> {
    (0..n).map(|i| draft(&format!("{prefix} {i}"), source)).collect()
}

/// Random tree with at most `max_nodes` nodes and `max_levels` levels,
/// the root's included. Sibling counts are arbitrary, not the 5/3 policy.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, max_levels: u32) -> DiagramTree {
    let mut tree = DiagramTree::new("intent");
    let target = rng.gen_range(1..=max_nodes.max(1));
    let mut guard = 0;
    while tree.len() < target && guard < 1000 {
        guard += 1;
        let candidates: Vec<NodeId> = tree
            .preorder()
            .into_iter()
            .filter(|n| n.level + 1 < max_levels)
            .map(|n| n.node_id.clone())
            .collect();
        let Some(parent) = candidates.choose(rng).cloned() else { break };
        let room = target - tree.len();
        let k = rng.gen_range(1..=room.min(6));
        tree.add_children(&parent, &drafts(k, "n", DraftSource::Branch), None).unwrap();
    }
    tree
}

/// Knobs for [`simulate_session`].
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub steps: usize,
    /// Chance that a click revisits an already-clicked node.
    pub revisit_bias: f64,
    pub allow_regenerate: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { steps: 50, revisit_bias: 0.4, allow_regenerate: true }
    }
}

/// Drives a session with random but valid actions. Every action uses the
/// engine's own session API, so the log is well formed.
pub fn simulate_session<R: Rng>(rng: &mut R, id: &str, cfg: SimConfig) -> Session {
    let t0 = base_time();
    let mut session = Session::start(
        SessionMeta::new(id, "synthetic intent", t0),
        &drafts(5, "init", DraftSource::Initial),
        t0,
    )
    .unwrap();
    let mut clicked: Vec<NodeId> = Vec::new();
    let mut gen = 0;
    for step in 0..cfg.steps {
        let now = t0 + Duration::seconds(step as i64 + 1);
        let live: Vec<NodeId> = session.tree.preorder().iter().map(|n| n.node_id.clone()).collect();
        let live_clicked: Vec<NodeId> = clicked.iter().filter(|n| live.contains(n)).cloned().collect();
        let non_root: Vec<NodeId> = live[1..].to_vec();
        let roll: f64 = rng.gen();
        if roll < 0.5 {
            let target = if !live_clicked.is_empty() && rng.gen_bool(cfg.revisit_bias) {
                live_clicked.choose(rng).unwrap().clone()
            } else {
                live.choose(rng).unwrap().clone()
            };
            session.click(&target, now).unwrap();
            clicked.push(target);
        } else if roll < 0.68 {
            // Favour generating from the current focus or a just-clicked node.
            let focus = session.focus().current_node_id.clone();
            let target = if focus != *session.tree.root_id() && rng.gen_bool(0.7) {
                focus
            } else {
                non_root.choose(rng).unwrap().clone()
            };
            if session.tree.get(&target).unwrap().level >= 6 {
                continue;
            }
            gen += 1;
            let input = rng.gen_bool(0.3).then(|| format!("input {gen}"));
            session
                .branch(&target, &drafts(3, &format!("g{gen}"), DraftSource::Branch), input.as_deref(), now)
                .unwrap();
        } else if roll < 0.74 && cfg.allow_regenerate {
            let target = live.choose(rng).unwrap().clone();
            let n = if target == *session.tree.root_id() { 5 } else { 3 };
            gen += 1;
            session
                .regenerate(&target, &drafts(n, &format!("r{gen}"), DraftSource::Branch), None, now)
                .unwrap();
        } else if roll < 0.88 {
            let target = non_root.choose(rng).unwrap().clone();
            session.expand_chart(&target, now).unwrap();
        } else if roll < 0.94 {
            let target = non_root.choose(rng).unwrap().clone();
            session.collapse_chart(&target, now).unwrap();
        } else {
            let target = non_root.choose(rng).unwrap().clone();
            let flag = !session.tree.get(&target).unwrap().bookmarked;
            session.set_bookmark(&target, flag, now).unwrap();
        }
    }
    session
}

/// Backtrack counts as (and_generate, only, other).
pub type BacktrackCounts = (usize, usize, usize);

/// Reference backtrack classifier. For each click it rebuilds the parent
/// map from the log prefix, finds the focus by scanning backwards, and
/// walks parent links to get the root path.
pub fn brute_force_backtracks(events: &[InteractionEvent]) -> BacktrackCounts {
    let mut counts = (0, 0, 0);
    for i in 0..events.len() {
        let e = &events[i];
        if e.kind != EventKind::NodeClick {
            continue;
        }
        let n = e.node_id.clone().unwrap();
        let prefix = &events[..i];
        let clicked_before = prefix
            .iter()
            .any(|p| p.kind == EventKind::NodeClick && p.node_id.as_ref() == Some(&n));
        if !clicked_before {
            continue;
        }
        // Parent of every node created in the prefix.
        let mut parent: HashMap<NodeId, Option<NodeId>> = HashMap::new();
        let mut root = None;
        for p in prefix {
            match p.kind {
                EventKind::SessionStart => {
                    let r = p.payload.root_id.clone().unwrap();
                    parent.insert(r.clone(), None);
                    for c in &p.payload.created {
                        parent.insert(c.clone(), Some(r.clone()));
                    }
                    root = Some(r);
                }
                EventKind::BranchGenerate | EventKind::BranchRegenerate => {
                    for c in &p.payload.created {
                        parent.insert(c.clone(), p.node_id.clone());
                    }
                }
                _ => {}
            }
        }
        let focus = prefix
            .iter()
            .rev()
            .find(|p| {
                matches!(
                    p.kind,
                    EventKind::NodeClick | EventKind::BranchGenerate | EventKind::BranchRegenerate
                )
            })
            .and_then(|p| p.node_id.clone())
            .unwrap_or_else(|| root.clone().unwrap());
        let path_of = |start: &NodeId| {
            let mut path = vec![start.clone()];
            let mut cur = start.clone();
            while let Some(Some(p)) = parent.get(&cur) {
                path.push(p.clone());
                cur = p.clone();
            }
            path
        };
        let focus_path = path_of(&focus);
        let depth = |id: &NodeId| path_of(id).len() - 1;
        if n == focus || focus_path.contains(&n) || parent.get(&n) == parent.get(&focus) {
            continue;
        }
        if depth(&n) < depth(&focus) {
            let next = events[i + 1..].iter().find(|x| {
                matches!(
                    x.kind,
                    EventKind::NodeClick | EventKind::BranchGenerate | EventKind::BranchRegenerate
                )
            });
            let generated_here = next.is_some_and(|x| {
                matches!(x.kind, EventKind::BranchGenerate | EventKind::BranchRegenerate)
                    && x.node_id.as_ref() == Some(&n)
            });
            if generated_here {
                counts.0 += 1;
            } else {
                counts.1 += 1;
            }
        } else {
            counts.2 += 1;
        }
    }
    counts
}

/// Reference engagement counts as (initial, re).
pub fn brute_force_engagement(events: &[InteractionEvent]) -> (usize, usize) {
    let mut initial = 0;
    let mut re = 0;
    for (i, e) in events.iter().enumerate() {
        if e.kind != EventKind::ChartExpand {
            continue;
        }
        let seen = events[..i]
            .iter()
            .any(|p| p.kind == EventKind::ChartExpand && p.node_id == e.node_id);
        if seen {
            re += 1;
        } else {
            initial += 1;
        }
    }
    (initial, re)
}

/// Random CSV with at least one row and columns `cat` (categorical, some nulls), `num`
/// (numeric, some nulls), `val` (numeric) and `grp` (categorical).
pub fn random_dataset_csv<R: Rng>(rng: &mut R, max_rows: usize) -> String {
    let rows = rng.gen_range(1..=max_rows.max(1));
    let cats = ["alpha", "beta", "gamma", "delta", "epsilon"];
    let mut out = String::from("cat,num,val,grp\n");
    for _ in 0..rows {
        let cat = if rng.gen_bool(0.05) { "" } else { cats[rng.gen_range(0..cats.len())] };
        let num = if rng.gen_bool(0.05) {
            String::new()
        } else if rng.gen_bool(0.5) {
            rng.gen_range(-50i64..50).to_string()
        } else {
            format!("{:.3}", rng.gen_range(-1000.0..1000.0))
        };
        let val = rng.gen_range(0i64..20).to_string();
        let grp = if rng.gen_bool(0.5) { "g1" } else { "g2" };
        out.push_str(&format!("{cat},{num},{val},{grp}\n"));
    }
    out
}

/// Which statistic [`brute_force_grouped`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Count,
    Sum,
    Mean,
    Median,
}

/// Reference grouped aggregation over raw CSV text. Keys are
/// (group label, x label); numeric x labels use `f64` display. Rows with an
/// empty x, group or (for non-count stats) non-numeric y are skipped.
pub fn brute_force_grouped(
    csv_text: &str,
    x: &str,
    y: Option<&str>,
    group: Option<&str>,
    x_numeric: bool,
    stat: Stat,
) -> BTreeMap<(String, String), f64> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let xi = col(x);
    let yi = y.map(col);
    let gi = group.map(col);
    let mut buckets: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let xv = cells[xi];
        if xv.is_empty() {
            continue;
        }
        let x_label = if x_numeric { format!("{}", xv.parse::<f64>().unwrap()) } else { xv.to_owned() };
        let g_label = match gi {
            Some(g) if cells[g].is_empty() => continue,
            Some(g) => cells[g].to_owned(),
            None => y.unwrap_or("count").to_owned(),
        };
        let yv = match (yi, stat) {
            (Some(i), Stat::Count) => {
                if cells[i].is_empty() {
                    continue;
                }
                0.0
            }
            (Some(i), _) => match cells[i].parse::<f64>() {
                Ok(v) => v,
                Err(_) => continue,
            },
            (None, _) => 0.0,
        };
        buckets.entry((g_label, x_label)).or_default().push(yv);
    }
    buckets
        .into_iter()
        .map(|(k, mut vals)| {
            let v = match stat {
                Stat::Count => vals.len() as f64,
                Stat::Sum => vals.iter().sum(),
                Stat::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
                Stat::Median => {
                    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let n = vals.len();
                    if n % 2 == 1 {
                        vals[n / 2]
                    } else {
                        (vals[n / 2 - 1] + vals[n / 2]) / 2.0
                    }
                }
            };
            (k, v)
        })
        .collect()
}

fn words(text: &str) -> Vec<String> {
    const STOP: [&str; 22] = [
        "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on", "or",
        "than", "that", "the", "this", "to", "with",
    ];
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOP.contains(&w.as_str()))
        .collect()
}

/// Exhaustive best column pair: every ordered pair `i < j` is scored by the
/// summed count of distinct column tokens found in `text`; the first pair
/// with the highest positive score wins. A lone column pairs with itself.
pub fn brute_force_column_pair(text: &str, columns: &[String]) -> Option<(usize, usize)> {
    let text_words = words(text);
    let score = |c: &String| {
        let mut ws = words(c);
        ws.sort();
        ws.dedup();
        ws.iter().filter(|w| text_words.contains(w)).count()
    };
    if columns.len() == 1 {
        return (score(&columns[0]) > 0).then_some((0, 0));
    }
    let mut best: Option<((usize, usize), usize)> = None;
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            let s = score(&columns[i]) + score(&columns[j]);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some(((i, j), s));
            }
        }
    }
    best.filter(|(_, s)| *s > 0).map(|(p, _)| p)
}

/// Brute-force IDF ranking over `(title, text)` documents: the titles of
/// positively scored documents, best first, ties in corpus order.
pub fn brute_force_ranking(docs: &[(&str, &str)], query: &str) -> Vec<String> {
    let q = {
        let mut w = words(query);
        w.sort();
        w.dedup();
        w
    };
    let n = docs.len() as f64;
    let mut scored: Vec<(f64, usize)> = docs
        .iter()
        .enumerate()
        .map(|(i, (_, text))| {
            let dw = words(text);
            let s = q
                .iter()
                .filter(|t| dw.contains(t))
                .map(|t| {
                    let df = docs.iter().filter(|(_, d)| words(d).contains(t)).count() as f64;
                    (1.0 + n / df).ln()
                })
                .sum::<f64>();
            (s, i)
        })
        .filter(|(s, _)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, i)| docs[i].0.to_owned()).collect()
}

/// Applies one random byte-level or structural mutation to `text`.
pub fn mutate<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut bytes = text.as_bytes().to_vec();
    match rng.gen_range(0..7) {
        0 if !bytes.is_empty() => {
            let cut = rng.gen_range(0..bytes.len());
            bytes.truncate(cut);
        }
        1 if !bytes.is_empty() => {
            let i = rng.gen_range(0..bytes.len());
            bytes.remove(i);
        }
        2 => {
            let i = rng.gen_range(0..=bytes.len());
            let junk = [b'{', b'}', b'[', b']', b'"', b',', b':', b'\\', 0xff, b'0'];
            bytes.insert(i, *junk.choose(rng).unwrap());
        }
        3 if !bytes.is_empty() => {
            let i = rng.gen_range(0..bytes.len());
            bytes[i] = rng.gen();
        }
        4 => {
            let keys = ["\"index\"", "\"hypothesis\"", "\"visualization\"", "\"rationale\"", "\"title\"", "\"relatedWork\""];
            let key = keys.choose(rng).unwrap();
            return text.replacen(key, "\"renamed\"", 1);
        }
        5 => return text.replacen("\"", "", rng.gen_range(1..4)),
        _ => {
            let i = rng.gen_range(0..=bytes.len());
            let j = rng.gen_range(i..=bytes.len());
            let dup = bytes[i..j].to_vec();
            bytes.splice(j..j, dup);
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Number of nodes in the subtree of `id`, by walking children.
pub fn subtree_size(tree: &DiagramTree, id: &NodeId) -> usize {
    1 + tree.children(id).iter().map(|c| subtree_size(tree, c)).sum::<usize>()
}
