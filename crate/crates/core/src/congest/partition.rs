use serde::Serialize;

use super::graph::{CongestGraph, NodeKind};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Alice,
    Bob,
}

/// Side of every vertex of a [`CongestGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub side: Vec<Side>,
}

impl Partition {
    pub fn alice_count(&self) -> usize {
        self.side.iter().filter(|&&s| s == Side::Alice).count()
    }
}

/// 0-based index `i` is on Alice's side when `i + 1 <= N/2`.
fn first_half(n: usize, i: usize) -> bool {
    2 * (i + 1) <= n
}

/// Roots and leaves by the threshold rule; an interior vertex joins its
/// children's side when they agree and its root's side otherwise.
pub fn alice_bob_partition(g: &CongestGraph) -> Partition {
    let n = g.n;
    let mut side: Vec<Option<Side>> = g
        .nodes
        .iter()
        .map(|k| match *k {
            NodeKind::Root { i } => Some(if first_half(n, i) { Side::Alice } else { Side::Bob }),
            NodeKind::Leaf { i, j } => Some(if first_half(n, i.min(j)) { Side::Alice } else { Side::Bob }),
            NodeKind::Internal { .. } => None,
        })
        .collect();
    for (t, tree) in g.trees.iter().enumerate() {
        let root_side = side[g.root(t)];
        // children always carry larger local ids than their parent
        for local in (1..tree.global.len()).rev() {
            let gid = tree.global[local];
            if side[gid].is_some() {
                continue;
            }
            let kids: Vec<Option<Side>> = tree.children[local]
                .iter()
                .map(|&c| side[tree.global[c]])
                .collect();
            side[gid] = match kids.as_slice() {
                [Some(a), Some(b)] if a == b => Some(*a),
                [Some(a)] => Some(*a),
                _ => root_side,
            };
        }
    }
    Partition {
        side: side.into_iter().map(|s| s.expect("every vertex labelled")).collect(),
    }
}

/// Edges whose endpoints lie on different sides.
pub fn cut_edges(g: &CongestGraph, p: &Partition) -> Vec<usize> {
    g.edges
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| p.side[a] != p.side[b])
        .map(|(k, _)| k)
        .collect()
}

pub fn cut_size(g: &CongestGraph, p: &Partition) -> usize {
    cut_edges(g, p).len()
}

/// In every tree level, read left to right, no Bob vertex precedes an Alice
/// vertex.
pub fn check_partition_order(g: &CongestGraph, p: &Partition) -> Result<()> {
    for (t, tree) in g.trees.iter().enumerate() {
        for (depth, level) in tree.levels().iter().enumerate() {
            let mut seen_bob = false;
            for &v in level {
                match p.side[tree.global[v]] {
                    Side::Bob => seen_bob = true,
                    Side::Alice if seen_bob => {
                        return Err(invalid(format!(
                            "tree {t}, depth {depth}: Alice vertex right of a Bob vertex"
                        )))
                    }
                    Side::Alice => {}
                }
            }
        }
    }
    Ok(())
}
