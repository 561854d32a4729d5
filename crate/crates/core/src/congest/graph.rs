use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::{invalid, Result};

/// What a vertex of the communication graph stands for. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    /// `u_i`, holding element `i`.
    Root { i: usize },
    /// `v_{i,j}`, shared by trees `i` and `j`.
    Leaf { i: usize, j: usize },
    /// Interior vertex of tree `tree`.
    Internal { tree: usize },
}

/// Tree `B_i`, stored with local vertex ids (local 0 is the root `u_i`).
#[derive(Debug, Clone)]
pub struct Tree {
    /// Global id of each local vertex.
    pub global: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    /// Left child first.
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
    /// Global edge id joining each local vertex to its parent.
    pub parent_edge: Vec<Option<usize>>,
    /// Local ids of the leaves, left to right.
    pub leaves: Vec<usize>,
}

impl Tree {
    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Local ids grouped by depth, each group left to right.
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let mut levels = vec![Vec::new(); self.height() + 1];
        for v in preorder(self) {
            levels[self.depth[v]].push(v);
        }
        levels
    }
}

/// Roots `u_i`, leaves `v_{i,j}`, and one balanced binary tree per root.
#[derive(Debug, Clone)]
pub struct CongestGraph {
    pub n: usize,
    pub nodes: Vec<NodeKind>,
    pub edges: Vec<(usize, usize)>,
    pub trees: Vec<Tree>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl CongestGraph {
    pub fn root(&self, i: usize) -> usize {
        i
    }

    pub fn leaf(&self, i: usize, j: usize) -> usize {
        self.n + i * self.n + j
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Edge id of `{a, b}`, if present.
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors().iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Deepest leaf over all trees.
    pub fn tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::height).max().unwrap_or(0)
    }

    /// Hop distances from `src` to every vertex.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let adj = self.neighbors();
        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Largest distance between two roots.
    pub fn root_diameter(&self) -> usize {
        (0..self.n)
            .map(|i| {
                let d = self.distances_from(i);
                (0..self.n).map(|j| d[j]).max().unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Exact diameter by BFS from every vertex; quadratic, meant for small N.
    pub fn diameter(&self) -> usize {
        (0..self.nodes.len())
            .map(|s| self.distances_from(s).into_iter().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Degree, sharing and edge-disjointness checks.
    pub fn validate(&self) -> Result<()> {
        if self.max_degree() > 3 {
            return Err(invalid(format!("max degree {} exceeds 3", self.max_degree())));
        }
        let mut owner = vec![usize::MAX; self.edges.len()];
        let mut membership = vec![0usize; self.nodes.len()];
        for (t, tree) in self.trees.iter().enumerate() {
            for (local, &g) in tree.global.iter().enumerate() {
                membership[g] += 1;
                if let Some(p) = tree.parent[local] {
                    let e = self
                        .edge_id(g, tree.global[p])
                        .ok_or_else(|| invalid("tree edge missing from edge list"))?;
                    if owner[e] != usize::MAX {
                        return Err(invalid(format!("edge {e} used by trees {} and {t}", owner[e])));
                    }
                    owner[e] = t;
                }
            }
        }
        for (g, kind) in self.nodes.iter().enumerate() {
            let want = match kind {
                NodeKind::Leaf { i, j } if i != j => 2,
                _ => 1,
            };
            if membership[g] != want {
                return Err(invalid(format!("{kind:?} lies in {} trees", membership[g])));
            }
        }
        Ok(())
    }
}

/// Leaf order of tree `i`: `v_{i,1}, v_{1,i}, v_{i,2}, v_{2,i}, ...`, with
/// `v_{i,i}` listed once.
pub fn tree_leaf_order(n: usize, i: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(2 * n - 1);
    for j in 0..n {
        out.push((i, j));
        if j != i {
            out.push((j, i));
        }
    }
    out
}

fn preorder(tree: &Tree) -> Vec<usize> {
    let mut out = Vec::with_capacity(tree.global.len());
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        out.push(v);
        stack.extend(tree.children[v].iter().rev());
    }
    out
}

/// Adds a child of local `p` covering `range`: the leaf itself for a single
/// leaf, otherwise a fresh interior vertex. Returns its local id.
fn attach(
    tree: &mut Tree,
    nodes: &mut Vec<NodeKind>,
    edges: &mut Vec<(usize, usize)>,
    p: usize,
    range: &[usize],
    t: usize,
) -> usize {
    let g = if range.len() == 1 {
        range[0]
    } else {
        nodes.push(NodeKind::Internal { tree: t });
        nodes.len() - 1
    };
    let child = tree.global.len();
    tree.global.push(g);
    tree.parent.push(Some(p));
    tree.children.push(Vec::new());
    tree.depth.push(tree.depth[p] + 1);
    tree.children[p].push(child);
    let pg = tree.global[p];
    tree.parent_edge.push(Some(edges.len()));
    edges.push((pg.min(g), pg.max(g)));
    child
}

/// Splits `range` (at least two leaves) below local `p`.
fn grow(
    tree: &mut Tree,
    nodes: &mut Vec<NodeKind>,
    edges: &mut Vec<(usize, usize)>,
    p: usize,
    range: &[usize],
    t: usize,
) {
    let k = range.len() / 2;
    for part in [&range[..k], &range[k..]] {
        let c = attach(tree, nodes, edges, p, part, t);
        if part.len() > 1 {
            grow(tree, nodes, edges, c, part, t);
        }
    }
}

/// Builds the graph for `n` elements. Each tree splits its ordered leaf
/// list in half recursively, the left half taking `⌊len/2⌋` leaves.
pub fn build_congest_graph(n: usize) -> Result<CongestGraph> {
    if n == 0 {
        return Err(invalid("communication graph needs N >= 1"));
    }
    let mut nodes: Vec<NodeKind> = (0..n).map(|i| NodeKind::Root { i }).collect();
    for i in 0..n {
        for j in 0..n {
            nodes.push(NodeKind::Leaf { i, j });
        }
    }
    let leaf_id = |i: usize, j: usize| n + i * n + j;
    let mut edges = Vec::new();
    let mut trees = Vec::with_capacity(n);
    for i in 0..n {
        let mut tree = Tree {
            global: vec![i],
            parent: vec![None],
            children: vec![Vec::new()],
            depth: vec![0],
            parent_edge: vec![None],
            leaves: Vec::new(),
        };
        let order: Vec<usize> = tree_leaf_order(n, i)
            .into_iter()
            .map(|(a, b)| leaf_id(a, b))
            .collect();
        if order.len() == 1 {
            attach(&mut tree, &mut nodes, &mut edges, 0, &order, i);
        } else {
            grow(&mut tree, &mut nodes, &mut edges, 0, &order, i);
        }
        tree.leaves = preorder(&tree)
            .into_iter()
            .filter(|&v| tree.children[v].is_empty())
            .collect();
        trees.push(tree);
    }
    let edge_index = edges.iter().enumerate().map(|(k, &e)| (e, k)).collect();
    Ok(CongestGraph {
        n,
        nodes,
        edges,
        trees,
        edge_index,
    })
}
