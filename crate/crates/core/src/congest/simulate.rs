//! Round-synchronous simulation of a transformer on the communication graph.
//!
//! Roots run the MLPs. Each attention head costs six tree phases: roots
//! broadcast `(q, k, v)` down their trees, leaves score, the row maximum goes
//! up and back down, the normalizer goes up and back down, and the weighted
//! values go up. Sums travel as exact partial sums, so every root ends with
//! the same bits as direct evaluation.

use serde::Serialize;

use super::graph::{CongestGraph, NodeKind};
use super::trace::{LayerRounds, ProtocolTrace, RoundBound};
use crate::error::{dims, Error, Result};
use crate::numerics::{ExactSum, Matrix};
use crate::transformer::{edge_bits, Head, Layer, MultiHeadLayer, TransformerModel};

/// Constant in the library's round bound `40 · H · D · (m + ⌈log₂ N⌉)`.
pub const ROUND_BOUND_CONSTANT: usize = 40;

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Keep every message in the trace.
    pub log_messages: bool,
}

/// One payload crossing one edge in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Message {
    pub round: usize,
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

/// Outputs of a simulation run.
#[derive(Debug, Clone)]
pub struct Simulation {
    /// Final states at the roots, `<END>` row dropped.
    pub outputs: Matrix,
    /// State after every layer, `<END>` row included, input first.
    pub states: Vec<Matrix>,
    pub trace: ProtocolTrace,
}

struct Engine<'a> {
    g: &'a CongestGraph,
    round: usize,
    messages: u64,
    bits: u64,
    bits_per_payload: u64,
    edge_messages: Vec<u64>,
    edge_bits: Vec<u64>,
    // last round each (edge, direction) carried a payload
    last_use: Vec<usize>,
    log: Option<Vec<Message>>,
}

impl<'a> Engine<'a> {
    fn send(&mut self, edge: usize, from: usize, to: usize, value: f64) -> Result<()> {
        let (a, _) = self.g.edges[edge];
        let slot = 2 * edge + usize::from(from != a);
        if self.last_use[slot] == self.round + 1 {
            return Err(Error::Fidelity(format!(
                "edge {edge} carries two payloads from {from} in round {}",
                self.round
            )));
        }
        self.last_use[slot] = self.round + 1;
        self.messages += 1;
        self.bits += self.bits_per_payload;
        self.edge_messages[edge] += 1;
        self.edge_bits[edge] += self.bits_per_payload;
        if let Some(log) = &mut self.log {
            log.push(Message {
                round: self.round,
                from,
                to,
                value,
            });
        }
        Ok(())
    }

    /// Pipelined broadcast of `payload[t]` from root `u_t` down tree `t`,
    /// one item per edge per round. Returns, per tree, the items every local
    /// vertex received.
    fn broadcast(&mut self, payload: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
        let g = self.g;
        let mut have: Vec<Vec<Vec<f64>>> = g
            .trees
            .iter()
            .enumerate()
            .map(|(t, tree)| {
                let mut h = vec![Vec::new(); tree.global.len()];
                h[0] = payload[t].clone();
                h
            })
            .collect();
        let mut sent: Vec<Vec<usize>> = g.trees.iter().map(|t| vec![0; t.global.len()]).collect();
        loop {
            let snapshot: Vec<Vec<usize>> = have.iter().map(|h| h.iter().map(Vec::len).collect()).collect();
            let mut any = false;
            for (t, tree) in g.trees.iter().enumerate() {
                for v in 0..tree.global.len() {
                    if tree.children[v].is_empty() || sent[t][v] >= snapshot[t][v] {
                        continue;
                    }
                    let val = have[t][v][sent[t][v]];
                    for &c in &tree.children[v] {
                        let edge = tree.parent_edge[c].expect("child has a parent edge");
                        self.send(edge, tree.global[v], tree.global[c], val)?;
                        have[t][c].push(val);
                    }
                    sent[t][v] += 1;
                    any = true;
                }
            }
            if !any {
                break;
            }
            self.round += 1;
        }
        Ok(have)
    }

    /// Pipelined convergecast of `len` items per contributing leaf up every
    /// tree, combining at interior vertices. Returns the root aggregates.
    fn convergecast<T: Clone>(
        &mut self,
        contrib: Vec<Vec<Option<Vec<T>>>>,
        len: usize,
        combine: impl Fn(&mut T, &T),
        show: impl Fn(&T) -> f64,
    ) -> Result<Vec<Vec<T>>> {
        let g = self.g;
        let mut out = Vec::with_capacity(g.trees.len());
        let mut state = Vec::with_capacity(g.trees.len());
        for (t, tree) in g.trees.iter().enumerate() {
            let k = tree.global.len();
            let mut agg: Vec<Vec<Option<T>>> = vec![vec![None; len]; k];
            let mut ready = vec![0usize; k];
            let mut active = vec![false; k];
            for (v, c) in contrib[t].iter().enumerate() {
                if let Some(items) = c {
                    agg[v] = items.iter().cloned().map(Some).collect();
                    ready[v] = len;
                    active[v] = true;
                }
            }
            // children carry larger local ids than their parents
            let mut waiting = vec![0usize; k];
            for v in (1..k).rev() {
                if active[v] {
                    let p = tree.parent[v].expect("non-root has a parent");
                    active[p] = true;
                    waiting[p] += 1;
                }
            }
            state.push((agg, ready, active, waiting, vec![vec![0usize; len]; k], vec![0usize; k]));
        }
        loop {
            let mut any = false;
            for (t, tree) in g.trees.iter().enumerate() {
                let (agg, ready, active, _, got, sent) = &mut state[t];
                let snapshot = ready.clone();
                for v in 1..tree.global.len() {
                    if !active[v] || sent[v] >= snapshot[v] {
                        continue;
                    }
                    let k = sent[v];
                    let p = tree.parent[v].expect("non-root has a parent");
                    let item = agg[v][k].clone().expect("ready item present");
                    let edge = tree.parent_edge[v].expect("non-root has a parent edge");
                    self.send(edge, tree.global[v], tree.global[p], show(&item))?;
                    match &mut agg[p][k] {
                        Some(acc) => combine(acc, &item),
                        slot @ None => *slot = Some(item),
                    }
                    got[p][k] += 1;
                    sent[v] += 1;
                    any = true;
                }
            }
            for (t, tree) in g.trees.iter().enumerate() {
                let (_, ready, active, waiting, got, _) = &mut state[t];
                for v in 0..tree.global.len() {
                    if active[v] && !tree.children[v].is_empty() {
                        while ready[v] < len && got[v][ready[v]] == waiting[v] {
                            ready[v] += 1;
                        }
                    }
                }
            }
            if !any {
                break;
            }
            self.round += 1;
        }
        for (agg, ..) in state {
            out.push(
                agg.into_iter()
                    .next()
                    .expect("tree has a root")
                    .into_iter()
                    .map(|x| x.expect("root aggregated every item"))
                    .collect(),
            );
        }
        Ok(out)
    }
}

/// Where leaf `v_{i,j}` sits in its trees: local id in tree `i` and in tree
/// `j` (the same slot twice when `i = j`).
fn leaf_slots(g: &CongestGraph) -> Vec<(usize, usize)> {
    let n = g.n;
    let mut slots = vec![(usize::MAX, usize::MAX); n * n];
    for (t, tree) in g.trees.iter().enumerate() {
        for &local in &tree.leaves {
            if let NodeKind::Leaf { i, j } = g.nodes[tree.global[local]] {
                if t == i {
                    slots[i * n + j].0 = local;
                }
                if t == j {
                    slots[i * n + j].1 = local;
                }
            }
        }
    }
    slots
}

fn row_matrix(row: &[f64]) -> Matrix {
    Matrix::from_fn(1, row.len(), |_, c| row[c])
}

fn row_times(row: &[f64], m: &Matrix) -> Result<Vec<f64>> {
    Ok(row_matrix(row).matmul(m)?.row(0).to_vec())
}

/// Same accumulation order as the score matmul.
fn ordered_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Rounds, messages and bits of one attention head.
fn simulate_head(
    engine: &mut Engine<'_>,
    head: &Head,
    state: &Matrix,
    adj: Option<&Matrix>,
    slots: &[(usize, usize)],
) -> Result<Matrix> {
    let g = engine.g;
    let n = g.n;
    let (q, k, v, kappa) = match head {
        Head::Standard(u) => (u.q(), u.k(), u.v(), None),
        Head::Graph(u) if u.base().order() == 2 => {
            let b = u.base();
            (b.q(), &b.keys()[0], &b.values()[0], Some(u.kappa()))
        }
        Head::Graph(u) => {
            return Err(Error::Unsupported(format!(
                "graph attention of order {} has no two-party leaf protocol",
                u.base().order()
            )))
        }
        Head::HigherOrder(u) => {
            return Err(Error::Unsupported(format!(
                "order-{} attention has no tree protocol",
                u.order()
            )))
        }
    };
    let m = q.cols();
    let d_out = v.cols();
    engine.bits_per_payload = u64::from(head.precision().bits());
    // roots compute their query, key and value rows locally
    let mut payload = Vec::with_capacity(n);
    for i in 0..n {
        let y = state.row(i);
        let mut p = row_times(y, q)?;
        p.extend(row_times(y, k)?);
        p.extend(row_times(y, v)?);
        payload.push(p);
    }
    let got = engine.broadcast(&payload)?;
    let query = |i: usize, j: usize| &got[i][slots[i * n + j].0][..m];
    let key = |i: usize, j: usize| &got[j][slots[i * n + j].1][m..2 * m];
    let value = |i: usize, j: usize| &got[j][slots[i * n + j].1][2 * m..];

    // leaf scores, zero rounds
    let mut score = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = ordered_dot(query(i, j), key(i, j));
            if let Some(kappa) = kappa {
                let adj = adj.ok_or_else(|| dims("graph head simulated without adjacency"))?;
                s = kappa.apply(2, &edge_bits(adj, &[i, j]), s);
            }
            if !s.is_finite() {
                return Err(Error::NonFinite { row: i });
            }
            score[i * n + j] = s;
        }
    }
    let contributions = |f: &dyn Fn(usize, usize) -> Vec<f64>| -> Vec<Vec<Option<Vec<f64>>>> {
        g.trees
            .iter()
            .enumerate()
            .map(|(t, tree)| {
                let mut c = vec![None; tree.global.len()];
                for j in 0..n {
                    c[slots[t * n + j].0] = Some(f(t, j));
                }
                c
            })
            .collect()
    };

    let maxima = engine.convergecast(
        contributions(&|i, j| vec![score[i * n + j]]),
        1,
        |a, b| *a = a.max(*b),
        |x| *x,
    )?;
    let max_at = engine.broadcast(&maxima)?;
    let expo: Vec<f64> = (0..n * n)
        .map(|c| {
            (score[c] - max_at[c / n][slots[c].0][0]).exp()
        })
        .collect();
    let sums: Vec<Vec<Option<Vec<ExactSum>>>> = g
        .trees
        .iter()
        .enumerate()
        .map(|(t, tree)| {
            let mut c = vec![None; tree.global.len()];
            for j in 0..n {
                c[slots[t * n + j].0] = Some(vec![std::iter::once(expo[t * n + j]).collect()]);
            }
            c
        })
        .collect();
    let totals = engine.convergecast(sums, 1, |a, b| a.merge(b), ExactSum::value)?;
    let totals: Vec<Vec<f64>> = totals.iter().map(|t| vec![t[0].value()]).collect();
    let total_at = engine.broadcast(&totals)?;
    let weighted: Vec<Vec<Option<Vec<ExactSum>>>> = g
        .trees
        .iter()
        .enumerate()
        .map(|(i, tree)| {
            let mut c = vec![None; tree.global.len()];
            for j in 0..n {
                let local = slots[i * n + j].0;
                let w = expo[i * n + j] / total_at[i][local][0];
                let items = value(i, j)
                    .iter()
                    .map(|&vj| std::iter::once(w * vj).collect())
                    .collect();
                c[local] = Some(items);
            }
            c
        })
        .collect();
    let rows = engine.convergecast(weighted, d_out, |a, b| a.merge(b), ExactSum::value)?;
    Ok(Matrix::from_fn(n, d_out, |r, c| rows[r][c].value()))
}

fn simulate_layer(
    engine: &mut Engine<'_>,
    layer: &MultiHeadLayer,
    state: &Matrix,
    adj: Option<&Matrix>,
    slots: &[(usize, usize)],
) -> Result<Matrix> {
    let n = state.rows();
    let mut acc = match layer.carry() {
        // the carry is a local product at each root
        Some(c) => {
            let mut out = Matrix::zeros(n, c.cols());
            for i in 0..n {
                out.row_mut(i).copy_from_slice(&row_times(state.row(i), c)?);
            }
            out
        }
        None => Matrix::zeros(n, layer.d_out()),
    };
    for head in layer.heads() {
        acc = acc.add(&simulate_head(engine, head, state, adj, slots)?)?;
    }
    Ok(acc)
}

/// `40 · H · D · (m + ⌈log₂ N⌉)` for a model on `n` task elements.
pub fn round_bound(model: &TransformerModel, n: usize) -> RoundBound {
    let h = model
        .attention_layers()
        .map(|a| a.heads().len())
        .max()
        .unwrap_or(0);
    let d = model.depth();
    let m = model.max_embedding();
    let log_n = if n <= 1 { 0 } else { (usize::BITS - (n - 1).leading_zeros()) as usize };
    RoundBound {
        constant: ROUND_BOUND_CONSTANT,
        heads: h,
        depth: d,
        m,
        log2_n: log_n,
        bound: ROUND_BOUND_CONSTANT * h * d * (m + log_n),
    }
}

pub fn simulate_transformer(g: &CongestGraph, model: &TransformerModel, x: &Matrix) -> Result<Simulation> {
    simulate_transformer_with(g, model, x, SimOptions::default())
}

/// Runs every layer on the graph. Each root `u_i` starts with row `i` of
/// the model input (`<END>` included) and each leaf `v_{i,j}` with the edge
/// bits `x_{i,j}, x_{j,i}` when the model reads a graph.
pub fn simulate_transformer_with(
    g: &CongestGraph,
    model: &TransformerModel,
    x: &Matrix,
    options: SimOptions,
) -> Result<Simulation> {
    let input = model.prepare_input(x)?;
    if input.rows() != g.n {
        return Err(dims(format!(
            "graph has {} roots, model input has {} rows",
            g.n,
            input.rows()
        )));
    }
    let adj = model.adjacency(x);
    let slots = leaf_slots(g);
    let mut engine = Engine {
        g,
        round: 0,
        messages: 0,
        bits: 0,
        bits_per_payload: 0,
        edge_messages: vec![0; g.edges.len()],
        edge_bits: vec![0; g.edges.len()],
        last_use: vec![0; 2 * g.edges.len()],
        log: options.log_messages.then(Vec::new),
    };
    let mut state = input.clone();
    let mut states = vec![input];
    let mut per_layer = Vec::with_capacity(model.layers().len());
    for (idx, layer) in model.layers().iter().enumerate() {
        let (r0, m0, b0) = (engine.round, engine.messages, engine.bits);
        let (kind, heads) = match layer {
            Layer::Mlp(l) => {
                let mut out = Matrix::zeros(state.rows(), l.out_dim());
                for i in 0..state.rows() {
                    out.row_mut(i).copy_from_slice(&l.apply_row(state.row(i))?);
                }
                state = out;
                ("mlp", 0)
            }
            Layer::Attention(a) => {
                state = simulate_layer(&mut engine, a, &state, adj.as_ref(), &slots)?;
                ("attention", a.heads().len())
            }
        };
        states.push(state.clone());
        per_layer.push(LayerRounds {
            layer: idx,
            kind: kind.to_string(),
            heads,
            rounds: engine.round - r0,
            messages: engine.messages - m0,
            bits: engine.bits - b0,
        });
    }
    let task_rows = x.rows();
    let outputs = Matrix::from_fn(task_rows, state.cols(), |r, c| state[(r, c)]);
    let trace = ProtocolTrace {
        n: task_rows,
        graph_n: g.n,
        model_tag: model.provenance().builder.clone(),
        rounds: engine.round,
        messages: engine.messages,
        bits_total: engine.bits,
        per_layer,
        round_bound: round_bound(model, task_rows),
        cut: None,
        edge_messages: engine.edge_messages,
        edge_bits: engine.edge_bits,
        log: engine.log,
    };
    Ok(Simulation {
        outputs,
        states,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congest::{alice_bob_partition, build_congest_graph, cut_size};
    use crate::constructions::{build_match2, output_bits};
    use crate::tasks::random_sequence;
    use crate::transformer::run_transformer;

    #[test]
    fn match2_bits_and_states_agree() {
        let model = build_match2(8, 11).unwrap();
        let g = build_congest_graph(9).unwrap();
        for seed in 0..5 {
            let x = random_sequence(8, 11, seed).unwrap().to_matrix();
            let sim = simulate_transformer(&g, &model, &x).unwrap();
            let direct = model.trace(&x).unwrap();
            assert_eq!(output_bits(&sim.outputs), output_bits(&run_transformer(&model, &x).unwrap()));
            for (a, b) in sim.states.iter().zip(&direct.states) {
                assert_eq!(a.data(), b.data());
            }
            assert!(sim.trace.within_round_bound(), "{:?}", sim.trace.round_bound);
        }
    }

    #[test]
    fn cut_carries_bits() {
        let model = build_match2(6, 7).unwrap();
        let g = build_congest_graph(7).unwrap();
        let x = random_sequence(6, 7, 1).unwrap().to_matrix();
        let mut sim = simulate_transformer(&g, &model, &x).unwrap();
        let part = alice_bob_partition(&g);
        let report = sim.trace.attach_partition(&g, &part).clone();
        assert_eq!(report.cut_size, cut_size(&g, &part));
        assert!(report.cut_bits > 0);
    }
}
