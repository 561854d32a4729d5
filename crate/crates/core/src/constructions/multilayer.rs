use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::{
    check_match_params, element_map, format_for, position, provenance, residue, sparse, zero_sum,
};
use crate::error::{invalid, Result};
use crate::numerics::{Matrix, Precision};
use crate::transformer::{
    AttentionUnit, Head, Layer, MlpLayer, MultiHeadLayer, TransformerModel,
};

/// All pairs of `[N]` grouped into layers of at most `ℓ` pairs whose
/// endpoints are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSchedule {
    #[serde(rename = "N")]
    pub n: usize,
    pub ell: usize,
    /// 1-based pairs `(a, b)` with `a < b`.
    pub layers: Vec<Vec<(usize, usize)>>,
}

/// Rounds of the circle method: each round is a perfect matching of `[N]`
/// (of `[N] ∪ {dummy}` for odd `N`, dropping the dummy's pair).
pub fn round_robin(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n < 2 {
        return Vec::new();
    }
    let t = n + n % 2;
    let mut rounds = Vec::with_capacity(t - 1);
    for r in 0..t - 1 {
        let mut round = Vec::with_capacity(t / 2);
        let mut push = |a: usize, b: usize| {
            // player t - 1 is the dummy when N is odd
            if a < n && b < n {
                round.push((a.min(b) + 1, a.max(b) + 1));
            }
        };
        push(t - 1, r);
        for k in 1..t / 2 {
            push((r + k) % (t - 1), (r + t - 1 - k) % (t - 1));
        }
        rounds.push(round);
    }
    rounds
}

impl PairSchedule {
    /// Packs the round-robin pairs first-fit into layers of `ℓ = ⌊m/2⌋ - 1`
    /// pairs with distinct endpoints.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m < 4 {
            return Err(invalid(format!("embedding m = {m} leaves no room for a pair (need m >= 4)")));
        }
        let ell = m / 2 - 1;
        let mut layers: Vec<Vec<(usize, usize)>> = Vec::new();
        for (a, b) in round_robin(n).into_iter().flatten() {
            let slot = layers.iter().position(|l| {
                l.len() < ell && l.iter().all(|&(c, d)| c != a && c != b && d != a && d != b)
            });
            match slot {
                Some(k) => layers[k].push((a, b)),
                None => layers.push(vec![(a, b)]),
            }
        }
        let s = Self { n, ell, layers };
        s.validate()?;
        Ok(s)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Every pair appears exactly once and no layer reuses an endpoint.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let mut seen = vec![false; n * n];
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() || layer.len() > self.ell {
                return Err(invalid(format!("layer {k} has {} pairs, ℓ = {}", layer.len(), self.ell)));
            }
            let mut used = vec![false; n + 1];
            for &(a, b) in layer {
                if !(1 <= a && a < b && b <= n) {
                    return Err(invalid(format!("pair ({a}, {b}) is not an ordered pair of [N]")));
                }
                if used[a] || used[b] {
                    return Err(invalid(format!("layer {k} reuses an endpoint of ({a}, {b})")));
                }
                used[a] = true;
                used[b] = true;
                let idx = (a - 1) * n + (b - 1);
                if seen[idx] {
                    return Err(invalid(format!("pair ({a}, {b}) scheduled twice")));
                }
                seen[idx] = true;
            }
        }
        let covered = seen.iter().filter(|&&s| s).count();
        if covered != n * n.saturating_sub(1) / 2 {
            return Err(invalid(format!("schedule covers {covered} of {} pairs", n * n.saturating_sub(1) / 2)));
        }
        Ok(())
    }

    /// Layer and slot of `pos` in layer `k`: `Some(2ι)` for the first
    /// endpoint of pair `ι`, `Some(2ι + 1)` for the second.
    fn slot(layer: &[(usize, usize)], pos: usize) -> Option<usize> {
        layer.iter().enumerate().find_map(|(i, &(a, b))| {
            if a == pos {
                Some(2 * i)
            } else if b == pos {
                Some(2 * i + 1)
            } else {
                None
            }
        })
    }
}

/// Features fed to the attention layer for pair layer `pairs`:
/// `[pos, x, found, key, 1, slots(2ℓ)]`.
fn layer_features(pos: usize, x: f64, found: f64, ell: usize, pairs: &[(usize, usize)]) -> Vec<f64> {
    let mut out = vec![0.0; 5 + 2 * ell];
    out[4] = 1.0;
    if pos == 0 {
        return out;
    }
    out[0] = pos as f64;
    out[1] = x;
    out[2] = found;
    if let Some(s) = PairSchedule::slot(pairs, pos) {
        out[3] = 1.0;
        out[5 + s] = x;
    }
    out
}

/// `[pos, x] ->` features for the first pair layer, with `found` set when
/// `3 x ≡ 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(rename = "M")]
    pub m: u64,
    pub ell: usize,
    pub next: Vec<(usize, usize)>,
}

impl ScheduleEntry {
    fn in_width(&self) -> usize {
        2
    }
    fn out_width(&self) -> usize {
        5 + 2 * self.ell
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]);
        let xi = residue(x[1], self.m);
        let found = if zero_sum(self.m, &[xi, xi, xi]) { 1.0 } else { 0.0 };
        layer_features(pos, x[1], found, self.ell, &self.next)
    }
}
element_map!(ScheduleEntry, "schedule_entry");

/// `[pos, x, found, slots] ->` decodes the endpoint values of the previous
/// pair layer, ORs every triple they close with `x` into `found`, and emits
/// features for the next layer (or just `found` after the last).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleStep {
    #[serde(rename = "M")]
    pub m: u64,
    pub ell: usize,
    pub prev: Vec<(usize, usize)>,
    pub next: Option<Vec<(usize, usize)>>,
}

impl ScheduleStep {
    fn in_width(&self) -> usize {
        3 + 2 * self.ell
    }
    fn out_width(&self) -> usize {
        match self.next {
            Some(_) => 5 + 2 * self.ell,
            None => 1,
        }
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]);
        let m = self.m;
        let xi = residue(x[1], m);
        let scale = 2.0 * self.prev.len() as f64;
        let mut found = pos != 0 && x[2] > 0.5;
        if pos != 0 {
            for i in 0..self.prev.len() {
                let a = residue(x[3 + 2 * i] * scale, m);
                let b = residue(x[3 + 2 * i + 1] * scale, m);
                found |= [[xi, a, b], [xi, a, a], [xi, b, b], [xi, xi, a], [xi, xi, b]]
                    .iter()
                    .any(|t| zero_sum(m, t));
            }
        }
        let f = if found { 1.0 } else { 0.0 };
        match &self.next {
            Some(next) => layer_features(pos, x[1], f, self.ell, next),
            None => vec![f],
        }
    }
}
element_map!(ScheduleStep, "schedule_step");

/// Score given to scheduled endpoints, `2 ln(4NM)`.
pub fn endpoint_scale(n: usize, m: u64) -> f64 {
    2.0 * (4.0 * n as f64 * m as f64).ln()
}

/// `D` attention layers, one per layer of the pair schedule. Each layer
/// routes the values of its scheduled endpoints into dedicated slots of
/// every element; the following MLP recovers them and checks every triple
/// they can close with `x_i`.
pub fn build_match3_multilayer(n: usize, m: u64, m_embed: usize) -> Result<TransformerModel> {
    check_match_params(n, m)?;
    let schedule = PairSchedule::new(n, m_embed)?;
    let ell = schedule.ell;
    let c = endpoint_scale(n, m);
    let fmt = format_for(c.max(n as f64 + 1.0).max(m as f64), 24)?;
    let p = Precision::fixed(fmt);
    let width = 5 + 2 * ell;
    let d_out = 3 + 2 * ell;
    let prov = multilayer_provenance(n, m, m_embed, &schedule, c, fmt.total_bits());
    let sched = &schedule.layers;
    if sched.is_empty() {
        // a single element only has the triple (i, i, i)
        let layers = vec![Layer::Mlp(MlpLayer::new(Arc::new(SingleElement { m }), p))];
        return TransformerModel::new(layers, false, prov);
    }
    let mut layers = Vec::new();
    layers.push(Layer::Mlp(MlpLayer::new(
        Arc::new(ScheduleEntry {
            m,
            ell,
            next: sched[0].clone(),
        }),
        p,
    )));
    let unit = AttentionUnit::quantized(
        sparse(width, m_embed, &[(4, 0, c)]),
        sparse(width, m_embed, &[(3, 0, 1.0)]),
        sparse(
            width,
            d_out,
            &(0..2 * ell).map(|s| (5 + s, 3 + s, 1.0)).collect::<Vec<_>>(),
        ),
        p,
    )?;
    let carry = sparse(width, d_out, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
    let attn = MultiHeadLayer::new(vec![Head::Standard(unit)], Some(carry))?;
    for k in 0..sched.len() {
        layers.push(Layer::Attention(attn.clone()));
        layers.push(Layer::Mlp(MlpLayer::new(
            Arc::new(ScheduleStep {
                m,
                ell,
                prev: sched[k].clone(),
                next: sched.get(k + 1).cloned(),
            }),
            p,
        )));
    }
    TransformerModel::new(layers, true, prov)
}

fn multilayer_provenance(
    n: usize,
    m: u64,
    m_embed: usize,
    schedule: &PairSchedule,
    c: f64,
    p: u32,
) -> crate::transformer::Provenance {
    provenance(
        "match3_multilayer",
        json!({"N": n, "M": m, "m": m_embed}),
        vec![],
        &[
            ("ell", json!(schedule.ell)),
            ("D", json!(schedule.depth())),
            ("c", json!(c)),
            ("p", json!(p)),
            ("schedule", json!(schedule.layers)),
        ],
    )
}

/// `[pos, x] -> [3x ≡ 0]`, the whole answer when `N = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingleElement {
    #[serde(rename = "M")]
    pub m: u64,
}

impl SingleElement {
    fn in_width(&self) -> usize {
        2
    }
    fn out_width(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let xi = residue(x[1], self.m);
        vec![if zero_sum(self.m, &[xi, xi, xi]) { 1.0 } else { 0.0 }]
    }
}
element_map!(SingleElement, "single_element");

/// `found` bits of every element after the entry MLP (stage 0) and after
/// each pair layer's decoding MLP (stage `k`).
pub fn multilayer_found_trace(model: &TransformerModel, x: &Matrix) -> Result<Vec<Vec<bool>>> {
    let trace = model.trace(x)?;
    let n = x.rows();
    let mut stages = Vec::new();
    for (idx, state) in trace.states.iter().enumerate().skip(1) {
        // states after MLP layers sit at odd indices
        if idx % 2 == 0 {
            continue;
        }
        let col = if state.cols() == 1 { 0 } else { 2 };
        stages.push((0..n).map(|r| state[(r, col)] > 0.5).collect());
    }
    Ok(stages)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_elements_eight_layers() {
        let s = PairSchedule::new(6, 6).unwrap();
        assert_eq!(s.ell, 2);
        assert_eq!(s.depth(), 8);
    }

    #[test]
    fn round_robin_is_a_factorization() {
        for n in 2..12 {
            let rounds = round_robin(n);
            let total: usize = rounds.iter().map(Vec::len).sum();
            assert_eq!(total, n * (n - 1) / 2);
            for r in &rounds {
                let mut ends: Vec<usize> = r.iter().flat_map(|&(a, b)| [a, b]).collect();
                ends.sort_unstable();
                ends.dedup();
                assert_eq!(ends.len(), 2 * r.len());
            }
        }
    }

    #[test]
    fn agrees_with_oracle() {
        use crate::constructions::output_bits;
        use crate::tasks::{match_oracle, random_sequence, MatchVariant};
        use crate::transformer::run_transformer;
        for (n, m, emb) in [(1, 5, 4), (2, 7, 4), (6, 11, 6), (7, 13, 8), (9, 17, 10)] {
            let model = build_match3_multilayer(n, m, emb).unwrap();
            for seed in 0..20 {
                let inst = random_sequence(n, m, seed).unwrap();
                let out = output_bits(&run_transformer(&model, &inst.to_matrix()).unwrap());
                assert_eq!(out, match_oracle(&inst, MatchVariant::Match3).unwrap(), "N={n} seed={seed}");
            }
        }
    }

    #[test]
    fn small_embedding_rejected() {
        assert!(PairSchedule::new(6, 3).is_err());
    }
}
