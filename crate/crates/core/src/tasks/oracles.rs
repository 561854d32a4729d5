//! Brute-force ground truth.

use serde::{Deserialize, Serialize};

use super::instances::{GraphInstance, QsaInstance, SequenceInstance};
use crate::error::{invalid, Result};
use crate::numerics::Matrix;

/// `(1/q) Σ_{j ∈ y_i} z_j` per active row; inactive rows are zero.
pub fn qsa_oracle(inst: &QsaInstance) -> Matrix {
    let mut out = Matrix::zeros(inst.n, inst.d_prime);
    let q = inst.q as f64;
    for i in 0..inst.n {
        if !inst.active[i] {
            continue;
        }
        let row = out.row_mut(i);
        for &j in &inst.y[i] {
            for (o, &zj) in row.iter_mut().zip(&inst.z[j - 1]) {
                *o += zj;
            }
        }
        for o in row.iter_mut() {
            *o /= q;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchVariant {
    Match2,
    Match3,
    Match3Bigram,
    Match3Local { k: usize },
}

/// How quantified indices relate to `i` and to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexRule {
    /// Every index ranges over all of `[N]`, repeats allowed.
    #[default]
    Literal,
    /// `i`, `j_1`, `j_2` pairwise distinct (pair tasks: `j != i`).
    Distinct,
}

fn zero_sum(m: u64, vals: &[u64]) -> bool {
    vals.iter().fold(0u64, |acc, &v| (acc + v % m) % m) == 0
}

pub fn match_oracle(inst: &SequenceInstance, variant: MatchVariant) -> Result<Vec<bool>> {
    match_oracle_with(inst, variant, IndexRule::Literal)
}

pub fn match_oracle_with(
    inst: &SequenceInstance,
    variant: MatchVariant,
    rule: IndexRule,
) -> Result<Vec<bool>> {
    inst.validate()?;
    let n = inst.n;
    let x = &inst.x;
    let m = inst.m;
    let distinct = rule == IndexRule::Distinct;
    let mut out = vec![false; n];
    match variant {
        MatchVariant::Match2 => {
            for i in 0..n {
                out[i] = (0..n).any(|j| !(distinct && j == i) && zero_sum(m, &[x[i], x[j]]));
            }
        }
        MatchVariant::Match3 => {
            for i in 0..n {
                'found: for j1 in 0..n {
                    for j2 in 0..n {
                        if distinct && (j1 == i || j2 == i || j1 == j2) {
                            continue;
                        }
                        if zero_sum(m, &[x[i], x[j1], x[j2]]) {
                            out[i] = true;
                            break 'found;
                        }
                    }
                }
            }
        }
        MatchVariant::Match3Bigram => {
            for i in 0..n {
                out[i] = (0..n.saturating_sub(1)).any(|j| {
                    !(distinct && (j == i || j + 1 == i)) && zero_sum(m, &[x[i], x[j], x[j + 1]])
                });
            }
        }
        MatchVariant::Match3Local { k } => {
            if k > n {
                return Err(invalid(format!("local window K = {k} exceeds N = {n}")));
            }
            for i in 0..n {
                let lo = i.saturating_sub(k);
                let hi = (i + k).min(n - 1);
                'found: for j1 in lo..=hi {
                    for j2 in lo..=hi {
                        if distinct && (j1 == i || j2 == i || j1 == j2) {
                            continue;
                        }
                        if zero_sum(m, &[x[i], x[j1], x[j2]]) {
                            out[i] = true;
                            break 'found;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleKind {
    /// Directed 3-cycle through `i`.
    Dcycle3,
    /// Closed 5-walk through `i` on an undirected graph.
    Cycle5,
}

impl CycleKind {
    pub fn order(&self) -> usize {
        match self {
            CycleKind::Dcycle3 => 3,
            CycleKind::Cycle5 => 5,
        }
    }
}

fn check_cycle_domain(inst: &GraphInstance, kind: CycleKind) -> Result<()> {
    inst.validate()?;
    if kind == CycleKind::Cycle5 && !(inst.symmetric && inst.is_symmetric()) {
        return Err(invalid("cycle5 is defined on symmetric adjacency only"));
    }
    Ok(())
}

/// Literal quantifier over `(j_1, ..., j_{s-1})`: some closed walk
/// `i -> j_1 -> ... -> j_{s-1} -> i` uses only present edges.
///
/// Evaluated by propagating the set of walk endpoints, which visits exactly
/// the same tuples as nested loops would.
pub fn cycle_oracle(inst: &GraphInstance, kind: CycleKind) -> Result<Vec<bool>> {
    check_cycle_domain(inst, kind)?;
    let n = inst.n;
    let steps = kind.order() - 1;
    let mut out = vec![false; n];
    for (i, bit) in out.iter_mut().enumerate() {
        let mut frontier = vec![false; n];
        frontier[i] = true;
        for _ in 0..steps {
            let mut next = vec![false; n];
            for (u, _) in frontier.iter().enumerate().filter(|(_, &on)| on) {
                for (v, nv) in next.iter_mut().enumerate() {
                    *nv |= inst.edge(u, v);
                }
            }
            frontier = next;
        }
        *bit = (0..n).any(|j| frontier[j] && inst.edge(j, i));
    }
    Ok(out)
}

/// Nested-loop evaluation of the same predicate, for cross-checking.
pub fn cycle_oracle_brute(inst: &GraphInstance, kind: CycleKind) -> Result<Vec<bool>> {
    check_cycle_domain(inst, kind)?;
    let n = inst.n;
    let s = kind.order();
    let mut out = vec![false; n];
    for i in 0..n {
        let mut tuple = vec![0usize; s - 1];
        let total = n.pow((s - 1) as u32);
        for code in 0..total {
            let mut rest = code;
            for slot in (0..s - 1).rev() {
                tuple[slot] = rest % n;
                rest /= n;
            }
            let mut walk = vec![i];
            walk.extend_from_slice(&tuple);
            walk.push(i);
            if walk.windows(2).all(|w| inst.edge(w[0], w[1])) {
                out[i] = true;
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qsa_examples() {
        let inst = QsaInstance::new(
            vec![vec![0.5, 0.1], vec![-0.2, 0.3]],
            vec![vec![1], vec![2]],
            1,
        )
        .unwrap();
        assert_eq!(qsa_oracle(&inst).data(), &[0.5, 0.1, -0.2, 0.3]);

        let inst = QsaInstance::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]],
            vec![vec![2, 3], vec![1, 2], vec![1, 3]],
            2,
        )
        .unwrap();
        assert_eq!(qsa_oracle(&inst).row(0), &[0.0, 0.0]);
    }

    #[test]
    fn match_examples() {
        let s = SequenceInstance::new(7, vec![3, 4, 5]).unwrap();
        assert_eq!(match_oracle(&s, MatchVariant::Match2).unwrap(), vec![true, true, false]);
        let s = SequenceInstance::new(7, vec![1, 2, 4]).unwrap();
        assert_eq!(match_oracle(&s, MatchVariant::Match3).unwrap(), vec![true; 3]);
        let s = SequenceInstance::new(9, vec![9; 5]).unwrap();
        assert_eq!(match_oracle(&s, MatchVariant::Match2).unwrap(), vec![true; 5]);
        assert_eq!(
            match_oracle_with(&s, MatchVariant::Match2, IndexRule::Distinct).unwrap(),
            vec![true; 5]
        );
        let s = SequenceInstance::new(9, vec![9, 1]).unwrap();
        assert_eq!(
            match_oracle_with(&s, MatchVariant::Match2, IndexRule::Distinct).unwrap(),
            vec![false, false]
        );
    }

    #[test]
    fn bigram_and_local() {
        let s = SequenceInstance::new(11, vec![1, 2, 8]).unwrap();
        assert!(match_oracle(&s, MatchVariant::Match3Bigram).unwrap()[0]);
        let s = SequenceInstance::new(11, vec![1, 4, 4, 2, 8]).unwrap();
        // 1 + 2 + 8 = 11 but positions 4, 5 are more than one step from 1
        assert!(!match_oracle(&s, MatchVariant::Match3Local { k: 1 }).unwrap()[0]);
        assert!(match_oracle(&s, MatchVariant::Match3Local { k: 4 }).unwrap()[0]);
        assert!(match_oracle(&s, MatchVariant::Match3Local { k: 6 }).is_err());
    }

    #[test]
    fn cycle_examples() {
        let mut g = GraphInstance::empty(3, false);
        g.set_edge(0, 1, true);
        g.set_edge(1, 2, true);
        g.set_edge(2, 0, true);
        assert_eq!(cycle_oracle(&g, CycleKind::Dcycle3).unwrap(), vec![true; 3]);
        assert_eq!(
            cycle_oracle(&GraphInstance::empty(4, false), CycleKind::Dcycle3).unwrap(),
            vec![false; 4]
        );

        let mut c5 = GraphInstance::empty(5, true);
        for i in 0..5 {
            c5.set_edge(i, (i + 1) % 5, true);
            c5.set_edge((i + 1) % 5, i, true);
        }
        assert_eq!(cycle_oracle(&c5, CycleKind::Cycle5).unwrap(), vec![true; 5]);
        assert_eq!(cycle_oracle_brute(&c5, CycleKind::Cycle5).unwrap(), vec![true; 5]);
        assert!(cycle_oracle(&g, CycleKind::Cycle5).is_err());
    }
}
