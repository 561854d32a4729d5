use serde::{Deserialize, Serialize};

use super::unit::check_on_grid;
use crate::error::{dims, invalid, Error, Result};
use crate::numerics::{khatri_rao_chain, softmax_in_place, weighted_rows, Matrix, Precision};

/// Largest dense score tensor (all `N^s` cells) evaluated.
pub const MAX_SCORE_CELLS: u128 = 1 << 24;

/// s-order attention: query rows score against Khatri-Rao products of `s - 1`
/// key embeddings, and values are the matching products of value embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderUnit {
    order: usize,
    q: Matrix,
    keys: Vec<Matrix>,
    values: Vec<Matrix>,
    precision: Precision,
}

impl HigherOrderUnit {
    pub fn new(q: Matrix, keys: Vec<Matrix>, values: Vec<Matrix>, precision: Precision) -> Result<Self> {
        let unit = Self {
            order: keys.len() + 1,
            q,
            keys,
            values,
            precision,
        };
        unit.validate()?;
        Ok(unit)
    }

    pub fn quantized(
        q: Matrix,
        keys: Vec<Matrix>,
        values: Vec<Matrix>,
        precision: Precision,
    ) -> Result<Self> {
        let f = |m: Matrix| m.map(|x| precision.quantize(x));
        Self::new(
            f(q),
            keys.into_iter().map(f).collect(),
            values.into_iter().map(f).collect(),
            precision,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(invalid("higher-order unit needs at least one key matrix"));
        }
        if self.keys.len() + 1 != self.order || self.values.len() + 1 != self.order {
            return Err(dims(format!(
                "order {} needs {} key and value matrices, got {} and {}",
                self.order,
                self.order - 1,
                self.keys.len(),
                self.values.len()
            )));
        }
        for (j, k) in self.keys.iter().enumerate() {
            if k.shape() != self.q.shape() {
                return Err(dims(format!("K{} is {:?}, Q is {:?}", j + 1, k.shape(), self.q.shape())));
            }
            check_on_grid("K", k, &self.precision)?;
        }
        let d_out = self.values[0].cols();
        for (j, v) in self.values.iter().enumerate() {
            if v.rows() != self.q.rows() || v.cols() != d_out {
                return Err(dims(format!("V{} has shape {:?}", j + 1, v.shape())));
            }
            check_on_grid("V", v, &self.precision)?;
        }
        check_on_grid("Q", &self.q, &self.precision)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn d(&self) -> usize {
        self.q.rows()
    }

    pub fn m(&self) -> usize {
        self.q.cols()
    }

    pub fn d_out(&self) -> usize {
        self.values[0].cols()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn keys(&self) -> &[Matrix] {
        &self.keys
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.d() {
            return Err(dims(format!(
                "input has {} columns, unit expects d = {}",
                x.cols(),
                self.d()
            )));
        }
        let n = x.rows() as u128;
        let cells = n
            .checked_pow(self.order as u32)
            .unwrap_or(u128::MAX);
        if cells > MAX_SCORE_CELLS {
            return Err(Error::BudgetExceeded {
                cells,
                budget: MAX_SCORE_CELLS,
            });
        }
        Ok(())
    }

    /// Score matrix `N x N^(s-1)`; column `c` encodes `(j_1, ..., j_{s-1})`
    /// with `j_1` most significant.
    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let xq = x.matmul(&self.q)?;
        let parts = self
            .keys
            .iter()
            .map(|k| x.matmul(k))
            .collect::<Result<Vec<_>>>()?;
        let kr = khatri_rao_chain(&parts)?;
        xq.matmul(&kr.transpose())
    }

    /// Khatri-Rao product of the value embeddings, `N^(s-1) x d_out`.
    pub fn value_rows(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let parts = self
            .values
            .iter()
            .map(|v| x.matmul(v))
            .collect::<Result<Vec<_>>>()?;
        khatri_rao_chain(&parts)
    }
}

fn softmax_combine(mut scores: Matrix, values: &Matrix) -> Result<Matrix> {
    for r in 0..scores.rows() {
        softmax_in_place(scores.row_mut(r), r)?;
    }
    weighted_rows(&scores, values)
}

pub fn attend_higher_order(unit: &HigherOrderUnit, x: &Matrix) -> Result<Matrix> {
    let scores = unit.scores(x)?;
    softmax_combine(scores, &unit.value_rows(x)?)
}

/// Cell-wise post-processing of graph attention scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kappa {
    /// Leaves the score untouched.
    Identity,
    /// Adds `scale` when every listed edge is present. An edge `(a, b)` names
    /// tuple positions and reads the bit `x[i_a, i_b]`.
    Pattern { edges: Vec<(usize, usize)>, scale: f64 },
}

/// Position of the bit `x[i_a, i_b]` in the canonical edge-bit tuple, which
/// lists, for each `a` in order, the bits toward every other `b` in order.
pub fn edge_bit_position(order: usize, a: usize, b: usize) -> usize {
    debug_assert!(a != b && a < order && b < order);
    a * (order - 1) + if b < a { b } else { b - 1 }
}

/// Canonical edge-bit tuple of length `s(s-1)` for one cell.
pub fn edge_bits(adj: &Matrix, tuple: &[usize]) -> Vec<bool> {
    let s = tuple.len();
    let mut bits = Vec::with_capacity(s * (s - 1));
    for a in 0..s {
        for b in 0..s {
            if a != b {
                bits.push(adj[(tuple[a], tuple[b])] != 0.0);
            }
        }
    }
    bits
}

impl Kappa {
    pub fn apply(&self, order: usize, bits: &[bool], score: f64) -> f64 {
        match self {
            Kappa::Identity => score,
            Kappa::Pattern { edges, scale } => {
                let all = edges
                    .iter()
                    .all(|&(a, b)| bits[edge_bit_position(order, a, b)]);
                if all {
                    score + scale
                } else {
                    score
                }
            }
        }
    }

    fn validate(&self, order: usize) -> Result<()> {
        if let Kappa::Pattern { edges, scale } = self {
            if !scale.is_finite() {
                return Err(invalid("kappa scale must be finite"));
            }
            for &(a, b) in edges {
                if a == b || a >= order || b >= order {
                    return Err(invalid(format!(
                        "pattern edge ({a}, {b}) invalid for order {order}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphAttentionUnit {
    base: HigherOrderUnit,
    kappa: Kappa,
}

impl GraphAttentionUnit {
    pub fn new(base: HigherOrderUnit, kappa: Kappa) -> Result<Self> {
        kappa.validate(base.order())?;
        Ok(Self { base, kappa })
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.kappa.validate(self.base.order())
    }

    pub fn base(&self) -> &HigherOrderUnit {
        &self.base
    }

    pub fn kappa(&self) -> &Kappa {
        &self.kappa
    }

    /// Scores after the cell-wise edge function.
    pub fn scores(&self, x: &Matrix, adj: &Matrix) -> Result<Matrix> {
        check_adjacency(adj, x.rows())?;
        let mut scores = self.base.scores(x)?;
        let s = self.base.order();
        let n = x.rows();
        let mut tuple = vec![0usize; s];
        for i in 0..n {
            tuple[0] = i;
            let row = scores.row_mut(i);
            for (c, cell) in row.iter_mut().enumerate() {
                let mut rest = c;
                for slot in (1..s).rev() {
                    tuple[slot] = rest % n;
                    rest /= n;
                }
                let bits = edge_bits(adj, &tuple);
                *cell = self.kappa.apply(s, &bits, *cell);
            }
        }
        Ok(scores)
    }
}

/// Rejects adjacency that is not square, not `n x n`, or not 0/1.
pub fn check_adjacency(adj: &Matrix, n: usize) -> Result<()> {
    if adj.rows() != adj.cols() {
        return Err(dims(format!("adjacency is {:?}, not square", adj.shape())));
    }
    if adj.rows() != n {
        return Err(dims(format!(
            "adjacency has {} vertices, input has {n} rows",
            adj.rows()
        )));
    }
    if let Some(bad) = adj.data().iter().find(|&&x| x != 0.0 && x != 1.0) {
        return Err(invalid(format!("adjacency entry {bad} is not 0/1")));
    }
    Ok(())
}

pub fn attend_graph(unit: &GraphAttentionUnit, x: &Matrix, adj: &Matrix) -> Result<Matrix> {
    let scores = unit.scores(x, adj)?;
    softmax_combine(scores, &unit.base().value_rows(x)?)
}
