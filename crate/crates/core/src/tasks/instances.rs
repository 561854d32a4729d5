use serde::{Deserialize, Serialize};

use crate::error::{dims, invalid, Result};
use crate::numerics::{norm2, Matrix};

/// Sparse-averaging instance. Index sets are 1-based.
///
/// Rows with `active[i] == false` stand for an empty index set; they carry
/// `q` copies of their own index and oracles ignore them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsaInstance {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: usize,
    pub d_prime: usize,
    pub z: Vec<Vec<f64>>,
    pub y: Vec<Vec<usize>>,
    pub active: Vec<bool>,
}

impl QsaInstance {
    pub fn new(z: Vec<Vec<f64>>, y: Vec<Vec<usize>>, q: usize) -> Result<Self> {
        let n = z.len();
        let d_prime = z.first().map_or(0, Vec::len);
        let inst = Self {
            n,
            q,
            d_prime,
            z,
            y,
            active: vec![true; n],
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.len() != self.n || self.y.len() != self.n || self.active.len() != self.n {
            return Err(dims("qSA instance arrays must all have N entries"));
        }
        if self.q == 0 || self.q > self.n {
            return Err(invalid(format!("need 1 <= q <= N, got q = {}, N = {}", self.q, self.n)));
        }
        for i in 0..self.n {
            if self.z[i].len() != self.d_prime {
                return Err(dims(format!("z_{} has the wrong width", i + 1)));
            }
            if norm2(&self.z[i]) > 1.0 + 1e-12 {
                return Err(invalid(format!("z_{} lies outside the unit ball", i + 1)));
            }
            let yi = &self.y[i];
            if yi.len() != self.q {
                return Err(invalid(format!("y_{} has {} members, q = {}", i + 1, yi.len(), self.q)));
            }
            if self.active[i] {
                for (a, &j) in yi.iter().enumerate() {
                    if j == 0 || j > self.n {
                        return Err(invalid(format!("y_{} names index {j} outside [N]", i + 1)));
                    }
                    if yi[..a].contains(&j) {
                        return Err(invalid(format!("y_{} repeats index {j}", i + 1)));
                    }
                }
            } else if yi.iter().any(|&j| j != i + 1) {
                return Err(invalid(format!(
                    "inactive row {} must carry copies of its own index",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Rows `[z_i, y_i, i]`, width `d' + q + 1`.
    pub fn to_matrix(&self) -> Matrix {
        let w = self.d_prime + self.q + 1;
        Matrix::from_fn(self.n, w, |r, c| {
            if c < self.d_prime {
                self.z[r][c]
            } else if c < self.d_prime + self.q {
                self.y[r][c - self.d_prime] as f64
            } else {
                (r + 1) as f64
            }
        })
    }

    /// Element `k` of the result is element `perm[k]` of `self`, with index
    /// sets renamed to follow their elements.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; self.n];
        for (k, &src) in perm.iter().enumerate() {
            inverse[src] = k;
        }
        let rename = |j: usize| inverse[j - 1] + 1;
        Self {
            n: self.n,
            q: self.q,
            d_prime: self.d_prime,
            z: perm.iter().map(|&s| self.z[s].clone()).collect(),
            y: perm
                .iter()
                .map(|&s| self.y[s].iter().map(|&j| rename(j)).collect())
                .collect(),
            active: perm.iter().map(|&s| self.active[s]).collect(),
        }
    }
}

/// Integer sequence over `[M] = {1, ..., M}`; `M` plays the role of zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceInstance {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: u64,
    pub x: Vec<u64>,
}

impl SequenceInstance {
    pub fn new(m: u64, x: Vec<u64>) -> Result<Self> {
        let inst = Self { n: x.len(), m, x };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(invalid(format!("modulus must be at least 2, got {}", self.m)));
        }
        if self.x.len() != self.n {
            return Err(dims("sequence length disagrees with N"));
        }
        if let Some((i, v)) = self.x.iter().enumerate().find(|(_, &v)| v == 0 || v > self.m) {
            return Err(invalid(format!("x_{} = {v} is outside [1, {}]", i + 1, self.m)));
        }
        Ok(())
    }

    /// Rows `[i, x_i]` with 1-based positions.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, 2, |r, c| if c == 0 { (r + 1) as f64 } else { self.x[r] as f64 })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInstance {
    #[serde(rename = "N")]
    pub n: usize,
    pub adj: Vec<Vec<u8>>,
    pub symmetric: bool,
}

impl GraphInstance {
    pub fn new(adj: Vec<Vec<u8>>, symmetric: bool) -> Result<Self> {
        let inst = Self {
            n: adj.len(),
            adj,
            symmetric,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn empty(n: usize, symmetric: bool) -> Self {
        Self {
            n,
            adj: vec![vec![0; n]; n],
            symmetric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.adj.len() != self.n || self.adj.iter().any(|r| r.len() != self.n) {
            return Err(dims("adjacency must be N x N"));
        }
        if self.adj.iter().flatten().any(|&b| b > 1) {
            return Err(invalid("adjacency entries must be 0 or 1"));
        }
        if self.symmetric && !self.is_symmetric() {
            return Err(invalid("graph is flagged symmetric but X != Xᵀ"));
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.adj[i][j] == self.adj[j][i]))
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adj[i][j] == 1
    }

    pub fn set_edge(&mut self, i: usize, j: usize, bit: bool) {
        self.adj[i][j] = u8::from(bit);
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |r, c| f64::from(self.adj[r][c]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjInstance {
    pub a: Vec<bool>,
    pub b: Vec<bool>,
}

impl DisjInstance {
    pub fn new(a: Vec<bool>, b: Vec<bool>) -> Result<Self> {
        let d = Self { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(dims(format!(
                "DISJ inputs have lengths {} and {}",
                self.a.len(),
                self.b.len()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// `max_i a_i b_i`: true when the sets intersect.
    pub fn disj(&self) -> bool {
        self.a.iter().zip(&self.b).any(|(&x, &y)| x && y)
    }

    /// All `4^n` pairs in lexicographic order of the packed bits.
    pub fn all_pairs(n: usize) -> impl Iterator<Item = DisjInstance> {
        assert!(n <= 16, "exhaustive DISJ enumeration limited to n <= 16");
        (0u64..(1u64 << (2 * n))).map(move |code| {
            let bit = |k: usize| (code >> k) & 1 == 1;
            DisjInstance {
                a: (0..n).map(bit).collect(),
                b: (0..n).map(|k| bit(n + k)).collect(),
            }
        })
    }
}
