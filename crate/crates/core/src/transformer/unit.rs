use serde::{Deserialize, Serialize};

use crate::error::{dims, invalid, Result};
use crate::numerics::{row_softmax, weighted_rows, Matrix, Precision};

/// One standard self-attention head `softmax(X Q Kᵀ Xᵀ) X V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionUnit {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    precision: Precision,
}

pub(crate) fn check_on_grid(name: &str, m: &Matrix, precision: &Precision) -> Result<()> {
    for r in 0..m.rows() {
        for (c, &x) in m.row(r).iter().enumerate() {
            if !precision.is_on_grid(x) {
                return Err(invalid(format!(
                    "{name}[{r},{c}] = {x} is not representable in {precision:?}"
                )));
            }
        }
    }
    Ok(())
}

impl AttentionUnit {
    /// Validates shapes and that every parameter already sits on the grid.
    pub fn new(q: Matrix, k: Matrix, v: Matrix, precision: Precision) -> Result<Self> {
        let unit = Self { q, k, v, precision };
        unit.validate()?;
        Ok(unit)
    }

    /// Rounds every parameter onto the grid first.
    pub fn quantized(q: Matrix, k: Matrix, v: Matrix, precision: Precision) -> Result<Self> {
        let f = |m: Matrix| m.map(|x| precision.quantize(x));
        Self::new(f(q), f(k), f(v), precision)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.shape() != self.k.shape() {
            return Err(dims(format!(
                "Q is {:?} but K is {:?}",
                self.q.shape(),
                self.k.shape()
            )));
        }
        if self.v.rows() != self.q.rows() {
            return Err(dims(format!(
                "V has {} rows, Q has {}",
                self.v.rows(),
                self.q.rows()
            )));
        }
        check_on_grid("Q", &self.q, &self.precision)?;
        check_on_grid("K", &self.k, &self.precision)?;
        check_on_grid("V", &self.v, &self.precision)
    }

    pub fn d(&self) -> usize {
        self.q.rows()
    }

    pub fn m(&self) -> usize {
        self.q.cols()
    }

    pub fn d_out(&self) -> usize {
        self.v.cols()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn k(&self) -> &Matrix {
        &self.k
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.d() {
            return Err(dims(format!(
                "input has {} columns, unit expects d = {}",
                x.cols(),
                self.d()
            )));
        }
        Ok(())
    }

    /// Raw score matrix `(XQ)(XK)ᵀ`.
    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let xq = x.matmul(&self.q)?;
        let xk = x.matmul(&self.k)?;
        xq.matmul(&xk.transpose())
    }

    /// Row-stochastic attention matrix.
    pub fn weights(&self, x: &Matrix) -> Result<Matrix> {
        row_softmax(&self.scores(x)?)
    }
}

pub fn attend(unit: &AttentionUnit, x: &Matrix) -> Result<Matrix> {
    let w = unit.weights(x)?;
    let xv = x.matmul(unit.v())?;
    weighted_rows(&w, &xv)
}
