//! "Approximate identity" head: emulates a residual connection with attention
//! alone by giving every element a nearly orthogonal random code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::unit::AttentionUnit;
use crate::error::Result;
use crate::numerics::{norm2, Matrix, Precision};

/// `n` Gaussian codes of width `code_dim`, each scaled to unit norm.
pub fn gaussian_codes(n: usize, code_dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(n, code_dim);
    for r in 0..n {
        let row = m.row_mut(r);
        for x in row.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let len = norm2(row);
        for x in row.iter_mut() {
            *x /= len;
        }
    }
    m
}

/// Head over inputs `[x ; code]` (widths `d` and `code_dim`) whose scores are
/// `sharpness * <code_i, code_j>` and whose values copy `x`.
pub fn identity_head(d: usize, code_dim: usize, sharpness: f64) -> Result<AttentionUnit> {
    let width = d + code_dim;
    let q = Matrix::from_fn(width, code_dim, |r, c| {
        if r == d + c {
            sharpness
        } else {
            0.0
        }
    });
    let k = Matrix::from_fn(width, code_dim, |r, c| if r == d + c { 1.0 } else { 0.0 });
    let v = Matrix::from_fn(width, d, |r, c| if r == c { 1.0 } else { 0.0 });
    AttentionUnit::new(q, k, v, Precision::Carrier)
}

/// Appends codes to `x` column-wise.
pub fn with_codes(x: &Matrix, codes: &Matrix) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols() + codes.cols(), |r, c| {
        if c < x.cols() {
            x[(r, c)]
        } else {
            codes[(r, c - x.cols())]
        }
    })
}
