//! Dense linear algebra, softmax, Khatri-Rao products and fixed-point
//! quantization shared by every other module.

mod exact;
mod fixed;
mod linalg;
mod matrix;

pub use exact::{exact_sum, ExactSum};
pub use fixed::{quantize, FixedFormat, Precision, Quantized, MAX_TOTAL_BITS};
pub use linalg::{cholesky_solve, dot, norm2};
pub use matrix::{Matrix, Tensor3};

use crate::error::{dims, Error, Result};

/// Softmax of one row in place, with max-subtraction and a correctly rounded
/// normalizer.
pub fn softmax_in_place(row: &mut [f64], row_index: usize) -> Result<()> {
    if row.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: row_index });
    }
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for x in row.iter_mut() {
        *x = (*x - max).exp();
    }
    let total = exact_sum(row.iter().copied());
    for x in row.iter_mut() {
        *x /= total;
    }
    Ok(())
}

/// `weights * values` with every output entry a correctly rounded sum of
/// the products `w[i, j] * values[j, c]`.
pub fn weighted_rows(weights: &Matrix, values: &Matrix) -> Result<Matrix> {
    if weights.cols() != values.rows() {
        return Err(dims(format!(
            "{} weights per row against {} value rows",
            weights.cols(),
            values.rows()
        )));
    }
    let mut out = Matrix::zeros(weights.rows(), values.cols());
    for r in 0..weights.rows() {
        let w = weights.row(r);
        for c in 0..values.cols() {
            out[(r, c)] = exact_sum(w.iter().enumerate().map(|(j, &wj)| wj * values[(j, c)]));
        }
    }
    Ok(out)
}

pub fn row_softmax(a: &Matrix) -> Result<Matrix> {
    let mut out = a.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r), r)?;
    }
    Ok(out)
}

/// Column-wise Kronecker product: row `i1 * n2 + i2` is `a[i1] .* b[i2]`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(dims(format!(
            "khatri_rao needs equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        )));
    }
    let m = a.cols();
    let mut out = Matrix::zeros(a.rows() * b.rows(), m);
    for i1 in 0..a.rows() {
        let ra = a.row(i1);
        for i2 in 0..b.rows() {
            let rb = b.row(i2);
            let dst = out.row_mut(i1 * b.rows() + i2);
            for c in 0..m {
                dst[c] = ra[c] * rb[c];
            }
        }
    }
    Ok(out)
}

/// Folds `khatri_rao` over a non-empty list left to right.
pub fn khatri_rao_chain(parts: &[Matrix]) -> Result<Matrix> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| dims("khatri_rao_chain needs at least one factor"))?;
    let mut acc = first.clone();
    for p in rest {
        acc = khatri_rao(&acc, p)?;
    }
    Ok(acc)
}
