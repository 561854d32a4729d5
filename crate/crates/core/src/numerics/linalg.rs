use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `g x = b` for symmetric positive definite `g`.
///
/// Fails with a certificate error when a pivot is not safely positive, which
/// is how degenerate key banks surface.
pub fn cholesky_solve(g: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = g.rows();
    if g.cols() != n || b.len() != n {
        return Err(crate::error::dims(format!(
            "cholesky_solve on {:?} with rhs of length {}",
            g.shape(),
            b.len()
        )));
    }
    let scale = (0..n).map(|i| g[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 1e-12 * scale {
                    return Err(Error::CertificateFailure(format!(
                        "Gram matrix is singular or indefinite (pivot {s:e} at {i})"
                    )));
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let g = Matrix::from_rows(&[[4.0, 1.0], [1.0, 3.0]]).unwrap();
        let x = cholesky_solve(&g, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let g = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky_solve(&g, &[1.0, 1.0]),
            Err(Error::CertificateFailure(_))
        ));
    }
}
