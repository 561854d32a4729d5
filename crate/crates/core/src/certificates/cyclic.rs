use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Smallest off-face margin accepted before the points are deemed too close.
pub const MIN_FACE_GAP: f64 = 1.0 / (1u64 << 20) as f64;

/// Points `θ(t_i) = (t_i, t_i^2, ..., t_i^{2q})` on the moment curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicPolytope {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: usize,
    /// `t_i = i * spacing`.
    pub spacing: f64,
}

impl CyclicPolytope {
    pub fn new(n: usize, q: usize, spacing: f64) -> Result<Self> {
        if n == 0 || q == 0 || q > n {
            return Err(invalid(format!("need 1 <= q <= N, got q = {q}, N = {n}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(invalid(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { n, q, spacing })
    }

    /// Default spacing `1/N`, keeping every `t_i` in `(0, 1]`.
    pub fn standard(n: usize, q: usize) -> Result<Self> {
        Self::new(n, q, 1.0 / n as f64)
    }

    pub fn dim(&self) -> usize {
        2 * self.q
    }

    /// `t_i` for 1-based `i`.
    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub fn theta(&self, i: usize) -> Vec<f64> {
        moment(self.t(i), self.dim())
    }
}

fn moment(t: f64, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    let mut p = 1.0;
    for _ in 0..dim {
        p *= t;
        out.push(p);
    }
    out
}

/// Rows `θ(t_1), ..., θ(t_N)`.
pub fn cyclic_keys(n: usize, q: usize, spacing: f64) -> Result<Vec<Vec<f64>>> {
    let poly = CyclicPolytope::new(n, q, spacing)?;
    Ok((1..=n).map(|i| poly.theta(i)).collect())
}

/// Affine functional `w·θ + b` equal to 1 on the face points of `y` and at
/// most `1 - gap` on every other point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceHyperplane {
    pub y: Vec<usize>,
    pub w: Vec<f64>,
    pub b: f64,
    pub gap: f64,
}

impl FaceHyperplane {
    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.b + crate::numerics::dot(&self.w, theta)
    }
}

/// Ascending coefficients of `Π_{j ∈ y} (t - t_j)^2`.
fn face_polynomial(poly: &CyclicPolytope, y: &[usize]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &j in y {
        let tj = poly.t(j);
        let factor = [tj * tj, -2.0 * tj, 1.0];
        let mut next = vec![0.0; c.len() + 2];
        for (a, &ca) in c.iter().enumerate() {
            for (b, &fb) in factor.iter().enumerate() {
                next[a + b] += ca * fb;
            }
        }
        c = next;
    }
    c.resize(2 * poly.q + 1, 0.0);
    c
}

/// Writes `1 - P(t)` with `P(t) = Π_{j ∈ y}(t - t_j)^2` as `w·θ(t) + b`.
///
/// `P` vanishes on `y` and is positive elsewhere, so the smallest off-face
/// value of `P` is the gap.
pub fn face_hyperplane(poly: &CyclicPolytope, y: &[usize]) -> Result<FaceHyperplane> {
    if y.is_empty() || y.len() > poly.q {
        return Err(invalid(format!("face size {} outside [1, {}]", y.len(), poly.q)));
    }
    for (a, &j) in y.iter().enumerate() {
        if j == 0 || j > poly.n || y[..a].contains(&j) {
            return Err(invalid(format!("bad face index {j}")));
        }
    }
    let c = face_polynomial(poly, y);
    let w: Vec<f64> = c[1..].iter().map(|v| -v).collect();
    let b = 1.0 - c[0];
    let gap = (1..=poly.n)
        .filter(|i| !y.contains(i))
        .map(|i| y.iter().map(|&j| (poly.t(i) - poly.t(j)).powi(2)).product::<f64>())
        .fold(f64::INFINITY, f64::min);
    if gap.is_finite() && gap < MIN_FACE_GAP {
        return Err(Error::GapTooSmall {
            gap,
            threshold: MIN_FACE_GAP,
        });
    }
    // a face covering every point has no off-face points
    let gap = if gap.is_finite() { gap } else { 1.0 };
    Ok(FaceHyperplane {
        y: y.to_vec(),
        w,
        b,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_separates() {
        let poly = CyclicPolytope::standard(6, 2).unwrap();
        let h = face_hyperplane(&poly, &[2, 5]).unwrap();
        for i in 1..=6 {
            let v = h.eval(&poly.theta(i));
            if i == 2 || i == 5 {
                assert!((v - 1.0).abs() < 1e-9);
            } else {
                assert!(v <= 1.0 - h.gap + 1e-12);
            }
        }
        let direct = (1.0f64 / 6.0).powi(2) * (2.0f64 / 6.0).powi(2);
        assert!((h.gap - direct).abs() < 1e-15);
    }

    #[test]
    fn q_one_is_a_single_vertex() {
        let poly = CyclicPolytope::standard(4, 1).unwrap();
        let h = face_hyperplane(&poly, &[3]).unwrap();
        let best = (1..=4)
            .max_by(|&a, &b| h.eval(&poly.theta(a)).total_cmp(&h.eval(&poly.theta(b))))
            .unwrap();
        assert_eq!(best, 3);
    }

    #[test]
    fn fine_spacing_is_rejected() {
        let poly = CyclicPolytope::new(64, 3, 1e-3).unwrap();
        assert!(matches!(
            face_hyperplane(&poly, &[10, 11, 12]),
            Err(Error::GapTooSmall { .. })
        ));
    }

    #[test]
    fn keys_follow_the_moment_curve() {
        let k = cyclic_keys(3, 1, 0.5).unwrap();
        assert_eq!(k[2], vec![1.5, 2.25]);
    }
}
