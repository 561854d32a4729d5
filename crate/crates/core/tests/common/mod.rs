//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use attnverify::constructions::PairSchedule;
use attnverify::numerics::{FixedFormat, Matrix, Precision};
use attnverify::transformer::{attend, attend_higher_order, AttentionUnit, HigherOrderUnit};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct AttnCase {
    pub x: Matrix,
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub perm: Vec<usize>,
}

fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-scale..scale, rows * cols)
        .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
}

pub fn attn_case() -> impl Strategy<Value = AttnCase> {
    (1usize..=7, 1usize..=4, 1usize..=3, 1usize..=3).prop_flat_map(|(n, d, m, d_out)| {
        (
            matrix(n, d, 3.0),
            matrix(d, m, 2.0),
            matrix(d, m, 2.0),
            matrix(d, d_out, 2.0),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(|(x, q, k, v, perm)| AttnCase { x, q, k, v, perm })
    })
}

impl AttnCase {
    pub fn unit(&self) -> AttentionUnit {
        AttentionUnit::new(self.q.clone(), self.k.clone(), self.v.clone(), Precision::Carrier).unwrap()
    }
}

/// Permuting the input rows permutes the output rows the same way.
pub fn check_equivariance(c: &AttnCase) -> Result<(), String> {
    let u = c.unit();
    let out = attend(&u, &c.x).map_err(|e| e.to_string())?;
    let permuted = attend(&u, &c.x.permute_rows(&c.perm)).map_err(|e| e.to_string())?;
    let diff = permuted.max_abs_diff(&out.permute_rows(&c.perm));
    if diff > 1e-12 {
        return Err(format!("permuted output differs by {diff:e}"));
    }
    Ok(())
}

/// Weights are a probability vector per row and every output coordinate
/// lies between the smallest and largest value row.
pub fn check_convex(c: &AttnCase) -> Result<(), String> {
    let u = c.unit();
    let w = u.weights(&c.x).map_err(|e| e.to_string())?;
    for r in 0..w.rows() {
        let row = w.row(r);
        if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(format!("row {r} has a weight outside [0, 1]"));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(format!("row {r} sums to {s}"));
        }
    }
    let xv = c.x.matmul(&c.v).unwrap();
    let out = attend(&u, &c.x).map_err(|e| e.to_string())?;
    for col in 0..xv.cols() {
        let vals = xv.column(col);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for r in 0..out.rows() {
            let o = out[(r, col)];
            if o < lo - 1e-12 || o > hi + 1e-12 {
                return Err(format!("output ({r}, {col}) = {o} outside [{lo}, {hi}]"));
            }
        }
    }
    Ok(())
}

/// Order-two tensor attention is ordinary attention.
pub fn check_order_two(c: &AttnCase) -> Result<(), String> {
    let h = HigherOrderUnit::new(c.q.clone(), vec![c.k.clone()], vec![c.v.clone()], Precision::Carrier)
        .map_err(|e| e.to_string())?;
    let a = attend_higher_order(&h, &c.x).map_err(|e| e.to_string())?;
    let b = attend(&c.unit(), &c.x).map_err(|e| e.to_string())?;
    let diff = a.max_abs_diff(&b);
    if diff > 1e-12 {
        return Err(format!("order-two output differs by {diff:e}"));
    }
    Ok(())
}

pub fn quant_case() -> impl Strategy<Value = (u32, u32, f64)> {
    (2u32..=40).prop_flat_map(|p| (Just(p), 0..p, -1e4f64..1e4))
}

/// In range: within half a step, on the grid, idempotent. Out of range:
/// clamped to the largest grid point.
pub fn check_quantization(&(p, f, x): &(u32, u32, f64)) -> Result<(), String> {
    let fmt = FixedFormat::new(p, f).map_err(|e| e.to_string())?;
    let q = fmt.quantize_checked(x);
    if !fmt.is_on_grid(q.value) {
        return Err(format!("{} is off the grid", q.value));
    }
    if fmt.quantize(q.value) != q.value {
        return Err("quantization is not idempotent".into());
    }
    let max = fmt.max_value();
    if x.abs() <= max {
        if (q.value - x).abs() > fmt.step() / 2.0 + max * f64::EPSILON {
            return Err(format!("|{} - {x}| exceeds half a step", q.value));
        }
    } else if !q.saturated || q.value != max.copysign(x) {
        return Err(format!("{x} beyond ±{max} should saturate"));
    }
    Ok(())
}

pub fn schedule_case() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=40, 4usize..=16)
}

/// Every pair lands in exactly one layer, layers hold at most `ℓ` pairs
/// with distinct endpoints, and the depth is at least the counting bound.
pub fn check_schedule(&(n, m): &(usize, usize)) -> Result<(), String> {
    let s = PairSchedule::new(n, m).map_err(|e| e.to_string())?;
    let ell = m / 2 - 1;
    if s.ell != ell {
        return Err(format!("ℓ = {}, expected {ell}", s.ell));
    }
    let mut count = vec![0usize; n * n];
    for layer in &s.layers {
        if layer.len() > ell {
            return Err(format!("layer of {} pairs", layer.len()));
        }
        let mut used = vec![false; n + 1];
        for &(a, b) in layer {
            if a >= b || b > n || used[a] || used[b] {
                return Err(format!("bad pair ({a}, {b}) in layer {layer:?}"));
            }
            used[a] = true;
            used[b] = true;
            count[(a - 1) * n + (b - 1)] += 1;
        }
    }
    for a in 1..=n {
        for b in a + 1..=n {
            if count[(a - 1) * n + (b - 1)] != 1 {
                return Err(format!("pair ({a}, {b}) scheduled {} times", count[(a - 1) * n + (b - 1)]));
            }
        }
    }
    let pairs = n * n.saturating_sub(1) / 2;
    if s.depth() < pairs.div_ceil(ell) {
        return Err(format!("depth {} below ⌈{pairs}/{ell}⌉", s.depth()));
    }
    Ok(())
}
