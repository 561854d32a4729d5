use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{invalid, Result};
use crate::numerics::{FixedFormat, Matrix, Precision};
use crate::transformer::Provenance;

/// Implements [`ElementMap`] for a serde-able parameter struct whose
/// serialized form is its descriptor.
macro_rules! element_map {
    ($ty:ty, $name:expr) => {
        impl $crate::transformer::ElementMap for $ty {
            fn in_dim(&self) -> usize {
                self.in_width()
            }
            fn out_dim(&self) -> usize {
                self.out_width()
            }
            fn apply(&self, x: &[f64]) -> Vec<f64> {
                self.eval(x)
            }
            fn descriptor(&self) -> $crate::transformer::MapDescriptor {
                $crate::transformer::MapDescriptor::new(
                    $name,
                    serde_json::to_value(self).expect("map parameters serialize"),
                )
            }
        }
    };
}
pub(crate) use element_map;

pub(crate) fn angle(x: f64, m: f64) -> f64 {
    2.0 * PI * x / m
}

/// Nearest residue of a real value modulo `m`, in `0..m`.
pub(crate) fn residue(v: f64, m: u64) -> u64 {
    (v.round() as i64).rem_euclid(m as i64) as u64
}

pub(crate) fn zero_sum(m: u64, vals: &[u64]) -> bool {
    vals.iter().fold(0u64, |acc, &v| (acc + v % m) % m) == 0
}

/// Reads the 1-based position carried in an input coordinate; 0 marks `<END>`.
pub(crate) fn position(v: f64) -> usize {
    if v.is_finite() && v > 0.5 {
        v.round() as usize
    } else {
        0
    }
}

/// Fractional bits so that a rounding error of `2^-f` per coordinate moves a
/// score of size `scale` by at most `gap / 1024`.
pub(crate) fn frac_bits_for(scale: f64, gap: f64) -> u32 {
    ((scale / gap).log2().ceil().max(0.0) as u32) + 10
}

pub(crate) fn format_for(max_abs: f64, frac_bits: u32) -> Result<FixedFormat> {
    FixedFormat::covering(max_abs, frac_bits)
}

/// `1 - cos(2π/M)`, the smallest drop of `cos(2π k / M)` below 1 for `k ≢ 0`.
pub(crate) fn cosine_gap(m: f64) -> f64 {
    1.0 - angle(1.0, m).cos()
}

pub(crate) fn provenance(
    builder: &str,
    params: Value,
    seeds: Vec<u64>,
    constants: &[(&str, Value)],
) -> Provenance {
    let mut map = Map::new();
    for (k, v) in constants {
        map.insert((*k).to_string(), v.clone());
    }
    Provenance {
        builder: builder.to_string(),
        params,
        seeds,
        constants: map,
    }
}

pub(crate) fn check_match_params(n: usize, m: u64) -> Result<()> {
    if n == 0 {
        return Err(invalid("N must be at least 1"));
    }
    if m < 2 {
        return Err(invalid(format!("M must be at least 2, got {m}")));
    }
    Ok(())
}

/// Matrix with the given `(row, col, value)` entries, zero elsewhere.
pub(crate) fn sparse(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Matrix {
    let mut out = Matrix::zeros(rows, cols);
    for &(r, c, v) in entries {
        out[(r, c)] = v;
    }
    out
}

/// Bits read off a one-column task output.
pub fn output_bits(out: &Matrix) -> Vec<bool> {
    (0..out.rows()).map(|r| out[(r, 0)] > 0.5).collect()
}

/// `[pos, x] -> (cos θ, sin θ, 1, 0)` with `θ = 2π x / M`, and `(0, 0, 0, 1)`
/// for `<END>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrigFeatures {
    #[serde(rename = "M")]
    pub m: u64,
}

impl TrigFeatures {
    fn in_width(&self) -> usize {
        2
    }
    fn out_width(&self) -> usize {
        4
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        if position(x[0]) == 0 {
            return vec![0.0, 0.0, 0.0, 1.0];
        }
        let t = angle(x[1], self.m as f64);
        vec![t.cos(), t.sin(), 1.0, 0.0]
    }
}
element_map!(TrigFeatures, "trig_features");

/// Two-piece ramp: 0 at or below `lo`, 1 at or above `hi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Threshold {
    pub lo: f64,
    pub hi: f64,
}

impl Threshold {
    /// Thresholds separating "some match cell" (`z >= 1/3`) from "only the
    /// blank cell" (`z <= 1/6`).
    pub fn match_default() -> Self {
        Self {
            lo: 1.0 / 6.0,
            hi: 1.0 / 3.0,
        }
    }

    fn in_width(&self) -> usize {
        1
    }
    fn out_width(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        vec![((x[0] - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)]
    }
}
element_map!(Threshold, "threshold");

/// Fixed-point precision shared by the integer-valued builders.
pub(crate) fn fixed(fmt: FixedFormat) -> Precision {
    Precision::fixed(fmt)
}
