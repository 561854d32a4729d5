//! Signed fixed-point formats on a double-precision carrier.
//!
//! A format with `total_bits = p` and `frac_bits = f` spends one bit on the
//! sign, `p - f - 1` bits on the integer part and `f` bits on the fraction,
//! so the representable grid is `{k * 2^-f : |k| <= 2^(p-1) - 1}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Widest format whose whole grid is exactly representable in an `f64`.
pub const MAX_TOTAL_BITS: u32 = 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFormat", into = "RawFormat")]
pub struct FixedFormat {
    total_bits: u32,
    frac_bits: u32,
}

#[derive(Serialize, Deserialize)]
struct RawFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl TryFrom<RawFormat> for FixedFormat {
    type Error = crate::Error;
    fn try_from(raw: RawFormat) -> Result<Self> {
        FixedFormat::new(raw.total_bits, raw.frac_bits)
    }
}

impl From<FixedFormat> for RawFormat {
    fn from(f: FixedFormat) -> Self {
        RawFormat {
            total_bits: f.total_bits,
            frac_bits: f.frac_bits,
        }
    }
}

/// Result of quantizing one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub value: f64,
    pub saturated: bool,
}

impl FixedFormat {
    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if total_bits < 2 {
            return Err(invalid(format!("fixed format needs p >= 2, got {total_bits}")));
        }
        if frac_bits >= total_bits {
            return Err(invalid(format!(
                "fixed format needs f < p, got p = {total_bits}, f = {frac_bits}"
            )));
        }
        if total_bits > MAX_TOTAL_BITS {
            return Err(invalid(format!(
                "p = {total_bits} exceeds the {MAX_TOTAL_BITS}-bit carrier mantissa"
            )));
        }
        Ok(Self {
            total_bits,
            frac_bits,
        })
    }

    /// Smallest format with `frac_bits` fractional bits whose range covers `max_abs`.
    pub fn covering(max_abs: f64, frac_bits: u32) -> Result<Self> {
        if !max_abs.is_finite() || max_abs < 0.0 {
            return Err(invalid(format!("cannot cover range {max_abs}")));
        }
        let mut int_bits = 0u32;
        // need 2^int_bits - 2^-f >= max_abs
        while (2f64).powi(int_bits as i32) - (2f64).powi(-(frac_bits as i32)) < max_abs {
            int_bits += 1;
            if int_bits > 64 {
                return Err(invalid(format!("range {max_abs} too large")));
            }
        }
        Self::new(1 + int_bits + frac_bits, frac_bits)
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Grid spacing `2^-f`.
    pub fn step(&self) -> f64 {
        (2f64).powi(-(self.frac_bits as i32))
    }

    /// Largest grid point `2^(p-f-1) - 2^-f`.
    pub fn max_value(&self) -> f64 {
        (2f64).powi((self.total_bits - self.frac_bits - 1) as i32) - self.step()
    }

    pub fn quantize_checked(&self, x: f64) -> Quantized {
        let max = self.max_value();
        if x.is_nan() {
            return Quantized {
                value: 0.0,
                saturated: true,
            };
        }
        if x > max {
            return Quantized {
                value: max,
                saturated: true,
            };
        }
        if x < -max {
            return Quantized {
                value: -max,
                saturated: true,
            };
        }
        let scale = (2f64).powi(self.frac_bits as i32);
        let k = (x * scale).round_ties_even();
        let value = k / scale;
        // rounding up at the edge of the range can step one past the grid
        if value.abs() > max {
            return Quantized {
                value: max.copysign(value),
                saturated: true,
            };
        }
        Quantized {
            value: if value == 0.0 { 0.0 } else { value },
            saturated: false,
        }
    }

    pub fn quantize(&self, x: f64) -> f64 {
        self.quantize_checked(x).value
    }

    pub fn is_on_grid(&self, x: f64) -> bool {
        x.is_finite() && self.quantize(x) == x
    }
}

/// Arithmetic regime for parameters and MLP input/output.
///
/// `Carrier` models real arithmetic with the plain double carrier and is used by
/// the infinite-precision constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Precision {
    Fixed { format: FixedFormat },
    Carrier,
}

impl Precision {
    pub fn fixed(format: FixedFormat) -> Self {
        Precision::Fixed { format }
    }

    pub fn quantize(&self, x: f64) -> f64 {
        match self {
            Precision::Fixed { format } => format.quantize(x),
            Precision::Carrier => x,
        }
    }

    pub fn is_on_grid(&self, x: f64) -> bool {
        match self {
            Precision::Fixed { format } => format.is_on_grid(x),
            Precision::Carrier => x.is_finite(),
        }
    }

    /// Bits per transmitted number; the carrier counts as a 64-bit word.
    pub fn bits(&self) -> u32 {
        match self {
            Precision::Fixed { format } => format.total_bits(),
            Precision::Carrier => 64,
        }
    }
}

pub fn quantize(x: f64, fmt: FixedFormat) -> f64 {
    fmt.quantize(x)
}
