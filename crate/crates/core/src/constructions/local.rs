use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::{check_match_params, element_map, position, provenance, residue, sparse, zero_sum};
use super::qsa::{certificate_frac_bits, qsa_alpha, selector_unit, CertificateTable};
use crate::certificates::{bank_rows, sample_key_bank_with, DEFAULT_C0};
use crate::error::{invalid, Result};
use crate::numerics::{FixedFormat, Precision};
use crate::transformer::{Layer, MlpLayer, MultiHeadLayer, TransformerModel};

/// 1-based window `[max(1, i - K), min(N, i + K)]`.
pub fn local_window(n: usize, k: usize, i: usize) -> Vec<usize> {
    (i.saturating_sub(k).max(1)..=(i + k).min(n)).collect()
}

/// `[pos, x] -> [pos, x, z; α w̃_W; u_pos]` where `z` holds `x / M` in slot
/// `pos mod (2K+1)` and `W` is the clamped window around `pos`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFeatures {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: u64,
    pub certificates: CertificateTable,
}

impl LocalFeatures {
    fn slots(&self) -> usize {
        2 * self.k + 1
    }
    fn in_width(&self) -> usize {
        2
    }
    fn out_width(&self) -> usize {
        2 + self.slots() + 2 * self.certificates.m_prime
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]);
        let n = self.certificates.n;
        let mut out = vec![0.0; self.out_width()];
        if pos == 0 || pos > n {
            return out;
        }
        out[0] = pos as f64;
        out[1] = x[1];
        out[2 + pos % self.slots()] = x[1] / self.m as f64;
        let base = 2 + self.slots();
        let w = self
            .certificates
            .scaled_certificate(&local_window(n, self.k, pos));
        out[base..base + w.len()].copy_from_slice(&w);
        let key = self.certificates.key(pos);
        out[base + w.len()..].copy_from_slice(key);
        out
    }

    pub fn check(&self) -> Result<()> {
        self.certificates.check()
    }
}
element_map!(LocalFeatures, "local_features");

/// `[pos, x, average] -> bit`: rescales each window slot back to an
/// integer residue and searches the window for a cancelling pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalDecode {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: u64,
}

impl LocalDecode {
    fn slots(&self) -> usize {
        2 * self.k + 1
    }
    fn in_width(&self) -> usize {
        2 + self.slots()
    }
    fn out_width(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]);
        if pos == 0 || pos > self.n {
            return vec![0.0];
        }
        let window = local_window(self.n, self.k, pos);
        let scale = window.len() as f64 * self.m as f64;
        let vals: Vec<u64> = window
            .iter()
            .map(|&j| residue(x[2 + j % self.slots()] * scale, self.m))
            .collect();
        let xi = residue(x[1], self.m);
        let hit = vals
            .iter()
            .any(|&a| vals.iter().any(|&b| zero_sum(self.m, &[xi, a, b])));
        vec![if hit { 1.0 } else { 0.0 }]
    }
}
element_map!(LocalDecode, "local_decode");

/// Windowed triple detector built on the sparse-averaging head with
/// `q = 2K + 1`: element `i` averages `x_j / M` over its window, one slot
/// per residue of `j mod (2K+1)`, then decodes and checks every pair.
pub fn build_match3_local(n: usize, m: u64, k: usize, seed: u64) -> Result<TransformerModel> {
    check_match_params(n, m)?;
    if k > n {
        return Err(invalid(format!("window radius K = {k} exceeds N = {n}")));
    }
    let slots = 2 * k + 1;
    let q = slots.min(n);
    // each recovered slot must land within 1/2 of its integer after
    // scaling by |W| M
    let epsilon = 1.0 / (4.0 * slots as f64 * m as f64);
    let alpha = qsa_alpha(n, epsilon);
    let m_prime = bank_rows(n, q, DEFAULT_C0);
    let frac = certificate_frac_bits(alpha, m_prime, epsilon);
    let reach = (n as f64 + 1.0)
        .max(m as f64)
        .max(2.0 * alpha * (q as f64).sqrt());
    let fmt = FixedFormat::covering(reach, frac)?;
    let p = Precision::fixed(fmt);
    let windows: Vec<Vec<usize>> = (1..=n).map(|i| local_window(n, k, i)).collect();
    let bank = sample_key_bank_with(n, q, seed, DEFAULT_C0, Some(&windows))?;
    let effective_seed = bank.seed().expect("drawn bank has a seed");
    let features = LocalFeatures {
        k,
        m,
        certificates: CertificateTable::new(n, q, m_prime, effective_seed, alpha, fmt),
    };
    let width = features.out_width();
    let unit = selector_unit(slots, m_prime, 2, 2, width, 2 + slots, p)?;
    let carry = sparse(width, 2 + slots, &[(0, 0, 1.0), (1, 1, 1.0)]);
    let head = crate::transformer::Head::Standard(unit);
    let layers = vec![
        Layer::Mlp(MlpLayer::new(Arc::new(features), p)),
        Layer::Attention(MultiHeadLayer::new(vec![head], Some(carry))?),
        Layer::Mlp(MlpLayer::new(Arc::new(LocalDecode { n, k, m }), p)),
    ];
    TransformerModel::new(
        layers,
        false,
        provenance(
            "match3_local",
            json!({"N": n, "M": m, "K": k}),
            vec![seed, effective_seed],
            &[
                ("epsilon", json!(epsilon)),
                ("alpha", json!(alpha)),
                ("m_prime", json!(m_prime)),
                ("p", json!(fmt.total_bits())),
                ("f", json!(fmt.frac_bits())),
            ],
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::output_bits;
    use crate::tasks::{match_oracle, MatchVariant, SequenceInstance};
    use crate::transformer::run_transformer;

    #[test]
    fn windows_clamp() {
        assert_eq!(local_window(10, 2, 1), vec![1, 2, 3]);
        assert_eq!(local_window(10, 2, 10), vec![8, 9, 10]);
        assert_eq!(local_window(10, 2, 5).len(), 5);
    }

    #[test]
    fn spread_triple_is_missed() {
        // 1 + 2 + 8 = 11, but positions 1 and 8 are too far apart for K = 1
        let m = 11;
        let x = vec![1, 3, 3, 3, 3, 3, 2, 8];
        let inst = SequenceInstance::new(m, x).unwrap();
        let model = build_match3_local(8, m, 1, 0).unwrap();
        let out = output_bits(&run_transformer(&model, &inst.to_matrix()).unwrap());
        assert!(!out[0]);
        assert!(match_oracle(&inst, MatchVariant::Match3).unwrap()[0]);
        assert_eq!(out, match_oracle(&inst, MatchVariant::Match3Local { k: 1 }).unwrap());
    }

    #[test]
    fn full_window_is_global() {
        let m = 13;
        let model = build_match3_local(6, m, 6, 1).unwrap();
        for seed in 0..5 {
            let inst = crate::tasks::random_sequence(6, m, seed).unwrap();
            let out = output_bits(&run_transformer(&model, &inst.to_matrix()).unwrap());
            assert_eq!(out, match_oracle(&inst, MatchVariant::Match3).unwrap());
        }
    }
}
