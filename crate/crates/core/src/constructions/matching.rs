use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::{
    angle, check_match_params, cosine_gap, element_map, fixed, format_for, frac_bits_for,
    position, provenance, residue, sparse, Threshold, TrigFeatures,
};
use crate::error::{invalid, Result};
use crate::numerics::{FixedFormat, Matrix, Precision};
use crate::tasks::{check_match3_restricted, SequenceInstance};
use crate::transformer::{
    run_transformer, AttentionUnit, Head, HigherOrderUnit, Layer, MlpLayer, MultiHeadLayer,
    TransformerModel,
};

/// Score scale for the pair and triple detectors, `M^2 ln(6N)`.
pub fn match_scale(n: usize, m: u64) -> f64 {
    (m as f64).powi(2) * (6.0 * n as f64).ln()
}

/// Score scale for the positional shift, `(N+1)^2 ln(6N)`.
pub fn shift_scale(n: usize) -> f64 {
    ((n + 1) as f64).powi(2) * (6.0 * n as f64).ln()
}

fn match_format(n: usize, m: u64, c: f64) -> Result<FixedFormat> {
    let f = frac_bits_for(c, c * cosine_gap(m as f64));
    format_for(c.max(n as f64 + 1.0).max(m as f64), f)
}

fn mlp(map: impl crate::transformer::ElementMap + 'static, p: Precision) -> Layer {
    Layer::Mlp(MlpLayer::new(Arc::new(map), p))
}

/// Match2 head on the `(cos, sin, 1, end)` features: query `c (cos, sin, 1)`,
/// key `(cos, -sin, 0)` and `e_3` for `<END>`, value 1 on real elements.
fn match2_unit(c: f64, p: Precision) -> Result<AttentionUnit> {
    let q = sparse(4, 3, &[(0, 0, c), (1, 1, c), (2, 2, c)]);
    let k = sparse(4, 3, &[(0, 0, 1.0), (1, 1, -1.0), (3, 2, 1.0)]);
    let v = sparse(4, 1, &[(2, 0, 1.0)]);
    AttentionUnit::quantized(q, k, v, p)
}

/// One attention layer deciding, per element, whether some `x_j` cancels
/// `x_i` modulo `M`.
pub fn build_match2(n: usize, m: u64) -> Result<TransformerModel> {
    check_match_params(n, m)?;
    let c = match_scale(n, m);
    let fmt = match_format(n, m, c)?;
    let p = fixed(fmt);
    let unit = match2_unit(c, p)?;
    let c_q = unit.q()[(0, 0)];
    let layers = vec![
        mlp(TrigFeatures { m }, p),
        Layer::Attention(MultiHeadLayer::single(unit)),
        mlp(Threshold::match_default(), p),
    ];
    TransformerModel::new(
        layers,
        true,
        provenance(
            "match2",
            json!({"N": n, "M": m}),
            vec![],
            &[("c", json!(c_q)), ("p", json!(fmt.total_bits())), ("f", json!(fmt.frac_bits()))],
        ),
    )
}

/// `[pos, x] -> [pos, x, cos, sin of 2π(pos+1)/P, cos, sin of 2π pos/P]` with
/// period `P = N + 1`, so that `<END>` (position 0) sits right after `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftFeatures {
    #[serde(rename = "N")]
    pub n: usize,
}

impl ShiftFeatures {
    fn in_width(&self) -> usize {
        2
    }
    fn out_width(&self) -> usize {
        6
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]) as f64;
        let period = (self.n + 1) as f64;
        let tq = angle(pos + 1.0, period);
        let tk = angle(pos, period);
        vec![pos, x[1], tq.cos(), tq.sin(), tk.cos(), tk.sin()]
    }
}
element_map!(ShiftFeatures, "shift_features");

/// `[pos, x_i, ~x_{i+1}] ->` Match2 features with the query built from
/// `x_i` and the key from `s_i = x_i + x_{i+1} mod M`. Element `N` has no
/// successor, so its key and value are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BigramFeatures {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: u64,
}

impl BigramFeatures {
    fn in_width(&self) -> usize {
        3
    }
    fn out_width(&self) -> usize {
        7
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]);
        if pos == 0 {
            return vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        }
        let m = self.m as f64;
        let ti = angle(x[1], m);
        let (kc, ks, val) = if pos < self.n {
            let s = residue(x[1] + x[2].round(), self.m) as f64;
            let ts = angle(s, m);
            (ts.cos(), ts.sin(), 1.0)
        } else {
            (0.0, 0.0, 0.0)
        };
        vec![ti.cos(), ti.sin(), 1.0, kc, ks, val, 0.0]
    }
}
element_map!(BigramFeatures, "bigram_features");

/// Two attention layers: the first copies `x_{i+1}` onto element `i`
/// through a sharp positional score, the second runs the pair detector
/// between `x_i` and the bigram sums.
pub fn build_match3_bigram(n: usize, m: u64) -> Result<TransformerModel> {
    check_match_params(n, m)?;
    if n < 2 {
        return Err(invalid("bigram detection needs N >= 2"));
    }
    let c = match_scale(n, m);
    let c1 = shift_scale(n);
    let f = frac_bits_for(c, c * cosine_gap(m as f64))
        .max(frac_bits_for(c1, c1 * cosine_gap((n + 1) as f64)));
    let fmt = format_for(c.max(c1).max(n as f64 + 1.0).max(m as f64), f)?;
    let p = fixed(fmt);

    let shift = AttentionUnit::quantized(
        sparse(6, 2, &[(2, 0, c1), (3, 1, c1)]),
        sparse(6, 2, &[(4, 0, 1.0), (5, 1, 1.0)]),
        sparse(6, 3, &[(1, 2, 1.0)]),
        p,
    )?;
    let c1_q = shift.q()[(2, 0)];
    let carry = sparse(6, 3, &[(0, 0, 1.0), (1, 1, 1.0)]);
    let pair = AttentionUnit::quantized(
        sparse(7, 3, &[(0, 0, c), (1, 1, c), (2, 2, c)]),
        sparse(7, 3, &[(3, 0, 1.0), (4, 1, -1.0), (6, 2, 1.0)]),
        sparse(7, 1, &[(5, 0, 1.0)]),
        p,
    )?;
    let c_q = pair.q()[(0, 0)];
    let layers = vec![
        mlp(ShiftFeatures { n }, p),
        Layer::Attention(MultiHeadLayer::new(vec![Head::Standard(shift)], Some(carry))?),
        mlp(BigramFeatures { n, m }, p),
        Layer::Attention(MultiHeadLayer::single(pair)),
        mlp(Threshold::match_default(), p),
    ];
    TransformerModel::new(
        layers,
        true,
        provenance(
            "match3_bigram",
            json!({"N": n, "M": m}),
            vec![],
            &[
                ("c", json!(c_q)),
                ("c_shift", json!(c1_q)),
                ("p", json!(fmt.total_bits())),
                ("f", json!(fmt.frac_bits())),
            ],
        ),
    )
}

/// One third-order head whose cell `(i, j1, j2)` scores
/// `c cos(2π (x_i + x_j1 + x_j2) / M)`.
pub fn build_match3_third_order(n: usize, m: u64) -> Result<TransformerModel> {
    build_match3_third_order_with(n, m, None)
}

/// As [`build_match3_third_order`], optionally overriding the precision.
pub fn build_match3_third_order_with(
    n: usize,
    m: u64,
    precision: Option<Precision>,
) -> Result<TransformerModel> {
    check_match_params(n, m)?;
    let cells = ((n + 1) as u128).pow(3);
    if cells > crate::transformer::MAX_SCORE_CELLS {
        return Err(crate::Error::BudgetExceeded {
            cells,
            budget: crate::transformer::MAX_SCORE_CELLS,
        });
    }
    let c = match_scale(n, m);
    let p = match precision {
        Some(p) => p,
        None => fixed(match_format(n, m, c)?),
    };
    // rows: cos, sin, one, end
    let q = sparse(4, 5, &[(0, 0, c), (0, 1, -c), (1, 2, c), (1, 3, c), (2, 4, c)]);
    let k1 = sparse(
        4,
        5,
        &[(0, 0, 1.0), (0, 2, -1.0), (1, 1, 1.0), (1, 3, 1.0), (3, 4, 1.0)],
    );
    let k2 = sparse(
        4,
        5,
        &[(0, 0, 1.0), (0, 3, -1.0), (1, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)],
    );
    let v = sparse(4, 1, &[(2, 0, 1.0)]);
    let unit = HigherOrderUnit::quantized(q, vec![k1, k2], vec![v.clone(), v], p)?;
    let c_q = unit.q()[(0, 0)];
    let layers = vec![
        mlp(TrigFeatures { m }, p),
        Layer::Attention(MultiHeadLayer::new(vec![Head::HigherOrder(unit)], None)?),
        mlp(Threshold::match_default(), p),
    ];
    TransformerModel::new(
        layers,
        true,
        provenance(
            "match3_third_order",
            json!({"N": n, "M": m}),
            vec![],
            &[("c", json!(c_q)), ("p", json!(p.bits()))],
        ),
    )
}

/// `[pos, x] -> [pos, cos θ, sin θ, 1, end]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositionedTrig {
    #[serde(rename = "M")]
    pub m: u64,
}

impl PositionedTrig {
    fn in_width(&self) -> usize {
        2
    }
    fn out_width(&self) -> usize {
        5
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]);
        if pos == 0 {
            return vec![0.0, 0.0, 0.0, 0.0, 1.0];
        }
        let t = angle(x[1], self.m as f64);
        vec![pos as f64, t.cos(), t.sin(), 1.0, 0.0]
    }
}
element_map!(PositionedTrig, "positioned_trig");

/// `[pos, z] -> [value, key, 1]`: positions `2..=(N+1)/2` carry their
/// thresholded pair bit and a unit key; `<END>` has a unit key and value 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstHalfFlags {
    #[serde(rename = "N")]
    pub n: usize,
}

impl FirstHalfFlags {
    fn in_width(&self) -> usize {
        2
    }
    fn out_width(&self) -> usize {
        3
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let pos = position(x[0]);
        let half = (self.n - 1) / 2;
        let flagged = (2..=half + 1).contains(&pos);
        let bit = (6.0 * x[1] - 1.0).clamp(0.0, 1.0);
        let value = if flagged { bit } else { 0.0 };
        let key = if flagged || pos == 0 { 1.0 } else { 0.0 };
        vec![value, key, 1.0]
    }
}
element_map!(FirstHalfFlags, "first_half_flags");

/// Two layers for the restricted domain of [`check_match3_restricted`]:
/// pair bits first, then an OR over positions `2..=(N+1)/2`. Every
/// element reports the answer for element 1.
pub fn build_match3_restricted_twolayer(n: usize, m: u64) -> Result<TransformerModel> {
    check_match_params(n, m)?;
    if n < 3 || n % 2 == 0 {
        return Err(invalid(format!("restricted domain needs odd N >= 3, got {n}")));
    }
    if m < n as u64 + 1 {
        return Err(invalid(format!("restricted domain needs M >= N + 1, got M = {m}")));
    }
    let half = (n - 1) / 2;
    let c = match_scale(n, m);
    let c2 = (4.0 * n as f64).ln();
    let fmt = match_format(n, m, c)?;
    let p = fixed(fmt);
    let pair = AttentionUnit::quantized(
        sparse(5, 3, &[(1, 0, c), (2, 1, c), (3, 2, c)]),
        sparse(5, 3, &[(1, 0, 1.0), (2, 1, -1.0), (4, 2, 1.0)]),
        sparse(5, 2, &[(3, 1, 1.0)]),
        p,
    )?;
    let carry = sparse(5, 2, &[(0, 0, 1.0)]);
    let or = AttentionUnit::quantized(
        sparse(3, 1, &[(2, 0, c2)]),
        sparse(3, 1, &[(1, 0, 1.0)]),
        sparse(3, 1, &[(0, 0, 1.0)]),
        p,
    )?;
    let slots = (half + 1) as f64;
    let layers = vec![
        mlp(PositionedTrig { m }, p),
        Layer::Attention(MultiHeadLayer::new(vec![Head::Standard(pair)], Some(carry))?),
        mlp(FirstHalfFlags { n }, p),
        Layer::Attention(MultiHeadLayer::single(or)),
        mlp(
            Threshold {
                lo: 1.0 / (4.0 * slots),
                hi: 1.0 / (2.0 * slots),
            },
            p,
        ),
    ];
    TransformerModel::new(
        layers,
        true,
        provenance(
            "match3_restricted",
            json!({"N": n, "M": m}),
            vec![],
            &[
                ("c", json!(c)),
                ("c_or", json!(c2)),
                ("p", json!(fmt.total_bits())),
            ],
        ),
    )
}

/// Runs the restricted model after checking the domain; returns the bit for
/// element 1.
pub fn eval_match3_restricted(model: &TransformerModel, inst: &SequenceInstance) -> Result<bool> {
    check_match3_restricted(inst)?;
    let out = run_transformer(model, &inst.to_matrix())?;
    Ok(out[(0, 0)] > 0.5)
}

/// Score tensor of the third-order model before softmax, rows `N + 1`.
pub fn third_order_scores(model: &TransformerModel, x: &Matrix) -> Result<Matrix> {
    let trace = model.trace(x)?;
    let feats = &trace.states[1];
    match model.attention_layers().next().and_then(|a| a.heads().first()) {
        Some(Head::HigherOrder(u)) => u.scores(feats),
        _ => Err(invalid("model has no third-order head")),
    }
}
