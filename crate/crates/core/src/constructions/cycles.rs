use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::common::{element_map, format_for, provenance, sparse, Threshold};
use crate::error::{invalid, Result};
use crate::numerics::Precision;
use crate::tasks::CycleKind;
use crate::transformer::{
    GraphAttentionUnit, Head, HigherOrderUnit, Kappa, Layer, MlpLayer, MultiHeadLayer,
    TransformerModel,
};

/// Adjacency row `-> [1, 0]`; the all-negative `<END>` row `-> [0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleFeatures {
    #[serde(rename = "N")]
    pub n: usize,
}

impl CycleFeatures {
    fn in_width(&self) -> usize {
        self.n
    }
    fn out_width(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        if x.iter().any(|&v| v < 0.0) {
            vec![0.0, 1.0]
        } else {
            vec![1.0, 0.0]
        }
    }
}
element_map!(CycleFeatures, "cycle_features");

/// Bonus added to cells whose tuple closes the walk, `20 ln(N + 1)`.
pub fn cycle_scale(n: usize) -> f64 {
    20.0 * (n as f64 + 1.0).ln()
}

/// One graph-attention head of order `s` whose edge function rewards the
/// closed walk `i -> j_1 -> ... -> j_{s-1} -> i`. The all-`<END>` cell
/// scores `c / 2` and carries value 0, all-real cells carry value 1, so the
/// output is near 1 when some walk closes and tiny otherwise.
pub fn build_cycle_detector(kind: CycleKind, n: usize) -> Result<TransformerModel> {
    if n == 0 {
        return Err(invalid("graph needs at least one vertex"));
    }
    let s = kind.order();
    let c = cycle_scale(n);
    let fmt = format_for(c, 16)?;
    let p = Precision::fixed(fmt);
    let q = sparse(2, 1, &[(0, 0, c / 2.0)]);
    let key = sparse(2, 1, &[(1, 0, 1.0)]);
    let value = sparse(2, 1, &[(0, 0, 1.0)]);
    let base = HigherOrderUnit::quantized(q, vec![key; s - 1], vec![value; s - 1], p)?;
    let edges: Vec<(usize, usize)> = (0..s).map(|a| (a, (a + 1) % s)).collect();
    let kappa = Kappa::Pattern {
        edges,
        scale: p.quantize(c),
    };
    let head = Head::Graph(GraphAttentionUnit::new(base, kappa)?);
    let layers = vec![
        Layer::Mlp(MlpLayer::new(Arc::new(CycleFeatures { n }), p)),
        Layer::Attention(MultiHeadLayer::new(vec![head], None)?),
        Layer::Mlp(MlpLayer::new(Arc::new(Threshold::match_default()), p)),
    ];
    let name = match kind {
        CycleKind::Dcycle3 => "dcycle3",
        CycleKind::Cycle5 => "cycle5",
    };
    TransformerModel::new(
        layers,
        true,
        provenance(
            name,
            json!({"N": n, "s": s}),
            vec![],
            &[("c", json!(c)), ("p", json!(fmt.total_bits()))],
        ),
    )?
    .with_end_row(vec![-1.0; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::output_bits;
    use crate::tasks::{cycle_oracle, GraphInstance};
    use crate::transformer::run_transformer;

    #[test]
    fn directed_triangle() {
        let mut g = GraphInstance::empty(4, false);
        g.set_edge(0, 1, true);
        g.set_edge(1, 2, true);
        g.set_edge(2, 0, true);
        g.set_edge(2, 3, true);
        let model = build_cycle_detector(CycleKind::Dcycle3, 4).unwrap();
        let out = output_bits(&run_transformer(&model, &g.to_matrix()).unwrap());
        assert_eq!(out, vec![true, true, true, false]);
        assert_eq!(out, cycle_oracle(&g, CycleKind::Dcycle3).unwrap());
    }

    #[test]
    fn closed_five_walk_on_an_edge() {
        // a single undirected edge has no closed walk of odd length
        let mut g = GraphInstance::empty(3, true);
        g.set_edge(0, 1, true);
        g.set_edge(1, 0, true);
        let model = build_cycle_detector(CycleKind::Cycle5, 3).unwrap();
        let out = output_bits(&run_transformer(&model, &g.to_matrix()).unwrap());
        assert_eq!(out, vec![false; 3]);
    }
}
