use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::higher_order::{attend_graph, attend_higher_order, GraphAttentionUnit, HigherOrderUnit};
use super::mlp::{ElementMap, MapDescriptor, MlpLayer};
use super::unit::{attend, AttentionUnit};
use crate::error::{dims, invalid, Result};
use crate::numerics::{Matrix, Precision};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    Standard(AttentionUnit),
    HigherOrder(HigherOrderUnit),
    Graph(GraphAttentionUnit),
}

impl Head {
    pub fn d(&self) -> usize {
        match self {
            Head::Standard(u) => u.d(),
            Head::HigherOrder(u) => u.d(),
            Head::Graph(u) => u.base().d(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Head::Standard(u) => u.m(),
            Head::HigherOrder(u) => u.m(),
            Head::Graph(u) => u.base().m(),
        }
    }

    pub fn d_out(&self) -> usize {
        match self {
            Head::Standard(u) => u.d_out(),
            Head::HigherOrder(u) => u.d_out(),
            Head::Graph(u) => u.base().d_out(),
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            Head::Standard(u) => u.precision(),
            Head::HigherOrder(u) => u.precision(),
            Head::Graph(u) => u.base().precision(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Head::Standard(u) => u.validate(),
            Head::HigherOrder(u) => u.validate(),
            Head::Graph(u) => u.validate(),
        }
    }

    pub fn evaluate(&self, x: &Matrix, adj: Option<&Matrix>) -> Result<Matrix> {
        match self {
            Head::Standard(u) => attend(u, x),
            Head::HigherOrder(u) => attend_higher_order(u, x),
            Head::Graph(u) => {
                let adj = adj.ok_or_else(|| invalid("graph head evaluated without adjacency"))?;
                attend_graph(u, x, adj)
            }
        }
    }
}

/// Sum of heads plus an optional exact linear carry `X R` of the layer input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHeadLayer {
    heads: Vec<Head>,
    #[serde(default)]
    carry: Option<Matrix>,
}

impl MultiHeadLayer {
    pub fn new(heads: Vec<Head>, carry: Option<Matrix>) -> Result<Self> {
        let layer = Self { heads, carry };
        layer.validate()?;
        Ok(layer)
    }

    pub fn single(unit: AttentionUnit) -> Self {
        Self {
            heads: vec![Head::Standard(unit)],
            carry: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .heads
            .first()
            .ok_or_else(|| invalid("attention layer needs at least one head"))?;
        for h in &self.heads {
            h.validate()?;
            if h.d() != first.d() || h.d_out() != first.d_out() {
                return Err(dims("heads in one layer must share d and d_out"));
            }
        }
        if let Some(c) = &self.carry {
            if c.shape() != (first.d(), first.d_out()) {
                return Err(dims(format!(
                    "carry is {:?}, layer maps {} -> {}",
                    c.shape(),
                    first.d(),
                    first.d_out()
                )));
            }
        }
        Ok(())
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn carry(&self) -> Option<&Matrix> {
        self.carry.as_ref()
    }

    pub fn d(&self) -> usize {
        self.heads[0].d()
    }

    pub fn d_out(&self) -> usize {
        self.heads[0].d_out()
    }

    pub fn evaluate(&self, x: &Matrix, adj: Option<&Matrix>) -> Result<Matrix> {
        let mut acc = match &self.carry {
            Some(c) => x.matmul(c)?,
            None => Matrix::zeros(x.rows(), self.d_out()),
        };
        for h in &self.heads {
            acc = acc.add(&h.evaluate(x, adj)?)?;
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Mlp(MlpLayer),
    Attention(MultiHeadLayer),
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Mlp(l) => l.in_dim(),
            Layer::Attention(l) => l.d(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Layer::Mlp(l) => l.out_dim(),
            Layer::Attention(l) => l.d_out(),
        }
    }
}

/// Where a model came from and which constants were baked in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub builder: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub constants: serde_json::Map<String, serde_json::Value>,
}

/// Alternating MLP and attention layers, starting and ending with an MLP.
#[derive(Debug, Clone)]
pub struct TransformerModel {
    layers: Vec<Layer>,
    append_end: bool,
    end_row: Option<Vec<f64>>,
    provenance: Provenance,
}

/// Every intermediate state of one evaluation, `<END>` row included.
#[derive(Debug, Clone)]
pub struct ModelTrace {
    pub states: Vec<Matrix>,
    pub appended_end: bool,
}

impl ModelTrace {
    /// Final state with the `<END>` row dropped.
    pub fn output(&self) -> Matrix {
        let last = self.states.last().expect("trace has at least the input");
        if self.appended_end {
            last.take_rows(last.rows() - 1)
        } else {
            last.clone()
        }
    }
}

impl TransformerModel {
    pub fn new(layers: Vec<Layer>, append_end: bool, provenance: Provenance) -> Result<Self> {
        let model = Self {
            layers,
            append_end,
            end_row: None,
            provenance,
        };
        model.validate()?;
        Ok(model)
    }

    /// Overrides the appended `<END>` row, which defaults to zeros.
    pub fn with_end_row(mut self, row: Vec<f64>) -> Result<Self> {
        if row.len() != self.input_dim() {
            return Err(dims(format!(
                "<END> row has {} entries, input width is {}",
                row.len(),
                self.input_dim()
            )));
        }
        self.end_row = Some(row);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(invalid("model has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let want_mlp = i % 2 == 0;
            if matches!(l, Layer::Mlp(_)) != want_mlp {
                return Err(invalid(format!(
                    "layer {i} breaks the MLP / attention alternation"
                )));
            }
            if let Layer::Attention(a) = l {
                a.validate()?;
            }
        }
        if !matches!(self.layers.last(), Some(Layer::Mlp(_))) {
            return Err(invalid("model must end with an MLP layer"));
        }
        for w in self.layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(dims(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].out_dim(),
                    w[1].in_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn append_end(&self) -> bool {
        self.append_end
    }

    pub fn end_row(&self) -> Vec<f64> {
        self.end_row
            .clone()
            .unwrap_or_else(|| vec![0.0; self.input_dim()])
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::out_dim).unwrap_or(0)
    }

    /// Number of attention layers.
    pub fn depth(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::Attention(_)))
            .count()
    }

    /// Largest head count over attention layers.
    pub fn max_heads(&self) -> usize {
        self.attention_layers().map(|a| a.heads().len()).max().unwrap_or(0)
    }

    /// Largest query/key width over all heads.
    pub fn max_embedding(&self) -> usize {
        self.attention_layers()
            .flat_map(|a| a.heads().iter().map(Head::m))
            .max()
            .unwrap_or(0)
    }

    pub fn attention_layers(&self) -> impl Iterator<Item = &MultiHeadLayer> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Attention(a) => Some(a),
            Layer::Mlp(_) => None,
        })
    }

    pub fn has_graph_heads(&self) -> bool {
        self.attention_layers()
            .any(|a| a.heads().iter().any(|h| matches!(h, Head::Graph(_))))
    }

    /// Input with the `<END>` row appended when the model asks for it.
    pub fn prepare_input(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(dims(format!(
                "input has {} columns, model expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut x = x.clone();
        if self.append_end {
            x.push_row(&self.end_row())?;
        }
        Ok(x)
    }

    /// Adjacency read by graph heads: the raw input, with zero bits for `<END>`.
    pub fn adjacency(&self, x: &Matrix) -> Option<Matrix> {
        if !self.has_graph_heads() {
            return None;
        }
        let n = x.rows() + usize::from(self.append_end);
        Some(Matrix::from_fn(n, n, |r, c| {
            if r < x.rows() && c < x.cols() {
                x[(r, c)]
            } else {
                0.0
            }
        }))
    }

    pub fn trace(&self, x: &Matrix) -> Result<ModelTrace> {
        let adj = self.adjacency(x);
        let mut state = self.prepare_input(x)?;
        let mut states = vec![state.clone()];
        for layer in &self.layers {
            state = match layer {
                Layer::Mlp(l) => l.apply(&state)?,
                Layer::Attention(a) => a.evaluate(&state, adj.as_ref())?,
            };
            states.push(state.clone());
        }
        Ok(ModelTrace {
            states,
            appended_end: self.append_end,
        })
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            input_dim: self.input_dim(),
            output_dim: self.output_dim(),
            append_end: self.append_end,
            end_row: self.end_row.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Mlp(m) => LayerDocument::Mlp {
                        in_dim: m.in_dim(),
                        out_dim: m.out_dim(),
                        precision: m.precision(),
                        map: m.map().descriptor(),
                    },
                    Layer::Attention(a) => LayerDocument::Attention(a.clone()),
                })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    /// Rebuilds a model, asking `resolve` for each MLP element map.
    pub fn from_document(
        doc: ModelDocument,
        resolve: &dyn Fn(&MapDescriptor) -> Result<Arc<dyn ElementMap>>,
    ) -> Result<Self> {
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(invalid(format!(
                "model schema {} is not supported",
                doc.schema_version
            )));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for l in doc.layers {
            layers.push(match l {
                LayerDocument::Mlp {
                    in_dim,
                    out_dim,
                    precision,
                    map,
                } => {
                    let map = resolve(&map)?;
                    if map.in_dim() != in_dim || map.out_dim() != out_dim {
                        return Err(dims(format!(
                            "rebuilt map {} has widths {} -> {}, document says {in_dim} -> {out_dim}",
                            map.descriptor().name,
                            map.in_dim(),
                            map.out_dim()
                        )));
                    }
                    Layer::Mlp(MlpLayer::new(map, precision))
                }
                LayerDocument::Attention(a) => Layer::Attention(a),
            });
        }
        let mut model = Self::new(layers, doc.append_end, doc.provenance)?;
        if let Some(row) = doc.end_row {
            model = model.with_end_row(row)?;
        }
        if model.input_dim() != doc.input_dim || model.output_dim() != doc.output_dim {
            return Err(dims("document widths disagree with its layers"));
        }
        Ok(model)
    }

    pub fn from_json(
        json: &str,
        resolve: &dyn Fn(&MapDescriptor) -> Result<Arc<dyn ElementMap>>,
    ) -> Result<Self> {
        Self::from_document(serde_json::from_str(json)?, resolve)
    }
}

pub fn run_transformer(model: &TransformerModel, x: &Matrix) -> Result<Matrix> {
    Ok(model.trace(x)?.output())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub input_dim: usize,
    pub output_dim: usize,
    pub append_end: bool,
    #[serde(default)]
    pub end_row: Option<Vec<f64>>,
    pub layers: Vec<LayerDocument>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerDocument {
    Mlp {
        in_dim: usize,
        out_dim: usize,
        precision: Precision,
        map: MapDescriptor,
    },
    Attention(MultiHeadLayer),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::FixedFormat;
    use crate::transformer::mlp::{FnMap, IdentityMap};

    fn fmt() -> Precision {
        Precision::fixed(FixedFormat::new(16, 8).unwrap())
    }

    #[test]
    fn identity_model_quantizes() {
        let p = Precision::fixed(FixedFormat::new(8, 2).unwrap());
        let model = TransformerModel::new(
            vec![Layer::Mlp(MlpLayer::identity(2, p))],
            false,
            Provenance::default(),
        )
        .unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.6], [2.0, 1000.0]]).unwrap();
        let y = run_transformer(&model, &x).unwrap();
        assert_eq!(y.data(), &[0.25, -0.5, 2.0, 31.75]);
        assert_eq!(model.depth(), 0);
    }

    #[test]
    fn depth_one_matches_manual_composition() {
        let phi = FnMap {
            name: "double".into(),
            in_dim: 2,
            out_dim: 2,
            f: |x: &[f64]| vec![2.0 * x[0], x[0] + x[1]],
        };
        let psi = FnMap {
            name: "sum".into(),
            in_dim: 1,
            out_dim: 1,
            f: |x: &[f64]| vec![x[0] * 3.0],
        };
        let unit = AttentionUnit::quantized(
            Matrix::from_rows(&[[1.0], [0.5]]).unwrap(),
            Matrix::from_rows(&[[0.25], [1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0], [-1.0]]).unwrap(),
            fmt(),
        )
        .unwrap();
        let model = TransformerModel::new(
            vec![
                Layer::Mlp(MlpLayer::new(Arc::new(phi), fmt())),
                Layer::Attention(MultiHeadLayer::single(unit.clone())),
                Layer::Mlp(MlpLayer::new(Arc::new(psi), fmt())),
            ],
            false,
            Provenance::default(),
        )
        .unwrap();
        let x = Matrix::from_rows(&[[0.5, 0.25], [1.0, -0.5], [0.0, 1.5]]).unwrap();
        let got = run_transformer(&model, &x).unwrap();

        let p = fmt();
        let h = Matrix::from_fn(3, 2, |r, c| {
            let (a, b) = (x[(r, 0)], x[(r, 1)]);
            p.quantize(if c == 0 { 2.0 * a } else { a + b })
        });
        let z = attend(&unit, &h).unwrap();
        let want = z.map(|v| p.quantize(3.0 * p.quantize(v)));
        assert_eq!(got, want);
    }

    #[test]
    fn end_row_is_appended_then_dropped() {
        let seen = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let seen2 = seen.clone();
        let counter = FnMap {
            name: "count".into(),
            in_dim: 1,
            out_dim: 1,
            f: move |x: &[f64]| {
                seen2.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                x.to_vec()
            },
        };
        let model = TransformerModel::new(
            vec![Layer::Mlp(MlpLayer::new(Arc::new(counter), Precision::Carrier))],
            true,
            Provenance::default(),
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let y = run_transformer(&model, &x).unwrap();
        assert_eq!(seen.load(std::sync::atomic::Ordering::SeqCst), 3);
        assert_eq!(y.shape(), (2, 1));
    }

    #[test]
    fn broken_chains_rejected() {
        let a = Layer::Mlp(MlpLayer::identity(2, Precision::Carrier));
        let b = Layer::Mlp(MlpLayer::identity(3, Precision::Carrier));
        assert!(TransformerModel::new(vec![a.clone(), b], false, Provenance::default()).is_err());
        let unit = AttentionUnit::new(
            Matrix::zeros(2, 1),
            Matrix::zeros(2, 1),
            Matrix::zeros(2, 2),
            Precision::Carrier,
        )
        .unwrap();
        let att = Layer::Attention(MultiHeadLayer::single(unit));
        assert!(TransformerModel::new(vec![a.clone(), att], false, Provenance::default()).is_err());
    }

    #[test]
    fn json_round_trip_with_identity_maps() {
        let unit = AttentionUnit::quantized(
            Matrix::from_rows(&[[0.3], [0.7]]).unwrap(),
            Matrix::from_rows(&[[1.1], [-0.2]]).unwrap(),
            Matrix::identity(2),
            fmt(),
        )
        .unwrap();
        let model = TransformerModel::new(
            vec![
                Layer::Mlp(MlpLayer::identity(2, fmt())),
                Layer::Attention(MultiHeadLayer::new(vec![Head::Standard(unit)], Some(Matrix::identity(2))).unwrap()),
                Layer::Mlp(MlpLayer::identity(2, fmt())),
            ],
            true,
            Provenance::default(),
        )
        .unwrap();
        let json = model.to_json().unwrap();
        let resolve = |d: &MapDescriptor| -> Result<Arc<dyn ElementMap>> {
            let dim = d.params["dim"].as_u64().unwrap() as usize;
            Ok(Arc::new(IdentityMap { dim }))
        };
        let back = TransformerModel::from_json(&json, &resolve).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2], [0.3, -0.4]]).unwrap();
        assert_eq!(
            run_transformer(&model, &x).unwrap(),
            run_transformer(&back, &x).unwrap()
        );
    }
}
