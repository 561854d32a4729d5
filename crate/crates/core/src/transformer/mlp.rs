use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{dims, Result};
use crate::numerics::{Matrix, Precision};

/// Name plus parameters from which a registry can rebuild an element map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDescriptor {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl MapDescriptor {
    pub fn new(name: impl Into<String>, params: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            params,
        }
    }
}

/// Deterministic function applied to every sequence element independently.
pub trait ElementMap: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn descriptor(&self) -> MapDescriptor;
}

impl fmt::Debug for dyn ElementMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.descriptor();
        write!(f, "{}({} -> {})", d.name, self.in_dim(), self.out_dim())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityMap {
    pub dim: usize,
}

impl ElementMap for IdentityMap {
    fn in_dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn descriptor(&self) -> MapDescriptor {
        MapDescriptor::new("identity", serde_json::json!({ "dim": self.dim }))
    }
}

/// Wraps a closure. Its descriptor cannot be rebuilt by a registry, so models
/// using it do not survive a JSON round trip.
pub struct FnMap<F> {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub f: F,
}

impl<F> ElementMap for FnMap<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out_dim
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
    fn descriptor(&self) -> MapDescriptor {
        MapDescriptor::new(self.name.clone(), serde_json::Value::Null)
    }
}

/// Element-wise layer whose inputs and outputs are quantized.
#[derive(Debug, Clone)]
pub struct MlpLayer {
    map: Arc<dyn ElementMap>,
    precision: Precision,
}

impl MlpLayer {
    pub fn new(map: Arc<dyn ElementMap>, precision: Precision) -> Self {
        Self { map, precision }
    }

    pub fn identity(dim: usize, precision: Precision) -> Self {
        Self::new(Arc::new(IdentityMap { dim }), precision)
    }

    pub fn in_dim(&self) -> usize {
        self.map.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.map.out_dim()
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn map(&self) -> &Arc<dyn ElementMap> {
        &self.map
    }

    /// Applies the map to one element.
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.in_dim() {
            return Err(dims(format!(
                "MLP expects {} inputs, got {}",
                self.in_dim(),
                row.len()
            )));
        }
        let input: Vec<f64> = row.iter().map(|&x| self.precision.quantize(x)).collect();
        let out = self.map.apply(&input);
        if out.len() != self.out_dim() {
            return Err(dims(format!(
                "map {:?} produced {} outputs, declared {}",
                self.map.descriptor().name,
                out.len(),
                self.out_dim()
            )));
        }
        Ok(out.into_iter().map(|x| self.precision.quantize(x)).collect())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.out_dim());
        for r in 0..x.rows() {
            let y = self.apply_row(x.row(r))?;
            out.row_mut(r).copy_from_slice(&y);
        }
        Ok(out)
    }
}
