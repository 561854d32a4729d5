use std::path::Path;

use serde::{Deserialize, Serialize};

use super::instances::{DisjInstance, GraphInstance, QsaInstance, SequenceInstance};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Instance {
    Qsa(QsaInstance),
    Sequence(SequenceInstance),
    Graph(GraphInstance),
    Disj(DisjInstance),
}

impl Instance {
    pub fn len(&self) -> usize {
        match self {
            Instance::Qsa(i) => i.n,
            Instance::Sequence(i) => i.n,
            Instance::Graph(i) => i.n,
            Instance::Disj(i) => i.n(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// On-disk instance with its generating task, seed and optional label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub task: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub label: Option<serde_json::Value>,
    pub instance: Instance,
    /// Extra instances, such as the DISJ pair an embedding came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Instance>,
}

impl InstanceFile {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(s)?;
        match &f.instance {
            Instance::Qsa(i) => i.validate()?,
            Instance::Sequence(i) => i.validate()?,
            Instance::Graph(i) => i.validate()?,
            Instance::Disj(i) => i.validate()?,
        }
        Ok(f)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::random_qsa;

    #[test]
    fn qsa_round_trip_is_bit_exact() {
        let inst = random_qsa(8, 3, 2, 5).unwrap();
        let f = InstanceFile {
            task: "qsa".into(),
            n: 8,
            params: serde_json::json!({"q": 3}),
            seed: Some(5),
            label: None,
            instance: Instance::Qsa(inst.clone()),
            source: None,
        };
        let back = InstanceFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back.instance, Instance::Qsa(inst));
    }
}
