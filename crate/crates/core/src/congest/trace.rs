use serde::Serialize;

use super::graph::CongestGraph;
use super::partition::{cut_edges, Partition};
use super::simulate::Message;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerRounds {
    pub layer: usize,
    pub kind: String,
    pub heads: usize,
    pub rounds: usize,
    pub messages: u64,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundBound {
    pub constant: usize,
    #[serde(rename = "H")]
    pub heads: usize,
    #[serde(rename = "D")]
    pub depth: usize,
    pub m: usize,
    pub log2_n: usize,
    pub bound: usize,
}

/// Bandwidth across the two-party cut.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutReport {
    pub cut_size: usize,
    pub crossing_messages: u64,
    pub cut_bits: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolTrace {
    /// Task elements.
    #[serde(rename = "N")]
    pub n: usize,
    /// Roots of the graph (task elements plus `<END>` when appended).
    pub graph_n: usize,
    pub model_tag: String,
    pub rounds: usize,
    pub messages: u64,
    pub bits_total: u64,
    pub per_layer: Vec<LayerRounds>,
    pub round_bound: RoundBound,
    pub cut: Option<CutReport>,
    #[serde(skip)]
    pub edge_messages: Vec<u64>,
    #[serde(skip)]
    pub edge_bits: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<Vec<Message>>,
}

/// One line of a sweep summary.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub model_tag: String,
    pub rounds: usize,
    pub round_bound: usize,
    pub messages: u64,
    pub bits_total: u64,
    pub cut_size: Option<usize>,
    pub cut_bits: Option<u64>,
}

impl ProtocolTrace {
    pub fn within_round_bound(&self) -> bool {
        self.rounds <= self.round_bound.bound
    }

    /// Counts payloads crossing the partition and records them.
    pub fn attach_partition(&mut self, g: &CongestGraph, p: &Partition) -> &CutReport {
        let cut = cut_edges(g, p);
        let crossing_messages = cut.iter().map(|&e| self.edge_messages[e]).sum();
        let cut_bits = cut.iter().map(|&e| self.edge_bits[e]).sum();
        self.cut.insert(CutReport {
            cut_size: cut.len(),
            crossing_messages,
            cut_bits,
        })
    }

    /// Every cut edge carries at most one `p`-bit payload per round.
    pub fn check_cut_bandwidth(&self, max_bits: u32) -> Result<()> {
        if let Some(c) = &self.cut {
            let cap = u64::from(max_bits) * self.rounds as u64 * c.cut_size as u64;
            if c.cut_bits > cap {
                return Err(Error::Fidelity(format!(
                    "{} bits crossed the cut, capacity is {cap}",
                    c.cut_bits
                )));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            n: self.n,
            model_tag: self.model_tag.clone(),
            rounds: self.rounds,
            round_bound: self.round_bound.bound,
            messages: self.messages,
            bits_total: self.bits_total,
            cut_size: self.cut.as_ref().map(|c| c.cut_size),
            cut_bits: self.cut.as_ref().map(|c| c.cut_bits),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// CSV with one row per trace.
pub fn summaries_to_csv(rows: &[TraceSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
