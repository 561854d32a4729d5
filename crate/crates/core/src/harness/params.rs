use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tasks::CycleKind;

/// Tasks `verify` knows how to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "qsa-fixed")]
    QsaFixed,
    #[serde(rename = "qsa-inf")]
    QsaInf,
    #[serde(rename = "match2")]
    Match2,
    #[serde(rename = "match3-bigram")]
    Match3Bigram,
    #[serde(rename = "match3-local")]
    Match3Local,
    #[serde(rename = "match3-3rd")]
    Match3Third,
    #[serde(rename = "match3-multilayer")]
    Match3Multilayer,
    #[serde(rename = "match3-restricted")]
    Match3Restricted,
    #[serde(rename = "dcycle3")]
    Dcycle3,
    #[serde(rename = "cycle5")]
    Cycle5,
    #[serde(rename = "disj-qsa")]
    DisjQsa,
    #[serde(rename = "disj-match3")]
    DisjMatch3,
    #[serde(rename = "disj-graph")]
    DisjGraph,
}

impl Task {
    pub const ALL: [Task; 13] = [
        Task::QsaFixed,
        Task::QsaInf,
        Task::Match2,
        Task::Match3Bigram,
        Task::Match3Local,
        Task::Match3Third,
        Task::Match3Multilayer,
        Task::Match3Restricted,
        Task::Dcycle3,
        Task::Cycle5,
        Task::DisjQsa,
        Task::DisjMatch3,
        Task::DisjGraph,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Task::QsaFixed => "qsa-fixed",
            Task::QsaInf => "qsa-inf",
            Task::Match2 => "match2",
            Task::Match3Bigram => "match3-bigram",
            Task::Match3Local => "match3-local",
            Task::Match3Third => "match3-3rd",
            Task::Match3Multilayer => "match3-multilayer",
            Task::Match3Restricted => "match3-restricted",
            Task::Dcycle3 => "dcycle3",
            Task::Cycle5 => "cycle5",
            Task::DisjQsa => "disj-qsa",
            Task::DisjMatch3 => "disj-match3",
            Task::DisjGraph => "disj-graph",
        }
    }

    /// Real-valued tasks are judged by error against `ε`, the rest bit by bit.
    pub fn is_real(self) -> bool {
        matches!(self, Task::QsaFixed | Task::QsaInf)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Task::ALL.iter().map(|t| t.tag()).collect();
                invalid(format!("unknown task '{s}', expected one of {}", known.join(", ")))
            })
    }
}

pub fn parse_cycle_kind(s: &str) -> Result<CycleKind> {
    match s {
        "cycle5" => Ok(CycleKind::Cycle5),
        "dcycle3" => Ok(CycleKind::Dcycle3),
        _ => Err(invalid(format!("unknown cycle kind '{s}', expected cycle5 or dcycle3"))),
    }
}

/// Parameters as given on the command line; unset ones take task defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskParams {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_embed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_prime: Option<usize>,
    /// Cycle kind for `disj-graph`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Edge probability for random graphs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    /// Extra planted instances on top of `count` random ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted: Option<usize>,
}

/// Parameters after defaults, all present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: u64,
    pub q: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    pub m_embed: usize,
    pub d_prime: usize,
    pub kind: String,
    pub density: f64,
    pub planted: usize,
}

pub fn is_prime(v: u64) -> bool {
    v >= 2 && (2..).take_while(|d| d * d <= v).all(|d| v % d != 0)
}

/// Smallest prime `>= v`.
pub fn next_prime(v: u64) -> u64 {
    (v.max(2)..).find(|&p| is_prime(p)).expect("primes are unbounded")
}

impl TaskParams {
    pub fn resolve(&self, task: Task) -> Result<Resolved> {
        let default_n = match task {
            Task::QsaFixed => 32,
            Task::QsaInf => 16,
            Task::Match2 => 4,
            Task::Match3Bigram | Task::Match3Third | Task::Match3Multilayer => 8,
            Task::Match3Local => 16,
            Task::Match3Restricted | Task::DisjMatch3 => 9,
            Task::Dcycle3 => 8,
            Task::Cycle5 => 5,
            Task::DisjQsa => 13,
            Task::DisjGraph => 10,
        };
        let q_default = match task {
            Task::QsaFixed => 4,
            Task::QsaInf => 2,
            _ => 1,
        };
        let n = match (task, self.q) {
            // the qSA embedding fixes N = 2q + 1
            (Task::DisjQsa, Some(q)) => self.n.unwrap_or(2 * q + 1),
            _ => self.n.unwrap_or(default_n),
        };
        let q = match task {
            Task::DisjQsa => self.q.unwrap_or((n.saturating_sub(1)) / 2),
            _ => self.q.unwrap_or(q_default),
        };
        let eps = self.eps.unwrap_or(match task {
            Task::QsaInf => 0.05,
            _ => 0.1,
        });
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(format!("ε = {eps} must lie in (0, 1)")));
        }
        let density = self.density.unwrap_or(0.3);
        if !(0.0..=1.0).contains(&density) {
            return Err(invalid(format!("density {density} must lie in [0, 1]")));
        }
        let kind = self.kind.clone().unwrap_or_else(|| "cycle5".to_string());
        parse_cycle_kind(&kind)?;
        Ok(Resolved {
            n,
            m: self.m.unwrap_or_else(|| next_prime(n as u64 + 1)),
            q,
            k: self.k.unwrap_or(3),
            eps,
            m_embed: self.m_embed.unwrap_or(6),
            d_prime: self.d_prime.unwrap_or(4),
            kind,
            density,
            planted: self.planted.unwrap_or(0),
        })
    }
}
