use serde::Serialize;

use super::params::{Task, TaskParams};
use super::verify::{instance_seed, REPORT_SCHEMA_VERSION};
use crate::congest::{
    alice_bob_partition, build_congest_graph, simulate_transformer, summaries_to_csv,
    ProtocolTrace, RoundBound, TraceSummary, ROUND_BOUND_CONSTANT,
};
use crate::constructions::{
    build_match2, build_match3_bigram, build_match3_local, build_match3_restricted_twolayer,
    build_qsa_fixed, build_qsa_inf, output_bits, QsaBuildSpec,
};
use crate::error::{invalid, Error, Result};
use crate::numerics::Matrix;
use crate::tasks::{embed_disj_match3, random_disj, random_qsa, random_sequence};
use crate::transformer::{run_transformer, TransformerModel};

/// Tolerance on real-valued states between simulation and direct evaluation.
pub const STATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    #[serde(rename = "N")]
    pub n: usize,
    pub nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub tree_depth: usize,
    pub cut_size: usize,
    /// `N · (⌈log₂ 2N⌉ + 1)` on the graph's roots.
    pub cut_limit: usize,
    /// Cut of the graph on the task elements alone, without `<END>`.
    pub task_cut_size: usize,
}

/// One simulated instance.
#[derive(Debug, Clone, Serialize)]
pub struct CongestRun {
    pub index: usize,
    pub seed: u64,
    pub bits_match: bool,
    pub max_state_diff: f64,
    pub rounds: usize,
    pub cut_bits: u64,
    pub bandwidth_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CongestReport {
    pub schema_version: u32,
    pub task: String,
    pub builder: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub instance_count: usize,
    pub graph: GraphStats,
    pub round_bound: RoundBound,
    pub round_bound_constant: usize,
    pub fidelity_failures: usize,
    pub max_state_diff: f64,
    pub max_rounds: usize,
    pub within_round_bound: bool,
    pub cut_within_limit: bool,
    pub bandwidth_ok: bool,
    pub runs: Vec<CongestRun>,
    /// Full trace of the first instance, per-layer breakdown included.
    pub trace: ProtocolTrace,
    #[serde(skip)]
    pub summaries: Vec<TraceSummary>,
    pub pass: bool,
}

impl CongestReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> Result<String> {
        summaries_to_csv(&self.summaries)
    }

    /// Human-readable reasons the run failed, empty on a pass.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in self.runs.iter().filter(|r| !r.bits_match || r.max_state_diff > STATE_TOLERANCE) {
            out.push(format!(
                "instance {} (seed {}): bits match {}, max state difference {:e}",
                r.index, r.seed, r.bits_match, r.max_state_diff
            ));
        }
        if !self.within_round_bound {
            out.push(format!("{} rounds exceed the bound {}", self.max_rounds, self.round_bound.bound));
        }
        if !self.cut_within_limit {
            out.push(format!("cut size {} exceeds {}", self.graph.cut_size, self.graph.cut_limit));
        }
        if !self.bandwidth_ok {
            out.push("more bits crossed the cut than its capacity".to_string());
        }
        out
    }
}

fn ceil_log2(v: usize) -> usize {
    if v <= 1 {
        0
    } else {
        (usize::BITS - (v - 1).leading_zeros()) as usize
    }
}

fn cut_size_of(n: usize) -> Result<usize> {
    let g = build_congest_graph(n)?;
    Ok(crate::congest::cut_size(&g, &alice_bob_partition(&g)))
}

/// Tasks whose models use only pairwise attention.
fn congest_model(task: Task, p: &TaskParams, seed: u64) -> Result<(TransformerModel, Box<dyn Fn(u64) -> Result<Matrix>>)> {
    let r = p.resolve(task)?;
    let (n, m) = (r.n, r.m);
    Ok(match task {
        Task::QsaFixed | Task::QsaInf => {
            let model = if task == Task::QsaFixed {
                build_qsa_fixed(&QsaBuildSpec::new(n, r.q, r.d_prime, r.eps, seed)?)?
            } else {
                build_qsa_inf(n, r.q, r.d_prime, r.eps)?
            };
            let (q, d) = (r.q, r.d_prime);
            (model, Box::new(move |s| Ok(random_qsa(n, q, d, s)?.to_matrix())))
        }
        Task::Match2 | Task::Match3Bigram | Task::Match3Local => {
            let model = match task {
                Task::Match2 => build_match2(n, m)?,
                Task::Match3Bigram => build_match3_bigram(n, m)?,
                _ => build_match3_local(n, m, r.k, seed)?,
            };
            (model, Box::new(move |s| Ok(random_sequence(n, m, s)?.to_matrix())))
        }
        Task::Match3Restricted => {
            if n < 3 || n % 2 == 0 {
                return Err(invalid(format!("{task} needs odd N >= 3, got {n}")));
            }
            let model = build_match3_restricted_twolayer(n, m)?;
            let half = (n - 1) / 2;
            (model, Box::new(move |s| Ok(embed_disj_match3(&random_disj(half, s), m)?.to_matrix())))
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "{task} uses attention of order above two, which has no tree protocol"
            )))
        }
    })
}

/// Simulates the task's model on `count` seeded instances, comparing every
/// layer state with direct evaluation and accounting the two-party cut.
pub fn cmd_congest(task: Task, params: &TaskParams, seed: u64, count: usize) -> Result<CongestReport> {
    if count == 0 {
        return Err(invalid("congest needs at least one instance"));
    }
    let resolved = params.resolve(task)?;
    let (model, draw) = congest_model(task, params, seed)?;
    let roots = resolved.n + usize::from(model.append_end());
    let g = build_congest_graph(roots)?;
    let part = alice_bob_partition(&g);
    let mut runs = Vec::with_capacity(count);
    let mut summaries = Vec::with_capacity(count);
    let mut first: Option<ProtocolTrace> = None;
    let mut cut_size = 0;
    for k in 0..count {
        let s = instance_seed(seed, 0, k);
        let x = draw(s)?;
        let mut sim = simulate_transformer(&g, &model, &x)?;
        let direct = model.trace(&x)?;
        let mut diff: f64 = 0.0;
        for (a, b) in sim.states.iter().zip(&direct.states) {
            for (u, v) in a.data().iter().zip(b.data()) {
                let d = (u - v).abs();
                if d > diff || d.is_nan() {
                    diff = d;
                }
            }
        }
        let bits_match = output_bits(&sim.outputs) == output_bits(&run_transformer(&model, &x)?);
        let cut = sim.trace.attach_partition(&g, &part).clone();
        cut_size = cut.cut_size;
        let max_bits = model
            .attention_layers()
            .flat_map(|l| l.heads())
            .map(|h| h.precision().bits())
            .max()
            .unwrap_or(0);
        let bandwidth_ok = sim.trace.check_cut_bandwidth(max_bits).is_ok();
        runs.push(CongestRun {
            index: k,
            seed: s,
            bits_match,
            max_state_diff: diff,
            rounds: sim.trace.rounds,
            cut_bits: cut.cut_bits,
            bandwidth_ok,
        });
        summaries.push(sim.trace.summary());
        if first.is_none() {
            first = Some(sim.trace);
        }
    }
    let trace = first.expect("at least one instance");
    let round_bound = trace.round_bound.clone();
    let fidelity_failures = runs
        .iter()
        .filter(|r| !r.bits_match || !(r.max_state_diff <= STATE_TOLERANCE))
        .count();
    let max_state_diff = runs.iter().map(|r| r.max_state_diff).fold(0.0, f64::max);
    let max_rounds = runs.iter().map(|r| r.rounds).max().unwrap_or(0);
    let cut_limit = roots * (ceil_log2(2 * roots) + 1);
    let within_round_bound = max_rounds <= round_bound.bound;
    let cut_within_limit = cut_size <= cut_limit;
    let bandwidth_ok = runs.iter().all(|r| r.bandwidth_ok);
    Ok(CongestReport {
        schema_version: REPORT_SCHEMA_VERSION,
        task: task.tag().to_string(),
        builder: model.provenance().builder.clone(),
        params: serde_json::to_value(&resolved)?,
        seed,
        instance_count: count,
        graph: GraphStats {
            n: g.n,
            nodes: g.node_count(),
            edges: g.edges.len(),
            max_degree: g.max_degree(),
            tree_depth: g.tree_depth(),
            cut_size,
            cut_limit,
            task_cut_size: cut_size_of(resolved.n)?,
        },
        round_bound,
        round_bound_constant: ROUND_BOUND_CONSTANT,
        fidelity_failures,
        max_state_diff,
        max_rounds,
        within_round_bound,
        cut_within_limit,
        bandwidth_ok,
        runs,
        trace,
        summaries,
        pass: fidelity_failures == 0 && within_round_bound && cut_within_limit && bandwidth_ok,
    })
}
