use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::params::{parse_cycle_kind, Resolved, Task, TaskParams};
use crate::certificates::DEFAULT_C0;
use crate::congest::ROUND_BOUND_CONSTANT;
use crate::constructions::{
    build_cycle_detector, build_match2, build_match3_bigram, build_match3_local,
    build_match3_multilayer, build_match3_restricted_twolayer, build_match3_third_order,
    build_qsa_fixed, build_qsa_inf, eval_match3_restricted, output_bits, qsa_attention_weights,
    QsaBuildSpec,
};
use crate::error::{invalid, Result};
use crate::numerics::norm2;
use crate::tasks::{
    cycle_oracle, embed_disj_graph, embed_disj_match3, embed_disj_qsa, gen_planted_match3,
    match_oracle, match_oracle_with, qsa_oracle, random_disj, random_graph, random_qsa,
    random_sequence, CycleKind, DisjInstance, GraphInstance, IndexRule, MatchVariant,
    QsaInstance, SequenceInstance,
};
use crate::transformer::{run_transformer, TransformerModel};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Domains up to this many instances are enumerated in full.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;
/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "ATTNVERIFY_WORKERS";
const MAX_EXAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchExample {
    pub index: usize,
    pub seed: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub task: String,
    pub builder: Option<String>,
    pub params: Value,
    pub instance_count: usize,
    pub exhaustive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub seeds: Vec<u64>,
    pub constants: Map<String, Value>,
    /// Task-specific side checks, such as attention-mass violations.
    pub checks: Map<String, Value>,
    pub mismatches: Vec<MismatchExample>,
    pub runtime_seconds: f64,
    pub pass: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// The report with its wall-clock field zeroed, for comparing runs.
    pub fn without_runtime(&self) -> Self {
        Self {
            runtime_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`] when it is set.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| invalid(format!("{WORKERS_ENV}={v} is not a worker count")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Seed of instance `k` in stream `stream` (0 random, 1 planted).
pub fn instance_seed(seed: u64, stream: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream << 40)
        .wrapping_add(k as u64)
}

enum Outcome {
    Bits { ok: bool, detail: String },
    Real { err: f64, detail: String },
}

struct Plan {
    exhaustive: bool,
    total: usize,
}

fn plan(domain: Option<u128>, count: usize, planted: usize) -> Plan {
    match domain {
        Some(d) if d <= EXHAUSTIVE_LIMIT => Plan {
            exhaustive: true,
            total: d as usize,
        },
        _ => Plan {
            exhaustive: false,
            total: count + planted,
        },
    }
}

fn pow(base: u128, exp: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

fn sequence_from_code(n: usize, m: u64, mut code: u128) -> Result<SequenceInstance> {
    let mut x = vec![0u64; n];
    for slot in x.iter_mut() {
        *slot = (code % m as u128) as u64 + 1;
        code /= m as u128;
    }
    SequenceInstance::new(m, x)
}

fn graph_from_code(n: usize, symmetric: bool, code: u128) -> GraphInstance {
    let mut g = GraphInstance::empty(n, symmetric);
    let mut bit = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j || (symmetric && j < i) {
                continue;
            }
            if (code >> bit) & 1 == 1 {
                g.set_edge(i, j, true);
                if symmetric {
                    g.set_edge(j, i, true);
                }
            }
            bit += 1;
        }
    }
    g
}

fn disj_from_code(n: usize, code: u128) -> DisjInstance {
    let bit = |k: usize| (code >> k) & 1 == 1;
    DisjInstance {
        a: (0..n).map(bit).collect(),
        b: (0..n).map(|k| bit(n + k)).collect(),
    }
}

/// Random pair with one shared element forced in.
fn intersecting_disj(n: usize, seed: u64) -> DisjInstance {
    let mut d = random_disj(n, seed);
    if n > 0 && !d.disj() {
        let k = (seed % n as u64) as usize;
        d.a[k] = true;
        d.b[k] = true;
    }
    d
}

fn bits_outcome(got: &[bool], want: &[bool]) -> Outcome {
    let ok = got == want;
    let detail = if ok {
        String::new()
    } else {
        let bad: Vec<usize> = (0..got.len()).filter(|&i| got[i] != want[i]).map(|i| i + 1).collect();
        format!("elements {bad:?} disagree with the oracle")
    };
    Outcome::Bits { ok, detail }
}

fn model_bits(model: &TransformerModel, x: &crate::numerics::Matrix) -> Result<Vec<bool>> {
    Ok(output_bits(&run_transformer(model, x)?))
}

/// Instance `k` for the sequence tasks: enumeration code, random draw or
/// planted draw.
fn sequence_instance(r: &Resolved, seed: u64, plan: &Plan, count: usize, k: usize) -> Result<(SequenceInstance, Option<u64>)> {
    if plan.exhaustive {
        return Ok((sequence_from_code(r.n, r.m, k as u128)?, None));
    }
    if k < count {
        let s = instance_seed(seed, 0, k);
        Ok((random_sequence(r.n, r.m, s)?, Some(s)))
    } else {
        let s = instance_seed(seed, 1, k - count);
        Ok((gen_planted_match3(r.n, r.m, s)?.instance, Some(s)))
    }
}

fn qsa_error(model: &TransformerModel, inst: &QsaInstance) -> Result<f64> {
    let out = run_transformer(model, &inst.to_matrix())?;
    let want = qsa_oracle(inst);
    let mut worst: f64 = 0.0;
    for i in (0..inst.n).filter(|&i| inst.active[i]) {
        let diff: Vec<f64> = out.row(i).iter().zip(want.row(i)).map(|(a, b)| a - b).collect();
        worst = worst.max(norm2(&diff));
    }
    Ok(worst)
}

/// Cells whose attention weight leaves the selection band: on-support in
/// `[(1 - ε/2)/q, (1 + ε/2)/q]`, off-support at most `ε/(2N)`.
pub fn attention_mass_violations(model: &TransformerModel, inst: &QsaInstance, eps: f64) -> Result<usize> {
    let w = qsa_attention_weights(model, inst)?;
    let q = inst.q as f64;
    let n = inst.n as f64;
    let mut bad = 0;
    for i in 0..inst.n {
        for j in 0..inst.n {
            let v = w[(i, j)];
            let ok = if inst.y[i].contains(&(j + 1)) {
                v >= (1.0 - eps / 2.0) / q && v <= (1.0 + eps / 2.0) / q
            } else {
                v <= eps / (2.0 * n)
            };
            bad += usize::from(!ok);
        }
    }
    Ok(bad)
}

fn run_all(total: usize, f: &(dyn Fn(usize) -> Result<(Outcome, Option<u64>)> + Sync)) -> Result<Vec<(Outcome, Option<u64>)>> {
    (0..total).into_par_iter().map(f).collect()
}

/// Builds the task's model (if any), checks it on every instance of the
/// plan and summarizes. The `disj-*` tasks check the embedding alone: the
/// oracle answer on the embedded instance must equal the DISJ answer.
pub fn cmd_verify(task: Task, params: &TaskParams, seed: u64, count: usize) -> Result<VerifyReport> {
    let start = Instant::now();
    let r = params.resolve(task)?;
    let mut checks = Map::new();
    let mut model: Option<TransformerModel> = None;
    let (plan, outcomes) = match task {
        Task::QsaFixed | Task::QsaInf => {
            let m = match task {
                Task::QsaFixed => build_qsa_fixed(&QsaBuildSpec::new(r.n, r.q, r.d_prime, r.eps, seed)?)?,
                _ => build_qsa_inf(r.n, r.q, r.d_prime, r.eps)?,
            };
            let p = plan(None, count, 0);
            let mass = std::sync::atomic::AtomicUsize::new(0);
            let fixed = task == Task::QsaFixed;
            let out = with_workers(|| {
                run_all(p.total, &|k| {
                    let s = instance_seed(seed, 0, k);
                    let inst = random_qsa(r.n, r.q, r.d_prime, s)?;
                    if fixed {
                        let v = attention_mass_violations(&m, &inst, r.eps)?;
                        mass.fetch_add(v, std::sync::atomic::Ordering::Relaxed);
                    }
                    Ok((Outcome::Real { err: qsa_error(&m, &inst)?, detail: String::new() }, Some(s)))
                })
            })??;
            if fixed {
                checks.insert("attention_mass_violations".into(), json!(mass.into_inner()));
            }
            model = Some(m);
            (p, out)
        }
        Task::Match2
        | Task::Match3Bigram
        | Task::Match3Local
        | Task::Match3Third
        | Task::Match3Multilayer => {
            let (m, variant) = match task {
                Task::Match2 => (build_match2(r.n, r.m)?, MatchVariant::Match2),
                Task::Match3Bigram => (build_match3_bigram(r.n, r.m)?, MatchVariant::Match3Bigram),
                Task::Match3Local => (
                    build_match3_local(r.n, r.m, r.k, seed)?,
                    MatchVariant::Match3Local { k: r.k },
                ),
                Task::Match3Third => (build_match3_third_order(r.n, r.m)?, MatchVariant::Match3),
                _ => (build_match3_multilayer(r.n, r.m, r.m_embed)?, MatchVariant::Match3),
            };
            let p = plan(pow(r.m as u128, r.n), count, r.planted);
            let out = with_workers(|| {
                run_all(p.total, &|k| {
                    let (inst, s) = sequence_instance(&r, seed, &p, count, k)?;
                    let got = model_bits(&m, &inst.to_matrix())?;
                    Ok((bits_outcome(&got, &match_oracle(&inst, variant)?), s))
                })
            })??;
            model = Some(m);
            (p, out)
        }
        Task::Match3Restricted | Task::DisjMatch3 => {
            if r.n < 3 || r.n % 2 == 0 {
                return Err(invalid(format!("{task} needs odd N >= 3, got {}", r.n)));
            }
            let half = (r.n - 1) / 2;
            let m = if task == Task::Match3Restricted {
                Some(build_match3_restricted_twolayer(r.n, r.m)?)
            } else {
                None
            };
            let p = plan(pow(4, half), count, r.planted);
            let out = with_workers(|| {
                run_all(p.total, &|k| {
                    let (d, s) = if p.exhaustive {
                        (disj_from_code(half, k as u128), None)
                    } else if k < count {
                        let s = instance_seed(seed, 0, k);
                        (random_disj(half, s), Some(s))
                    } else {
                        let s = instance_seed(seed, 1, k - count);
                        (intersecting_disj(half, s), Some(s))
                    };
                    let inst = embed_disj_match3(&d, r.m)?;
                    let oracle = match_oracle_with(&inst, MatchVariant::Match3, IndexRule::Distinct)?[0];
                    let outcome = match &m {
                        Some(model) => {
                            let got = eval_match3_restricted(model, &inst)?;
                            bits_outcome(&[got], &[oracle])
                        }
                        None => bits_outcome(&[oracle], &[d.disj()]),
                    };
                    Ok((outcome, s))
                })
            })??;
            model = m;
            (p, out)
        }
        Task::Dcycle3 | Task::Cycle5 => {
            let kind = if task == Task::Dcycle3 { CycleKind::Dcycle3 } else { CycleKind::Cycle5 };
            let symmetric = kind == CycleKind::Cycle5;
            let m = build_cycle_detector(kind, r.n)?;
            let free = if symmetric { r.n * (r.n - 1) / 2 } else { r.n * (r.n - 1) };
            let p = plan(pow(2, free), count, 0);
            let out = with_workers(|| {
                run_all(p.total, &|k| {
                    let (g, s) = if p.exhaustive {
                        (graph_from_code(r.n, symmetric, k as u128), None)
                    } else {
                        let s = instance_seed(seed, 0, k);
                        (random_graph(r.n, r.density, symmetric, s)?, Some(s))
                    };
                    let got = model_bits(&m, &g.to_matrix())?;
                    Ok((bits_outcome(&got, &cycle_oracle(&g, kind)?), s))
                })
            })??;
            model = Some(m);
            (p, out)
        }
        Task::DisjQsa => {
            let p = plan(pow(4, r.q), count, 0);
            let out = with_workers(|| {
                run_all(p.total, &|k| {
                    let (d, s) = if p.exhaustive {
                        (disj_from_code(r.q, k as u128), None)
                    } else {
                        let s = instance_seed(seed, 0, k);
                        (random_disj(r.q, s), Some(s))
                    };
                    let inst = embed_disj_qsa(&d)?;
                    let last = qsa_oracle(&inst)[(inst.n - 1, 0)];
                    // the average is -1 exactly when the sets are disjoint
                    Ok((bits_outcome(&[last > -1.0], &[d.disj()]), s))
                })
            })??;
            (p, out)
        }
        Task::DisjGraph => {
            let kind = parse_cycle_kind(&r.kind)?;
            let divisor = if kind == CycleKind::Cycle5 { 5 } else { 4 };
            if r.n % divisor != 0 || r.n == 0 {
                return Err(invalid(format!("{} embedding needs N divisible by {divisor}, got {}", r.kind, r.n)));
            }
            let side = r.n / divisor;
            let len = side * side;
            let p = plan(pow(4, len), count, 0);
            let out = with_workers(|| {
                run_all(p.total, &|k| {
                    let (d, s) = if p.exhaustive {
                        (disj_from_code(len, k as u128), None)
                    } else {
                        let s = instance_seed(seed, 0, k);
                        (random_disj(len, s), Some(s))
                    };
                    let g = embed_disj_graph(&d, kind)?;
                    let any = cycle_oracle(&g, kind)?.iter().any(|&b| b);
                    Ok((bits_outcome(&[any], &[d.disj()]), s))
                })
            })??;
            (p, out)
        }
    };

    let mut mismatches = Vec::new();
    let mut mismatch_count = 0;
    let mut max_error: f64 = 0.0;
    for (idx, (o, s)) in outcomes.iter().enumerate() {
        match o {
            Outcome::Bits { ok, detail } => {
                if !ok {
                    mismatch_count += 1;
                    if mismatches.len() < MAX_EXAMPLES {
                        mismatches.push(MismatchExample { index: idx, seed: *s, detail: detail.clone() });
                    }
                }
            }
            Outcome::Real { err, detail } => {
                if *err > max_error || err.is_nan() {
                    max_error = *err;
                }
                if *err > r.eps && mismatches.len() < MAX_EXAMPLES {
                    mismatches.push(MismatchExample {
                        index: idx,
                        seed: *s,
                        detail: format!("error {err:e} {detail}"),
                    });
                }
            }
        }
    }
    let real = task.is_real();
    let mass_ok = checks
        .get("attention_mass_violations")
        .map_or(true, |v| v.as_u64() == Some(0));
    let pass = mass_ok && if real { max_error <= r.eps } else { mismatch_count == 0 };

    let mut constants = Map::new();
    constants.insert("C0".into(), json!(DEFAULT_C0));
    constants.insert("round_bound_constant".into(), json!(ROUND_BOUND_CONSTANT));
    constants.insert("exhaustive_limit".into(), json!(EXHAUSTIVE_LIMIT as u64));
    let mut seeds = vec![seed];
    if let Some(m) = &model {
        for (k, v) in &m.provenance().constants {
            constants.insert(k.clone(), v.clone());
        }
        seeds.extend(m.provenance().seeds.iter().copied().filter(|&s| s != seed));
    }
    checks.insert("attention_mass_ok".into(), json!(mass_ok));
    if !real || task != Task::QsaFixed {
        checks.remove("attention_mass_ok");
    }
    Ok(VerifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        task: task.tag().to_string(),
        builder: model.as_ref().map(|m| m.provenance().builder.clone()),
        params: serde_json::to_value(&r)?,
        instance_count: plan.total,
        exhaustive: plan.exhaustive,
        mismatch_count: (!real).then_some(mismatch_count),
        max_error: real.then_some(max_error),
        tolerance: real.then_some(r.eps),
        seeds,
        constants,
        checks,
        mismatches,
        runtime_seconds: start.elapsed().as_secs_f64(),
        pass,
    })
}
