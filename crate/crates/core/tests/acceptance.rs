//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any FAIL.

mod common;

use std::time::Instant;

use attnverify::certificates::{check_certificate, dual_certificate, probe_subsets, quantize_certificate, sample_key_bank, MAX_RESAMPLES};
use attnverify::congest::{alice_bob_partition, build_congest_graph, cut_size};
use attnverify::constructions::{build_cycle_detector, build_qsa_inf, output_bits, CertificateTable, QsaBuildSpec};
use attnverify::harness::{cmd_congest, cmd_verify, Task, TaskParams, VerifyReport};
use attnverify::tasks::{cycle_oracle, embed_disj_graph, random_disj, CycleKind};
use attnverify::transformer::run_transformer;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRng, RngAlgorithm, TestRunner};

type Outcome = Result<String, String>;

fn ceil_log2(v: usize) -> usize {
    (usize::BITS - (v - 1).leading_zeros()) as usize
}

fn verify(task: Task, p: TaskParams, seed: u64, count: usize) -> Result<VerifyReport, String> {
    cmd_verify(task, &p, seed, count).map_err(|e| format!("{task}: {e}"))
}

fn bits_ok(r: &VerifyReport, min_instances: usize) -> Result<(), String> {
    if r.mismatch_count != Some(0) || r.instance_count < min_instances || !r.pass {
        return Err(format!(
            "{}: {} instances, mismatches {:?}",
            r.task, r.instance_count, r.mismatch_count
        ));
    }
    Ok(())
}

fn qsa_fixed() -> Outcome {
    let p = TaskParams { n: Some(32), q: Some(4), d_prime: Some(4), eps: Some(0.1), ..Default::default() };
    let r = verify(Task::QsaFixed, p, 1, 200)?;
    let err = r.max_error.unwrap_or(f64::NAN);
    let mass = r.checks["attention_mass_violations"].as_u64().unwrap_or(u64::MAX);
    if r.instance_count == 200 && err <= 0.1 && mass == 0 {
        Ok(format!("200 instances, max error {err:.2e}, 0 attention-mass violations"))
    } else {
        Err(format!("max error {err:.3e}, {mass} attention-mass violations"))
    }
}

fn qsa_inf() -> Outcome {
    let p = TaskParams { n: Some(16), q: Some(2), d_prime: Some(4), eps: Some(0.05), ..Default::default() };
    let r = verify(Task::QsaInf, p, 1, 100)?;
    let err = r.max_error.unwrap_or(f64::NAN);
    let model = build_qsa_inf(16, 2, 4, 0.05).map_err(|e| e.to_string())?;
    let width = model.provenance().constants["embedding_dim"].as_u64().unwrap_or(0) as usize;
    let want = 4 + 4 * 2 + 2;
    if err <= 0.05 && width == want {
        Ok(format!("100 instances, max error {err:.2e}, embedding width {width} = d' + 4q + 2"))
    } else {
        Err(format!("max error {err:.3e}, embedding width {width} (want {want})"))
    }
}

fn certificates() -> Outcome {
    let (n, q, eps) = (64, 4, 0.1);
    let bank = sample_key_bank(n, q, 11).map_err(|e| e.to_string())?;
    if bank.attempts() > MAX_RESAMPLES {
        return Err(format!("{} resamples", bank.attempts()));
    }
    let spec = QsaBuildSpec::new(n, q, 4, eps, 11).map_err(|e| e.to_string())?;
    let limit = eps / (4.0 * spec.alpha);
    if spec.certificate_rounding_bound() > limit {
        return Err(format!("format admits rounding error {:e} > ε/(4α) = {limit:e}", spec.certificate_rounding_bound()));
    }
    let table = CertificateTable::new(n, q, spec.m_prime, bank.seed().unwrap_or(11), spec.alpha, spec.format);
    let qbank = table.bank();
    let (mut on, mut off, mut norm_ratio, mut rounding) = (0f64, 0f64, 0f64, 0f64);
    for y in probe_subsets(n, q, 5).iter().take(100) {
        for b in [&bank, qbank] {
            let c = dual_certificate(b, y).map_err(|e| format!("{y:?}: {e}"))?;
            let chk = check_certificate(b, y, &c.w);
            on = on.max(chk.max_on_support_error);
            off = off.max(chk.max_off_support);
            norm_ratio = norm_ratio.max(chk.norm / (2.0 * (q as f64).sqrt()));
            let wq = quantize_certificate(&c.w, spec.format);
            let d: f64 = c.w.iter().zip(&wq).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            rounding = rounding.max(d);
        }
    }
    let detail = format!(
        "{} draw(s); on-support error {on:.1e}, off-support {off:.3}, ‖w‖/2√q {norm_ratio:.3}, ‖w̃ - w‖ {rounding:.1e} <= {limit:.1e}",
        bank.attempts()
    );
    if on <= 1e-9 && off <= 0.5 && norm_ratio <= 1.0 && rounding <= limit {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn match2() -> Outcome {
    let small = verify(Task::Match2, TaskParams { n: Some(4), m: Some(5), ..Default::default() }, 0, 1)?;
    if !small.exhaustive || small.instance_count != 625 {
        return Err(format!("small domain checked {} instances, exhaustive {}", small.instance_count, small.exhaustive));
    }
    bits_ok(&small, 625)?;
    let large = verify(Task::Match2, TaskParams { n: Some(64), m: Some(1009), ..Default::default() }, 1, 500)?;
    bits_ok(&large, 500)?;
    Ok("625 exhaustive at N=4 M=5, 500 random at N=64 M=1009, 0 mismatches".into())
}

fn match3() -> Outcome {
    let cases = [
        (Task::Match3Bigram, 20, 23),
        (Task::Match3Local, 24, 29),
        (Task::Match3Third, 12, 13),
        (Task::Match3Multilayer, 16, 17),
        (Task::Match3Restricted, 21, 23),
    ];
    let mut parts = Vec::new();
    for (task, n, m) in cases {
        let p = TaskParams {
            n: Some(n),
            m: Some(m),
            k: Some(3),
            m_embed: Some(6),
            planted: Some(200),
            ..Default::default()
        };
        let r = verify(task, p, 7, 200)?;
        bits_ok(&r, 400)?;
        parts.push(format!("{task} N={n}"));
    }
    Ok(format!("200 random + 200 planted each, 0 mismatches: {}", parts.join(", ")))
}

fn graphs() -> Outcome {
    let d3 = verify(Task::Dcycle3, TaskParams { n: Some(12), ..Default::default() }, 3, 200)?;
    bits_ok(&d3, 200)?;
    let c5 = verify(Task::Cycle5, TaskParams { n: Some(10), ..Default::default() }, 3, 200)?;
    bits_ok(&c5, 200)?;
    for (kind, side) in [(CycleKind::Cycle5, 2), (CycleKind::Dcycle3, 3)] {
        let n = side * if kind == CycleKind::Cycle5 { 5 } else { 4 };
        let model = build_cycle_detector(kind, n).map_err(|e| e.to_string())?;
        for seed in 0..100 {
            let d = random_disj(side * side, seed);
            let g = embed_disj_graph(&d, kind).map_err(|e| e.to_string())?;
            let oracle = cycle_oracle(&g, kind).map_err(|e| e.to_string())?;
            let got = output_bits(&run_transformer(&model, &g.to_matrix()).map_err(|e| e.to_string())?);
            if got != oracle {
                return Err(format!("{kind:?} DISJ graph from seed {seed} disagrees with the oracle"));
            }
        }
    }
    Ok("200 random graphs each (dcycle3 N=12, cycle5 N=10) and 100 DISJ graphs per kind, 0 mismatches".into())
}

fn reductions() -> Outcome {
    let mut total = 0;
    let runs = [
        (Task::DisjQsa, TaskParams { q: Some(6), ..Default::default() }, true),
        (Task::DisjMatch3, TaskParams { n: Some(13), ..Default::default() }, true),
        (Task::DisjGraph, TaskParams { n: Some(10), kind: Some("cycle5".into()), ..Default::default() }, true),
        (Task::DisjGraph, TaskParams { n: Some(8), kind: Some("dcycle3".into()), ..Default::default() }, true),
        (Task::DisjQsa, TaskParams { q: Some(12), ..Default::default() }, false),
        (Task::DisjMatch3, TaskParams { n: Some(25), ..Default::default() }, false),
        (Task::DisjGraph, TaskParams { n: Some(20), kind: Some("cycle5".into()), ..Default::default() }, false),
        (Task::DisjGraph, TaskParams { n: Some(16), kind: Some("dcycle3".into()), ..Default::default() }, false),
    ];
    for (task, p, exhaustive) in runs {
        let r = verify(task, p, 4, 500)?;
        if r.exhaustive != exhaustive {
            return Err(format!("{task}: exhaustive flag {}", r.exhaustive));
        }
        bits_ok(&r, if exhaustive { 1 } else { 500 })?;
        total += r.instance_count;
    }
    Ok(format!("{total} pairs (4096 exhaustive for qsa and match3 at n=6, 256 per graph kind at n=4, 500 random per embedding beyond), 0 mismatches"))
}

fn congest() -> Outcome {
    let mut parts = Vec::new();
    for n in [6, 16, 32] {
        let r = cmd_congest(Task::Match2, &TaskParams { n: Some(n), ..Default::default() }, 8, 100)
            .map_err(|e| e.to_string())?;
        if !r.pass || r.fidelity_failures != 0 {
            return Err(format!("N={n}: {}", r.failures().join("; ")));
        }
        parts.push(format!("N={n} {}/{} rounds", r.max_rounds, r.round_bound.bound));
    }
    let g6 = build_congest_graph(6).map_err(|e| e.to_string())?;
    let c6 = cut_size(&g6, &alice_bob_partition(&g6));
    if c6 != 6 {
        return Err(format!("cut at N=6 is {c6}"));
    }
    for n in 2..=128 {
        let g = build_congest_graph(n).map_err(|e| e.to_string())?;
        let c = cut_size(&g, &alice_bob_partition(&g));
        let limit = n * (ceil_log2(2 * n) + 1);
        if c > limit {
            return Err(format!("cut at N={n} is {c} > {limit}"));
        }
    }
    Ok(format!("100 instances each bit-identical, {}; cut 6 at N=6, within N(⌈log₂ 2N⌉+1) for N ≤ 128", parts.join(", ")))
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    cases: u32,
    check: impl Fn(&S::Value) -> Result<(), String>,
) -> Result<u32, String> {
    let config = Config { cases, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    for _ in 0..cases {
        let value = strategy
            .new_tree(&mut runner)
            .map_err(|e| format!("{name}: {e}"))?
            .current();
        check(&value).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(cases)
}

fn properties() -> Outcome {
    let mut total = 0;
    total += run_property("permutation equivariance", common::attn_case(), 250, common::check_equivariance)?;
    total += run_property("convex combination", common::attn_case(), 250, common::check_convex)?;
    total += run_property("order-two reduction", common::attn_case(), 250, common::check_order_two)?;
    total += run_property("quantization bounds", common::quant_case(), 250, common::check_quantization)?;
    total += run_property("schedule partition", common::schedule_case(), 250, common::check_schedule)?;
    Ok(format!("{total} generated cases, 0 violations"))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 9] = [
        ("qSA fixed precision", 30.0, qsa_fixed),
        ("qSA infinite precision", 10.0, qsa_inf),
        ("dual certificates", f64::INFINITY, certificates),
        ("Match2", 20.0, match2),
        ("Match3 variants", 60.0, match3),
        ("graph attention", 60.0, graphs),
        ("reduction correspondences", f64::INFINITY, reductions),
        ("CONGEST simulation", 60.0, congest),
        ("structural invariants", 60.0, properties),
    ];
    let mut failed = 0;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(d) if secs < *budget => (true, d),
            Ok(d) => (false, format!("{d}; took {secs:.1} s, budget {budget} s")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!("{} {}. {name}: {detail} [{secs:.1} s]", if ok { "PASS" } else { "FAIL" }, k + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
