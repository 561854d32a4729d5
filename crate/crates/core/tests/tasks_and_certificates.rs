use attnverify::certificates::*;
use attnverify::numerics::{dot, FixedFormat};
use attnverify::tasks::*;
use proptest::prelude::*;

#[test]
fn disj_embeddings_decide_intersection() {
    for n in 1..=4 {
        for d in DisjInstance::all_pairs(n) {
            let q = embed_disj_qsa(&d).unwrap();
            let avg = qsa_oracle(&q)[(q.n - 1, 0)];
            assert_eq!(avg > -1.0, d.disj());
            let s = embed_disj_match3(&d, 2 * n as u64 + 2).unwrap();
            check_match3_restricted(&s).unwrap();
            assert_eq!(restricted_to_disj(&s).unwrap(), d);
            let bit = match_oracle_with(&s, MatchVariant::Match3, IndexRule::Distinct).unwrap()[0];
            assert_eq!(bit, d.disj());
        }
    }
    for d in DisjInstance::all_pairs(4) {
        for kind in [CycleKind::Cycle5, CycleKind::Dcycle3] {
            let g = embed_disj_graph(&d, kind).unwrap();
            assert_eq!(cycle_oracle(&g, kind).unwrap().iter().any(|&b| b), d.disj());
        }
    }
}

#[test]
fn instance_files_round_trip() {
    let draw = gen_planted_match3(10, 11, 4).unwrap();
    let f = InstanceFile {
        task: "planted-match3".into(),
        n: 10,
        params: serde_json::json!({"M": 11}),
        seed: Some(4),
        label: Some(serde_json::to_value(draw.label).unwrap()),
        instance: Instance::Sequence(draw.instance),
        source: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    f.write(&path).unwrap();
    assert_eq!(InstanceFile::read(&path).unwrap(), f);
}

#[test]
fn certificates_for_a_seeded_bank() {
    let bank = sample_key_bank(32, 3, 7).unwrap();
    assert!(bank.attempts() <= MAX_RESAMPLES);
    for y in probe_subsets(32, 3, 1).iter().take(100) {
        let c = dual_certificate(&bank, y).unwrap();
        let check = check_certificate(&bank, y, &c.w);
        assert!(check.holds(3), "{y:?}: {check:?}");
        assert!(check.max_on_support_error <= 1e-9);
    }
}

#[test]
fn quantized_certificates_stay_close() {
    let bank = sample_key_bank(16, 2, 3).unwrap();
    let fmt = FixedFormat::new(24, 14).unwrap();
    let w = dual_certificate(&bank, &[2, 9]).unwrap().w;
    let wq = quantize_certificate(&w, fmt);
    let err: f64 = w.iter().zip(&wq).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(err <= (w.len() as f64).sqrt() * fmt.step() / 2.0);
}

#[test]
fn cyclic_faces_separate() {
    let poly = CyclicPolytope::standard(10, 2).unwrap();
    let h = face_hyperplane(&poly, &[3, 7]).unwrap();
    for i in 1..=10 {
        let v = h.eval(&poly.theta(i));
        if i == 3 || i == 7 {
            assert!((v - 1.0).abs() < 1e-9);
        } else {
            assert!(v <= 1.0 - h.gap + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn cycle_oracle_matches_brute_force(n in 3usize..=7, density in 0.0f64..1.0, symmetric in any::<bool>(), seed in any::<u64>()) {
        let g = random_graph(n, density, symmetric, seed).unwrap();
        let kind = if symmetric { CycleKind::Cycle5 } else { CycleKind::Dcycle3 };
        prop_assert_eq!(cycle_oracle(&g, kind).unwrap(), cycle_oracle_brute(&g, kind).unwrap());
    }

    #[test]
    fn qsa_oracle_commutes_with_relabelling(seed in any::<u64>(), perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle()) {
        let inst = random_qsa(8, 3, 2, seed).unwrap();
        let out = qsa_oracle(&inst);
        let moved = qsa_oracle(&inst.permuted(&perm));
        prop_assert!(moved.max_abs_diff(&out.permute_rows(&perm)) <= 1e-12);
    }

    #[test]
    fn certificate_inner_products(seed in 0u64..50) {
        let bank = sample_key_bank(12, 2, seed).unwrap();
        let y = [1 + (seed as usize % 12), 1 + ((seed as usize + 5) % 12)];
        let c = dual_certificate(&bank, &y).unwrap();
        for &j in &y {
            prop_assert!((dot(bank.column(j), &c.w) - 1.0).abs() <= 1e-9);
        }
    }
}
