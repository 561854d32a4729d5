use attnverify::congest::*;
use attnverify::constructions::{
    build_match2, build_match3_bigram, build_match3_local, build_match3_multilayer,
    build_match3_restricted_twolayer, build_qsa_fixed, build_qsa_inf, output_bits, QsaBuildSpec,
};
use attnverify::tasks::{embed_disj_match3, random_disj, random_qsa, random_sequence};
use attnverify::transformer::{run_transformer, TransformerModel};
use attnverify::numerics::Matrix;
use proptest::prelude::*;

fn ceil_log2(v: usize) -> usize {
    (usize::BITS - (v - 1).leading_zeros()) as usize
}

fn check_graph(n: usize) {
    let g = build_congest_graph(n).unwrap();
    g.validate().unwrap();
    assert!(g.max_degree() <= 3, "N = {n}");
    assert_eq!(g.node_count(), 3 * n * n - 2 * n, "N = {n}");
    assert!(g.node_count() <= 8 * n * n);
    let d = g.tree_depth();
    assert!(d <= ceil_log2(2 * n) + 1, "N = {n}: depth {d}");
    for (i, tree) in g.trees.iter().enumerate() {
        let leaves: Vec<NodeKind> = tree.leaves.iter().map(|&l| g.nodes[tree.global[l]]).collect();
        let want: Vec<NodeKind> = tree_leaf_order(n, i).into_iter().map(|(a, b)| NodeKind::Leaf { i: a, j: b }).collect();
        assert_eq!(leaves, want, "tree {i} leaf order");
    }
    assert!(g.root_diameter() <= 2 * d, "N = {n}");
    let p = alice_bob_partition(&g);
    check_partition_order(&g, &p).unwrap();
    assert!(cut_size(&g, &p) <= n * (ceil_log2(2 * n) + 1), "N = {n}");
}

#[test]
fn graph_invariants_up_to_128() {
    for n in 2..=128 {
        check_graph(n);
    }
}

#[test]
fn full_diameter_within_four_depths() {
    for n in 2..=12 {
        let g = build_congest_graph(n).unwrap();
        assert!(g.diameter() <= 4 * g.tree_depth(), "N = {n}");
    }
}

#[test]
fn small_graphs() {
    let g = build_congest_graph(2).unwrap();
    assert_eq!(g.tree_depth(), 2);
    assert_eq!(g.nodes.iter().filter(|k| matches!(k, NodeKind::Leaf { .. })).count(), 4);
    let p = alice_bob_partition(&g);
    assert_eq!((p.side[g.root(0)], p.side[g.root(1)]), (Side::Alice, Side::Bob));

    let g = build_congest_graph(6).unwrap();
    assert_eq!(g.nodes.iter().filter(|k| matches!(k, NodeKind::Leaf { .. })).count(), 36);
    assert_eq!(g.trees.len(), 6);
    assert_eq!(cut_size(&g, &alice_bob_partition(&g)), 6);
}

#[test]
fn leaves_follow_the_threshold_rule() {
    let g = build_congest_graph(7).unwrap();
    let p = alice_bob_partition(&g);
    for (v, k) in g.nodes.iter().enumerate() {
        if let NodeKind::Leaf { i, j } = *k {
            let alice = 2 * (i.min(j) + 1) <= 7;
            assert_eq!(p.side[v] == Side::Alice, alice, "leaf ({i}, {j})");
        }
    }
}

fn fidelity(model: &TransformerModel, inputs: &[Matrix]) {
    let rows = inputs[0].rows() + usize::from(model.append_end());
    let g = build_congest_graph(rows).unwrap();
    let part = alice_bob_partition(&g);
    for x in inputs {
        let mut sim = simulate_transformer(&g, model, x).unwrap();
        assert_eq!(output_bits(&sim.outputs), output_bits(&run_transformer(model, x).unwrap()));
        let direct = model.trace(x).unwrap();
        for (a, b) in sim.states.iter().zip(&direct.states) {
            assert!(a.max_abs_diff(b) <= 1e-9);
        }
        assert!(sim.trace.within_round_bound(), "{:?}", sim.trace.round_bound);
        sim.trace.attach_partition(&g, &part);
        let p = model.attention_layers().flat_map(|l| l.heads()).map(|h| h.precision().bits()).max().unwrap();
        sim.trace.check_cut_bandwidth(p).unwrap();
        let cut = sim.trace.cut.as_ref().unwrap();
        let per_payload: u64 = cut.cut_bits / cut.crossing_messages.max(1);
        assert_eq!(cut.cut_bits, per_payload * cut.crossing_messages);
    }
}

#[test]
fn pairwise_builders_simulate_faithfully() {
    let seqs = |n, m| (0..10).map(|s| random_sequence(n, m, s).unwrap().to_matrix()).collect::<Vec<_>>();
    fidelity(&build_match2(12, 13).unwrap(), &seqs(12, 13));
    fidelity(&build_match3_bigram(8, 11).unwrap(), &seqs(8, 11));
    fidelity(&build_match3_local(10, 11, 2, 3).unwrap(), &seqs(10, 11));
    let disj: Vec<Matrix> = (0..10)
        .map(|s| embed_disj_match3(&random_disj(4, s), 11).unwrap().to_matrix())
        .collect();
    fidelity(&build_match3_restricted_twolayer(9, 11).unwrap(), &disj);
    let qsa = |n, q| (0..5).map(|s| random_qsa(n, q, 4, s).unwrap().to_matrix()).collect::<Vec<_>>();
    fidelity(&build_qsa_fixed(&QsaBuildSpec::new(8, 2, 4, 0.1, 1).unwrap()).unwrap(), &qsa(8, 2));
    fidelity(&build_qsa_inf(8, 2, 4, 0.05).unwrap(), &qsa(8, 2));
}

#[test]
fn single_element_needs_no_rounds() {
    let model = build_match3_multilayer(1, 5, 6).unwrap();
    let g = build_congest_graph(1).unwrap();
    let x = random_sequence(1, 5, 0).unwrap().to_matrix();
    let sim = simulate_transformer(&g, &model, &x).unwrap();
    assert_eq!(sim.trace.rounds, 0);
    assert_eq!(sim.outputs.data(), run_transformer(&model, &x).unwrap().data());
}

#[test]
fn message_log_respects_edges_and_bandwidth() {
    let model = build_match2(5, 7).unwrap();
    let g = build_congest_graph(6).unwrap();
    let x = random_sequence(5, 7, 2).unwrap().to_matrix();
    let sim = simulate_transformer_with(&g, &model, &x, SimOptions { log_messages: true }).unwrap();
    let log = sim.trace.log.as_ref().unwrap();
    assert_eq!(log.len() as u64, sim.trace.messages);
    let mut seen = std::collections::HashSet::new();
    for m in log {
        assert!(g.edge_id(m.from, m.to).is_some());
        assert!(seen.insert((m.round, m.from, m.to)), "two payloads on one edge direction in a round");
        assert!(m.round < sim.trace.rounds);
    }
    let json = sim.trace.to_json().unwrap();
    assert!(json.contains("per_layer"));
}

#[test]
fn higher_order_models_are_rejected() {
    let model = attnverify::constructions::build_match3_third_order(4, 5).unwrap();
    let g = build_congest_graph(5).unwrap();
    let x = random_sequence(4, 5, 0).unwrap().to_matrix();
    assert!(matches!(simulate_transformer(&g, &model, &x), Err(attnverify::Error::Unsupported(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn match2_simulation_matches_direct(n in 2usize..=10, seed in any::<u64>()) {
        let m = attnverify::harness::next_prime(n as u64 + 1);
        let model = build_match2(n, m).unwrap();
        let g = build_congest_graph(n + 1).unwrap();
        let x = random_sequence(n, m, seed).unwrap().to_matrix();
        let sim = simulate_transformer(&g, &model, &x).unwrap();
        let direct = run_transformer(&model, &x).unwrap();
        prop_assert_eq!(sim.outputs.data(), direct.data());
    }

    #[test]
    fn partition_keeps_levels_ordered(n in 2usize..=48) {
        let g = build_congest_graph(n).unwrap();
        let p = alice_bob_partition(&g);
        prop_assert!(check_partition_order(&g, &p).is_ok());
        prop_assert_eq!(p.side.len(), g.node_count());
    }
}
