mod common;

use common::criteria::*;

#[test]
fn perturbations_match_oracles() {
    let graphs = test_graphs(150, 4);
    perturbation_oracle(&graphs).unwrap();
    fragmentation_identities(&graphs).unwrap();
}

#[test]
fn full_network_gradients() {
    gradient_checks(4).unwrap();
}

#[test]
fn graph_logits_ignore_node_order() {
    permutation_invariance(10).unwrap();
}

#[test]
fn auroc_matches_pair_counting() {
    auroc_oracle(200).unwrap();
}

#[test]
fn ward_matches_exhaustive_agglomeration() {
    ward_oracle(200, 20).unwrap();
}

/// Labeled graph counts per node count (all, connected) against the known
/// sequences 2^C(n,2) and 1, 1, 4, 38, 728.
#[test]
fn exhaustive_generator_counts() {
    let graphs = common::all_small_graphs(5, 0);
    for (n, all, connected) in [(1, 1, 1), (2, 2, 1), (3, 8, 4), (4, 64, 38), (5, 1024, 728)] {
        let of_n: Vec<_> = graphs.iter().filter(|g| g.n() == n).collect();
        let conn = of_n
            .iter()
            .filter(|g| common::is_connected_within(&common::adjacency_matrix(g), &(0..n).collect::<Vec<_>>()))
            .count();
        assert_eq!((of_n.len(), conn), (all, connected), "n = {n}");
    }
}
