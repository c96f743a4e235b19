// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rentlens::netlist::Netlist;
use rentlens::partition::{
    bipartition, external_terminals, recursive_partition, side_limit, PartitionConfig,
    PartitionNode,
};

use common::{cut_of_sets, exhaustive_min_cut, netlist_from_nets, random_nets};

fn all(n: usize) -> BTreeSet<usize> {
    (0..n).collect()
}

#[test]
fn bipartition_never_beats_exhaustive_optimum() {
    let cfg = PartitionConfig {
        restarts: 20,
        ..Default::default()
    };
    let mut hits = 0;
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let nets = random_nets(&mut rng, 10, 15);
        let nl = netlist_from_nets(10, &nets);
        let limit = side_limit(10, cfg.balance_epsilon) as usize;
        let opt = exhaustive_min_cut(10, &nets, limit);
        let got = bipartition(&nl, &all(10), &PartitionConfig { seed, ..cfg }).unwrap();
        assert_eq!(got.cut, cut_of_sets(&nets, &got.a), "reported cut is recomputable");
        assert!(got.a.len() <= limit && got.b.len() <= limit);
        assert!(got.cut >= opt);
        hits += usize::from(got.cut == opt);
    }
    assert!(hits >= 38, "{hits}/40 optimal");
}

fn check_tree(nl: &Netlist, node: &PartitionNode) {
    let set: BTreeSet<usize> = node.block_ids.iter().copied().collect();
    assert_eq!(node.b as usize, set.len());
    assert_eq!(node.t, external_terminals(nl, &set));
    if let [a, b] = node.children.as_slice() {
        let mut union: Vec<usize> = a.block_ids.iter().chain(&b.block_ids).copied().collect();
        union.sort_unstable();
        assert_eq!(union, node.block_ids);
        assert!(a.block_ids.iter().all(|x| !b.block_ids.contains(x)));
        assert_eq!(a.depth, node.depth + 1);
        check_tree(nl, a);
        check_tree(nl, b);
    } else {
        assert!(node.children.is_empty());
        assert_eq!(node.b, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Children partition their parent, and every node's T is its external net count.
    #[test]
    fn tree_nodes_partition_and_count_terminals(n in 2usize..40, m in 1usize..60, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = random_nets(&mut rng, n, m);
        let nl = netlist_from_nets(n, &nets);
        let tree = recursive_partition(&nl, &PartitionConfig { seed, restarts: 2, ..Default::default() }).unwrap();
        prop_assert_eq!(tree.iter().filter(|x| x.children.is_empty()).count(), n);
        check_tree(&nl, &tree);
    }

    /// Same seed, same tree.
    #[test]
    fn recursive_partition_is_deterministic(n in 2usize..60, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = random_nets(&mut rng, n, n + 5);
        let nl = netlist_from_nets(n, &nets);
        let cfg = PartitionConfig { seed, restarts: 3, ..Default::default() };
        prop_assert_eq!(recursive_partition(&nl, &cfg).unwrap(), recursive_partition(&nl, &cfg).unwrap());
    }

    /// Reported cut equals the recount and both sides honour the limit.
    #[test]
    fn bipartition_is_balanced(n in 2usize..50, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nets = random_nets(&mut rng, n, 2 * n);
        let nl = netlist_from_nets(n, &nets);
        let cfg = PartitionConfig { seed, restarts: 2, ..Default::default() };
        let got = bipartition(&nl, &all(n), &cfg).unwrap();
        let limit = side_limit(n as u64, cfg.balance_epsilon) as usize;
        prop_assert!(got.a.len() <= limit && got.b.len() <= limit);
        prop_assert_eq!(got.a.len() + got.b.len(), n);
        prop_assert_eq!(got.cut, cut_of_sets(&nets, &got.a));
    }
}
