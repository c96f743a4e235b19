// SPDX-License-Identifier: Apache-2.0

//! Recursive min-cut bipartitioning of netlist hypergraphs.
//!
//! [`recursive_partition`] builds a full binary tree down to single blocks.
//! Every node records its weight `b` (primitives inside) and its external
//! terminal count `t`; those pairs are the raw samples of a Rent plot.
//!
//! Each node is split by [`fm::multilevel_bisect`] on the hypergraph induced
//! by its own blocks, with nets leaving the node kept as external, so the
//! terminal count at every depth is exact. Sibling subtrees are independent
//! and may run on different rayon workers; every node draws its RNG stream
//! from `(seed, path from root)`, so the tree does not depend on scheduling.

mod fm;
mod hypergraph;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{BlockId, Netlist, TerminalPolicy};

pub use hypergraph::Hypergraph;

pub(crate) use fm::mix;

/// Below this many nodes, children are built on the current thread.
const PARALLEL_MIN_NODES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("need at least two blocks to bipartition")]
    TooSmall,
    #[error("block weight {weight} exceeds the allowed side weight {limit}")]
    InfeasibleBalance { weight: u64, limit: u64 },
    #[error("netlist has no logic blocks")]
    EmptyNetlist,
    #[error("block {0} is not a logic block of this netlist")]
    NotLogic(BlockId),
    #[error("invalid partition config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub balance_epsilon: f64,
    pub restarts: usize,
    pub seed: u64,
    pub leaf_threshold: u64,
    pub coarsen_ratio: f64,
    pub ignore_globals: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            balance_epsilon: 0.1,
            restarts: 10,
            seed: 0,
            leaf_threshold: 1,
            coarsen_ratio: 0.5,
            ignore_globals: true,
        }
    }
}

impl PartitionConfig {
    pub fn policy(&self) -> TerminalPolicy {
        TerminalPolicy {
            ignore_globals: self.ignore_globals,
        }
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        if self.restarts < 1 {
            return Err(PartitionError::InvalidConfig("restarts must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.balance_epsilon) {
            return Err(PartitionError::InvalidConfig(
                "balance_epsilon must lie in [0, 0.5)".into(),
            ));
        }
        if !(self.coarsen_ratio > 0.0 && self.coarsen_ratio < 1.0) {
            return Err(PartitionError::InvalidConfig(
                "coarsen_ratio must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Node of the recursive bipartition tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionNode {
    pub depth: usize,
    /// Block ids (or cluster ids for cluster-level graphs), ascending.
    pub block_ids: Vec<usize>,
    /// Primitive weight inside the node.
    pub b: u64,
    /// External terminals of the node.
    pub t: u64,
    /// Cut of the split below this node, if it was split.
    pub cut: Option<u64>,
    pub children: Vec<PartitionNode>,
}

impl PartitionNode {
    /// Pre-order traversal.
    pub fn iter(&self) -> impl Iterator<Item = &PartitionNode> + '_ {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let n = stack.pop()?;
            stack.extend(n.children.iter().rev());
            Some(n)
        })
    }

    pub fn node_count(&self) -> usize {
        self.iter().count()
    }

    pub fn height(&self) -> usize {
        self.iter().map(|n| n.depth - self.depth).max().unwrap_or(0)
    }
}

/// Largest side weight a bisection of `total` may have: `|A - B| <= eps * total`,
/// relaxed to `ceil(total / 2)` when the tolerance is below one unit.
pub fn side_limit(total: u64, eps: f64) -> u64 {
    let strict = (total as f64 * (1.0 + eps) / 2.0).floor() as u64;
    strict.max(total.div_ceil(2))
}

/// Heaviest side of the greedy largest-first two-way split; always
/// achievable, so recursive splitting never gets stuck on heavy nodes.
fn greedy_side_weight(weights: &[u64]) -> u64 {
    let mut w = weights.to_vec();
    w.sort_unstable_by(|a, b| b.cmp(a));
    let mut sides = [0u64; 2];
    for x in w {
        let s = if sides[1] < sides[0] { 1 } else { 0 };
        sides[s] += x;
    }
    sides[0].max(sides[1])
}

fn greedy_split(weights: &[u64]) -> Vec<u8> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].cmp(&weights[a]).then(a.cmp(&b)));
    let mut side = vec![0u8; weights.len()];
    let mut sw = [0u64; 2];
    for v in order {
        let s = if sw[1] < sw[0] { 1 } else { 0 };
        side[v] = s as u8;
        sw[s] += weights[v];
    }
    side
}

/// Distinct counted nets with a pin inside `block_ids` and a pin (or a
/// boundary pin) outside.
pub fn external_terminals(netlist: &Netlist, block_ids: &BTreeSet<BlockId>) -> u64 {
    external_terminals_with(netlist, block_ids, TerminalPolicy::default())
}

pub fn external_terminals_with(
    netlist: &Netlist,
    block_ids: &BTreeSet<BlockId>,
    policy: TerminalPolicy,
) -> u64 {
    netlist
        .nets()
        .iter()
        .filter(|n| policy.counts(n))
        .filter(|n| {
            let blocks = n.blocks();
            let inside = blocks.iter().filter(|b| block_ids.contains(b)).count();
            inside > 0 && (inside < blocks.len() || n.boundary)
        })
        .count() as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    pub a: BTreeSet<BlockId>,
    pub b: BTreeSet<BlockId>,
    pub cut: u64,
}

/// Min-cut balanced bisection of the logic blocks `block_ids`.
pub fn bipartition(
    netlist: &Netlist,
    block_ids: &BTreeSet<BlockId>,
    cfg: &PartitionConfig,
) -> Result<Bipartition, PartitionError> {
    cfg.validate()?;
    if block_ids.len() < 2 {
        return Err(PartitionError::TooSmall);
    }
    let full = Hypergraph::from_netlist(netlist, cfg.policy());
    let mut node_of = vec![u32::MAX; netlist.blocks().len()];
    for (i, &b) in full.origin().iter().enumerate() {
        node_of[b] = i as u32;
    }
    let mut nodes = Vec::with_capacity(block_ids.len());
    for &b in block_ids {
        match node_of.get(b) {
            Some(&n) if n != u32::MAX => nodes.push(n),
            _ => return Err(PartitionError::NotLogic(b)),
        }
    }
    let hg = full.induced(&nodes);
    let limit = side_limit(hg.total_weight(), cfg.balance_epsilon);
    let heaviest = hg.weights().iter().copied().max().unwrap_or(0);
    if heaviest > limit {
        return Err(PartitionError::InfeasibleBalance {
            weight: heaviest,
            limit,
        });
    }
    let out = fm::multilevel_bisect(&hg, limit, cfg, cfg.seed);
    if !out.feasible {
        return Err(PartitionError::InfeasibleBalance {
            weight: heaviest,
            limit,
        });
    }
    let mut a = BTreeSet::new();
    let mut b = BTreeSet::new();
    for (i, &s) in out.side.iter().enumerate() {
        if s == 0 { &mut a } else { &mut b }.insert(hg.origin()[i]);
    }
    Ok(Bipartition { a, b, cut: out.cut })
}

/// Recursive bipartition tree over the logic blocks of `netlist`.
pub fn recursive_partition(
    netlist: &Netlist,
    cfg: &PartitionConfig,
) -> Result<PartitionNode, PartitionError> {
    let hg = Hypergraph::from_netlist(netlist, cfg.policy());
    recursive_partition_hypergraph(&hg, cfg)
}

/// Recursive bipartition tree over an arbitrary weighted hypergraph.
/// Nodes are split until they hold a single graph node or at most
/// `leaf_threshold` primitives.
pub fn recursive_partition_hypergraph(
    hg: &Hypergraph,
    cfg: &PartitionConfig,
) -> Result<PartitionNode, PartitionError> {
    cfg.validate()?;
    if hg.n_nodes() == 0 {
        return Err(PartitionError::EmptyNetlist);
    }
    Ok(build(hg, 0, cfg.seed, cfg))
}

fn build(hg: &Hypergraph, depth: usize, seed: u64, cfg: &PartitionConfig) -> PartitionNode {
    let b = hg.total_weight();
    let mut node = PartitionNode {
        depth,
        block_ids: {
            let mut ids = hg.origin().to_vec();
            ids.sort_unstable();
            ids
        },
        b,
        t: hg.terminals(),
        cut: None,
        children: Vec::new(),
    };
    if hg.n_nodes() < 2 || b <= cfg.leaf_threshold {
        return node;
    }

    let limit = side_limit(b, cfg.balance_epsilon).max(greedy_side_weight(hg.weights()));
    let out = fm::multilevel_bisect(hg, limit, cfg, seed);
    let side = if out.feasible { out.side } else { greedy_split(hg.weights()) };
    node.cut = Some(hg.cut(&side));

    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (i, &s) in side.iter().enumerate() {
        if s == 0 { &mut left } else { &mut right }.push(i as u32);
    }
    let (ha, hb) = (hg.induced(&left), hg.induced(&right));
    let (sa, sb) = (mix(seed, 1), mix(seed, 2));
    let (ca, cb) = if hg.n_nodes() >= PARALLEL_MIN_NODES {
        rayon::join(
            || build(&ha, depth + 1, sa, cfg),
            || build(&hb, depth + 1, sb, cfg),
        )
    } else {
        (build(&ha, depth + 1, sa, cfg), build(&hb, depth + 1, sb, cfg))
    };
    node.children = vec![ca, cb];
    node
}
