// SPDX-License-Identifier: Apache-2.0

//! Weighted hypergraph view used by the partitioner.
//!
//! Nodes are partitionable primitives (or whole clusters), each with a weight
//! measured in primitives. A net carries an `external` flag when it also
//! reaches something outside the node set (a pad, a truncated boundary, or
//! nodes dropped by [`Hypergraph::induced`]); those nets are the terminals.

use crate::netlist::{Netlist, TerminalPolicy};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    weights: Vec<u64>,
    /// Caller-visible identity of every node (block id or cluster id).
    origin: Vec<usize>,
    nets: Vec<Vec<u32>>,
    external: Vec<bool>,
}

impl Hypergraph {
    /// `nets` pins must be distinct and in range. Nets with no pins are dropped,
    /// as are internal nets with a single pin (they can never be cut).
    pub fn new(weights: Vec<u64>, origin: Vec<usize>, nets: Vec<(Vec<u32>, bool)>) -> Self {
        assert_eq!(weights.len(), origin.len());
        let mut hg = Hypergraph {
            weights,
            origin,
            nets: Vec::with_capacity(nets.len()),
            external: Vec::with_capacity(nets.len()),
        };
        for (mut pins, ext) in nets {
            pins.sort_unstable();
            pins.dedup();
            if pins.is_empty() || (pins.len() == 1 && !ext) {
                continue;
            }
            hg.nets.push(pins);
            hg.external.push(ext);
        }
        hg
    }

    /// Logic blocks of `netlist` as unit-weight nodes. Nets touching pads or
    /// carrying a boundary pin are external; dangling nets and (optionally)
    /// globals are left out.
    pub fn from_netlist(netlist: &Netlist, policy: TerminalPolicy) -> Self {
        let mut node_of = vec![u32::MAX; netlist.blocks().len()];
        let mut origin = Vec::new();
        for b in netlist.logic_blocks() {
            node_of[b.id] = origin.len() as u32;
            origin.push(b.id);
        }
        let mut nets = Vec::new();
        for net in netlist.nets() {
            if !policy.counts(net) {
                continue;
            }
            let mut ext = net.boundary;
            let mut pins = Vec::new();
            for b in net.blocks() {
                match node_of[b] {
                    u32::MAX => ext = true,
                    n => pins.push(n),
                }
            }
            nets.push((pins, ext));
        }
        Hypergraph::new(vec![1; origin.len()], origin, nets)
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn nets(&self) -> &[Vec<u32>] {
        &self.nets
    }

    pub fn is_external(&self, net: usize) -> bool {
        self.external[net]
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    /// Number of nets leaving the node set.
    pub fn terminals(&self) -> u64 {
        self.external.iter().filter(|&&e| e).count() as u64
    }

    /// Number of nets with pins on both sides of `side`.
    pub fn cut(&self, side: &[u8]) -> u64 {
        self.nets
            .iter()
            .filter(|pins| {
                let s0 = side[pins[0] as usize];
                pins.iter().any(|&p| side[p as usize] != s0)
            })
            .count() as u64
    }

    /// Restriction to `nodes` (indices into this graph). Nets that lose
    /// pins become external.
    pub fn induced(&self, nodes: &[u32]) -> Hypergraph {
        let mut local = vec![u32::MAX; self.n_nodes()];
        for (i, &n) in nodes.iter().enumerate() {
            local[n as usize] = i as u32;
        }
        let weights = nodes.iter().map(|&n| self.weights[n as usize]).collect();
        let origin = nodes.iter().map(|&n| self.origin[n as usize]).collect();
        let mut nets = Vec::new();
        for (pins, &ext) in self.nets.iter().zip(&self.external) {
            let inside: Vec<u32> = pins
                .iter()
                .filter_map(|&p| match local[p as usize] {
                    u32::MAX => None,
                    l => Some(l),
                })
                .collect();
            if inside.is_empty() {
                continue;
            }
            let ext = ext || inside.len() < pins.len();
            nets.push((inside, ext));
        }
        Hypergraph::new(weights, origin, nets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn induced_marks_cut_nets_external() {
        // chain 0-1-2-3
        let hg = Hypergraph::new(
            vec![1; 4],
            (0..4).collect(),
            vec![(vec![0, 1], false), (vec![1, 2], false), (vec![2, 3], false)],
        );
        assert_eq!(hg.terminals(), 0);
        let left = hg.induced(&[0, 1]);
        assert_eq!(left.terminals(), 1);
        assert_eq!(left.origin(), &[0, 1]);
        assert_eq!(hg.cut(&[0, 0, 1, 1]), 1);
    }
}
