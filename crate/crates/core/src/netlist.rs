// SPDX-License-Identifier: Apache-2.0

//! Flat hypergraph netlist model.
//!
//! A [`Netlist`] is a list of primitive blocks (I/O pads, LUTs, latches and
//! opaque blackboxes) and a list of multi-pin nets. It is built once through
//! [`NetlistBuilder`] and is read-only afterwards.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type BlockId = usize;
pub type NetId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("netlist has no logic blocks")]
    EmptyNetlist,
    #[error("unknown block id {0}")]
    UnknownBlock(BlockId),
    #[error("net `{0}` has multiple drivers")]
    MultipleDrivers(String),
    #[error("I/O block `{0}` must attach to exactly one net in the proper direction")]
    InvalidIo(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BlockKind {
    PrimaryInput,
    PrimaryOutput,
    Lut,
    Latch,
    Blackbox,
}

impl BlockKind {
    /// Logic blocks are the partitionable primitives; pads are terminals.
    pub fn is_logic(self) -> bool {
        matches!(self, BlockKind::Lut | BlockKind::Latch | BlockKind::Blackbox)
    }

    pub fn is_io(self) -> bool {
        !self.is_logic()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub name: String,
    pub kind: BlockKind,
    /// Distinct nets attached to the block, driver and sinks together.
    pub pin_count: usize,
    /// Opaque format payload kept for re-emission: cover rows for LUTs,
    /// `[type, init]` for latches, `[model]` for blackboxes.
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pin {
    pub block: BlockId,
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    pub id: NetId,
    pub name: String,
    pub driver: Option<Pin>,
    pub sinks: Vec<Pin>,
    /// Fewer than two pins, or no driver at all. Never counted as a terminal.
    pub dangling: bool,
    /// Clock-like net routed on dedicated resources.
    pub global: bool,
    /// Net was truncated by [`induced_subnetlist`]; it owns one synthetic
    /// pin standing for everything outside the block set.
    pub boundary: bool,
}

impl Net {
    pub fn pin_count(&self) -> usize {
        self.driver.is_some() as usize + self.sinks.len() + self.boundary as usize
    }

    /// Blocks touched by the net, without duplicates, in ascending order.
    pub fn blocks(&self) -> Vec<BlockId> {
        let mut v: Vec<BlockId> = self
            .driver
            .iter()
            .chain(self.sinks.iter())
            .map(|p| p.block)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Which nets take part in terminal counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalPolicy {
    pub ignore_globals: bool,
}

impl Default for TerminalPolicy {
    fn default() -> Self {
        TerminalPolicy { ignore_globals: true }
    }
}

impl TerminalPolicy {
    pub fn counts(&self, net: &Net) -> bool {
        !net.dangling && !(self.ignore_globals && net.global)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    blocks: Vec<Block>,
    nets: Vec<Net>,
    block_nets: Vec<Vec<NetId>>,
}

impl Netlist {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id]
    }

    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id]
    }

    /// Distinct nets attached to a block, ascending.
    pub fn block_nets(&self, id: BlockId) -> &[NetId] {
        &self.block_nets[id]
    }

    pub fn logic_blocks(&self) -> impl Iterator<Item = &Block> + '_ {
        self.blocks.iter().filter(|b| b.kind.is_logic())
    }

    pub fn n_logic(&self) -> usize {
        self.logic_blocks().count()
    }

    pub fn find_block(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name)
    }

    /// Attached nets of `id` that count as terminals under `policy`.
    pub fn terminal_pins(&self, id: BlockId, policy: TerminalPolicy) -> usize {
        self.block_nets[id]
            .iter()
            .filter(|&&n| policy.counts(&self.nets[n]))
            .count()
    }
}

/// Incremental constructor. Nets are keyed by name.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    name: String,
    blocks: Vec<(String, BlockKind, Vec<String>)>,
    nets: Vec<Net>,
    net_index: HashMap<String, NetId>,
}

impl NetlistBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        NetlistBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_block(&mut self, name: impl Into<String>, kind: BlockKind) -> BlockId {
        self.add_block_with(name, kind, Vec::new())
    }

    pub fn add_block_with(
        &mut self,
        name: impl Into<String>,
        kind: BlockKind,
        extra: Vec<String>,
    ) -> BlockId {
        self.blocks.push((name.into(), kind, extra));
        self.blocks.len() - 1
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Get or create the net called `name`.
    pub fn net(&mut self, name: &str) -> NetId {
        if let Some(&id) = self.net_index.get(name) {
            return id;
        }
        let id = self.nets.len();
        self.nets.push(Net {
            id,
            name: name.to_string(),
            driver: None,
            sinks: Vec::new(),
            dangling: false,
            global: false,
            boundary: false,
        });
        self.net_index.insert(name.to_string(), id);
        id
    }

    pub fn net_name(&self, net: NetId) -> &str {
        &self.nets[net].name
    }

    pub fn has_net(&self, name: &str) -> bool {
        self.net_index.contains_key(name)
    }

    pub fn has_driver(&self, net: NetId) -> bool {
        self.nets[net].driver.is_some()
    }

    pub fn set_driver(
        &mut self,
        net: NetId,
        block: BlockId,
        port: impl Into<String>,
    ) -> Result<(), NetlistError> {
        let n = &mut self.nets[net];
        if n.driver.is_some() {
            return Err(NetlistError::MultipleDrivers(n.name.clone()));
        }
        n.driver = Some(Pin {
            block,
            port: port.into(),
        });
        Ok(())
    }

    pub fn add_sink(&mut self, net: NetId, block: BlockId, port: impl Into<String>) {
        self.nets[net].sinks.push(Pin {
            block,
            port: port.into(),
        });
    }

    pub fn mark_global(&mut self, net: NetId) {
        self.nets[net].global = true;
    }

    pub fn mark_boundary(&mut self, net: NetId) {
        self.nets[net].boundary = true;
    }

    /// Names of nets that have sinks but no driver yet.
    pub fn undriven_nets(&self) -> Vec<NetId> {
        self.nets
            .iter()
            .filter(|n| n.driver.is_none() && !n.boundary)
            .map(|n| n.id)
            .collect()
    }

    pub fn finish(self) -> Result<Netlist, NetlistError> {
        let n_blocks = self.blocks.len();
        let mut block_nets: Vec<Vec<NetId>> = vec![Vec::new(); n_blocks];
        let mut nets = self.nets;
        for net in nets.iter_mut() {
            for p in net.driver.iter().chain(net.sinks.iter()) {
                if p.block >= n_blocks {
                    return Err(NetlistError::UnknownBlock(p.block));
                }
            }
            net.dangling = net.dangling
                || net.pin_count() < 2
                || (net.driver.is_none() && !net.boundary);
            for b in net.blocks() {
                block_nets[b].push(net.id);
            }
        }
        let blocks: Vec<Block> = self
            .blocks
            .into_iter()
            .enumerate()
            .map(|(id, (name, kind, extra))| Block {
                id,
                name,
                kind,
                pin_count: block_nets[id].len(),
                extra,
            })
            .collect();

        for b in &blocks {
            let ok = match b.kind {
                BlockKind::PrimaryInput => {
                    block_nets[b.id].len() == 1
                        && nets[block_nets[b.id][0]]
                            .driver
                            .as_ref()
                            .is_some_and(|d| d.block == b.id)
                }
                BlockKind::PrimaryOutput => {
                    block_nets[b.id].len() == 1
                        && nets[block_nets[b.id][0]]
                            .sinks
                            .iter()
                            .any(|s| s.block == b.id)
                }
                _ => true,
            };
            if !ok {
                return Err(NetlistError::InvalidIo(b.name.clone()));
            }
        }

        Ok(Netlist {
            name: self.name,
            blocks,
            nets,
            block_nets,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockStats {
    pub n_blocks: usize,
    pub n_nets: usize,
    /// Mean `pin_count` over logic blocks.
    pub t: f64,
}

/// Block/net counts and the mean terminal count `t` of logic blocks.
///
/// Pads are terminals of the design, not partitionable logic, so they are
/// left out of the average.
pub fn block_stats(netlist: &Netlist) -> Result<BlockStats, NetlistError> {
    let (sum, n) = netlist
        .logic_blocks()
        .fold((0usize, 0usize), |(s, n), b| (s + b.pin_count, n + 1));
    if n == 0 {
        return Err(NetlistError::EmptyNetlist);
    }
    Ok(BlockStats {
        n_blocks: netlist.blocks.len(),
        n_nets: netlist.nets.len(),
        t: sum as f64 / n as f64,
    })
}

/// Mean number of counted terminal nets per logic block. Equals
/// `block_stats(..).t` when there are no global or dangling nets.
pub fn mean_block_terminals(netlist: &Netlist, policy: TerminalPolicy) -> Result<f64, NetlistError> {
    let (sum, n) = netlist
        .logic_blocks()
        .fold((0usize, 0usize), |(s, n), b| {
            (s + netlist.terminal_pins(b.id, policy), n + 1)
        });
    if n == 0 {
        return Err(NetlistError::EmptyNetlist);
    }
    Ok(sum as f64 / n as f64)
}

/// Sub-netlist made of exactly `block_ids`, renumbered in ascending id order.
///
/// Nets that leave the set keep only their inside pins and get a synthetic
/// boundary pin, so the terminal count of the set is preserved.
pub fn induced_subnetlist(
    netlist: &Netlist,
    block_ids: &BTreeSet<BlockId>,
) -> Result<Netlist, NetlistError> {
    if let Some(&bad) = block_ids.iter().find(|&&b| b >= netlist.blocks.len()) {
        return Err(NetlistError::UnknownBlock(bad));
    }
    let mut remap = vec![usize::MAX; netlist.blocks.len()];
    let mut builder = NetlistBuilder::new(netlist.name.clone());
    for &b in block_ids {
        let blk = &netlist.blocks[b];
        remap[b] = builder.add_block_with(blk.name.clone(), blk.kind, blk.extra.clone());
    }

    let mut touched: BTreeSet<NetId> = BTreeSet::new();
    for &b in block_ids {
        touched.extend(netlist.block_nets[b].iter().copied());
    }
    for &nid in &touched {
        let net = &netlist.nets[nid];
        let id = builder.net(&net.name);
        let mut outside = net.boundary;
        if let Some(d) = &net.driver {
            if remap[d.block] != usize::MAX {
                builder.set_driver(id, remap[d.block], d.port.clone())?;
            } else {
                outside = true;
            }
        }
        for s in &net.sinks {
            if remap[s.block] != usize::MAX {
                builder.add_sink(id, remap[s.block], s.port.clone());
            } else {
                outside = true;
            }
        }
        if outside {
            builder.mark_boundary(id);
        }
        if net.global {
            builder.mark_global(id);
        }
        builder.nets[id].dangling = net.dangling;
    }

    // Pads whose only net got truncated still satisfy the I/O invariant:
    // the direction of the inside pin is unchanged.
    builder.finish()
}
