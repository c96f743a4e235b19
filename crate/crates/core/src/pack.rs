// SPDX-License-Identifier: Apache-2.0

//! Seed-based greedy clustering with a target input-pin utilization.
//!
//! Clusters grow around a seed primitive by absorbing the unclustered block
//! that shares the most nets with the cluster (ties to the lowest block id),
//! as long as capacity, pin limits and the utilization target allow it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{BlockId, BlockKind, Netlist};
use crate::vprnet::{cluster_ports, cluster_ports_by, ClusterError, ClusterMap, ClusterSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PackError {
    #[error("primitive `{name}` needs {inputs} input pins but a cluster has {limit}")]
    Unpackable {
        name: String,
        inputs: usize,
        limit: usize,
    },
    #[error("invalid pack config: {0}")]
    InvalidConfig(String),
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// CLB capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSpec {
    pub cluster_capacity: usize,
    pub cluster_inputs: usize,
    pub cluster_outputs: usize,
    pub clocks: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        ArchSpec {
            cluster_capacity: 10,
            cluster_inputs: 40,
            cluster_outputs: 10,
            clocks: 1,
        }
    }
}

impl ArchSpec {
    pub fn validate(&self) -> Result<(), PackError> {
        if self.cluster_capacity == 0 || self.cluster_inputs == 0 || self.cluster_outputs == 0 || self.clocks == 0 {
            return Err(PackError::InvalidArch("all capacities must be >= 1".into()));
        }
        Ok(())
    }

    /// Parse the `key = value` architecture file; missing keys keep defaults.
    pub fn from_toml(text: &str) -> Result<ArchSpec, PackError> {
        let arch: ArchSpec = toml::from_str(text).map_err(|e| PackError::InvalidArch(e.to_string()))?;
        arch.validate()?;
        Ok(arch)
    }

    /// External pins of a CLB, clocks excluded.
    pub fn total_pins(&self) -> usize {
        self.cluster_inputs + self.cluster_outputs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeedPolicy {
    /// Unclustered block with the most attached nets.
    MostPins,
    /// Unclustered block whose nets reach the most other pins.
    MostCriticalNets,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackConfig {
    pub target_ext_pin_util: f64,
    pub seed_policy: SeedPolicy,
    pub allow_unrelated: bool,
    /// Breaks ties between equally good seeds.
    pub rng_seed: u64,
}

impl Default for PackConfig {
    fn default() -> Self {
        PackConfig {
            target_ext_pin_util: 1.0,
            seed_policy: SeedPolicy::MostPins,
            allow_unrelated: false,
            rng_seed: 0,
        }
    }
}

impl PackConfig {
    pub fn input_limit(&self, arch: &ArchSpec) -> usize {
        ((self.target_ext_pin_util * arch.cluster_inputs as f64).floor() as usize).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct PackResult {
    pub cluster_map: ClusterMap,
    pub diagnostics: Vec<String>,
}

struct Packer<'a> {
    netlist: &'a Netlist,
    arch: &'a ArchSpec,
    input_limit: usize,
    in_cluster: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fit {
    Yes,
    /// Legal for the architecture but above the input-pin target.
    OverTarget,
    No,
}

impl Packer<'_> {
    fn fits(&mut self, members: &[BlockId], extra: BlockId) -> Fit {
        if members.len() + 1 > self.arch.cluster_capacity {
            return Fit::No;
        }
        self.in_cluster[extra] = true;
        let mut all = members.to_vec();
        all.push(extra);
        let in_cluster = &self.in_cluster;
        let ports = cluster_ports_by(self.netlist, &all, |b| in_cluster[b]);
        self.in_cluster[extra] = false;
        if ports.inputs.len() > self.arch.cluster_inputs
            || ports.outputs.len() > self.arch.cluster_outputs
            || ports.clocks.len() > self.arch.clocks
        {
            Fit::No
        } else if ports.inputs.len() > self.input_limit {
            Fit::OverTarget
        } else {
            Fit::Yes
        }
    }
}

fn seed_score(netlist: &Netlist, b: BlockId, policy: SeedPolicy) -> usize {
    let counted = netlist
        .block_nets(b)
        .iter()
        .map(|&n| netlist.net(n))
        .filter(|n| !n.dangling && !n.global);
    match policy {
        SeedPolicy::MostPins => counted.count(),
        SeedPolicy::MostCriticalNets => counted.map(|n| n.pin_count() - 1).sum(),
    }
}

/// Pack the logic primitives of `netlist` into CLBs. Pads become `io`
/// pseudo-clusters after all CLBs.
pub fn pack(netlist: &Netlist, arch: &ArchSpec, cfg: &PackConfig) -> Result<PackResult, PackError> {
    arch.validate()?;
    if !(0.0..=1.0).contains(&cfg.target_ext_pin_util) {
        return Err(PackError::InvalidConfig(
            "target_ext_pin_util must lie in [0, 1]".into(),
        ));
    }
    let input_limit = cfg.input_limit(arch);
    let mut diagnostics = Vec::new();

    let logic: Vec<BlockId> = netlist.logic_blocks().map(|b| b.id).collect();
    for &b in &logic {
        let alone = cluster_ports(netlist, &[b]);
        if alone.inputs.len() > arch.cluster_inputs {
            return Err(PackError::Unpackable {
                name: netlist.block(b).name.clone(),
                inputs: alone.inputs.len(),
                limit: arch.cluster_inputs,
            });
        }
    }

    // Seed order: score descending, ties by a seeded random rank.
    let mut rank: Vec<BlockId> = logic.clone();
    rank.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.rng_seed));
    let mut rank_of = vec![0usize; netlist.blocks().len()];
    for (r, &b) in rank.iter().enumerate() {
        rank_of[b] = r;
    }
    let mut seeds = logic.clone();
    seeds.sort_by_key(|&b| (std::cmp::Reverse(seed_score(netlist, b, cfg.seed_policy)), rank_of[b]));

    let mut unclustered: BTreeSet<BlockId> = logic.iter().copied().collect();
    let mut packer = Packer {
        netlist,
        arch,
        input_limit,
        in_cluster: vec![false; netlist.blocks().len()],
    };
    let mut specs = Vec::new();

    for seed in seeds {
        if !unclustered.remove(&seed) {
            continue;
        }
        let mut members = vec![seed];
        packer.in_cluster[seed] = true;

        let alone = cluster_ports(netlist, &[seed]);
        if alone.inputs.len() > input_limit || alone.outputs.len() > arch.cluster_outputs {
            diagnostics.push(format!(
                "`{}` alone exceeds the pin target ({} inputs, limit {}); left as a singleton",
                netlist.block(seed).name,
                alone.inputs.len(),
                input_limit
            ));
        } else {
            loop {
                let mut nets: Vec<usize> = members
                    .iter()
                    .flat_map(|&m| netlist.block_nets(m).iter().copied())
                    .filter(|&n| !netlist.net(n).dangling && !netlist.net(n).global)
                    .collect();
                nets.sort_unstable();
                nets.dedup();
                let mut attraction: BTreeMap<BlockId, usize> = BTreeMap::new();
                for n in nets {
                    for b in netlist.net(n).blocks() {
                        if unclustered.contains(&b) {
                            *attraction.entry(b).or_default() += 1;
                        }
                    }
                }
                let mut candidates: Vec<(usize, BlockId)> =
                    attraction.into_iter().map(|(b, a)| (a, b)).collect();
                candidates.sort_by_key(|&(a, b)| (std::cmp::Reverse(a), b));
                // The best candidate reaching the pin target closes the cluster.
                let mut pick = None;
                let mut closed = false;
                for &(_, b) in &candidates {
                    match packer.fits(&members, b) {
                        Fit::Yes => {
                            pick = Some(b);
                            break;
                        }
                        Fit::OverTarget => {
                            closed = true;
                            break;
                        }
                        Fit::No => {}
                    }
                }
                if pick.is_none() && !closed && cfg.allow_unrelated {
                    pick = unclustered
                        .iter()
                        .copied()
                        .find(|&b| packer.fits(&members, b) == Fit::Yes);
                }
                let Some(b) = pick else { break };
                unclustered.remove(&b);
                packer.in_cluster[b] = true;
                members.push(b);
            }
        }
        for &m in &members {
            packer.in_cluster[m] = false;
        }
        specs.push(ClusterSpec {
            name: netlist.block(seed).name.clone(),
            kind: "clb".into(),
            primitives: members,
            pins: None,
        });
    }

    let (cluster_map, warnings) = ClusterMap::build(netlist, specs)?;
    debug_assert!(warnings.is_empty());
    Ok(PackResult {
        cluster_map,
        diagnostics,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn port_list(netlist: &Netlist, nets: &[usize], width: usize) -> String {
    let mut toks: Vec<String> = nets.iter().map(|&n| escape(&netlist.net(n).name)).collect();
    while toks.len() < width {
        toks.push("open".into());
    }
    toks.join(" ")
}

fn leaf_instance(kind: BlockKind) -> &'static str {
    match kind {
        BlockKind::Lut => "lut",
        BlockKind::Latch => "ff",
        BlockKind::Blackbox => "bb",
        BlockKind::PrimaryInput => "inpad",
        BlockKind::PrimaryOutput => "outpad",
    }
}

/// Emit a simplified VPR-style `.net` document for a clustering.
/// CLB port lists are padded with `open` up to the architecture widths.
pub fn write_net(cm: &ClusterMap, netlist: &Netlist, arch: &ArchSpec) -> String {
    let mut out = String::new();
    let pads = |kind: BlockKind| -> String {
        netlist
            .blocks()
            .iter()
            .filter(|b| b.kind == kind)
            .map(|b| escape(&b.name))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let clocks: Vec<String> = netlist
        .nets()
        .iter()
        .filter(|n| n.global && !n.dangling)
        .map(|n| escape(&n.name))
        .collect();
    out.push_str("<?xml version=\"1.0\"?>\n");
    let _ = writeln!(
        out,
        "<block name=\"{}.net\" instance=\"FPGA_packed_netlist[0]\">",
        escape(netlist.name())
    );
    let _ = writeln!(out, "\t<inputs>{}</inputs>", pads(BlockKind::PrimaryInput));
    let _ = writeln!(out, "\t<outputs>{}</outputs>", pads(BlockKind::PrimaryOutput));
    let _ = writeln!(out, "\t<clocks>{}</clocks>", clocks.join(" "));

    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &cm.clusters {
        let idx = counters.entry(c.kind.as_str()).or_default();
        let ports = cluster_ports(netlist, &c.primitives);
        let (wi, wo, wc) = if c.kind == "clb" {
            (arch.cluster_inputs, arch.cluster_outputs, arch.clocks)
        } else {
            (1, 1, 0)
        };
        let _ = writeln!(
            out,
            "\t<block name=\"{}\" instance=\"{}[{}]\" mode=\"default\">",
            escape(&c.name),
            escape(&c.kind),
            idx
        );
        *idx += 1;
        let _ = writeln!(
            out,
            "\t\t<inputs>\n\t\t\t<port name=\"I\">{}</port>\n\t\t</inputs>",
            port_list(netlist, &ports.inputs, wi)
        );
        let _ = writeln!(
            out,
            "\t\t<outputs>\n\t\t\t<port name=\"O\">{}</port>\n\t\t</outputs>",
            port_list(netlist, &ports.outputs, wo)
        );
        let _ = writeln!(
            out,
            "\t\t<clocks>\n\t\t\t<port name=\"clk\">{}</port>\n\t\t</clocks>",
            port_list(netlist, &ports.clocks, wc)
        );
        for (k, &p) in c.primitives.iter().enumerate() {
            let b = netlist.block(p);
            let name = escape(&b.name);
            let _ = writeln!(
                out,
                "\t\t<block name=\"{name}\" instance=\"ble[{k}]\" mode=\"default\">\n\t\t\t<block name=\"{name}\" instance=\"{}[0]\"/>\n\t\t</block>",
                leaf_instance(b.kind)
            );
        }
        if c.kind == "clb" {
            for k in c.primitives.len()..arch.cluster_capacity {
                let _ = writeln!(out, "\t\t<block name=\"open\" instance=\"ble[{k}]\"/>");
            }
        }
        out.push_str("\t</block>\n");
    }
    out.push_str("</block>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::fixtures::two_lut_chain;
    use crate::vprnet::parse_vpr_net;

    #[test]
    fn chain_fits_one_cluster() {
        let n = two_lut_chain();
        let r = pack(&n, &ArchSpec::default(), &PackConfig::default()).unwrap();
        let clbs: Vec<_> = r.cluster_map.of_kind("clb").collect();
        assert_eq!(clbs.len(), 1);
        assert_eq!(clbs[0].size(), 2);
    }

    #[test]
    fn capacity_one_gives_singletons() {
        let n = two_lut_chain();
        let arch = ArchSpec {
            cluster_capacity: 1,
            ..Default::default()
        };
        let r = pack(&n, &arch, &PackConfig::default()).unwrap();
        assert_eq!(r.cluster_map.of_kind("clb").count(), 2);
        assert!(r.cluster_map.of_kind("clb").all(|c| c.size() == 1));
    }

    #[test]
    fn zero_util_limits_inputs_to_one() {
        let n = two_lut_chain();
        let cfg = PackConfig {
            target_ext_pin_util: 0.0,
            ..Default::default()
        };
        assert_eq!(cfg.input_limit(&ArchSpec::default()), 1);
        let r = pack(&n, &ArchSpec::default(), &cfg).unwrap();
        // absorbing the second LUT keeps a single input net
        assert_eq!(r.cluster_map.of_kind("clb").count(), 1);
    }

    #[test]
    fn singleton_diagnostic_when_block_exceeds_target() {
        let src = ".model m\n.inputs a b c\n.outputs y\n.names a b c y\n111 1\n.end\n";
        let n = crate::blif::parse_blif(src.as_bytes()).unwrap();
        let cfg = PackConfig {
            target_ext_pin_util: 0.0,
            ..Default::default()
        };
        let r = pack(&n, &ArchSpec::default(), &cfg).unwrap();
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.cluster_map.of_kind("clb").count(), 1);
    }

    #[test]
    fn unpackable_block() {
        let src = ".model m\n.inputs a b c\n.outputs y\n.names a b c y\n111 1\n.end\n";
        let n = crate::blif::parse_blif(src.as_bytes()).unwrap();
        let arch = ArchSpec {
            cluster_inputs: 2,
            ..Default::default()
        };
        assert!(matches!(
            pack(&n, &arch, &PackConfig::default()),
            Err(PackError::Unpackable { inputs: 3, limit: 2, .. })
        ));
    }

    #[test]
    fn write_then_parse_round_trip() {
        let n = two_lut_chain();
        let arch = ArchSpec {
            cluster_capacity: 1,
            ..Default::default()
        };
        let r = pack(&n, &arch, &PackConfig::default()).unwrap();
        let text = write_net(&r.cluster_map, &n, &arch);
        assert_eq!(text.matches("instance=\"clb[").count(), 2);
        assert!(text.contains("open open"));
        let back = parse_vpr_net(text.as_bytes(), &n).unwrap();
        assert_eq!(back.cluster_map, r.cluster_map);
        assert!(back.warnings.is_empty());
    }

    #[test]
    fn arch_file() {
        let a = ArchSpec::from_toml("cluster_capacity = 8\ncluster_inputs = 24\n").unwrap();
        assert_eq!(a.cluster_capacity, 8);
        assert_eq!(a.cluster_outputs, 10);
        assert!(ArchSpec::from_toml("bogus = 1").is_err());
        assert!(ArchSpec::from_toml("clocks = 0").is_err());
    }
}
