// SPDX-License-Identifier: Apache-2.0

//! Cluster-level view of a packed design and the VPR `.net` reader.
//!
//! A `.net` file is an XML tree: the root `<block>` holds one `<block>` per
//! top-level cluster (`instance="clb[3]"`, `instance="io[0]"`, ...), each with
//! `<inputs>/<outputs>/<clocks>` port lists and nested blocks down to the
//! primitives. Only the leaves and the top-level port occupancy are used.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::netlist::{BlockId, NetId, Netlist};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("no clusters of kind `{0}`")]
    NoSuchKind(String),
    #[error("cluster `{0}` contains no primitives")]
    EmptyCluster(String),
    #[error("primitive `{0}` appears in more than one cluster")]
    DuplicatePrimitive(String),
    #[error("unknown block id {0}")]
    UnknownBlock(BlockId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VprNetError {
    #[error("XML error: {0}")]
    Xml(String),
    #[error("primitive `{0}` is not in the pre-packing netlist")]
    UnknownPrimitive(String),
    #[error("malformed cluster instance `{0}`")]
    MalformedInstance(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    pub name: String,
    pub kind: String,
    /// Block ids, ascending.
    pub primitives: Vec<BlockId>,
    pub used_input_pins: usize,
    pub used_output_pins: usize,
    pub used_clock_pins: usize,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.primitives.len()
    }

    pub fn used_pins(&self, include_clocks: bool) -> usize {
        self.used_input_pins
            + self.used_output_pins
            + if include_clocks { self.used_clock_pins } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    pub clusters: Vec<Cluster>,
    /// Owning cluster of every block of the pre-packing netlist.
    pub primitive_owner: Vec<Option<usize>>,
}

/// Nets crossing the boundary of a block set, split by pin class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterPorts {
    /// Non-global nets driven outside with a sink inside.
    pub inputs: Vec<NetId>,
    /// Non-global nets driven inside with a pin outside.
    pub outputs: Vec<NetId>,
    /// Global nets entering the set.
    pub clocks: Vec<NetId>,
}

impl ClusterPorts {
    /// Distinct non-global crossing nets.
    pub fn terminals(&self) -> usize {
        self.inputs.len() + self.outputs.len()
    }
}

/// Classify the nets crossing the set `is_in` around `members`.
/// Dangling nets are never terminals.
pub fn cluster_ports_by(
    netlist: &Netlist,
    members: &[BlockId],
    is_in: impl Fn(BlockId) -> bool,
) -> ClusterPorts {
    let mut nets: Vec<NetId> = members
        .iter()
        .flat_map(|&b| netlist.block_nets(b).iter().copied())
        .collect();
    nets.sort_unstable();
    nets.dedup();
    let mut ports = ClusterPorts::default();
    for id in nets {
        let net = netlist.net(id);
        if net.dangling {
            continue;
        }
        let driver_in = net.driver.as_ref().is_some_and(|d| is_in(d.block));
        let outside = net.boundary
            || net.driver.as_ref().is_some_and(|d| !is_in(d.block))
            || net.sinks.iter().any(|s| !is_in(s.block));
        if !outside {
            continue;
        }
        if driver_in {
            ports.outputs.push(id);
        } else if net.global {
            ports.clocks.push(id);
        } else {
            ports.inputs.push(id);
        }
    }
    ports
}

pub fn cluster_ports(netlist: &Netlist, members: &[BlockId]) -> ClusterPorts {
    let set: BTreeSet<BlockId> = members.iter().copied().collect();
    cluster_ports_by(netlist, members, |b| set.contains(&b))
}

/// Input to [`ClusterMap::build`]. Pin counts default to the ones implied
/// by the netlist when not given.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub name: String,
    pub kind: String,
    pub primitives: Vec<BlockId>,
    pub pins: Option<(usize, usize, usize)>,
}

impl ClusterMap {
    /// Build from explicit groups, then give every block left over its own
    /// pseudo-cluster (`io` for pads, `unclustered` for logic).
    pub fn build(netlist: &Netlist, specs: Vec<ClusterSpec>) -> Result<(ClusterMap, Vec<String>), ClusterError> {
        let mut warnings = Vec::new();
        let n = netlist.blocks().len();
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut clusters = Vec::with_capacity(specs.len());
        let push = |clusters: &mut Vec<Cluster>, owner: &mut Vec<Option<usize>>, spec: ClusterSpec| {
            if spec.primitives.is_empty() {
                return Err(ClusterError::EmptyCluster(spec.name));
            }
            let id = clusters.len();
            let mut prims = spec.primitives;
            prims.sort_unstable();
            for &p in &prims {
                if p >= n {
                    return Err(ClusterError::UnknownBlock(p));
                }
                if owner[p].replace(id).is_some() {
                    return Err(ClusterError::DuplicatePrimitive(netlist.block(p).name.clone()));
                }
            }
            let (i, o, c) = spec.pins.unwrap_or_else(|| {
                let ports = cluster_ports(netlist, &prims);
                (ports.inputs.len(), ports.outputs.len(), ports.clocks.len())
            });
            clusters.push(Cluster {
                id,
                name: spec.name,
                kind: spec.kind,
                primitives: prims,
                used_input_pins: i,
                used_output_pins: o,
                used_clock_pins: c,
            });
            Ok(())
        };
        for spec in specs {
            push(&mut clusters, &mut owner, spec)?;
        }
        for b in netlist.blocks() {
            if owner[b.id].is_some() {
                continue;
            }
            let kind = if b.kind.is_io() {
                "io"
            } else {
                warnings.push(format!("primitive `{}` is not in any cluster", b.name));
                "unclustered"
            };
            push(
                &mut clusters,
                &mut owner,
                ClusterSpec {
                    name: b.name.clone(),
                    kind: kind.to_string(),
                    primitives: vec![b.id],
                    pins: None,
                },
            )?;
        }
        Ok((
            ClusterMap {
                clusters,
                primitive_owner: owner,
            },
            warnings,
        ))
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Cluster> + 'a {
        self.clusters.iter().filter(move |c| c.kind == kind)
    }

    /// Clusters holding at least one logic primitive.
    pub fn logic_clusters<'a>(&'a self, netlist: &'a Netlist) -> impl Iterator<Item = &'a Cluster> + 'a {
        self.clusters
            .iter()
            .filter(move |c| c.primitives.iter().any(|&p| netlist.block(p).kind.is_logic()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterAverages {
    pub b_avg: f64,
    pub t_avg: f64,
    pub n_clusters: usize,
}

/// Mean primitive count and mean used external pins over clusters of `kind`.
pub fn cluster_averages(
    cm: &ClusterMap,
    kind: &str,
    include_clocks: bool,
) -> Result<ClusterAverages, ClusterError> {
    let (mut b, mut t, mut n) = (0usize, 0usize, 0usize);
    for c in cm.of_kind(kind) {
        b += c.size();
        t += c.used_pins(include_clocks);
        n += 1;
    }
    if n == 0 {
        return Err(ClusterError::NoSuchKind(kind.to_string()));
    }
    Ok(ClusterAverages {
        b_avg: b as f64 / n as f64,
        t_avg: t as f64 / n as f64,
        n_clusters: n,
    })
}

#[derive(Debug, Clone)]
pub struct ParsedNet {
    pub cluster_map: ClusterMap,
    pub warnings: Vec<String>,
}

fn count_used(node: roxmltree::Node, tag: &str) -> usize {
    node.children()
        .filter(|c| c.has_tag_name(tag))
        .map(|list| {
            let ports: Vec<_> = list.children().filter(|p| p.has_tag_name("port")).collect();
            let texts: Vec<&str> = if ports.is_empty() {
                list.text().into_iter().collect()
            } else {
                ports.iter().filter_map(|p| p.text()).collect()
            };
            texts
                .iter()
                .flat_map(|t| t.split_whitespace())
                .filter(|tok| *tok != "open")
                .count()
        })
        .sum()
}

fn kind_of(instance: &str) -> Option<&str> {
    let (kind, rest) = instance.split_once('[')?;
    let idx = rest.strip_suffix(']')?;
    idx.parse::<usize>().ok()?;
    (!kind.is_empty()).then_some(kind)
}

/// Parse a packed `.net` file against its pre-packing netlist.
pub fn parse_vpr_net(text: &[u8], prepack: &Netlist) -> Result<ParsedNet, VprNetError> {
    let src = std::str::from_utf8(text).map_err(|e| VprNetError::Xml(e.to_string()))?;
    let doc = roxmltree::Document::parse(src).map_err(|e| VprNetError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("block") {
        return Err(VprNetError::Xml(format!(
            "root element is <{}>, expected <block>",
            root.tag_name().name()
        )));
    }
    let by_name: HashMap<&str, BlockId> = prepack
        .blocks()
        .iter()
        .map(|b| (b.name.as_str(), b.id))
        .collect();

    let mut specs = Vec::new();
    for cl in root.children().filter(|c| c.has_tag_name("block")) {
        let instance = cl.attribute("instance").unwrap_or("");
        let kind = kind_of(instance).ok_or_else(|| VprNetError::MalformedInstance(instance.to_string()))?;
        let name = cl.attribute("name").unwrap_or(instance).to_string();
        let mut prims = Vec::new();
        for leaf in cl.descendants().filter(|d| {
            d.has_tag_name("block") && *d != cl && !d.children().any(|c| c.has_tag_name("block"))
        }) {
            let lname = leaf.attribute("name").unwrap_or("open");
            if lname == "open" {
                continue;
            }
            let id = by_name
                .get(lname)
                .copied()
                .ok_or_else(|| VprNetError::UnknownPrimitive(lname.to_string()))?;
            prims.push(id);
        }
        specs.push(ClusterSpec {
            name,
            kind: kind.to_string(),
            primitives: prims,
            pins: Some((
                count_used(cl, "inputs"),
                count_used(cl, "outputs"),
                count_used(cl, "clocks"),
            )),
        });
    }

    let (cluster_map, mut warnings) = ClusterMap::build(prepack, specs)?;
    for c in &cluster_map.clusters {
        let ports = cluster_ports(prepack, &c.primitives);
        if ports.terminals() != c.used_pins(false) {
            warnings.push(format!(
                "cluster `{}`: {} pins used but {} nets cross its boundary",
                c.name,
                c.used_pins(false),
                ports.terminals()
            ));
        }
    }
    Ok(ParsedNet {
        cluster_map,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blif::parse_blif;

    const BLIF: &str = ".model m\n.inputs a b c\n.outputs y\n\
        .names a b n1\n11 1\n.names n1 c y\n11 1\n.end\n";

    const NET: &str = r#"<?xml version="1.0"?>
<block name="m.net" instance="FPGA_packed_netlist[0]">
  <inputs>a b c</inputs>
  <outputs>out:y</outputs>
  <clocks></clocks>
  <block name="y" instance="clb[0]" mode="default">
    <inputs>
      <port name="I">a b c open open open</port>
    </inputs>
    <outputs>
      <port name="O">y open</port>
    </outputs>
    <clocks>
      <port name="clk">open</port>
    </clocks>
    <block name="n1" instance="ble[0]" mode="default">
      <block name="n1" instance="lut[0]"/>
    </block>
    <block name="y" instance="ble[1]" mode="default">
      <block name="y" instance="lut[0]"/>
    </block>
    <block name="open" instance="ble[2]"/>
  </block>
</block>
"#;

    #[test]
    fn hand_written_net() {
        let pre = parse_blif(BLIF.as_bytes()).unwrap();
        let parsed = parse_vpr_net(NET.as_bytes(), &pre).unwrap();
        let cm = &parsed.cluster_map;
        let clbs: Vec<_> = cm.of_kind("clb").collect();
        assert_eq!(clbs.len(), 1);
        assert_eq!(clbs[0].size(), 2);
        assert_eq!(clbs[0].used_pins(false), 4);
        assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
        // pads got pseudo-clusters
        assert_eq!(cm.of_kind("io").count(), 4);
        assert!(cm.primitive_owner.iter().all(Option::is_some));
    }

    #[test]
    fn unknown_leaf() {
        let pre = parse_blif(BLIF.as_bytes()).unwrap();
        let bad = NET.replace(r#"name="y" instance="lut[0]""#, r#"name="zz" instance="lut[0]""#);
        assert_eq!(
            parse_vpr_net(bad.as_bytes(), &pre).unwrap_err(),
            VprNetError::UnknownPrimitive("zz".into())
        );
    }

    #[test]
    fn empty_cluster_and_bad_xml() {
        let pre = parse_blif(BLIF.as_bytes()).unwrap();
        let empty = r#"<block name="x" instance="top[0]"><block name="c" instance="clb[0]"><block name="open" instance="ble[0]"/></block></block>"#;
        assert_eq!(
            parse_vpr_net(empty.as_bytes(), &pre).unwrap_err(),
            VprNetError::Cluster(ClusterError::EmptyCluster("c".into()))
        );
        assert!(matches!(
            parse_vpr_net(b"<block><oops></block>", &pre),
            Err(VprNetError::Xml(_))
        ));
    }

    #[test]
    fn port_mismatch_is_warning() {
        let pre = parse_blif(BLIF.as_bytes()).unwrap();
        let extra = NET.replace("a b c open open open", "a b c a open open");
        let parsed = parse_vpr_net(extra.as_bytes(), &pre).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn averages() {
        let mk = |id, size: usize, i, o| Cluster {
            id,
            name: format!("c{id}"),
            kind: "clb".into(),
            primitives: (0..size).collect(),
            used_input_pins: i,
            used_output_pins: o,
            used_clock_pins: 1,
        };
        let cm = ClusterMap {
            clusters: vec![mk(0, 4, 6, 2), mk(1, 6, 9, 3)],
            primitive_owner: vec![],
        };
        let a = cluster_averages(&cm, "clb", false).unwrap();
        assert_eq!((a.b_avg, a.t_avg, a.n_clusters), (5.0, 10.0, 2));
        let with_clk = cluster_averages(&cm, "clb", true).unwrap();
        assert_eq!(with_clk.t_avg, 11.0);
        assert_eq!(
            cluster_averages(&cm, "dsp", false),
            Err(ClusterError::NoSuchKind("dsp".into()))
        );
    }
}
