// SPDX-License-Identifier: Apache-2.0

//! Flat single-model BLIF reader and writer.
//!
//! Supported: `.model .inputs .outputs .names .latch .subckt .clock .end`,
//! `#` comments and `\` line continuation. `.attr`, `.param` and `.cname`
//! annotations are skipped. Cover rows of `.names` are kept as opaque text.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::netlist::{BlockKind, NetId, Netlist, NetlistBuilder, NetlistError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlifError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("net `{0}` has multiple drivers")]
    MultipleDrivers(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlifWarning {
    /// Net has sinks but nothing drives it; it is kept and marked dangling.
    UndrivenNet(String),
    /// Latch clock with no driver; an implicit primary input was created.
    ImplicitClockInput(String),
}

impl std::fmt::Display for BlifWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlifWarning::UndrivenNet(n) => write!(f, "net `{n}` is undriven"),
            BlifWarning::ImplicitClockInput(n) => {
                write!(f, "clock `{n}` is undriven; adding an implicit primary input")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Names,
    Subckt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlifGate {
    pub kind: GateKind,
    /// `.names` output net, or the `.subckt` model name.
    pub output: String,
    /// `.names` input nets, or `formal=actual` pairs for `.subckt`.
    pub inputs: Vec<String>,
    pub cover: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlifLatch {
    pub input: String,
    pub output: String,
    pub latch_type: Option<String>,
    pub clock: Option<String>,
    pub init: Option<String>,
}

/// Syntax-level view of one model, before nets are unified.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlifModel {
    pub model_name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub clocks: Vec<String>,
    pub gates: Vec<BlifGate>,
    pub latches: Vec<BlifLatch>,
}

struct LogicalLine {
    line: usize,
    raw: String,
    text: String,
}

fn logical_lines(src: &str) -> Vec<LogicalLine> {
    let mut out = Vec::new();
    let mut pending: Option<LogicalLine> = None;
    for (i, raw) in src.lines().enumerate() {
        let no_comment = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = no_comment.trim_end();
        let (body, cont) = match trimmed.strip_suffix('\\') {
            Some(b) => (b, true),
            None => (trimmed, false),
        };
        let cur = pending.get_or_insert_with(|| LogicalLine {
            line: i + 1,
            raw: raw.to_string(),
            text: String::new(),
        });
        cur.text.push(' ');
        cur.text.push_str(body);
        if !cont {
            out.push(pending.take().unwrap());
        }
    }
    if let Some(p) = pending {
        out.push(p);
    }
    out.retain(|l| !l.text.trim().is_empty());
    out
}

fn syntax(l: &LogicalLine, token: Option<&str>, message: impl Into<String>) -> BlifError {
    let column = token
        .and_then(|t| l.raw.find(t))
        .or_else(|| l.raw.find(|c: char| !c.is_whitespace()))
        .map_or(1, |c| l.raw[..c].chars().count() + 1);
    BlifError::Syntax {
        line: l.line,
        column,
        message: message.into(),
    }
}

/// Tokenize and structure a BLIF file without resolving connectivity.
pub fn parse_blif_model(bytes: &[u8]) -> Result<BlifModel, BlifError> {
    let src = String::from_utf8_lossy(bytes);
    let lines = logical_lines(&src);
    let mut model: Option<BlifModel> = None;
    let mut ended = false;
    // Index of the gate currently collecting cover rows.
    let mut open_cover: Option<usize> = None;

    for l in &lines {
        let toks: Vec<&str> = l.text.split_whitespace().collect();
        let head = toks[0];
        if ended {
            return Err(syntax(l, Some(head), "content after `.end` (one model per file)"));
        }
        if !head.starts_with('.') {
            match (open_cover, model.as_mut()) {
                (Some(g), Some(m)) => {
                    m.gates[g].cover.push(toks.join(" "));
                    continue;
                }
                _ => return Err(syntax(l, Some(head), "cover row outside `.names`")),
            }
        }
        open_cover = None;
        if head == ".model" {
            if model.is_some() {
                return Err(syntax(l, Some(head), "nested `.model`"));
            }
            model = Some(BlifModel {
                model_name: toks.get(1).copied().unwrap_or("top").to_string(),
                ..Default::default()
            });
            continue;
        }
        let Some(m) = model.as_mut() else {
            return Err(syntax(l, Some(head), "expected `.model`"));
        };
        match head {
            ".inputs" => m.inputs.extend(toks[1..].iter().map(|s| s.to_string())),
            ".outputs" => m.outputs.extend(toks[1..].iter().map(|s| s.to_string())),
            ".clock" => m.clocks.extend(toks[1..].iter().map(|s| s.to_string())),
            ".names" => {
                if toks.len() < 2 {
                    return Err(syntax(l, Some(head), "`.names` needs an output net"));
                }
                let n = toks.len();
                m.gates.push(BlifGate {
                    kind: GateKind::Names,
                    output: toks[n - 1].to_string(),
                    inputs: toks[1..n - 1].iter().map(|s| s.to_string()).collect(),
                    cover: Vec::new(),
                });
                open_cover = Some(m.gates.len() - 1);
            }
            ".latch" => {
                let args = &toks[1..];
                let (latch_type, clock, init) = match args.len() {
                    2 => (None, None, None),
                    3 => (None, None, Some(args[2])),
                    4 => (Some(args[2]), Some(args[3]), None),
                    5 => (Some(args[2]), Some(args[3]), Some(args[4])),
                    _ => return Err(syntax(l, Some(head), "`.latch` takes 2 to 5 arguments")),
                };
                m.latches.push(BlifLatch {
                    input: args[0].to_string(),
                    output: args[1].to_string(),
                    latch_type: latch_type.map(str::to_string),
                    clock: clock.filter(|c| *c != "NIL").map(str::to_string),
                    init: init.map(str::to_string),
                });
            }
            ".subckt" => {
                if toks.len() < 2 {
                    return Err(syntax(l, Some(head), "`.subckt` needs a model name"));
                }
                for t in &toks[2..] {
                    match t.split_once('=') {
                        Some((f, a)) if !f.is_empty() && !a.is_empty() => {}
                        _ => return Err(syntax(l, Some(t), "expected `formal=actual`")),
                    }
                }
                m.gates.push(BlifGate {
                    kind: GateKind::Subckt,
                    output: toks[1].to_string(),
                    inputs: toks[2..].iter().map(|s| s.to_string()).collect(),
                    cover: Vec::new(),
                });
            }
            ".attr" | ".param" | ".cname" => {}
            ".end" => ended = true,
            other => {
                return Err(syntax(l, Some(other), format!("unsupported directive `{other}`")));
            }
        }
    }

    if !ended {
        let (line, column) = lines.last().map_or((0, 1), |l| (l.line, 1));
        return Err(BlifError::Syntax {
            line,
            column,
            message: "missing `.end`".into(),
        });
    }
    Ok(model.unwrap_or_default())
}

/// Parse BLIF bytes into a [`Netlist`], discarding warnings.
pub fn parse_blif(bytes: &[u8]) -> Result<Netlist, BlifError> {
    parse_blif_diag(bytes).map(|(n, _)| n)
}

/// Parse BLIF bytes, returning the netlist and non-fatal diagnostics.
pub fn parse_blif_diag(bytes: &[u8]) -> Result<(Netlist, Vec<BlifWarning>), BlifError> {
    let model = parse_blif_model(bytes)?;
    model_to_netlist(&model)
}

fn drive(b: &mut NetlistBuilder, net: NetId, blk: usize, port: &str, name: &str) -> Result<(), BlifError> {
    b.set_driver(net, blk, port)
        .map_err(|_| BlifError::MultipleDrivers(name.to_string()))
}

pub fn model_to_netlist(m: &BlifModel) -> Result<(Netlist, Vec<BlifWarning>), BlifError> {
    let mut warnings = Vec::new();
    let mut b = NetlistBuilder::new(m.model_name.clone());

    for name in &m.inputs {
        let blk = b.add_block(name.clone(), BlockKind::PrimaryInput);
        let net = b.net(name);
        drive(&mut b, net, blk, "inpad", name)?;
    }
    let mut subckts = Vec::new();
    for g in &m.gates {
        match g.kind {
            GateKind::Names => {
                let blk = b.add_block_with(g.output.clone(), BlockKind::Lut, g.cover.clone());
                for (i, inp) in g.inputs.iter().enumerate() {
                    let net = b.net(inp);
                    b.add_sink(net, blk, format!("in{i}"));
                }
                let net = b.net(&g.output);
                drive(&mut b, net, blk, "out", &g.output)?;
            }
            GateKind::Subckt => subckts.push(g),
        }
    }
    let mut latch_clocks = Vec::new();
    for l in &m.latches {
        let extra = vec![
            l.latch_type.clone().unwrap_or_default(),
            l.init.clone().unwrap_or_default(),
        ];
        let blk = b.add_block_with(l.output.clone(), BlockKind::Latch, extra);
        let d = b.net(&l.input);
        b.add_sink(d, blk, "D");
        let q = b.net(&l.output);
        drive(&mut b, q, blk, "Q", &l.output)?;
        if let Some(c) = &l.clock {
            let net = b.net(c);
            b.add_sink(net, blk, "clk");
            b.mark_global(net);
            latch_clocks.push(net);
        }
    }

    // Port directions of a blackbox are unknown without its model: a pin
    // drives its net iff nothing else does and no earlier subckt claimed it.
    let mut claimed: HashSet<NetId> = HashSet::new();
    for (k, g) in subckts.iter().enumerate() {
        let name = format!("{}#{k}", g.output);
        let blk = b.add_block_with(name, BlockKind::Blackbox, vec![g.output.clone()]);
        for conn in &g.inputs {
            let (formal, actual) = conn.split_once('=').expect("validated in tokenizer");
            let net = b.net(actual);
            if !b.has_driver(net) && !claimed.contains(&net) && !m.inputs.iter().any(|i| i == actual) {
                claimed.insert(net);
                drive(&mut b, net, blk, formal, actual)?;
            } else {
                b.add_sink(net, blk, formal);
            }
        }
    }

    for c in &m.clocks {
        if b.has_net(c) {
            let net = b.net(c);
            b.mark_global(net);
        }
    }
    for net in latch_clocks {
        if !b.has_driver(net) {
            let name = b.net_name(net).to_string();
            warnings.push(BlifWarning::ImplicitClockInput(name.clone()));
            let blk = b.add_block(name.clone(), BlockKind::PrimaryInput);
            drive(&mut b, net, blk, "inpad", &name)?;
        }
    }

    for name in &m.outputs {
        let blk = b.add_block(format!("out:{name}"), BlockKind::PrimaryOutput);
        let net = b.net(name);
        b.add_sink(net, blk, "outpad");
    }

    let nl_builder_undriven = b.undriven_nets();
    let netlist = b.finish()?;
    for id in nl_builder_undriven {
        let n = netlist.net(id);
        if !n.sinks.is_empty() {
            warnings.push(BlifWarning::UndrivenNet(n.name.clone()));
        }
    }
    Ok((netlist, warnings))
}

/// Serialize a netlist as a single BLIF model.
///
/// Pads become `.inputs`/`.outputs` entries named by their net; everything
/// else is written in block order. LUTs without cover rows get an AND cover.
pub fn write_blif(netlist: &Netlist) -> String {
    // Per-block pins: port -> (net, is_driver)
    let mut pins: Vec<BTreeMap<String, (NetId, bool)>> = vec![BTreeMap::new(); netlist.blocks().len()];
    for net in netlist.nets() {
        if let Some(d) = &net.driver {
            pins[d.block].insert(d.port.clone(), (net.id, true));
        }
        for s in &net.sinks {
            pins[s.block].insert(s.port.clone(), (net.id, false));
        }
    }
    let net_name = |id: NetId| netlist.net(id).name.as_str();
    let first_net = |blk: usize| pins[blk].values().next().map(|&(n, _)| net_name(n));

    let mut out = String::new();
    let _ = writeln!(out, ".model {}", if netlist.name().is_empty() { "top" } else { netlist.name() });
    let ins: Vec<&str> = netlist
        .blocks()
        .iter()
        .filter(|b| b.kind == BlockKind::PrimaryInput)
        .filter_map(|b| first_net(b.id))
        .collect();
    let outs: Vec<&str> = netlist
        .blocks()
        .iter()
        .filter(|b| b.kind == BlockKind::PrimaryOutput)
        .filter_map(|b| first_net(b.id))
        .collect();
    write_list(&mut out, ".inputs", &ins);
    write_list(&mut out, ".outputs", &outs);

    for blk in netlist.blocks() {
        let p = &pins[blk.id];
        match blk.kind {
            BlockKind::Lut => {
                let mut inputs: Vec<(usize, &str)> = p
                    .iter()
                    .filter_map(|(port, &(n, drv))| {
                        let idx = port.strip_prefix("in")?.parse::<usize>().ok()?;
                        (!drv).then(|| (idx, net_name(n)))
                    })
                    .collect();
                inputs.sort_unstable();
                let output = p.get("out").map_or(blk.name.as_str(), |&(n, _)| net_name(n));
                let mut toks: Vec<&str> = inputs.iter().map(|&(_, n)| n).collect();
                toks.push(output);
                write_list(&mut out, ".names", &toks);
                if blk.extra.is_empty() {
                    if inputs.is_empty() {
                        out.push_str("1\n");
                    } else {
                        let _ = writeln!(out, "{} 1", "1".repeat(inputs.len()));
                    }
                } else {
                    for row in &blk.extra {
                        let _ = writeln!(out, "{row}");
                    }
                }
            }
            BlockKind::Latch => {
                let d = p.get("D").map_or("", |&(n, _)| net_name(n));
                let q = p.get("Q").map_or(blk.name.as_str(), |&(n, _)| net_name(n));
                let ty = blk.extra.first().map(String::as_str).unwrap_or("");
                let init = blk.extra.get(1).map(String::as_str).unwrap_or("");
                let _ = write!(out, ".latch {d} {q}");
                if let Some(&(c, _)) = p.get("clk") {
                    let ty = if ty.is_empty() { "re" } else { ty };
                    let _ = write!(out, " {ty} {}", net_name(c));
                }
                if !init.is_empty() {
                    let _ = write!(out, " {init}");
                }
                out.push('\n');
            }
            BlockKind::Blackbox => {
                let model = blk.extra.first().map(String::as_str).unwrap_or("blackbox");
                let conns: Vec<String> = p
                    .iter()
                    .map(|(port, &(n, _))| format!("{port}={}", net_name(n)))
                    .collect();
                let mut toks: Vec<&str> = vec![model];
                toks.extend(conns.iter().map(String::as_str));
                write_list(&mut out, ".subckt", &toks);
            }
            BlockKind::PrimaryInput | BlockKind::PrimaryOutput => {}
        }
    }
    out.push_str(".end\n");
    out
}

fn write_list(out: &mut String, directive: &str, items: &[&str]) {
    out.push_str(directive);
    for (i, it) in items.iter().enumerate() {
        if i > 0 && i % 16 == 0 {
            out.push_str(" \\\n");
        }
        out.push(' ');
        out.push_str(it);
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::block_stats;

    const MINIMAL: &str = ".model c\n.inputs a b\n.outputs y\n.names a b y\n11 1\n.end\n";

    #[test]
    fn minimal_model() {
        let n = parse_blif(MINIMAL.as_bytes()).unwrap();
        assert_eq!(n.name(), "c");
        assert_eq!(n.blocks().len(), 4);
        assert_eq!(n.nets().len(), 3);
        let s = block_stats(&n).unwrap();
        assert_eq!(s.t, 3.0);
        let lut = n.block(n.find_block("y").unwrap());
        assert_eq!(lut.kind, BlockKind::Lut);
        assert_eq!(lut.extra, vec!["11 1".to_string()]);
    }

    #[test]
    fn latch_with_clock() {
        let src = MINIMAL.replace(".end", ".latch y q re clk 0\n.end");
        let (n, warnings) = parse_blif_diag(src.as_bytes()).unwrap();
        assert_eq!(n.blocks().len(), 6);
        let latch = n.block(n.find_block("q").unwrap());
        assert_eq!(latch.kind, BlockKind::Latch);
        assert_eq!(latch.pin_count, 3);
        let clk = n.nets().iter().find(|x| x.name == "clk").unwrap();
        assert!(clk.global && !clk.dangling);
        assert_eq!(warnings, vec![BlifWarning::ImplicitClockInput("clk".into())]);
        // q drives nothing
        assert!(n.nets().iter().find(|x| x.name == "q").unwrap().dangling);
    }

    #[test]
    fn missing_end_names_last_line() {
        let src = ".model c\n.inputs a\n.outputs y\n.names a y\n1 1\n";
        match parse_blif(src.as_bytes()) {
            Err(BlifError::Syntax { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_continuation() {
        let src = "# header\n.model m # trailing\n.inputs a \\\n  b\n.outputs y\n.names a \\\nb y\n11 1\n.end\n";
        let n = parse_blif(src.as_bytes()).unwrap();
        assert_eq!(n.blocks().len(), 4);
        let lut = n.find_block("y").unwrap();
        assert_eq!(n.block(lut).pin_count, 3);
    }

    #[test]
    fn multiple_drivers() {
        let src = ".model m\n.inputs a\n.outputs y\n.names a y\n1 1\n.names a y\n0 1\n.end\n";
        assert_eq!(
            parse_blif(src.as_bytes()),
            Err(BlifError::MultipleDrivers("y".into()))
        );
    }

    #[test]
    fn undriven_is_warning() {
        let src = ".model m\n.inputs a\n.outputs y\n.names a ghost y\n11 1\n.end\n";
        let (n, w) = parse_blif_diag(src.as_bytes()).unwrap();
        assert_eq!(w, vec![BlifWarning::UndrivenNet("ghost".into())]);
        assert!(n.nets().iter().find(|x| x.name == "ghost").unwrap().dangling);
    }

    #[test]
    fn subckt_becomes_blackbox() {
        let src = ".model m\n.inputs a b\n.outputs s\n.subckt adder x=a y=b sum=s\n.end\n";
        let n = parse_blif(src.as_bytes()).unwrap();
        let bb = n.blocks().iter().find(|b| b.kind == BlockKind::Blackbox).unwrap();
        assert_eq!(bb.pin_count, 3);
        let s = n.nets().iter().find(|x| x.name == "s").unwrap();
        assert_eq!(s.driver.as_ref().unwrap().port, "sum");
    }

    #[test]
    fn stray_cover_row_is_error() {
        let src = ".model m\n.inputs a\n11 1\n.end\n";
        assert!(matches!(
            parse_blif(src.as_bytes()),
            Err(BlifError::Syntax { line: 3, column: 1, .. })
        ));
    }

    #[test]
    fn empty_netlist_writes_skeleton() {
        let n = NetlistBuilder::new("e").finish().unwrap();
        let text = write_blif(&n);
        assert_eq!(text, ".model e\n.inputs\n.outputs\n.end\n");
        let back = parse_blif(text.as_bytes()).unwrap();
        assert!(back.blocks().is_empty());
    }

    #[test]
    fn round_trip_minimal() {
        let src = MINIMAL.replace(".end", ".latch y q re clk 0\n.end");
        let n = parse_blif(src.as_bytes()).unwrap();
        let back = parse_blif(write_blif(&n).as_bytes()).unwrap();
        assert_eq!(back.blocks().len(), n.blocks().len());
        assert_eq!(back.nets().len(), n.nets().len());
        assert_eq!(block_stats(&back).unwrap(), block_stats(&n).unwrap());
    }
}
