// SPDX-License-Identifier: Apache-2.0

//! Synthetic LUT netlists with a prescribed Rent exponent.
//!
//! Groups of primitives are merged pairwise from the bottom up. Every group
//! owns a list of open net fragments, each of which will leave the group, so
//! the fragment count is the group's terminal count. When two groups merge,
//! fragments from opposite halves are joined until `round(t * B^r)` remain.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blif::{parse_blif, BlifError};
use crate::netlist::Netlist;
use crate::partition::PartitionConfig;
use crate::rent::{analyze_prepack, AnalysisOptions, RentError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("cannot reach {target} terminals for a group of {blocks} blocks ({available} open fragments)")]
    InfeasibleSpec {
        blocks: usize,
        target: usize,
        available: usize,
    },
    #[error(transparent)]
    Blif(#[from] BlifError),
    #[error(transparent)]
    Rent(#[from] RentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_blocks: usize,
    pub target_r: f64,
    /// Pins per LUT: `t_block - 1` inputs and one output.
    pub t_block: usize,
    pub seed: u64,
    /// Fraction of primitives emitted as clocked latches instead of LUTs.
    pub latch_fraction: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            n_blocks: 256,
            target_r: 0.6,
            t_block: 5,
            seed: 0,
            latch_fraction: 0.0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.n_blocks < 2 {
            return Err(GenError::InvalidSpec("n_blocks must be >= 2".into()));
        }
        if !(self.target_r > 0.0 && self.target_r <= 1.0) {
            return Err(GenError::InvalidSpec("target_r must lie in (0, 1]".into()));
        }
        if self.t_block < 2 {
            return Err(GenError::InvalidSpec("t_block must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.latch_fraction) {
            return Err(GenError::InvalidSpec("latch_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Default)]
struct Fragment {
    driver: Option<usize>,
    /// (block, input index)
    sinks: Vec<(usize, usize)>,
}

struct Group {
    blocks: usize,
    /// Pins of all primitives in the group.
    pins: usize,
    open: Vec<usize>,
}

const MERGE_ATTEMPTS: usize = 16;

struct Builder {
    frags: Vec<Fragment>,
    closed: Vec<usize>,
    r: f64,
    /// Driven share of open fragments that closures maintain.
    driven_share: f64,
}

impl Builder {
    /// `round(t_g * B^r)` where `t_g` is the group's mean pins per primitive.
    fn target(&self, blocks: usize, pins: usize) -> usize {
        (pins as f64 * (blocks as f64).powf(self.r - 1.0)).round() as usize
    }

    fn join(&mut self, into: usize, from: usize) {
        let moved = std::mem::take(&mut self.frags[from]);
        let f = &mut self.frags[into];
        debug_assert!(f.driver.is_none() || moved.driver.is_none());
        f.driver = f.driver.or(moved.driver);
        f.sinks.extend(moved.sinks);
    }

    /// Merge two groups, redrawing the joins after a dead end.
    fn merge(&mut self, a: Group, b: Group, rng: &mut ChaCha8Rng) -> Result<Group, GenError> {
        let saved: Vec<(usize, Fragment)> = a.open.iter().chain(&b.open).map(|&f| (f, self.frags[f].clone())).collect();
        let n_closed = self.closed.len();
        let mut attempt = 1;
        loop {
            match self.try_merge(&a, &b, rng) {
                Ok(g) => return Ok(g),
                Err(e) if attempt == MERGE_ATTEMPTS || self.target(a.blocks + b.blocks, a.pins + b.pins) > saved.len() => {
                    return Err(e)
                }
                Err(_) => {
                    for (f, frag) in &saved {
                        self.frags[*f] = frag.clone();
                    }
                    self.closed.truncate(n_closed);
                    attempt += 1;
                }
            }
        }
    }

    fn try_merge(&mut self, a: &Group, b: &Group, rng: &mut ChaCha8Rng) -> Result<Group, GenError> {
        let blocks = a.blocks + b.blocks;
        let pins = a.pins + b.pins;
        let target = self.target(blocks, pins);
        let available = a.open.len() + b.open.len();
        if target > available {
            return Err(GenError::InfeasibleSpec {
                blocks,
                target,
                available,
            });
        }
        let mut need = available - target;
        let split = |frags: &[Fragment], open: &[usize]| -> (Vec<usize>, Vec<usize>) {
            open.iter().copied().partition(|&f| frags[f].driver.is_some())
        };
        let (mut ad, mut au) = split(&self.frags, &a.open);
        let (mut bd, mut bu) = split(&self.frags, &b.open);
        for v in [&mut ad, &mut au, &mut bd, &mut bu] {
            v.shuffle(rng);
        }
        let mut joined = Vec::new();
        let mut joined_driven = 0usize;
        while need > 0 {
            // pair kinds: (A undriven, B undriven), (A undriven, B driven), (A driven, B undriven)
            let w = [au.len() * bu.len(), au.len() * bd.len(), ad.len() * bu.len()];
            let total: usize = w.iter().sum();
            if total == 0 {
                // joined fragments span both halves; a partner is legal if the two share
                // no block and at most one has a driver
                let rest: Vec<usize> = [&au, &bu, &ad, &bd, &joined].into_iter().flatten().copied().collect();
                let driven = |f: usize| self.frags[f].driver.is_some();
                let blocks_of = |f: usize| {
                    let frag = &self.frags[f];
                    frag.sinks.iter().map(|&(b, _)| b).chain(frag.driver)
                };
                let disjoint = |x: usize, y: usize| blocks_of(x).all(|b| blocks_of(y).all(|c| c != b));
                let pair = joined.iter().find_map(|&x| {
                    rest.iter()
                        .find(|&&y| y != x && !(driven(x) && driven(y)) && disjoint(x, y))
                        .map(|&y| if driven(y) { (y, x) } else { (x, y) })
                });
                let Some((x, y)) = pair else {
                    return Err(GenError::InfeasibleSpec {
                        blocks,
                        target,
                        available,
                    });
                };
                for v in [&mut ad, &mut au, &mut bd, &mut bu, &mut joined] {
                    v.retain(|&f| f != x && f != y);
                }
                joined_driven = joined.iter().filter(|&&f| self.frags[f].driver.is_some()).count();
                self.join(x, y);
                let driven = self.frags[x].driver.is_some();
                joined_driven += usize::from(driven);
                joined.push(x);
                need -= 1;
                continue;
            }
            let mut pick = rng.gen_range(0..total);
            let kind = w
                .iter()
                .position(|&x| {
                    if pick < x {
                        true
                    } else {
                        pick -= x;
                        false
                    }
                })
                .expect("pick < total");
            let (x, y) = match kind {
                0 => (au.pop().unwrap(), bu.pop().unwrap()),
                1 => (bd.pop().unwrap(), au.pop().unwrap()),
                _ => (ad.pop().unwrap(), bu.pop().unwrap()),
            };
            self.join(x, y);
            let driven = self.frags[x].driver.is_some();
            let n_driven = ad.len() + bd.len() + joined_driven + usize::from(driven);
            let n_open = n_driven + au.len() + bu.len() + joined.len() - joined_driven;
            if driven && need >= 2 && n_driven as f64 > self.driven_share * n_open as f64 {
                self.closed.push(x);
                need -= 2;
            } else {
                joined_driven += usize::from(driven);
                joined.push(x);
                need -= 1;
            }
        }
        let mut open = joined;
        open.extend(ad);
        open.extend(au);
        open.extend(bd);
        open.extend(bu);
        open.sort_unstable();
        Ok(Group { blocks, pins, open })
    }
}

/// Build a netlist whose hierarchy follows `T = t * B^target_r`, with `t`
/// the mean pin count of the primitives involved (`t_block` without latches).
/// Leftover undriven fragments become primary inputs and leftover driven
/// ones primary outputs.
pub fn generate(spec: &GenSpec) -> Result<Netlist, GenError> {
    parse_blif(generate_blif(spec)?.as_bytes()).map_err(GenError::from)
}

/// [`generate`], returned as BLIF text.
pub fn generate_blif(spec: &GenSpec) -> Result<String, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.t_block - 1;
    let latch: Vec<bool> = (0..spec.n_blocks)
        .map(|_| spec.latch_fraction > 0.0 && rng.gen_bool(spec.latch_fraction))
        .collect();

    let n_latch = latch.iter().filter(|&&l| l).count();
    let n_pins = n_latch * 2 + (spec.n_blocks - n_latch) * spec.t_block;
    let mut bld = Builder {
        frags: Vec::new(),
        closed: Vec::new(),
        r: spec.target_r,
        driven_share: spec.n_blocks as f64 / n_pins as f64,
    };
    let mut groups = Vec::with_capacity(spec.n_blocks);
    for (blk, &is_latch) in latch.iter().enumerate() {
        let mut open = Vec::new();
        let inputs = if is_latch { 1 } else { k };
        for i in 0..inputs {
            open.push(bld.frags.len());
            bld.frags.push(Fragment {
                driver: None,
                sinks: vec![(blk, i)],
            });
        }
        open.push(bld.frags.len());
        bld.frags.push(Fragment {
            driver: Some(blk),
            sinks: Vec::new(),
        });
        groups.push(Group {
            blocks: 1,
            pins: open.len(),
            open,
        });
    }

    while groups.len() > 1 {
        groups.shuffle(&mut rng);
        let carry = if groups.len() % 2 == 1 { groups.pop() } else { None };
        let mut next = Vec::with_capacity(groups.len() / 2 + 1);
        let mut it = groups.into_iter();
        while let (Some(a), Some(b)) = (it.next(), it.next()) {
            next.push(bld.merge(a, b, &mut rng)?);
        }
        next.extend(carry);
        groups = next;
    }
    let top = groups.pop().expect("n_blocks >= 2");

    // net name per fragment; pin -> fragment
    let mut pin_net: Vec<Vec<String>> = latch
        .iter()
        .map(|&l| vec![String::new(); if l { 1 } else { k }])
        .collect();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut live: Vec<usize> = bld.closed.iter().chain(&top.open).copied().collect();
    live.sort_unstable();
    let open: std::collections::BTreeSet<usize> = top.open.iter().copied().collect();
    for f in live {
        let frag = &bld.frags[f];
        let name = match frag.driver {
            Some(d) => format!("n{d}"),
            None => {
                let name = format!("pi{}", inputs.len());
                inputs.push(name.clone());
                name
            }
        };
        if frag.driver.is_some() && open.contains(&f) {
            outputs.push(name.clone());
        }
        for &(b, i) in &frag.sinks {
            pin_net[b][i] = name.clone();
        }
    }
    let any_latch = latch.iter().any(|&l| l);
    if any_latch {
        inputs.push("clk".into());
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "# generated: n={} r={} t={} seed={}",
        spec.n_blocks, spec.target_r, spec.t_block, spec.seed
    );
    let _ = writeln!(out, ".model gnl");
    write_list(&mut out, ".inputs", &inputs);
    write_list(&mut out, ".outputs", &outputs);
    if any_latch {
        let _ = writeln!(out, ".clock clk");
    }
    for (b, &is_latch) in latch.iter().enumerate() {
        if is_latch {
            let _ = writeln!(out, ".latch {} n{b} re clk 0", pin_net[b][0]);
        } else {
            let _ = writeln!(out, ".names {} n{b}", pin_net[b].join(" "));
            let _ = writeln!(out, "{} 1", "1".repeat(k));
        }
    }
    out.push_str(".end\n");
    Ok(out)
}

fn write_list(out: &mut String, directive: &str, names: &[String]) {
    out.push_str(directive);
    for (i, n) in names.iter().enumerate() {
        if i > 0 && i % 16 == 0 {
            out.push_str(" \\\n");
        }
        out.push(' ');
        out.push_str(n);
    }
    out.push('\n');
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub spec: GenSpec,
    pub netlist: Netlist,
    pub fitted_r: f64,
}

/// Generate and fit every spec; results keep the input order.
pub fn sweep(
    specs: &[GenSpec],
    cfg: &PartitionConfig,
    opts: &AnalysisOptions,
) -> Result<Vec<SweepEntry>, GenError> {
    specs
        .par_iter()
        .map(|spec| {
            let netlist = generate(spec)?;
            let fitted_r = analyze_prepack(&netlist, cfg, opts)?.fit.r;
            Ok(SweepEntry {
                spec: *spec,
                netlist,
                fitted_r,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{block_stats, BlockKind, TerminalPolicy};

    #[test]
    fn two_blocks_linear_law_keeps_all_pins_external() {
        let spec = GenSpec {
            n_blocks: 2,
            target_r: 1.0,
            ..Default::default()
        };
        let n = generate(&spec).unwrap();
        // 8 inputs and 2 outputs, nothing shared
        let pis = n.blocks().iter().filter(|b| b.kind == BlockKind::PrimaryInput).count();
        let pos = n.blocks().iter().filter(|b| b.kind == BlockKind::PrimaryOutput).count();
        assert_eq!((pis, pos), (8, 2));
        assert_eq!(block_stats(&n).unwrap().t, 5.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GenSpec {
            n_blocks: 100,
            ..Default::default()
        };
        assert_eq!(generate_blif(&spec).unwrap(), generate_blif(&spec).unwrap());
        let other = GenSpec { seed: 1, ..spec };
        assert_ne!(generate_blif(&spec).unwrap(), generate_blif(&other).unwrap());
    }

    #[test]
    fn every_lut_pin_is_a_distinct_driven_net() {
        let spec = GenSpec {
            n_blocks: 300,
            target_r: 0.5,
            seed: 3,
            latch_fraction: 0.1,
            ..Default::default()
        };
        let n = generate(&spec).unwrap();
        assert!(n.nets().iter().all(|net| net.driver.is_some() && !net.dangling));
        for b in n.logic_blocks() {
            let want = if b.kind == BlockKind::Latch { 3 } else { 5 };
            assert_eq!(b.pin_count, want);
            let counted = if b.kind == BlockKind::Latch { 2 } else { 5 };
            assert_eq!(n.terminal_pins(b.id, TerminalPolicy::default()), counted);
        }
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            GenSpec { n_blocks: 1, ..Default::default() },
            GenSpec { target_r: 1.5, ..Default::default() },
            GenSpec { target_r: 0.0, ..Default::default() },
            GenSpec { t_block: 1, ..Default::default() },
        ] {
            assert!(matches!(generate(&spec), Err(GenError::InvalidSpec(_))));
        }
    }

    #[test]
    fn merged_fragments_can_absorb_more() {
        // latch pairs at low r join both undriven inputs first
        let spec = GenSpec {
            n_blocks: 78,
            target_r: 0.3,
            seed: 274,
            latch_fraction: 0.23198435609318463,
            ..Default::default()
        };
        let nl = generate(&spec).unwrap();
        assert_eq!(nl.n_logic(), 78);
        assert!(nl.nets().iter().all(|n| n.driver.is_some()));
    }

    #[test]
    fn empty_sweep() {
        let out = sweep(&[], &PartitionConfig::default(), &AnalysisOptions::default()).unwrap();
        assert!(out.is_empty());
    }
}
