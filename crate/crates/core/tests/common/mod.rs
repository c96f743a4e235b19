// SPDX-License-Identifier: Apache-2.0

//! Helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::Rng;

use rentlens::netlist::{BlockKind, Netlist, NetlistBuilder};
use rentlens::rent::{Region, RentPoint};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// `n` logic blocks and `m` nets of 2..=4 distinct pins; the first pin drives.
pub fn random_nets(rng: &mut impl Rng, n: usize, m: usize) -> Vec<Vec<usize>> {
    (0..m)
        .map(|_| {
            let k = rng.gen_range(2..=4.min(n));
            sample(rng, n, k).into_vec()
        })
        .collect()
}

pub fn netlist_from_nets(n: usize, nets: &[Vec<usize>]) -> Netlist {
    let mut b = NetlistBuilder::new("h");
    for i in 0..n {
        b.add_block(format!("v{i}"), BlockKind::Blackbox);
    }
    for (k, pins) in nets.iter().enumerate() {
        let id = b.net(&format!("e{k}"));
        b.set_driver(id, pins[0], format!("o{k}")).unwrap();
        for &p in &pins[1..] {
            b.add_sink(id, p, format!("i{k}"));
        }
    }
    b.finish().unwrap()
}

pub fn cut_of(nets: &[Vec<usize>], in_a: &dyn Fn(usize) -> bool) -> u64 {
    nets.iter()
        .filter(|pins| {
            let s = in_a(pins[0]);
            pins.iter().any(|&p| in_a(p) != s)
        })
        .count() as u64
}

/// Minimum cut over every split of `n` unit nodes with both sides at most `limit`.
pub fn exhaustive_min_cut(n: usize, nets: &[Vec<usize>], limit: usize) -> u64 {
    let mut best = u64::MAX;
    for mask in 0u32..(1 << n) {
        let a = mask.count_ones() as usize;
        if a > limit || n - a > limit {
            continue;
        }
        best = best.min(cut_of(nets, &|v| mask >> v & 1 == 1));
    }
    best
}

pub fn cut_of_sets(nets: &[Vec<usize>], a: &BTreeSet<usize>) -> u64 {
    cut_of(nets, &|v| a.contains(&v))
}

/// Weighted least squares of `ln T` on `ln B` by solving the 2x2 normal
/// equations with Cramer's rule on raw moment sums. Returns `(t, r)`.
pub fn wls_oracle(points: &[RentPoint]) -> (f64, f64) {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let (x, y, w) = (p.b.ln(), p.t.ln(), p.weight);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let c = (sy * sxx - sx * sxy) / det;
    let r = (s * sxy - sx * sy) / det;
    (c.exp(), r)
}

pub fn point(b: f64, t: f64, depth: usize, weight: f64) -> RentPoint {
    RentPoint {
        b,
        t,
        depth,
        weight,
        region: Region::Prepack,
    }
}

/// Structural equality up to block and net order, keyed by names.
pub fn isomorphic(a: &Netlist, b: &Netlist) -> Result<(), String> {
    let blocks = |n: &Netlist| -> BTreeSet<(String, String, usize)> {
        n.blocks()
            .iter()
            .map(|blk| (blk.name.clone(), format!("{:?}", blk.kind), blk.pin_count))
            .collect()
    };
    if blocks(a) != blocks(b) {
        return Err("block sets differ".into());
    }
    type NetKey = (String, Option<(String, String)>, BTreeSet<(String, String)>, bool);
    let nets = |n: &Netlist| -> BTreeSet<NetKey> {
        n.nets()
            .iter()
            .map(|net| {
                let pin = |p: &rentlens::netlist::Pin| (n.block(p.block).name.clone(), p.port.clone());
                (
                    net.name.clone(),
                    net.driver.as_ref().map(pin),
                    net.sinks.iter().map(pin).collect(),
                    net.global,
                )
            })
            .collect()
    };
    if nets(a) != nets(b) {
        return Err("net sets differ".into());
    }
    Ok(())
}
