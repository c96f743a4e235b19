// SPDX-License-Identifier: Apache-2.0

//! Multilevel bisection: heavy-edge coarsening, random balanced initial
//! split, and Fiduccia–Mattheyses refinement with gain buckets.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::hypergraph::Hypergraph;
use super::PartitionConfig;

/// Coarsening stops once a level has at most this many nodes.
const COARSEST_NODES: usize = 64;
/// Nets larger than this carry no useful locality for matching.
const MATCH_NET_LIMIT: usize = 50;
const MAX_PASSES: usize = 16;

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Connectivity-only level: nets with at least two pins, weighted by
/// multiplicity after contraction.
#[derive(Debug, Clone)]
struct Level {
    weights: Vec<u64>,
    nets: Vec<Vec<u32>>,
    net_w: Vec<u64>,
    node_nets: Vec<Vec<u32>>,
}

impl Level {
    fn new(weights: Vec<u64>, nets: Vec<Vec<u32>>, net_w: Vec<u64>) -> Self {
        let mut node_nets = vec![Vec::new(); weights.len()];
        for (e, pins) in nets.iter().enumerate() {
            for &p in pins {
                node_nets[p as usize].push(e as u32);
            }
        }
        Level {
            weights,
            nets,
            net_w,
            node_nets,
        }
    }

    fn from_hypergraph(hg: &Hypergraph) -> Self {
        let nets: Vec<Vec<u32>> = hg.nets().iter().filter(|p| p.len() >= 2).cloned().collect();
        let net_w = vec![1; nets.len()];
        Level::new(hg.weights().to_vec(), nets, net_w)
    }

    fn n(&self) -> usize {
        self.weights.len()
    }

    fn cut(&self, side: &[u8]) -> u64 {
        self.nets
            .iter()
            .zip(&self.net_w)
            .filter(|(pins, _)| {
                let s0 = side[pins[0] as usize];
                pins.iter().any(|&p| side[p as usize] != s0)
            })
            .map(|(_, &w)| w)
            .sum()
    }

    /// One round of heavy-edge matching. Returns the coarse level and the
    /// fine-to-coarse node map.
    fn coarsen(&self, rng: &mut ChaCha8Rng, cap: u64, target: usize) -> (Level, Vec<u32>) {
        let n = self.n();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.shuffle(rng);
        let mut mate = vec![u32::MAX; n];
        let mut rating = vec![0.0f64; n];
        let mut touched: Vec<u32> = Vec::new();
        let mut coarse_n = n;

        for &u in &order {
            if coarse_n <= target {
                break;
            }
            let ui = u as usize;
            if mate[ui] != u32::MAX {
                continue;
            }
            for &e in &self.node_nets[ui] {
                let pins = &self.nets[e as usize];
                if pins.len() > MATCH_NET_LIMIT {
                    continue;
                }
                let r = self.net_w[e as usize] as f64 / (pins.len() - 1) as f64;
                for &v in pins {
                    let vi = v as usize;
                    if v == u || mate[vi] != u32::MAX || self.weights[ui] + self.weights[vi] > cap {
                        continue;
                    }
                    if rating[vi] == 0.0 {
                        touched.push(v);
                    }
                    rating[vi] += r;
                }
            }
            let mut best: Option<u32> = None;
            for &v in &touched {
                best = match best {
                    None => Some(v),
                    Some(b) => {
                        let (rv, rb) = (rating[v as usize], rating[b as usize]);
                        if rv > rb || (rv == rb && v < b) {
                            Some(v)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            for &v in &touched {
                rating[v as usize] = 0.0;
            }
            touched.clear();
            match best {
                Some(v) => {
                    mate[ui] = v;
                    mate[v as usize] = u;
                    coarse_n -= 1;
                }
                None => mate[ui] = u,
            }
        }

        let mut cmap = vec![u32::MAX; n];
        let mut weights = Vec::with_capacity(coarse_n);
        for u in 0..n {
            if cmap[u] != u32::MAX {
                continue;
            }
            let c = weights.len() as u32;
            cmap[u] = c;
            let mut w = self.weights[u];
            let m = mate[u];
            if m != u32::MAX && m as usize != u {
                cmap[m as usize] = c;
                w += self.weights[m as usize];
            }
            weights.push(w);
        }

        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut nets: Vec<Vec<u32>> = Vec::new();
        let mut net_w: Vec<u64> = Vec::new();
        for (pins, &w) in self.nets.iter().zip(&self.net_w) {
            let mut cp: Vec<u32> = pins.iter().map(|&p| cmap[p as usize]).collect();
            cp.sort_unstable();
            cp.dedup();
            if cp.len() < 2 {
                continue;
            }
            match index.get(&cp) {
                Some(&i) => net_w[i] += w,
                None => {
                    index.insert(cp.clone(), nets.len());
                    nets.push(cp);
                    net_w.push(w);
                }
            }
        }
        (Level::new(weights, nets, net_w), cmap)
    }
}

fn imbalance(sw: [u64; 2], limit: u64) -> u64 {
    sw[0].max(sw[1]).saturating_sub(limit)
}

struct Fm<'a> {
    lvl: &'a Level,
    side: Vec<u8>,
    count: Vec<[u32; 2]>,
    sw: [u64; 2],
    gain: Vec<i64>,
    buckets: [BTreeMap<i64, BTreeSet<u32>>; 2],
    locked: Vec<bool>,
    limit: u64,
    slack: u64,
}

impl<'a> Fm<'a> {
    fn new(lvl: &'a Level, side: Vec<u8>, limit: u64) -> Self {
        let slack = lvl.weights.iter().copied().max().unwrap_or(0);
        let mut fm = Fm {
            lvl,
            side,
            count: vec![[0, 0]; lvl.nets.len()],
            sw: [0, 0],
            gain: vec![0; lvl.n()],
            buckets: [BTreeMap::new(), BTreeMap::new()],
            locked: vec![false; lvl.n()],
            limit,
            slack,
        };
        fm.recount();
        fm
    }

    fn recount(&mut self) {
        self.sw = [0, 0];
        for (v, &s) in self.side.iter().enumerate() {
            self.sw[s as usize] += self.lvl.weights[v];
        }
        for (e, pins) in self.lvl.nets.iter().enumerate() {
            let mut c = [0u32; 2];
            for &p in pins {
                c[self.side[p as usize] as usize] += 1;
            }
            self.count[e] = c;
        }
    }

    fn bucket_insert(&mut self, v: u32) {
        let s = self.side[v as usize] as usize;
        self.buckets[s].entry(self.gain[v as usize]).or_default().insert(v);
    }

    fn bucket_remove(&mut self, v: u32) {
        let s = self.side[v as usize] as usize;
        let g = self.gain[v as usize];
        if let Some(set) = self.buckets[s].get_mut(&g) {
            set.remove(&v);
            if set.is_empty() {
                self.buckets[s].remove(&g);
            }
        }
    }

    fn adjust(&mut self, v: u32, delta: i64) {
        if self.locked[v as usize] || delta == 0 {
            return;
        }
        self.bucket_remove(v);
        self.gain[v as usize] += delta;
        self.bucket_insert(v);
    }

    fn init_pass(&mut self) {
        self.buckets = [BTreeMap::new(), BTreeMap::new()];
        self.locked.iter_mut().for_each(|l| *l = false);
        for v in 0..self.lvl.n() {
            let s = self.side[v] as usize;
            let mut g = 0i64;
            for &e in &self.lvl.node_nets[v] {
                let w = self.lvl.net_w[e as usize] as i64;
                let c = self.count[e as usize];
                if c[s] == 1 {
                    g += w;
                }
                if c[1 - s] == 0 {
                    g -= w;
                }
            }
            self.gain[v] = g;
            self.bucket_insert(v as u32);
        }
    }

    fn allowed(&self, v: u32) -> bool {
        let s = self.side[v as usize] as usize;
        let w = self.lvl.weights[v as usize];
        let after = [
            if s == 0 { self.sw[0] - w } else { self.sw[0] + w },
            if s == 1 { self.sw[1] - w } else { self.sw[1] + w },
        ];
        let worst = after[0].max(after[1]);
        worst <= self.limit + self.slack || worst < self.sw[0].max(self.sw[1])
    }

    /// Highest-gain unlocked move allowed by balance; ties go to the lowest id.
    fn pick(&self) -> Option<u32> {
        let mut best: Option<(i64, u32)> = None;
        for s in 0..2 {
            'side: for (&g, set) in self.buckets[s].iter().rev() {
                if let Some((bg, _)) = best {
                    if g < bg {
                        break;
                    }
                }
                for &v in set {
                    if self.allowed(v) {
                        best = match best {
                            Some((bg, bv)) if bg > g || (bg == g && bv < v) => Some((bg, bv)),
                            _ => Some((g, v)),
                        };
                        break 'side;
                    }
                }
            }
        }
        best.map(|(_, v)| v)
    }

    fn apply(&mut self, v: u32) {
        let vi = v as usize;
        self.bucket_remove(v);
        self.locked[vi] = true;
        let from = self.side[vi] as usize;
        let to = 1 - from;
        self.side[vi] = to as u8;
        let w = self.lvl.weights[vi];
        self.sw[from] -= w;
        self.sw[to] += w;
        let lvl = self.lvl;
        for &e in &lvl.node_nets[vi] {
            let ei = e as usize;
            let nw = lvl.net_w[ei] as i64;
            let pins = &lvl.nets[ei];
            if self.count[ei][to] == 0 {
                for &u in pins {
                    if u != v {
                        self.adjust(u, nw);
                    }
                }
            } else if self.count[ei][to] == 1 {
                if let Some(&u) = pins.iter().find(|&&u| u != v && self.side[u as usize] as usize == to) {
                    self.adjust(u, -nw);
                }
            }
            self.count[ei][from] -= 1;
            self.count[ei][to] += 1;
            if self.count[ei][from] == 0 {
                for &u in pins {
                    if u != v {
                        self.adjust(u, -nw);
                    }
                }
            } else if self.count[ei][from] == 1 {
                if let Some(&u) = pins.iter().find(|&&u| u != v && self.side[u as usize] as usize == from) {
                    self.adjust(u, nw);
                }
            }
        }
    }

    fn undo(&mut self, v: u32) {
        let vi = v as usize;
        let from = self.side[vi] as usize;
        let to = 1 - from;
        self.side[vi] = to as u8;
        let w = self.lvl.weights[vi];
        self.sw[from] -= w;
        self.sw[to] += w;
        for &e in &self.lvl.node_nets[vi] {
            self.count[e as usize][from] -= 1;
            self.count[e as usize][to] += 1;
        }
    }

    /// One FM pass with rollback to the best prefix. Returns whether the
    /// (imbalance, cut) score strictly improved.
    fn pass(&mut self, cut: &mut u64) -> bool {
        self.init_pass();
        let start = (imbalance(self.sw, self.limit), *cut);
        let mut best = start;
        let mut best_len = 0usize;
        let mut moves: Vec<u32> = Vec::new();
        let mut cur = *cut as i64;
        let stall = (self.lvl.n() / 4).max(100);
        while let Some(v) = self.pick() {
            cur -= self.gain[v as usize];
            self.apply(v);
            moves.push(v);
            let score = (imbalance(self.sw, self.limit), cur as u64);
            if score < best {
                best = score;
                best_len = moves.len();
            } else if moves.len() - best_len > stall {
                break;
            }
        }
        for &v in moves[best_len..].iter().rev() {
            self.undo(v);
        }
        *cut = best.1;
        best < start
    }

    fn refine(mut self) -> Vec<u8> {
        let mut cut = self.lvl.cut(&self.side);
        for _ in 0..MAX_PASSES {
            if !self.pass(&mut cut) {
                break;
            }
        }
        debug_assert_eq!(cut, self.lvl.cut(&self.side));
        self.side
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Bisection {
    pub side: Vec<u8>,
    pub cut: u64,
    pub feasible: bool,
}

fn initial_split(lvl: &Level, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut order: Vec<usize> = (0..lvl.n()).collect();
    order.shuffle(rng);
    let mut side = vec![0u8; lvl.n()];
    let mut sw = [0u64; 2];
    for v in order {
        let s = if sw[1] < sw[0] { 1 } else { 0 };
        side[v] = s as u8;
        sw[s] += lvl.weights[v];
    }
    side
}

fn one_run(finest: &Level, limit: u64, cfg: &PartitionConfig, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let total: u64 = finest.weights.iter().sum();
    let heaviest = finest.weights.iter().copied().max().unwrap_or(1);
    let cap = heaviest.max(total.div_ceil(32)).min(limit.max(heaviest));

    let mut levels: Vec<Level> = vec![finest.clone()];
    let mut maps: Vec<Vec<u32>> = Vec::new();
    loop {
        let cur = levels.last().unwrap();
        if cur.n() <= COARSEST_NODES {
            break;
        }
        let target = ((cur.n() as f64 * cfg.coarsen_ratio).ceil() as usize).max(COARSEST_NODES);
        let (next, map) = cur.coarsen(rng, cap, target);
        if next.n() * 10 > cur.n() * 9 {
            break;
        }
        levels.push(next);
        maps.push(map);
    }

    let coarsest = levels.last().unwrap();
    let mut side = Fm::new(coarsest, initial_split(coarsest, rng), limit).refine();
    for k in (0..maps.len()).rev() {
        let fine = &levels[k];
        let projected: Vec<u8> = maps[k].iter().map(|&c| side[c as usize]).collect();
        side = Fm::new(fine, projected, limit).refine();
    }
    side
}

/// Best of `cfg.restarts` seeded multilevel runs, scored by
/// (balance violation, cut).
pub(crate) fn multilevel_bisect(hg: &Hypergraph, limit: u64, cfg: &PartitionConfig, seed: u64) -> Bisection {
    let finest = Level::from_hypergraph(hg);
    let mut best: Option<(u64, u64, Vec<u8>)> = None;
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, r as u64));
        let side = one_run(&finest, limit, cfg, &mut rng);
        let mut sw = [0u64; 2];
        for (v, &s) in side.iter().enumerate() {
            sw[s as usize] += finest.weights[v];
        }
        let score = (imbalance(sw, limit), finest.cut(&side));
        if best.as_ref().is_none_or(|b| score < (b.0, b.1)) {
            best = Some((score.0, score.1, side));
        }
    }
    let (imb, cut, side) = best.expect("restarts >= 1");
    Bisection {
        side,
        cut,
        feasible: imb == 0,
    }
}
