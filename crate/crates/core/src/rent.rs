// SPDX-License-Identifier: Apache-2.0

//! Rent points, power-law fits and packing density metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{mean_block_terminals, Netlist, NetlistError};
use crate::pack::ArchSpec;
use crate::partition::{
    recursive_partition_hypergraph, Hypergraph, PartitionConfig, PartitionError, PartitionNode,
};
use crate::vprnet::{Cluster, ClusterMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RentError {
    #[error("partition tree has no node with external terminals")]
    EmptyTree,
    #[error("fit needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("all points share the same block count")]
    DegenerateAbscissa,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("clustering covers no logic primitive")]
    NoLogicClusters,
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Prepack,
    IntraClb,
    InterClb,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Prepack => "PREPACK",
            Region::IntraClb => "INTRA_CLB",
            Region::InterClb => "INTER_CLB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RentPoint {
    pub b: f64,
    pub t: f64,
    pub depth: usize,
    pub weight: f64,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RentFit {
    pub t: f64,
    pub r: f64,
    /// Weighted residual sum of squares in natural-log space.
    pub rss: f64,
    pub n_points: usize,
}

impl RentFit {
    pub fn eval(&self, b: f64) -> f64 {
        self.t * b.powf(self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSegmentFit {
    pub left: RentFit,
    pub right: RentFit,
    /// Block count where the two fitted laws meet, clamped to the gap
    /// between the last left point and the first right point.
    pub breakpoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Rdense,
    Rsparse,
    Rmoderate,
}

/// One point per depth: geometric means of B and T over the nodes at that
/// depth with `T > 0`, weighted by how many such nodes there are.
pub fn collect_points(tree: &PartitionNode, region: Region) -> Result<Vec<RentPoint>, RentError> {
    collect_points_pooled(std::slice::from_ref(tree), region)
}

/// [`collect_points`] over several trees, pooling nodes of equal depth.
pub fn collect_points_pooled(
    trees: &[PartitionNode],
    region: Region,
) -> Result<Vec<RentPoint>, RentError> {
    let mut acc: BTreeMap<usize, (Mean, Mean)> = BTreeMap::new();
    for tree in trees {
        for node in tree.iter().filter(|n| n.t > 0 && n.b > 0) {
            let e = acc.entry(node.depth - tree.depth).or_default();
            e.0.add(node.b);
            e.1.add(node.t);
        }
    }
    if acc.is_empty() {
        return Err(RentError::EmptyTree);
    }
    Ok(acc
        .into_iter()
        .map(|(depth, (b, t))| RentPoint {
            b: b.value(),
            t: t.value(),
            depth,
            weight: b.n as f64,
            region,
        })
        .collect())
}

/// Geometric mean that is exact when all samples are equal.
#[derive(Default)]
struct Mean {
    log_sum: f64,
    n: usize,
    min: u64,
    max: u64,
}

impl Mean {
    fn add(&mut self, x: u64) {
        self.log_sum += (x as f64).ln();
        self.min = if self.n == 0 { x } else { self.min.min(x) };
        self.max = self.max.max(x);
        self.n += 1;
    }

    fn value(&self) -> f64 {
        if self.min == self.max {
            self.min as f64
        } else {
            (self.log_sum / self.n as f64).exp()
        }
    }
}

/// Weighted least squares of `ln T` on `ln B` after discarding the
/// `drop_top_depths` shallowest distinct depths.
pub fn fit_rent(points: &[RentPoint], drop_top_depths: usize) -> Result<RentFit, RentError> {
    let mut depths: Vec<usize> = points.iter().map(|p| p.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let cutoff = depths.get(drop_top_depths).copied();
    let kept: Vec<RentPoint> = match cutoff {
        Some(d) => points.iter().filter(|p| p.depth >= d).copied().collect(),
        None => Vec::new(),
    };
    fit_points(&kept)
}

fn fit_points(points: &[RentPoint]) -> Result<RentFit, RentError> {
    if points.len() < 2 {
        return Err(RentError::InsufficientPoints {
            needed: 2,
            got: points.len(),
        });
    }
    if points
        .iter()
        .any(|p| !(p.b > 0.0 && p.t > 0.0 && p.weight > 0.0) || !p.b.is_finite() || !p.t.is_finite())
    {
        return Err(RentError::Domain(
            "points need positive finite B, T and weight".into(),
        ));
    }
    let sw: f64 = points.iter().map(|p| p.weight).sum();
    let xm = points.iter().map(|p| p.weight * p.b.ln()).sum::<f64>() / sw;
    let ym = points.iter().map(|p| p.weight * p.t.ln()).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in points {
        let dx = p.b.ln() - xm;
        sxx += p.weight * dx * dx;
        sxy += p.weight * dx * (p.t.ln() - ym);
    }
    let spread = points
        .iter()
        .map(|p| (p.b.ln() - xm).abs())
        .fold(0.0, f64::max);
    if spread <= 1e-12 * xm.abs().max(1.0) {
        return Err(RentError::DegenerateAbscissa);
    }
    let r = sxy / sxx;
    let c = ym - r * xm;
    let rss = points
        .iter()
        .map(|p| {
            let e = p.t.ln() - (c + r * p.b.ln());
            p.weight * e * e
        })
        .sum();
    let t = c.exp();
    if !(t.is_finite() && t > 0.0) {
        return Err(RentError::Domain(format!("fitted coefficient exp({c}) is out of range")));
    }
    Ok(RentFit {
        t,
        r,
        rss,
        n_points: points.len(),
    })
}

/// Block count a cluster with `t_avg` terminals holds under `T = t * B^r`.
pub fn estimate_bstar(t_avg: f64, t: f64, r: f64) -> Result<f64, RentError> {
    if !(t_avg > 0.0 && t > 0.0 && r > 0.0) {
        return Err(RentError::Domain(format!(
            "estimate_bstar needs T_avg, t, r > 0 (got {t_avg}, {t}, {r})"
        )));
    }
    Ok((t_avg / t).powf(1.0 / r))
}

/// `B_avg / B_star` and its three-way classification around 1 +- `tol`.
pub fn rdensity(b_avg: f64, b_star: f64, tol: f64) -> Result<(f64, Classification), RentError> {
    if !(b_avg > 0.0 && b_star > 0.0 && tol >= 0.0) {
        return Err(RentError::Domain(format!(
            "rdensity needs B_avg, B_star > 0 and tol >= 0 (got {b_avg}, {b_star}, {tol})"
        )));
    }
    let d = b_avg / b_star;
    Ok((d, classify(d, tol)))
}

pub fn classify(d_r: f64, tol: f64) -> Classification {
    if d_r > 1.0 + tol {
        Classification::Rdense
    } else if d_r < 1.0 - tol {
        Classification::Rsparse
    } else {
        Classification::Rmoderate
    }
}

/// Block and pin utilization of the logic clusters.
/// Pin utilization counts inputs and outputs against `cluster_inputs + cluster_outputs`.
pub fn utilization_density(
    cm: &ClusterMap,
    netlist: &Netlist,
    arch: &ArchSpec,
) -> Result<(f64, f64), RentError> {
    if arch.cluster_capacity == 0 || arch.total_pins() == 0 {
        return Err(RentError::Domain("architecture capacities must be positive".into()));
    }
    let clusters: Vec<&Cluster> = cm.logic_clusters(netlist).collect();
    if clusters.is_empty() {
        return Err(RentError::NoLogicClusters);
    }
    let n = clusters.len() as f64;
    let b = clusters.iter().map(|c| c.size()).sum::<usize>() as f64 / n;
    let t = clusters.iter().map(|c| c.used_pins(false)).sum::<usize>() as f64 / n;
    Ok((b / arch.cluster_capacity as f64, t / arch.total_pins() as f64))
}

/// Best split of the B-sorted points into two power laws, each with at least
/// two points, by total residual. The first split wins ties.
pub fn two_segment_fit(points: &[RentPoint]) -> Result<TwoSegmentFit, RentError> {
    if points.len() < 4 {
        return Err(RentError::InsufficientPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.b.total_cmp(&b.b).then(a.depth.cmp(&b.depth)));
    let mut best: Option<(f64, usize, RentFit, RentFit)> = None;
    for k in 2..=sorted.len() - 2 {
        let (Ok(l), Ok(r)) = (fit_points(&sorted[..k]), fit_points(&sorted[k..])) else {
            continue;
        };
        let total = l.rss + r.rss;
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, k, l, r));
        }
    }
    let (_, k, left, right) = best.ok_or(RentError::DegenerateAbscissa)?;
    let (lo, hi) = (sorted[k - 1].b, sorted[k].b);
    let slope_gap = left.r - right.r;
    let breakpoint = if slope_gap.abs() < 1e-12 {
        hi
    } else {
        (((right.t.ln() - left.t.ln()) / slope_gap).exp()).clamp(lo, hi)
    };
    Ok(TwoSegmentFit {
        left,
        right,
        breakpoint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub drop_top_depths_prepack: usize,
    pub drop_top_depths_intra: usize,
    pub drop_top_depths_inter: usize,
    pub tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            drop_top_depths_prepack: 1,
            drop_top_depths_intra: 0,
            drop_top_depths_inter: 1,
            tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrepackAnalysis {
    /// Mean counted terminals per logic primitive.
    pub t: f64,
    pub fit: RentFit,
    pub points: Vec<RentPoint>,
}

pub fn analyze_prepack(
    netlist: &Netlist,
    cfg: &PartitionConfig,
    opts: &AnalysisOptions,
) -> Result<PrepackAnalysis, RentError> {
    let t = mean_block_terminals(netlist, cfg.policy())?;
    let hg = Hypergraph::from_netlist(netlist, cfg.policy());
    let tree = recursive_partition_hypergraph(&hg, cfg)?;
    let points = collect_points(&tree, Region::Prepack)?;
    let fit = fit_rent(&points, opts.drop_top_depths_prepack)?;
    Ok(PrepackAnalysis { t, fit, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub t: f64,
    pub r_prepack: f64,
    pub r_intra: Option<f64>,
    pub r_inter: Option<f64>,
    pub b_avg: f64,
    pub t_avg: f64,
    pub b_star: f64,
    pub d_r: f64,
    pub d_b: f64,
    pub d_t: f64,
    pub classification: Classification,
    /// `(B, T)` where the inter-CLB curve changes slope.
    pub breakpoint: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub report: DensityReport,
    pub prepack: PrepackAnalysis,
    pub intra_points: Vec<RentPoint>,
    pub intra_fit: Option<RentFit>,
    pub inter_points: Vec<RentPoint>,
    pub inter_fit: Option<RentFit>,
    pub inter_two_segment: Option<TwoSegmentFit>,
}

/// Full post-packing analysis of `cm` against its pre-packing netlist.
///
/// Intra-CLB points pool one partition tree per logic cluster. Inter-CLB
/// points come from partitioning the cluster graph with nodes weighted by
/// primitive count, so both regions share the primitive axis.
pub fn analyze(
    prepack: &Netlist,
    cm: &ClusterMap,
    arch: &ArchSpec,
    cfg: &PartitionConfig,
    opts: &AnalysisOptions,
) -> Result<Analysis, RentError> {
    cfg.validate()?;
    let pre = analyze_prepack(prepack, cfg, opts)?;
    let policy = cfg.policy();
    let clusters: Vec<&Cluster> = cm.logic_clusters(prepack).collect();
    if clusters.is_empty() {
        return Err(RentError::NoLogicClusters);
    }

    let hg = Hypergraph::from_netlist(prepack, policy);
    let mut node_of = vec![u32::MAX; prepack.blocks().len()];
    for (i, &b) in hg.origin().iter().enumerate() {
        node_of[b] = i as u32;
    }
    let intra_trees: Vec<PartitionNode> = clusters
        .par_iter()
        .filter_map(|c| {
            let nodes: Vec<u32> = c
                .primitives
                .iter()
                .map(|&p| node_of[p])
                .filter(|&n| n != u32::MAX)
                .collect();
            (!nodes.is_empty()).then(|| recursive_partition_hypergraph(&hg.induced(&nodes), cfg))
        })
        .collect::<Result<_, _>>()?;
    let intra_points = collect_points_pooled(&intra_trees, Region::IntraClb).unwrap_or_default();
    let intra_fit = fit_rent(&intra_points, opts.drop_top_depths_intra).ok();

    // Cluster graph: logic clusters are nodes, anything else is outside.
    let mut owner_node = vec![u32::MAX; prepack.blocks().len()];
    for (i, c) in clusters.iter().enumerate() {
        for &p in &c.primitives {
            owner_node[p] = i as u32;
        }
    }
    let nets = prepack
        .nets()
        .iter()
        .filter(|n| policy.counts(n))
        .map(|n| {
            let mut ext = n.boundary;
            let mut pins = Vec::new();
            for b in n.blocks() {
                match owner_node[b] {
                    u32::MAX => ext = true,
                    k => pins.push(k),
                }
            }
            (pins, ext)
        })
        .collect();
    let cluster_hg = Hypergraph::new(
        clusters.iter().map(|c| c.size() as u64).collect(),
        (0..clusters.len()).collect(),
        nets,
    );
    let inter_tree = recursive_partition_hypergraph(&cluster_hg, cfg)?;
    let inter_points = collect_points(&inter_tree, Region::InterClb).unwrap_or_default();
    let inter_fit = fit_rent(&inter_points, opts.drop_top_depths_inter).ok();
    let inter_two_segment = drop_depths(&inter_points, opts.drop_top_depths_inter)
        .and_then(|p| two_segment_fit(&p).ok());

    let include_clocks = !cfg.ignore_globals;
    let n = clusters.len() as f64;
    let b_avg = clusters.iter().map(|c| c.size()).sum::<usize>() as f64 / n;
    let t_avg = clusters
        .iter()
        .map(|c| c.used_pins(include_clocks))
        .sum::<usize>() as f64
        / n;
    let b_star = estimate_bstar(t_avg, pre.t, pre.fit.r)?;
    let (d_r, classification) = rdensity(b_avg, b_star, opts.tol)?;
    let (d_b, d_t) = utilization_density(cm, prepack, arch)?;

    let report = DensityReport {
        t: pre.t,
        r_prepack: pre.fit.r,
        r_intra: intra_fit.map(|f| f.r),
        r_inter: inter_fit.map(|f| f.r),
        b_avg,
        t_avg,
        b_star,
        d_r,
        d_b,
        d_t,
        classification,
        breakpoint: inter_two_segment.map(|s| (s.breakpoint, s.left.eval(s.breakpoint))),
    };
    Ok(Analysis {
        report,
        prepack: pre,
        intra_points,
        intra_fit,
        inter_points,
        inter_fit,
        inter_two_segment,
    })
}

fn drop_depths(points: &[RentPoint], k: usize) -> Option<Vec<RentPoint>> {
    let mut depths: Vec<usize> = points.iter().map(|p| p.depth).collect();
    depths.sort_unstable();
    depths.dedup();
    let d = *depths.get(k)?;
    Some(points.iter().filter(|p| p.depth >= d).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(b: f64, t: f64, depth: usize) -> RentPoint {
        RentPoint {
            b,
            t,
            depth,
            weight: 1.0,
            region: Region::Prepack,
        }
    }

    fn leaf(depth: usize, b: u64, t: u64) -> PartitionNode {
        PartitionNode {
            depth,
            block_ids: Vec::new(),
            b,
            t,
            cut: None,
            children: Vec::new(),
        }
    }

    #[test]
    fn identical_nodes_aggregate() {
        let mut root = leaf(0, 8, 0);
        root.children = vec![leaf(1, 4, 8), leaf(1, 4, 8)];
        let pts = collect_points(&root, Region::Prepack).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].b, pts[0].t, pts[0].weight), (4.0, 8.0, 2.0));
    }

    #[test]
    fn geometric_means() {
        let mut root = leaf(0, 10, 3);
        root.children = vec![leaf(1, 2, 4), leaf(1, 8, 16)];
        let pts = collect_points(&root, Region::Prepack).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[1].b - 4.0).abs() < 1e-12);
        assert!((pts[1].t - 8.0).abs() < 1e-12);
        assert!(matches!(
            collect_points(&leaf(0, 3, 0), Region::Prepack),
            Err(RentError::EmptyTree)
        ));
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .enumerate()
            .map(|(d, &b)| pt(b, 4.0 * f64::powf(b, 0.7), d))
            .collect();
        let f = fit_rent(&pts, 0).unwrap();
        assert!((f.r - 0.7).abs() < 1e-9);
        assert!((f.t - 4.0).abs() < 1e-9);
        // dropping the two shallowest depths leaves three points
        assert_eq!(fit_rent(&pts, 2).unwrap().n_points, 3);
        assert!(matches!(
            fit_rent(&pts, 4),
            Err(RentError::InsufficientPoints { .. })
        ));
        let flat = [pt(3.0, 1.0, 0), pt(3.0, 2.0, 1)];
        assert_eq!(fit_rent(&flat, 0), Err(RentError::DegenerateAbscissa));
    }

    #[test]
    fn bstar_and_rdensity() {
        assert!((estimate_bstar(32.0, 4.0, 0.6).unwrap() - 32.0).abs() < 1e-9);
        assert_eq!(estimate_bstar(12.0, 4.0, 1.0).unwrap(), 3.0);
        assert_eq!(estimate_bstar(5.0, 5.0, 0.37).unwrap(), 1.0);
        assert!(estimate_bstar(0.0, 4.0, 0.6).is_err());
        assert_eq!(
            rdensity(16.0, 32.0, 0.05).unwrap(),
            (0.5, Classification::Rsparse)
        );
        assert_eq!(
            rdensity(7.0, 7.0, 0.05).unwrap(),
            (1.0, Classification::Rmoderate)
        );
        assert_eq!(classify(1.2, 0.05), Classification::Rdense);
        assert!(rdensity(1.0, 0.0, 0.05).is_err());
    }

    #[test]
    fn two_segments_four_points() {
        let pts = [pt(1.0, 2.0, 0), pt(2.0, 4.0, 1), pt(4.0, 6.0, 2), pt(8.0, 9.0, 3)];
        let s = two_segment_fit(&pts).unwrap();
        assert_eq!((s.left.n_points, s.right.n_points), (2, 2));
        assert!(s.breakpoint >= 2.0 && s.breakpoint <= 4.0);
        assert!(two_segment_fit(&pts[..3]).is_err());
    }
}
