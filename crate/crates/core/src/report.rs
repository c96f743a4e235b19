// SPDX-License-Identifier: Apache-2.0

//! Report document, Rent-point CSV and SVG plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blif::write_blif;
use crate::netlist::Netlist;
use crate::pack::ArchSpec;
use crate::partition::PartitionConfig;
use crate::rent::{
    Analysis, AnalysisOptions, DensityReport, PrepackAnalysis, Region, RentFit, RentPoint,
    TwoSegmentFit,
};

pub const TOOL: &str = "rentlens";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Point weighting recorded in every report.
pub const WEIGHTING: &str = "per-depth geometric mean of B and T, weighted by node count";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputsEcho {
    pub blif: String,
    pub net: Option<String>,
    /// SHA-256 of the canonical BLIF rendering of the pre-packing netlist.
    pub prepack_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub partition: PartitionConfig,
    pub analysis: AnalysisOptions,
    pub arch: Option<ArchSpec>,
    pub weighting: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepackSummary {
    pub n_blocks: usize,
    pub n_logic_blocks: usize,
    pub n_nets: usize,
    pub t: f64,
    pub fit: RentFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsEcho {
    pub intra: Option<RentFit>,
    pub inter: Option<RentFit>,
    pub inter_two_segment: Option<TwoSegmentFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub inputs: InputsEcho,
    pub config: ConfigEcho,
    pub prepack: PrepackSummary,
    pub density: Option<DensityReport>,
    pub fits: FitsEcho,
    pub points: Vec<RentPoint>,
    pub warnings: Vec<String>,
}

pub fn fingerprint(netlist: &Netlist) -> String {
    hex::encode(Sha256::digest(write_blif(netlist).as_bytes()))
}

pub struct ReportInputs<'a> {
    pub blif_path: &'a str,
    pub net_path: Option<&'a str>,
    pub netlist: &'a Netlist,
    pub partition: &'a PartitionConfig,
    pub analysis: &'a AnalysisOptions,
    pub arch: Option<&'a ArchSpec>,
    pub warnings: Vec<String>,
}

fn document(
    inp: ReportInputs,
    prepack: &PrepackAnalysis,
    density: Option<DensityReport>,
    fits: FitsEcho,
    extra_points: &[&[RentPoint]],
) -> ReportDocument {
    let mut points = prepack.points.clone();
    for p in extra_points {
        points.extend_from_slice(p);
    }
    ReportDocument {
        tool: TOOL.into(),
        version: VERSION.into(),
        inputs: InputsEcho {
            blif: inp.blif_path.into(),
            net: inp.net_path.map(str::to_string),
            prepack_fingerprint: fingerprint(inp.netlist),
        },
        config: ConfigEcho {
            partition: *inp.partition,
            analysis: *inp.analysis,
            arch: inp.arch.copied(),
            weighting: WEIGHTING.into(),
        },
        prepack: PrepackSummary {
            n_blocks: inp.netlist.blocks().len(),
            n_logic_blocks: inp.netlist.n_logic(),
            n_nets: inp.netlist.nets().len(),
            t: prepack.t,
            fit: prepack.fit,
        },
        density,
        fits,
        points,
        warnings: inp.warnings,
    }
}

/// Report carrying only the pre-packing fit.
pub fn prepack_document(inp: ReportInputs, prepack: &PrepackAnalysis) -> ReportDocument {
    let fits = FitsEcho {
        intra: None,
        inter: None,
        inter_two_segment: None,
    };
    document(inp, prepack, None, fits, &[])
}

pub fn analysis_document(inp: ReportInputs, a: &Analysis) -> ReportDocument {
    let fits = FitsEcho {
        intra: a.intra_fit,
        inter: a.inter_fit,
        inter_two_segment: a.inter_two_segment,
    };
    document(
        inp,
        &a.prepack,
        Some(a.report.clone()),
        fits,
        &[&a.intra_points, &a.inter_points],
    )
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report fields are finite");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ReportDocument, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub const CSV_HEADER: &str = "region,depth,B,T,weight";

pub fn points_csv(points: &[RentPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{}", p.region.as_str(), p.depth, p.b, p.t, p.weight);
    }
    out
}

fn color(region: Region) -> &'static str {
    match region {
        Region::Prepack => "#1f77b4",
        Region::IntraClb => "#2ca02c",
        Region::InterClb => "#d62728",
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

struct LogAxes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl LogAxes {
    fn px(&self, b: f64) -> f64 {
        MARGIN + (b.log10() - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, t: f64) -> f64 {
        H - MARGIN - (t.log10() - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v.log10()), hi.max(v.log10()))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// A labelled fit drawn over `[b_min, b_max]`.
pub struct FitLine<'a> {
    pub label: &'a str,
    pub region: Region,
    pub fit: RentFit,
    pub b_min: f64,
    pub b_max: f64,
}

/// Log-log Rent plot with one scatter series per region and one line per fit.
pub fn rent_plot_svg(title: &str, points: &[RentPoint], fits: &[FitLine]) -> String {
    let (x0, x1) = span(points.iter().map(|p| p.b));
    let (y0, y1) = span(points.iter().map(|p| p.t));
    let ax = LogAxes { x0, x1, y0, y1 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        W / 2.0,
        xml_text(title)
    );
    axes(&mut s, &ax, "blocks B", "terminals T");

    let mut regions: Vec<Region> = points.iter().map(|p| p.region).collect();
    regions.sort();
    regions.dedup();
    for r in &regions {
        let _ = writeln!(s, "<g class=\"series\" data-region=\"{}\" fill=\"{}\">", r.as_str(), color(*r));
        for p in points.iter().filter(|p| p.region == *r) {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\"/>",
                ax.px(p.b),
                ax.py(p.t)
            );
        }
        s.push_str("</g>\n");
    }
    for f in fits {
        let _ = writeln!(
            s,
            "<line class=\"fit\" data-label=\"{}\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"2\"/>",
            xml_text(f.label),
            ax.px(f.b_min),
            ax.py(f.fit.eval(f.b_min)),
            ax.px(f.b_max),
            ax.py(f.fit.eval(f.b_max)),
            color(f.region)
        );
    }
    let mut y = MARGIN + 10.0;
    for r in &regions {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.0}\" cy=\"{y:.0}\" r=\"4\" fill=\"{}\"/><text x=\"{:.0}\" y=\"{:.0}\">{}</text>",
            MARGIN + 14.0,
            color(*r),
            MARGIN + 24.0,
            y + 4.0,
            r.as_str()
        );
        y += 16.0;
    }
    for f in fits {
        let _ = writeln!(
            s,
            "<text x=\"{:.0}\" y=\"{y:.0}\" fill=\"{}\">{}: r = {:.3}</text>",
            MARGIN + 10.0,
            color(f.region),
            xml_text(f.label),
            f.fit.r
        );
        y += 16.0;
    }
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, ax: &LogAxes, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(
        s,
        "<path d=\"M{l} {t} L{l} {b} L{r} {b}\" fill=\"none\" stroke=\"black\"/>"
    );
    for e in ax.x0 as i32..=ax.x1 as i32 {
        let x = ax.px(10f64.powi(e));
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{b}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/><text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">1e{e}</text>",
            b + 5.0,
            b + 18.0
        );
    }
    for e in ax.y0 as i32..=ax.y1 as i32 {
        let y = ax.py(10f64.powi(e));
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{l}\" y2=\"{y:.2}\" stroke=\"black\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{e}</text>",
            l - 5.0,
            l - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>",
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        "<text x=\"15\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">{ylabel}</text>",
        H / 2.0,
        H / 2.0
    );
}

/// Plot for a report: every region's points plus its fit.
pub fn report_svg(doc: &ReportDocument) -> String {
    let range = |region: Region| -> Option<(f64, f64)> {
        let bs: Vec<f64> = doc.points.iter().filter(|p| p.region == region).map(|p| p.b).collect();
        let lo = bs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = bs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo.is_finite() && hi > lo).then_some((lo, hi))
    };
    let mut fits = Vec::new();
    let mut add = |label, region, fit: Option<RentFit>| {
        if let (Some(fit), Some((b_min, b_max))) = (fit, range(region)) {
            fits.push(FitLine {
                label,
                region,
                fit,
                b_min,
                b_max,
            });
        }
    };
    add("pre-pack", Region::Prepack, Some(doc.prepack.fit));
    add("intra-CLB", Region::IntraClb, doc.fits.intra);
    add("inter-CLB", Region::InterClb, doc.fits.inter);
    rent_plot_svg(&format!("Rent plot: {}", doc.inputs.blif), &doc.points, &fits)
}

/// Compared quantities, in display order.
pub const COMPARE_METRICS: [&str; 5] = ["B_avg", "T_avg", "r_inter", "r_intra", "D_R"];

pub fn compare_values(d: &DensityReport) -> [Option<f64>; 5] {
    [Some(d.b_avg), Some(d.t_avg), d.r_inter, d.r_intra, Some(d.d_r)]
}

/// Grouped bars, one group per metric, each group scaled to its larger value.
pub fn compare_svg(labels: [&str; 2], a: &DensityReport, b: &DensityReport) -> String {
    let (va, vb) = (compare_values(a), compare_values(b));
    let fills = ["#1f77b4", "#ff7f0e"];
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let base = H - MARGIN;
    let plot_h = H - 2.0 * MARGIN - 20.0;
    let group_w = (W - 2.0 * MARGIN) / COMPARE_METRICS.len() as f64;
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>",
        W - MARGIN
    );
    for (i, name) in COMPARE_METRICS.iter().enumerate() {
        let vals = [va[i], vb[i]];
        let max = vals.iter().flatten().copied().fold(0.0f64, f64::max);
        let gx = MARGIN + i as f64 * group_w;
        for (j, v) in vals.iter().enumerate() {
            let x = gx + group_w * (0.15 + 0.35 * j as f64);
            match v {
                Some(v) => {
                    let h = if max > 0.0 { v / max * plot_h } else { 0.0 };
                    let _ = writeln!(
                        s,
                        "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.3}</text>",
                        base - h,
                        group_w * 0.3,
                        fills[j],
                        x + group_w * 0.15,
                        base - h - 4.0
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">n/a</text>",
                        x + group_w * 0.15,
                        base - 4.0
                    );
                }
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{name}</text>",
            gx + group_w / 2.0,
            base + 18.0
        );
    }
    for (j, label) in labels.iter().enumerate() {
        let y = MARGIN - 30.0 + 16.0 * j as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{MARGIN}\" y=\"{:.0}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{:.0}\">{}</text>",
            y - 9.0,
            fills[j],
            MARGIN + 16.0,
            y,
            xml_text(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rent::Classification;

    fn pt(region: Region, b: f64, t: f64) -> RentPoint {
        RentPoint {
            b,
            t,
            depth: 0,
            weight: 1.0,
            region,
        }
    }

    #[test]
    fn csv_schema() {
        let csv = points_csv(&[pt(Region::InterClb, 2.5, 4.0)]);
        assert_eq!(csv, "region,depth,B,T,weight\nINTER_CLB,0,2.5,4,1\n");
    }

    #[test]
    fn svg_has_series_and_fit_lines() {
        let pts = [
            pt(Region::Prepack, 1.0, 5.0),
            pt(Region::Prepack, 100.0, 80.0),
            pt(Region::IntraClb, 2.0, 7.0),
        ];
        let fit = RentFit {
            t: 5.0,
            r: 0.6,
            rss: 0.0,
            n_points: 2,
        };
        let svg = rent_plot_svg(
            "x < y",
            &pts,
            &[FitLine {
                label: "pre-pack",
                region: Region::Prepack,
                fit,
                b_min: 1.0,
                b_max: 100.0,
            }],
        );
        assert_eq!(svg.matches("class=\"series\"").count(), 2);
        assert_eq!(svg.matches("class=\"fit\"").count(), 1);
        assert!(svg.contains("x &lt; y"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn compare_svg_marks_missing_values() {
        let d = DensityReport {
            t: 5.0,
            r_prepack: 0.6,
            r_intra: None,
            r_inter: Some(0.6),
            b_avg: 8.0,
            t_avg: 20.0,
            b_star: 10.0,
            d_r: 0.8,
            d_b: 0.8,
            d_t: 0.4,
            classification: Classification::Rsparse,
            breakpoint: None,
        };
        let svg = compare_svg(["a", "b"], &d, &d);
        assert_eq!(svg.matches("n/a").count(), 2);
        assert_eq!(svg.matches("<rect x=").count(), 8 + 2);
    }
}
