// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;
use std::process::{Command, Output};

use rentlens::report::ReportDocument;

fn rentlens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rentlens"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn prepare(dir: &Path) {
    ok(&rentlens(dir, &["gen", "--blocks", "256", "--rent", "0.6", "--seed", "1", "--out", "g.blif"]));
    ok(&rentlens(dir, &["pack", "--blif", "g.blif", "--pin-util", "1.0", "--out", "dense.net"]));
    ok(&rentlens(dir, &["pack", "--blif", "g.blif", "--pin-util", "0.4", "--out", "sparse.net"]));
}

#[test]
fn gen_is_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&rentlens(d, &["gen", "--blocks", "256", "--rent", "0.6", "--seed", "1", "--out", "a.blif"]));
    ok(&rentlens(d, &["gen", "--blocks", "256", "--rent", "0.6", "--seed", "1", "--out", "b.blif"]));
    assert_eq!(std::fs::read(d.join("a.blif")).unwrap(), std::fs::read(d.join("b.blif")).unwrap());
    assert_eq!(rentlens(d, &["gen", "--blocks", "10", "--rent", "1.5"]).status.code(), Some(2));
    assert_eq!(rentlens(d, &["gen", "--rent", "0.5"]).status.code(), Some(2));
}

#[test]
fn analyze_full_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    let out = rentlens(
        d,
        &["analyze", "--blif", "g.blif", "--net", "dense.net", "--json", "-", "--csv", "p.csv", "--svg", "p.svg"],
    );
    ok(&out);
    let doc = ReportDocument::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let dens = doc.density.expect("packing metrics present");
    assert!(dens.d_r > 0.0);
    assert!(dens.r_inter.is_some() && dens.r_intra.is_some());

    let csv = std::fs::read_to_string(d.join("p.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("region,depth,B,T,weight"));
    assert!(csv.ends_with('\n'));
    assert_eq!(csv.lines().count(), doc.points.len() + 1);
    for region in ["PREPACK", "INTRA_CLB", "INTER_CLB"] {
        assert!(csv.contains(&format!("\n{region},")));
    }

    let svg = std::fs::read_to_string(d.join("p.svg")).unwrap();
    assert_eq!(svg.matches("class=\"series\"").count(), 3);
    assert_eq!(svg.matches("class=\"fit\"").count(), 3);
    assert!(!svg.contains("href"));
}

#[test]
fn analyze_without_packing_reports_prepack_only() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    let out = rentlens(d, &["analyze", "--blif", "g.blif", "--json", "r.json"]);
    ok(&out);
    let doc = ReportDocument::from_json(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!(doc.density.is_none());
    assert!((doc.prepack.fit.r - 0.6).abs() < 0.07);
}

#[test]
fn analyze_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = rentlens(d, &["analyze", "--blif", "missing.blif"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.blif"));

    std::fs::write(d.join("bad.blif"), ".model x\n.inputs a\n.bogus\n.end\n").unwrap();
    assert_eq!(rentlens(d, &["analyze", "--blif", "bad.blif"]).status.code(), Some(2));

    // one logic block leaves too few depths to fit
    std::fs::write(d.join("one.blif"), ".model x\n.inputs a\n.outputs y\n.names a y\n1 1\n.end\n").unwrap();
    assert_eq!(rentlens(d, &["analyze", "--blif", "one.blif"]).status.code(), Some(3));
}

#[test]
fn compare_packings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    let out = rentlens(
        d,
        &["compare", "--blif", "g.blif", "--net", "dense.net", "--net", "sparse.net", "--svg", "c.svg"],
    );
    ok(&out);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("D_R"));
    assert!(std::fs::read_to_string(d.join("c.svg")).unwrap().contains("<svg"));

    let same = rentlens(d, &["compare", "--blif", "g.blif", "--net", "dense.net", "--net", "dense.net"]);
    ok(&same);
    let same = String::from_utf8(same.stdout).unwrap();
    for line in same.lines().skip(1).take(5) {
        let delta = line.split_whitespace().last().unwrap();
        assert!(delta == "0.0000" || delta == "-0.0000", "{line}");
    }

    ok(&rentlens(d, &["gen", "--blocks", "256", "--rent", "0.6", "--seed", "2", "--out", "h.blif"]));
    ok(&rentlens(d, &["pack", "--blif", "h.blif", "--out", "h.net"]));
    let mismatch = rentlens(d, &["compare", "--blif", "g.blif", "--blif", "h.blif", "--net", "dense.net", "--net", "h.net"]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn compare_from_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    ok(&rentlens(d, &["analyze", "--blif", "g.blif", "--net", "dense.net", "--json", "a.json"]));
    ok(&rentlens(d, &["analyze", "--blif", "g.blif", "--net", "sparse.net", "--json", "b.json"]));
    let out = rentlens(d, &["compare", "--report", "a.json", "--report", "b.json"]);
    ok(&out);
}

#[test]
fn pack_zero_util_reports_singletons() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("chain.blif"),
        ".model c\n.inputs a b\n.outputs y\n.names a b n1\n11 1\n.names n1 b y\n11 1\n.end\n",
    )
    .unwrap();
    let out = rentlens(d, &["pack", "--blif", "chain.blif", "--pin-util", "0", "--out", "c.net"]);
    ok(&out);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("singleton"), "{err}");
    assert!(err.contains("into 2 clusters"), "{err}");
    assert_eq!(rentlens(d, &["pack", "--blif", "chain.blif", "--pin-util", "1.5"]).status.code(), Some(2));
}

#[test]
fn partition_dumps_points() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    ok(&rentlens(d, &["partition", "--blif", "g.blif", "--points", "pts.csv"]));
    let csv = std::fs::read_to_string(d.join("pts.csv")).unwrap();
    assert!(csv.starts_with("region,depth,B,T,weight\nPREPACK,0,256,"));
}

#[test]
fn fixture_analysis_runs() {
    let dir = tempfile::tempdir().unwrap();
    let blif = common::fixture("small.blif");
    let net = common::fixture("small.net");
    let out = rentlens(
        dir.path(),
        &["analyze", "--blif", blif.to_str().unwrap(), "--net", net.to_str().unwrap(), "--json", "-"],
    );
    ok(&out);
}
