// SPDX-License-Identifier: Apache-2.0
//! End-to-end runs of the `lite` binary.

use std::path::Path;
use std::process::{Command, Output};

fn lite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lite")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("UTF-8 temp path")
}

#[test]
fn exit_codes() {
    assert_eq!(lite(&[]).status.code(), Some(1));
    assert_eq!(lite(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lite(&["area", "--format", "xml", "bundled:s27"]).status.code(), Some(1));
    assert_eq!(lite(&["area", "/definitely/missing.bench"]).status.code(), Some(2));
    assert_eq!(lite(&["area", "bundled:nope"]).status.code(), Some(2));
    assert_eq!(lite(&["--help"]).status.code(), Some(0));
}

#[test]
fn scan_insert_equiv_atpg_faultsim() {
    let dir = tempfile::tempdir().unwrap();
    let scanned = dir.path().join("s27_scan.v");
    let lite_v = dir.path().join("s27_lite.v");
    let plan = dir.path().join("plan.json");
    let pats = dir.path().join("s27.pat");

    let o = lite(&["scan", "bundled:s27", "-o", path(&scanned)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 4);

    let o =
        lite(&["insert", path(&scanned), "--config", "c2obscc", "--xor-k", "2", "--plan-out", path(&plan), "-o", path(&lite_v)]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("normal_mode,equivalent"));
    let entries: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(entries.as_array().unwrap().len(), 3);

    let o = lite(&["equiv", path(&scanned), path(&lite_v)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let o = lite(&["equiv", path(&scanned), path(&lite_v), "--bind", "sel=1", "--bind", "sel_cc=1"]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");

    let o = lite(&["--format", "json", "atpg", path(&lite_v), "--out", path(&pats)]);
    assert!(o.status.success(), "{o:?}");
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["aborted"], 0.0);
    assert_eq!(summary["coverage_pct"], 100.0);

    let o = lite(&["faultsim", path(&lite_v), "--patterns", path(&pats), "--drop"]);
    assert!(o.status.success(), "{o:?}");
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(last.ends_with(",100.0000"), "{last}");

    // A tampered response line is a verification failure.
    let text = std::fs::read_to_string(&pats).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines[1].clone();
    let flip = |c: char| if c == '0' { '1' } else { '0' };
    let last_bit = row.char_indices().last().unwrap().0;
    lines[1] = format!("{}{}", &row[..last_bit], flip(row.chars().last().unwrap()));
    std::fs::write(&pats, lines.join("\n")).unwrap();
    let o = lite(&["faultsim", path(&lite_v), "--patterns", path(&pats)]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
}

#[test]
fn analyze_and_area_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let lists = dir.path().join("lists.json");
    let o = lite(&["analyze", "bundled:s27", "--dot", path(&dot), "--lists", path(&lists)]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("net_name,cc0,cc1,co\n"));
    assert!(std::fs::read_to_string(&dot).unwrap().contains("digraph"));
    let l: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&lists).unwrap()).unwrap();
    assert!(l["hard_obs"].is_array());

    let o = lite(&["--format", "json", "area", "bundled:s27"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tpi_reduction_pct"]["cc_pct"], 69);
    assert_eq!(v["tpi_reduction_pct"]["obs_pct"], 38);
    assert_eq!(v["tpi_reduction_pct"]["cc_obs_pct"], 14);

    let areas = dir.path().join("areas.csv");
    std::fs::write(&areas, "kind,area\nDFF,10\n").unwrap();
    let o = lite(&["--cell-areas", path(&areas), "--format", "json", "area", "bundled:s27"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["area"]["by_kind"]["DFF"], 30.0);
    std::fs::write(&areas, "DFF,-1\n").unwrap();
    assert_eq!(lite(&["--cell-areas", path(&areas), "area", "bundled:s27"]).status.code(), Some(2));
}

#[test]
fn experiment_bundle_is_reproducible() {
    let run = |dir: &Path| {
        let o = lite(&["experiment", "bundled:s27", "--seeds", "1,2", "--samples", "10,100", "--xor-k", "2,3", "-o", path(dir)]);
        assert!(o.status.success(), "{o:?}");
        stdout(&o)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (sa, sb) = (run(a.path()), run(b.path()));
    assert_eq!(sa, sb);
    assert_eq!(sa.lines().count(), 1 + 1 + 4 * 2);
    for d in ["baseline", "c1obs_k2", "c2obscc_k3"] {
        assert!(a.path().join(d).join("coverage.csv").exists(), "{d}");
    }
    let cov = |p: &Path| std::fs::read(p.join("c1obscc_k3").join("coverage.csv")).unwrap();
    assert_eq!(cov(a.path()), cov(b.path()));
}
