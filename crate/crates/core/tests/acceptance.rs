// SPDX-License-Identifier: Apache-2.0
//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with `harness = false` so the verdict lines are always printed.
//! Exits non-zero if a criterion fails that is not listed in
//! [`UNATTAINED`].

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{assignment, oracle_detects, random_circuit, ScoapOracle, Shape};
use lite_core::atpg::{generate_all, verify_patterns, AtpgOptions, AtpgResult, AtpgStatus};
use lite_core::benchmarks;
use lite_core::faultsim::{
    check_equivalence, coverage_curve, detection_sets, enumerate_faults, exhaustive_patterns, patterns_to_reach, random_patterns,
    simulate_faults, CompiledCircuit, Fault, Verdict, RANDOM_VECTORS,
};
use lite_core::graph::Hypergraph;
use lite_core::lite::{expected_delta, run_pipeline, stitched, LiteConfig, Variant, SEL, SEL_CC};
use lite_core::netlist::{CellKind, Netlist};
use lite_core::report::{
    compare_tpi, plan_overhead, point_overheads, run_experiment, CellAreaTable, ExperimentSpec, InputSource, TPI_CONTROL_AREA,
    TPI_OBSERVE_AREA,
};
use lite_core::scan::extract_full_scan_lenient;
use lite_core::scoap::{compute_scoap, UNOBSERVABLE};

/// Criteria expected to fail, with the reason recorded alongside the
/// design notes. They still run and print their verdict.
const UNATTAINED: &[u32] = &[8];

const SYNTHETIC: [&str; 5] = ["syn1", "syn2", "syn3", "syn4", "syn5"];
const MID_SIZE: [&str; 2] = ["syn2", "syn3"];

const C1_BUDGET: Duration = Duration::from_secs(1);
const C2_BUDGET: Duration = Duration::from_secs(30);
const C3_BUDGET: Duration = Duration::from_secs(120);
const C6_BUDGET: Duration = Duration::from_secs(10);
const C7_BUDGET: Duration = Duration::from_secs(120);
const C8_BUDGET: Duration = Duration::from_secs(15 * 60);
const C9_BUDGET: Duration = Duration::from_secs(20 * 60);
const C10_BUDGET: Duration = Duration::from_secs(10 * 60);

const C2_CIRCUITS: u64 = 200;
const C2_MAX_CELLS: usize = 200;
const C7_MAX_INPUTS: usize = 18;
const C7_CIRCUITS: u64 = 40;
const C8_SAMPLES: [usize; 5] = [500, 1_000, 5_000, 10_000, 50_000];
const C8_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const C8_MIN_BENCHMARKS: usize = 3;
const C8_MIN_STRICT_POINTS: usize = 3;
const C9_MIN_BENCHMARKS: usize = 3;
const C10_BENCHMARK: &str = "syn3";
const C10_SEEDS: [u64; 3] = [1, 2, 3];
const C10_TARGET_PCT: f64 = 90.0;
const C10_MAX_PATTERNS: usize = 200_000;
/// Two-decimal agreement for areas.
const AREA_TOL: f64 = 0.005;

struct Outcome {
    pass: bool,
    detail: String,
    /// Per-benchmark measurements printed under the verdict.
    notes: Vec<String>,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into(), notes: Vec::new() }
}

impl Outcome {
    fn with_notes(mut self, notes: Vec<String>) -> Self {
        self.notes = notes;
        self
    }
}

fn within(t0: Instant, budget: Duration) -> (bool, String) {
    let e = t0.elapsed();
    (e <= budget, format!("{:.1}s of {}s", e.as_secs_f64(), budget.as_secs()))
}

fn load(name: &str) -> Netlist {
    benchmarks::load(name).expect("bundled benchmark")
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let mut nets = 0;
    for name in benchmarks::names() {
        let raw = load(name);
        let (scanned, _) = stitched(&raw).expect("stitch");
        for n in [&raw, &scanned] {
            let g = Hypergraph::new(n);
            let s = compute_scoap(n, &g, &g.topo_sort().expect("acyclic"));
            for &pi in n.inputs() {
                nets += 1;
                if s.cc(pi, false) != 1 || s.cc(pi, true) != 1 {
                    bad.push(format!("{name}:{}", n.net_name(pi)));
                }
            }
            for &po in n.outputs() {
                nets += 1;
                if s.co(po) != 0 {
                    bad.push(format!("{name}:{}", n.net_name(po)));
                }
            }
        }
    }
    let (fast, t) = within(t0, C1_BUDGET);
    outcome(bad.is_empty() && fast, format!("{nets} boundary nets checked, {} wrong, {t}", bad.len()))
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut mismatches = 0;
    let mut cells = 0;
    for seed in 0..C2_CIRCUITS {
        let shape =
            Shape { inputs: 2 + (seed as usize % 11), ffs: seed as usize % 7, cells: 1 + (seed as usize * 37) % C2_MAX_CELLS };
        let n = random_circuit(0xC2_0000 + seed, shape);
        cells += n.cell_count();
        let g = Hypergraph::new(&n);
        let s = compute_scoap(&n, &g, &g.topo_sort().expect("acyclic"));
        let mut o = ScoapOracle::new(&n);
        let clamp = |x: u128| x.min(u128::from(u32::MAX)) as u32;
        for id in n.net_ids() {
            let same = s.cc(id, false) == clamp(o.cc(id, false))
                && s.cc(id, true) == clamp(o.cc(id, true))
                && s.co(id) == o.co(id).map_or(UNOBSERVABLE, clamp);
            if !same {
                mismatches += 1;
            }
        }
    }
    let (fast, t) = within(t0, C2_BUDGET);
    outcome(mismatches == 0 && fast, format!("{C2_CIRCUITS} circuits, {cells} cells, {mismatches} net mismatches, {t}"))
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let mut runs = 0;
    for name in std::iter::once("s27").chain(MID_SIZE) {
        let n = load(name);
        for v in Variant::ALL {
            let out = match run_pipeline(&n, &LiteConfig::new(v, 2)) {
                Ok(o) => o,
                Err(e) => {
                    bad.push(format!("{name}/{v}: {e}"));
                    continue;
                }
            };
            let mut binds = vec![(SEL, false)];
            if v.has_cc() {
                binds.push((SEL_CC, false));
            }
            runs += 1;
            match check_equivalence(&out.baseline, &out.netlist, &binds) {
                Ok(Verdict::Equivalent) => {}
                Ok(Verdict::InconclusiveRandomPass { vectors }) if vectors >= RANDOM_VECTORS => {}
                other => bad.push(format!("{name}/{v}: {other:?}")),
            }
        }
    }
    let (fast, t) = within(t0, C3_BUDGET);
    outcome(bad.is_empty() && fast, format!("{runs} designs equivalent in normal mode, failures {bad:?}, {t}"))
}

fn criterion_4() -> Outcome {
    let mut bad = Vec::new();
    let mut ffs = 0;
    for name in benchmarks::names() {
        let n = load(name);
        for v in Variant::ALL {
            let out = run_pipeline(&n, &LiteConfig::new(v, 2)).expect("pipeline");
            let per_ff = if v.has_cc() { 3 } else { 2 };
            let want = out.plan.records.len() * per_ff;
            let got = out.netlist.cell_count() - out.baseline.cell_count();
            let (xors, muxes, _) = expected_delta(&out.plan);
            let kinds = |k| out.netlist.count_kind(k) - out.baseline.count_kind(k);
            ffs += out.plan.records.len();
            if got != want || xors + muxes != want || kinds(CellKind::Xor) != xors || kinds(CellKind::Mux2) != muxes {
                bad.push(format!("{name}/{v}: +{got} cells, expected {want}"));
            }
        }
    }
    outcome(bad.is_empty(), format!("{ffs} instrumented flip-flops across all runs, mismatches {bad:?}"))
}

fn criterion_5() -> Outcome {
    let t = CellAreaTable::default();
    let p = point_overheads(&t);
    let c = compare_tpi(&t, TPI_CONTROL_AREA, TPI_OBSERVE_AREA);
    let areas_ok = (p.obs - 20.02).abs() < AREA_TOL && (p.cc - 11.26).abs() < AREA_TOL && (p.cc_obs - 31.28).abs() < AREA_TOL;
    let pct_ok = (c.cc_pct, c.obs_pct, c.cc_obs_pct) == (69, 38, 14);
    outcome(
        areas_ok && pct_ok,
        format!(
            "Obs {:.2}, CC {:.2}, CC+Obs {:.2} um2; reductions {}% / {}% / {}%",
            p.obs, p.cc, p.cc_obs, c.cc_pct, c.obs_pct, c.cc_obs_pct
        ),
    )
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let m = extract_full_scan_lenient(&load("s27")).expect("model");
    let width = m.netlist.inputs().len();
    let faults = enumerate_faults(&m.netlist, true);
    let pats = exhaustive_patterns(width);
    let sets = detection_sets(&CompiledCircuit::new(&m.netlist), &faults, &pats);
    let mut wrong = 0;
    for (f, set) in faults.iter().zip(&sets) {
        for p in 0..pats.len() {
            let bit = set[p / 64] >> (p % 64) & 1 == 1;
            if bit != oracle_detects(&m.netlist, &assignment(p as u64, width), f) {
                wrong += 1;
            }
        }
    }
    let (fast, t) = within(t0, C6_BUDGET);
    outcome(
        wrong == 0 && fast && width == 7,
        format!("{} faults x {} patterns, {wrong} disagreements, {t}", faults.len(), pats.len()),
    )
}

/// Faults with an empty detection set under exhaustive simulation.
fn exhaustively_untestable(n: &Netlist, faults: &[Fault]) -> Vec<bool> {
    let pats = exhaustive_patterns(n.inputs().len());
    detection_sets(&CompiledCircuit::new(n), faults, &pats).iter().map(|s| s.iter().all(|&w| w == 0)).collect()
}

fn criterion_7(verified_elsewhere: &mut Vec<String>) -> Outcome {
    let t0 = Instant::now();
    let opts = AtpgOptions { backtrack_limit: 1_000_000, ..AtpgOptions::default() };
    let mut models = vec![("s27".to_string(), extract_full_scan_lenient(&load("s27")).expect("model").netlist)];
    for seed in 0..C7_CIRCUITS {
        let inputs = 2 + (seed as usize % 9);
        let ffs = (seed as usize * 5) % (C7_MAX_INPUTS - inputs + 1);
        let n = random_circuit(0xC7_0000 + seed, Shape { inputs, ffs, cells: 20 + (seed as usize * 13) % 120 });
        models.push((n.name().to_string(), extract_full_scan_lenient(&n).expect("model").netlist));
    }
    let (mut faults_total, mut untestable, mut bad) = (0, 0, Vec::new());
    for (name, m) in &models {
        assert!(m.inputs().len() <= C7_MAX_INPUTS);
        let faults = enumerate_faults(m, false);
        let r = generate_all(m, &faults, &opts);
        if let Err(e) = verify_patterns(m, &faults, &r) {
            bad.push(format!("{name}: {e}"));
        }
        let truth = exhaustively_untestable(m, &faults);
        for (st, &u) in r.status.iter().zip(&truth) {
            faults_total += 1;
            untestable += usize::from(u);
            if (*st == AtpgStatus::Untestable) != u || *st == AtpgStatus::Aborted {
                bad.push(format!("{name}: {st:?} vs exhaustive untestable={u}"));
            }
        }
    }
    bad.append(verified_elsewhere);
    let (fast, t) = within(t0, C7_BUDGET);
    outcome(
        bad.is_empty() && fast,
        format!(
            "{} circuits, {faults_total} faults, {untestable} untestable, all verdicts exact: {}, {t}",
            models.len(),
            bad.is_empty()
        ),
    )
}

fn mean_curve(n: &Netlist, seeds: &[u64], samples: &[usize]) -> Vec<f64> {
    let m = extract_full_scan_lenient(n).expect("model");
    let c = CompiledCircuit::new(&m.netlist);
    let faults = enumerate_faults(&m.netlist, true);
    let mut sum = vec![0.0; samples.len()];
    for &s in seeds {
        for (acc, (_, p)) in sum.iter_mut().zip(coverage_curve(&c, &faults, samples, s).curve) {
            *acc += p;
        }
    }
    sum.iter().map(|x| x / seeds.len() as f64).collect()
}

fn fmt_curve(c: &[f64]) -> String {
    c.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ")
}

fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let mut wins = 0;
    let mut notes = Vec::new();
    for name in SYNTHETIC {
        let n = load(name);
        let (base, _) = stitched(&n).expect("stitch");
        let b = mean_curve(&base, &C8_SEEDS, &C8_SAMPLES);
        let mut ok = true;
        let mut line = format!("{name}: baseline [{}]", fmt_curve(&b));
        for v in [Variant::Config1ObsCc, Variant::Config2ObsCc] {
            let out = run_pipeline(&n, &LiteConfig::new(v, 2)).expect("pipeline");
            let c = mean_curve(&out.netlist, &C8_SEEDS, &C8_SAMPLES);
            let never_below = c.iter().zip(&b).all(|(x, y)| x >= y);
            let strict = c.iter().zip(&b).filter(|(x, y)| x > y).count();
            ok &= never_below && strict >= C8_MIN_STRICT_POINTS;
            line += &format!(", {v} [{}]", fmt_curve(&c));
        }
        notes.push(format!("{line} -> {}", if ok { "improved" } else { "not improved" }));
        wins += usize::from(ok);
    }
    let (fast, t) = within(t0, C8_BUDGET);
    outcome(
        wins >= C8_MIN_BENCHMARKS && fast,
        format!("{wins} of {} benchmarks improved at every sample, {C8_MIN_BENCHMARKS} required, {t}", SYNTHETIC.len()),
    )
    .with_notes(notes)
}

fn atpg_on(n: &Netlist, verified: &mut Vec<String>, label: &str) -> AtpgResult {
    let m = extract_full_scan_lenient(n).expect("model");
    let faults = enumerate_faults(&m.netlist, true);
    let r = generate_all(&m.netlist, &faults, &AtpgOptions::default());
    if let Err(e) = verify_patterns(&m.netlist, &faults, &r) {
        verified.push(format!("{label}: {e}"));
    }
    r
}

fn criterion_9(verified: &mut Vec<String>) -> Outcome {
    let t0 = Instant::now();
    let mut wins = 0;
    let mut reductions = Vec::new();
    let mut notes = Vec::new();
    for name in SYNTHETIC {
        let n = load(name);
        let (base, _) = stitched(&n).expect("stitch");
        let b = atpg_on(&base, verified, name);
        let out = run_pipeline(&n, &LiteConfig::new(Variant::Config1ObsCc, 2)).expect("pipeline");
        let c = atpg_on(&out.netlist, verified, name);
        let (pb, pc) = (b.stats.patterns, c.stats.patterns);
        let red = 100.0 * (pb as f64 - pc as f64) / pb as f64;
        notes.push(format!(
            "{name}: baseline {pb} patterns ({:.2}% cov), c1obscc {pc} patterns ({:.2}% cov, {} aborted), reduction {red:.2}%",
            b.stats.coverage_pct, c.stats.coverage_pct, c.stats.aborted
        ));
        reductions.push(red);
        wins += usize::from(pc < pb);
    }
    let avg = reductions.iter().sum::<f64>() / reductions.len() as f64;
    let (fast, t) = within(t0, C9_BUDGET);
    outcome(
        wins >= C9_MIN_BENCHMARKS && fast,
        format!(
            "{wins} of {} benchmarks need fewer patterns, {C9_MIN_BENCHMARKS} required; mean reduction {avg:.2}% (reported only), {t}",
            SYNTHETIC.len()
        ),
    )
    .with_notes(notes)
}

fn criterion_10() -> Outcome {
    let t0 = Instant::now();
    let n = load(C10_BENCHMARK);
    let table = CellAreaTable::default();
    let mut areas = Vec::new();
    let mut counts = Vec::new();
    let mut notes = Vec::new();
    for k in 2..=5 {
        let out = run_pipeline(&n, &LiteConfig::new(Variant::Config1Obs, k)).expect("pipeline");
        let m = extract_full_scan_lenient(&out.netlist).expect("model");
        let c = CompiledCircuit::new(&m.netlist);
        let faults = enumerate_faults(&m.netlist, true);
        let mut total = 0.0;
        for &seed in &C10_SEEDS {
            let pats = random_patterns(m.netlist.inputs().len(), C10_MAX_PATTERNS, seed, 0.5);
            let st = simulate_faults(&c, &faults, &pats, true).status;
            total += patterns_to_reach(&st, C10_TARGET_PCT).unwrap_or(usize::MAX) as f64;
        }
        let mean = total / C10_SEEDS.len() as f64;
        let area = plan_overhead(&out.plan, &table);
        notes.push(format!(
            "k={k}: {} flip-flops instrumented, added area {area:.2} um2, mean patterns to {C10_TARGET_PCT}% = {mean:.1}",
            out.plan.records.len()
        ));
        areas.push(area);
        counts.push(mean);
    }
    let area_up = areas.windows(2).all(|w| w[1] > w[0]);
    let count_down = counts.windows(2).all(|w| w[1] <= w[0]);
    let (fast, t) = within(t0, C10_BUDGET);
    outcome(
        area_up && count_down && fast,
        format!(
            "Config1_Obs on {C10_BENCHMARK}: area strictly increasing {area_up}, pattern count non-increasing {count_down}, {t}"
        ),
    )
    .with_notes(notes)
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("bundle directory") {
            let p = e.expect("directory entry").path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(dir).expect("inside bundle").display().to_string();
                out.insert(rel, std::fs::read(&p).expect("readable"));
            }
        }
    }
    out
}

fn criterion_11() -> Outcome {
    let run = |dir: &Path| {
        let mut s = ExperimentSpec::new(InputSource::Bundled("syn1".into()), dir);
        s.seeds = vec![1, 2];
        s.parallel = true;
        run_experiment(&s).expect("experiment");
        csv_files(dir)
    };
    let (a, b) = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    let (fa, fb) = (run(a.path()), run(b.path()));
    let same = !fa.is_empty() && fa == fb;
    outcome(same, format!("{} CSV files compared across two runs, identical: {same}", fa.len()))
}

fn main() -> ExitCode {
    let mut verified = Vec::new();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |id: u32, title: &'static str, o: Outcome| {
        println!("criterion {id:>2} {} {title}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        for n in &o.notes {
            println!("    {n}");
        }
        results.push((id, title, o));
    };
    record(1, "SCOAP boundary constants", criterion_1());
    record(2, "SCOAP oracle equivalence", criterion_2());
    record(3, "functional preservation", criterion_3());
    record(4, "structural delta", criterion_4());
    record(5, "area table reproduction", criterion_5());
    record(6, "fault simulator soundness", criterion_6());
    let c9 = criterion_9(&mut verified);
    record(7, "ATPG soundness and completeness", criterion_7(&mut verified));
    record(8, "random-pattern improvement", criterion_8());
    record(9, "ATPG pattern-count reduction", c9);
    record(10, "XOR fan-in sweep", criterion_10());
    record(11, "determinism", criterion_11());

    let unexpected: Vec<u32> =
        results.iter().filter(|(id, _, o)| !o.pass && !UNATTAINED.contains(id)).map(|(id, _, _)| *id).collect();
    let passed = results.iter().filter(|(_, _, o)| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass; expected failures {UNATTAINED:?}", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
