// SPDX-License-Identifier: Apache-2.0
//! Area estimation and the experiment harness.
//!
//! An experiment runs the baseline scan design and every requested LITE
//! configuration through the same random-pattern and ATPG flow and writes
//! one directory per configuration plus a comparison table. Every CSV is a
//! pure function of the inputs and seeds; wall-clock times go to a
//! separate `timing.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atpg::{generate_all, verify_patterns, AtpgOptions, AtpgResult};
use crate::benchmarks;
use crate::faultsim::{coverage_curve, enumerate_faults, switching_metrics, CompiledCircuit, Fault};
use crate::lite::{expected_delta, run_pipeline, stitched, InsertionPlan, LiteConfig, LiteError, Variant};
use crate::netlist::{parse_bench_with, parse_verilog_subset_with, write_verilog, CellKind, Netlist, NetlistError, ParseOptions};
use crate::scan::{estimate_test_cycles, extract_full_scan, FullScanModel, ScanError};
use crate::scoap::ScoapTable;

/// Per-point area of a published control test point, in µm².
pub const TPI_CONTROL_AREA: f64 = 36.28;
/// Per-point area of a published observe test point, in µm².
pub const TPI_OBSERVE_AREA: f64 = 32.53;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },
    #[error("cell area table line {line}: {msg}")]
    AreaTable { line: usize, msg: String },
    #[error("invalid experiment: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Lite(#[from] LiteError),
    #[error("pattern verification failed: {0}")]
    Verify(String),
}

impl ReportError {
    /// A produced artifact failed its own check, as opposed to bad input.
    pub fn is_verification(&self) -> bool {
        matches!(self, ReportError::Verify(_) | ReportError::Lite(LiteError::NotEquivalent(_)))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |err| ReportError::Io { path: path.to_path_buf(), err }
}

/// Read a `.bench` or structural Verilog netlist, chosen by extension
/// (`.v`/`.sv` is Verilog, anything else bench).
pub fn read_netlist(path: &Path, opts: ParseOptions) -> Result<Netlist, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let verilog = matches!(path.extension().and_then(|e| e.to_str()), Some("v" | "sv"));
    let mut n = if verilog { parse_verilog_subset_with(&text, opts)? } else { parse_bench_with(&text, opts)? };
    if !verilog {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            n.set_name(stem);
        }
    }
    Ok(n)
}

/// Cell areas in µm², keyed by two-input cell kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAreaTable {
    areas: BTreeMap<CellKind, f64>,
    /// Area charged for kinds missing from the table.
    pub fallback: f64,
}

impl Default for CellAreaTable {
    fn default() -> Self {
        let areas = [
            (CellKind::Dff, 20.02),
            (CellKind::Sdff, 26.28),
            (CellKind::Not, 3.76),
            (CellKind::And, 6.26),
            (CellKind::Mux2, 11.26),
            (CellKind::Xor, 8.76),
        ]
        .into_iter()
        .collect();
        CellAreaTable { areas, fallback: 3.76 }
    }
}

impl CellAreaTable {
    /// Parse `kind,area` rows over the defaults. Kinds use netlist
    /// keywords with an optional `2` suffix (`AND2`, `XOR2`, `INV`); a
    /// `default` row sets the fallback. A header row is optional.
    pub fn from_csv(text: &str) -> Result<Self, ReportError> {
        let mut t = CellAreaTable::default();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| ReportError::AreaTable { line, msg: e.to_string() })?;
            if rec.len() < 2 {
                return Err(ReportError::AreaTable { line, msg: "expected `kind,area`".into() });
            }
            let (name, value) = (&rec[0], &rec[1]);
            let area: f64 = match value.parse() {
                Ok(v) => v,
                Err(_) if line == 1 => continue,
                Err(_) => return Err(ReportError::AreaTable { line, msg: format!("`{value}` is not a number") }),
            };
            if !(area.is_finite() && area > 0.0) {
                return Err(ReportError::AreaTable { line, msg: format!("area must be positive, got {area}") });
            }
            if name.eq_ignore_ascii_case("default") {
                t.fallback = area;
                continue;
            }
            let kind = CellKind::from_keyword(name.trim_end_matches('2'))
                .ok_or_else(|| ReportError::AreaTable { line, msg: format!("unknown cell kind `{name}`") })?;
            t.areas.insert(kind, area);
        }
        Ok(t)
    }

    pub fn get(&self, kind: CellKind) -> Option<f64> {
        self.areas.get(&kind).copied()
    }

    pub fn set(&mut self, kind: CellKind, area: f64) {
        assert!(area > 0.0, "cell areas are positive");
        self.areas.insert(kind, area);
    }

    /// Area of one cell with `fanin` inputs and whether the fallback was
    /// used. Gates wider than two inputs count as a chain of two-input
    /// cells.
    pub fn cell_area(&self, kind: CellKind, fanin: usize) -> (f64, bool) {
        let units = match kind {
            CellKind::And | CellKind::Nand | CellKind::Or | CellKind::Nor | CellKind::Xor | CellKind::Xnor => {
                fanin.saturating_sub(1).max(1)
            }
            _ => 1,
        };
        match self.get(kind) {
            Some(a) => (a * units as f64, false),
            None => (self.fallback * units as f64, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub total_um2: f64,
    /// Area per cell kind keyword.
    pub by_kind: BTreeMap<String, f64>,
    /// Cells in the `lite_` namespace.
    pub lite_um2: f64,
    pub lite_cells: usize,
    /// Kinds charged at the fallback area.
    pub fallback_kinds: Vec<String>,
}

pub fn estimate_area(n: &Netlist, table: &CellAreaTable) -> AreaReport {
    let mut r = AreaReport { total_um2: 0.0, by_kind: BTreeMap::new(), lite_um2: 0.0, lite_cells: 0, fallback_kinds: Vec::new() };
    for c in n.cells() {
        let (a, fell_back) = table.cell_area(c.kind, c.inputs.len());
        let key = c.kind.keyword().to_string();
        if fell_back && !r.fallback_kinds.contains(&key) {
            log::warn!("no area for {key}; charging {} µm² per two-input unit", table.fallback);
            r.fallback_kinds.push(key.clone());
        }
        *r.by_kind.entry(key).or_default() += a;
        r.total_um2 += a;
        if c.name.starts_with(crate::netlist::RESERVED_PREFIX) {
            r.lite_um2 += a;
            r.lite_cells += 1;
        }
    }
    r
}

/// Added area of one instrumented flip-flop, in µm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointOverheads {
    /// XOR2 + MUX2.
    pub obs: f64,
    /// MUX2.
    pub cc: f64,
    /// XOR2 + two MUX2.
    pub cc_obs: f64,
}

pub fn point_overheads(table: &CellAreaTable) -> PointOverheads {
    let xor = table.cell_area(CellKind::Xor, 2).0;
    let mux = table.cell_area(CellKind::Mux2, 3).0;
    PointOverheads { obs: xor + mux, cc: mux, cc_obs: xor + 2.0 * mux }
}

/// Added area of a whole plan.
pub fn plan_overhead(plan: &InsertionPlan, table: &CellAreaTable) -> f64 {
    let (xors, muxes, _) = expected_delta(plan);
    xors as f64 * table.cell_area(CellKind::Xor, 2).0 + muxes as f64 * table.cell_area(CellKind::Mux2, 3).0
}

/// Per-point area reduction of LITE against published test points, in
/// whole percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TpiComparison {
    pub cc_pct: i64,
    pub obs_pct: i64,
    pub cc_obs_pct: i64,
}

/// `(tpi − lite) / tpi`, rounded. Control points compare against the
/// control test point; combined points also compare against it, as the
/// larger of the two.
pub fn compare_tpi(table: &CellAreaTable, tpi_control: f64, tpi_observe: f64) -> TpiComparison {
    let p = point_overheads(table);
    let pct = |tpi: f64, lite: f64| (100.0 * (tpi - lite) / tpi).round() as i64;
    TpiComparison { cc_pct: pct(tpi_control, p.cc), obs_pct: pct(tpi_observe, p.obs), cc_obs_pct: pct(tpi_control, p.cc_obs) }
}

/// Longest combinational path of the full-scan model, in cells. A
/// structural stand-in for delay.
pub fn logic_depth(model: &FullScanModel) -> u32 {
    CompiledCircuit::new(&model.netlist).max_level()
}

/// Cells a configuration adds on the D path and the Q path of an
/// instrumented flip-flop.
pub fn depth_added(variant: Variant, xor_k: usize) -> (u32, u32) {
    let legs = xor_k as u32;
    let tree = u32::BITS - (legs - 1).leading_zeros();
    (tree + 1, u32::from(variant.has_cc()))
}

/// Where the input netlist comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputSource {
    Path(PathBuf),
    Bundled(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub input: InputSource,
    pub configs: Vec<Variant>,
    /// XOR fan-ins; every configuration runs once per entry.
    pub xor_k: Vec<usize>,
    /// Random-pattern seeds; curves are averaged over them. The first also
    /// seeds ATPG fill and planning.
    pub seeds: Vec<u64>,
    /// Random-pattern counts sampled for coverage curves, ascending.
    pub samples: Vec<usize>,
    pub out_dir: PathBuf,
    pub atpg: AtpgOptions,
    pub run_atpg: bool,
    pub areas: CellAreaTable,
    /// Run configurations concurrently.
    pub parallel: bool,
}

impl ExperimentSpec {
    pub fn new(input: InputSource, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            input,
            configs: Variant::ALL.to_vec(),
            xor_k: vec![2],
            seeds: vec![1],
            samples: vec![500, 1_000, 5_000, 10_000, 50_000],
            out_dir: out_dir.into(),
            atpg: AtpgOptions::default(),
            run_atpg: true,
            areas: CellAreaTable::default(),
            parallel: false,
        }
    }

    fn validate(&self) -> Result<(), ReportError> {
        if self.configs.is_empty() {
            return Err(ReportError::BadSpec("no configurations".into()));
        }
        if self.seeds.is_empty() {
            return Err(ReportError::BadSpec("no seeds".into()));
        }
        if self.samples.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ReportError::BadSpec("samples must be strictly ascending".into()));
        }
        if let Some(k) = self.xor_k.iter().find(|k| !(2..=5).contains(*k)) {
            return Err(ReportError::BadSpec(format!("XOR fan-in {k} outside 2..=5")));
        }
        if self.xor_k.is_empty() {
            return Err(ReportError::BadSpec("no XOR fan-in".into()));
        }
        Ok(())
    }
}

/// ATPG outcome as written to `atpg.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtpgSummary {
    pub faults: usize,
    pub detected: usize,
    pub untestable: usize,
    pub aborted: usize,
    pub patterns: usize,
    pub coverage_pct: f64,
    pub backtracks: u64,
    pub decisions: u64,
    pub cycles: u64,
    pub ass_pct: f64,
    pub acs_pct: f64,
    pub verified: bool,
}

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub config: String,
    pub xor_k: usize,
    pub instrumented_ffs: usize,
    pub skipped_ffs: usize,
    pub faults: usize,
    /// Random-pattern coverage at the largest sample, averaged over seeds.
    pub random_coverage_pct: f64,
    pub patterns: Option<usize>,
    pub pattern_reduction_pct: Option<f64>,
    pub cycles: Option<u64>,
    pub cycle_reduction_pct: Option<f64>,
    pub atpg_coverage_pct: Option<f64>,
    pub ass_pct: Option<f64>,
    pub acs_pct: Option<f64>,
    pub area_um2: f64,
    pub area_ratio: f64,
    pub lite_area_um2: f64,
    pub depth: u32,
    pub depth_delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub config: String,
    pub error: String,
    /// The stage that failed was an equivalence or pattern check.
    pub verification: bool,
}

/// Everything written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub netlist: String,
    pub rows: Vec<ComparisonRow>,
    /// Averaged `(patterns, coverage %)` per configuration directory.
    pub curves: BTreeMap<String, Vec<(usize, f64)>>,
    pub failures: Vec<Failure>,
}

/// Result of the shared per-design flow.
struct DesignRun {
    row: ComparisonRow,
    curve: Vec<(usize, f64)>,
    seconds: f64,
}

fn load_input(src: &InputSource) -> Result<Netlist, ReportError> {
    match src {
        InputSource::Path(p) => read_netlist(p, ParseOptions::default()),
        InputSource::Bundled(name) => {
            benchmarks::load(name).ok_or_else(|| ReportError::BadSpec(format!("no bundled benchmark `{name}`")))
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), ReportError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Mean coverage curve of the model over the experiment seeds.
fn mean_curve(model: &FullScanModel, faults: &[Fault], spec: &ExperimentSpec) -> Vec<(usize, f64)> {
    let c = CompiledCircuit::new(&model.netlist);
    let mut sum = vec![0.0; spec.samples.len()];
    for &seed in &spec.seeds {
        let r = coverage_curve(&c, faults, &spec.samples, seed);
        for (s, (_, pct)) in sum.iter_mut().zip(r.curve) {
            *s += pct;
        }
    }
    let k = spec.seeds.len() as f64;
    spec.samples.iter().zip(sum).map(|(&n, s)| (n, s / k)).collect()
}

fn curve_csv(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("patterns,coverage_pct\n");
    for (n, p) in curve {
        let _ = writeln!(s, "{n},{p:.4}");
    }
    s
}

fn run_atpg(model: &FullScanModel, faults: &[Fault], opts: &AtpgOptions) -> Result<(AtpgResult, AtpgSummary), ReportError> {
    let r = generate_all(&model.netlist, faults, opts);
    verify_patterns(&model.netlist, faults, &r).map_err(|e| ReportError::Verify(e.to_string()))?;
    let sw = switching_metrics(model, &r.patterns);
    let summary = AtpgSummary {
        faults: faults.len(),
        detected: r.stats.detected,
        untestable: r.stats.untestable,
        aborted: r.stats.aborted,
        patterns: r.stats.patterns,
        coverage_pct: r.stats.coverage_pct,
        backtracks: r.stats.backtracks,
        decisions: r.stats.decisions,
        cycles: estimate_test_cycles(r.stats.patterns as u64, model.ff_count() as u64),
        ass_pct: sw.ass_pct,
        acs_pct: sw.acs_pct,
        verified: true,
    };
    Ok((r, summary))
}

/// Metrics shared by baseline and configurations; writes the per-design
/// artifacts into `dir`.
fn run_design(
    label: &str,
    xor_k: usize,
    netlist: &Netlist,
    scoap: &ScoapTable,
    plan: Option<(&InsertionPlan, &Netlist)>,
    dir: &Path,
    spec: &ExperimentSpec,
) -> Result<DesignRun, ReportError> {
    let t0 = Instant::now();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write(&dir.join("netlist.v"), &write_verilog(netlist))?;
    let analyzed = plan.map_or(netlist, |(_, base)| base);
    write(&dir.join("scoap.csv"), &scoap.to_csv(analyzed))?;
    if let Some((p, base)) = plan {
        write(&dir.join("plan.json"), &p.to_json(base))?;
    }
    let plan = plan.map(|(p, _)| p);
    let model = extract_full_scan(netlist)?;
    let faults = enumerate_faults(&model.netlist, true);
    let curve = mean_curve(&model, &faults, spec);
    write(&dir.join("coverage.csv"), &curve_csv(&curve))?;
    let area = estimate_area(netlist, &spec.areas);
    write(&dir.join("area.json"), &to_json(&area))?;
    let atpg = if spec.run_atpg {
        let mut opts = spec.atpg;
        if let crate::atpg::XFill::Random(_) = opts.fill {
            opts.fill = crate::atpg::XFill::Random(spec.seeds[0]);
        }
        let (_, summary) = run_atpg(&model, &faults, &opts)?;
        write(&dir.join("atpg.json"), &to_json(&summary))?;
        Some(summary)
    } else {
        None
    };
    let row = ComparisonRow {
        config: label.to_string(),
        xor_k,
        instrumented_ffs: plan.map_or(0, |p| p.records.len()),
        skipped_ffs: plan.map_or(0, |p| p.skipped.len()),
        faults: faults.len(),
        random_coverage_pct: curve.last().map_or(100.0, |c| c.1),
        patterns: atpg.as_ref().map(|a| a.patterns),
        pattern_reduction_pct: None,
        cycles: atpg.as_ref().map(|a| a.cycles),
        cycle_reduction_pct: None,
        atpg_coverage_pct: atpg.as_ref().map(|a| a.coverage_pct),
        ass_pct: atpg.as_ref().map(|a| a.ass_pct),
        acs_pct: atpg.as_ref().map(|a| a.acs_pct),
        area_um2: area.total_um2,
        area_ratio: 1.0,
        lite_area_um2: area.lite_um2,
        depth: logic_depth(&model),
        depth_delta: 0,
    };
    Ok(DesignRun { row, curve, seconds: t0.elapsed().as_secs_f64() })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn reduction(base: Option<f64>, new: Option<f64>) -> Option<f64> {
    match (base, new) {
        (Some(b), Some(n)) if b > 0.0 => Some(100.0 * (b - n) / b),
        _ => None,
    }
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn fmt_f(v: f64) -> String {
    format!("{v:.4}")
}

fn comparison_csv(rows: &[ComparisonRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "config",
        "xor_k",
        "instrumented_ffs",
        "skipped_ffs",
        "faults",
        "random_coverage_pct",
        "patterns",
        "pattern_reduction_pct",
        "cycles",
        "cycle_reduction_pct",
        "atpg_coverage_pct",
        "ass_pct",
        "acs_pct",
        "area_um2",
        "area_ratio",
        "lite_area_um2",
        "depth",
        "depth_delta",
    ];
    let csv_err = |e: csv::Error| ReportError::BadSpec(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.config.clone(),
            r.xor_k.to_string(),
            r.instrumented_ffs.to_string(),
            r.skipped_ffs.to_string(),
            r.faults.to_string(),
            fmt_f(r.random_coverage_pct),
            fmt_opt(r.patterns),
            fmt_opt(r.pattern_reduction_pct.map(fmt_f)),
            fmt_opt(r.cycles),
            fmt_opt(r.cycle_reduction_pct.map(fmt_f)),
            fmt_opt(r.atpg_coverage_pct.map(fmt_f)),
            fmt_opt(r.ass_pct.map(fmt_f)),
            fmt_opt(r.acs_pct.map(fmt_f)),
            fmt_f(r.area_um2),
            fmt_f(r.area_ratio),
            fmt_f(r.lite_area_um2),
            r.depth.to_string(),
            r.depth_delta.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::BadSpec(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Metadata written next to `comparison.csv`.
#[derive(Debug, Clone, Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    netlist: &'a str,
    configs: Vec<String>,
    xor_k: &'a [usize],
    seeds: &'a [u64],
    samples: &'a [usize],
    atpg: &'a AtpgOptions,
    run_atpg: bool,
    areas: &'a CellAreaTable,
    tpi_control_um2: f64,
    tpi_observe_um2: f64,
    point_overheads: PointOverheads,
    tpi_comparison: TpiComparison,
    depth_note: &'static str,
    failures: &'a [Failure],
}

/// Run the baseline and every configuration, writing the bundle under
/// `spec.out_dir`. A failing configuration is recorded and skipped.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ReportError> {
    spec.validate()?;
    let input = load_input(&spec.input)?;
    fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;

    let (baseline, _) = stitched(&input)?;
    let base_cfg = LiteConfig::new(spec.configs[0], spec.xor_k[0]);
    let (base_scoap, _) = crate::lite::analyze(&baseline, &base_cfg)?;
    let base = run_design("baseline", 0, &baseline, &base_scoap, None, &spec.out_dir.join("baseline"), spec)?;

    let jobs: Vec<(Variant, usize)> = spec.configs.iter().flat_map(|&v| spec.xor_k.iter().map(move |&k| (v, k))).collect();
    let label = |v: Variant, k: usize| {
        if spec.xor_k.len() == 1 {
            v.short_name().to_string()
        } else {
            format!("{}_k{k}", v.short_name())
        }
    };
    let one = |&(v, k): &(Variant, usize)| -> (String, Result<DesignRun, ReportError>) {
        let name = label(v, k);
        let mut cfg = LiteConfig::new(v, k);
        cfg.seed = spec.seeds[0];
        let res = run_pipeline(&input, &cfg).map_err(ReportError::from).and_then(|out| {
            run_design(&name, k, &out.netlist, &out.scoap, Some((&out.plan, &out.baseline)), &spec.out_dir.join(&name), spec)
        });
        (name, res)
    };
    let results: Vec<(String, Result<DesignRun, ReportError>)> =
        if spec.parallel { jobs.par_iter().map(one).collect() } else { jobs.iter().map(one).collect() };

    let mut rows = vec![base.row.clone()];
    let mut curves = BTreeMap::new();
    curves.insert("baseline".to_string(), base.curve.clone());
    let mut timing = BTreeMap::new();
    timing.insert("baseline".to_string(), base.seconds);
    let mut failures = Vec::new();
    for (name, res) in results {
        match res {
            Ok(mut run) => {
                let r = &mut run.row;
                r.pattern_reduction_pct = reduction(base.row.patterns.map(|p| p as f64), r.patterns.map(|p| p as f64));
                r.cycle_reduction_pct = reduction(base.row.cycles.map(|c| c as f64), r.cycles.map(|c| c as f64));
                r.area_ratio = r.area_um2 / base.row.area_um2;
                r.depth_delta = i64::from(r.depth) - i64::from(base.row.depth);
                timing.insert(name.clone(), run.seconds);
                curves.insert(name, run.curve);
                rows.push(run.row);
            }
            Err(e) => {
                log::error!("{name}: {e}");
                failures.push(Failure { config: name, error: e.to_string(), verification: e.is_verification() });
            }
        }
    }

    write(&spec.out_dir.join("comparison.csv"), &comparison_csv(&rows)?)?;
    let sidecar = Sidecar {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        netlist: input.name(),
        configs: spec.configs.iter().map(|v| v.short_name().to_string()).collect(),
        xor_k: &spec.xor_k,
        seeds: &spec.seeds,
        samples: &spec.samples,
        atpg: &spec.atpg,
        run_atpg: spec.run_atpg,
        areas: &spec.areas,
        tpi_control_um2: TPI_CONTROL_AREA,
        tpi_observe_um2: TPI_OBSERVE_AREA,
        point_overheads: point_overheads(&spec.areas),
        tpi_comparison: compare_tpi(&spec.areas, TPI_CONTROL_AREA, TPI_OBSERVE_AREA),
        depth_note: "depth is the longest combinational path in cells, a structural proxy for delay",
        failures: &failures,
    };
    write(&spec.out_dir.join("comparison.json"), &to_json(&sidecar))?;
    write(&spec.out_dir.join("failures.json"), &to_json(&failures))?;
    write(&spec.out_dir.join("timing.json"), &to_json(&timing))?;
    Ok(ExperimentReport { netlist: input.name().to_string(), rows, curves, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_overheads_and_tpi_percentages() {
        let t = CellAreaTable::default();
        let p = point_overheads(&t);
        assert_eq!(format!("{:.2} {:.2} {:.2}", p.obs, p.cc, p.cc_obs), "20.02 11.26 31.28");
        let c = compare_tpi(&t, TPI_CONTROL_AREA, TPI_OBSERVE_AREA);
        assert_eq!((c.cc_pct, c.obs_pct, c.cc_obs_pct), (69, 38, 14));
    }

    #[test]
    fn csv_overrides_and_rejects() {
        let t = CellAreaTable::from_csv("kind,area\nXOR2, 9.5\nINV,4\ndefault,5\n").unwrap();
        assert_eq!(t.get(CellKind::Xor), Some(9.5));
        assert_eq!(t.get(CellKind::Not), Some(4.0));
        assert_eq!(t.fallback, 5.0);
        assert_eq!(t.get(CellKind::Mux2), Some(11.26));
        assert!(CellAreaTable::from_csv("AND2,0\n").is_err());
        assert!(CellAreaTable::from_csv("AND2,1\nFOO2,3\n").is_err());
        assert!(CellAreaTable::from_csv("AND2,1\nXOR2,x\n").is_err());
    }

    #[test]
    fn wide_gates_count_as_two_input_chains() {
        let t = CellAreaTable::default();
        assert_eq!(t.cell_area(CellKind::Xor, 4), (3.0 * 8.76, false));
        assert_eq!(t.cell_area(CellKind::Nand, 3), (2.0 * 3.76, true));
        assert_eq!(t.cell_area(CellKind::Sdff, 3), (26.28, false));
    }

    #[test]
    fn area_delta_matches_plan() {
        let n = benchmarks::load("s27").unwrap();
        let t = CellAreaTable::default();
        for v in Variant::ALL {
            let out = run_pipeline(&n, &LiteConfig::new(v, 2)).unwrap();
            let delta = estimate_area(&out.netlist, &t).total_um2 - estimate_area(&out.baseline, &t).total_um2;
            assert!((delta - plan_overhead(&out.plan, &t)).abs() < 1e-9, "{v}");
            assert!((estimate_area(&out.netlist, &t).lite_um2 - plan_overhead(&out.plan, &t)).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn depth_added_by_structure() {
        assert_eq!(depth_added(Variant::Config1Obs, 2), (2, 0));
        assert_eq!(depth_added(Variant::Config2ObsCc, 2), (2, 1));
        assert_eq!(depth_added(Variant::Config1Obs, 3), (3, 0));
        assert_eq!(depth_added(Variant::Config1Obs, 4), (3, 0));
        assert_eq!(depth_added(Variant::Config1Obs, 5), (4, 0));
    }

    #[test]
    fn bad_specs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ExperimentSpec::new(InputSource::Bundled("s27".into()), dir.path());
        s.samples = vec![10, 5];
        assert!(matches!(run_experiment(&s), Err(ReportError::BadSpec(_))));
        s.samples = vec![5, 10];
        s.configs.clear();
        assert!(matches!(run_experiment(&s), Err(ReportError::BadSpec(_))));
    }

    #[test]
    fn s27_bundle_has_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ExperimentSpec::new(InputSource::Bundled("s27".into()), dir.path());
        s.samples = vec![16, 64];
        let r = run_experiment(&s).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.rows.len(), 5);
        for d in ["baseline", "c1obs", "c2obs", "c1obscc", "c2obscc"] {
            for f in ["netlist.v", "scoap.csv", "coverage.csv", "area.json", "atpg.json"] {
                assert!(dir.path().join(d).join(f).exists(), "{d}/{f}");
            }
            assert_eq!(dir.path().join(d).join("plan.json").exists(), d != "baseline");
        }
        for f in ["comparison.csv", "comparison.json", "failures.json", "timing.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let mut s = ExperimentSpec::new(InputSource::Bundled("s27".into()), dir.path());
            s.samples = vec![8, 32];
            s.seeds = vec![3, 4];
            s.parallel = true;
            run_experiment(&s).unwrap();
            let mut files = Vec::new();
            for d in ["baseline", "c1obscc"] {
                for f in ["coverage.csv", "atpg.json", "scoap.csv", "netlist.v"] {
                    files.push(fs::read(dir.path().join(d).join(f)).unwrap());
                }
            }
            files.push(fs::read(dir.path().join("comparison.csv")).unwrap());
            files
        };
        assert_eq!(run(), run());
    }
}
