// SPDX-License-Identifier: Apache-2.0
//! `lite`: command-line front end.
//!
//! Exit codes: 0 ok, 1 usage, 2 input error, 3 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lite_core::atpg::{generate_all, verify_patterns, AtpgOptions, Compaction, XFill};
use lite_core::benchmarks;
use lite_core::faultsim::{
    check_equivalence, curve_from_status, enumerate_faults, random_patterns, read_patterns, simulate_faults, simulate_good,
    switching_metrics, write_patterns, CompiledCircuit, PatternSet, Verdict,
};
use lite_core::graph::Hypergraph;
use lite_core::lite::{self, run_pipeline, stitched, FfCoverage, LiteConfig, Variant, SEL, SEL_CC};
use lite_core::netlist::{write_bench, write_verilog, Netlist, ParseOptions};
use lite_core::report::{
    compare_tpi, estimate_area, point_overheads, read_netlist, run_experiment, CellAreaTable, ExperimentSpec, InputSource,
    TPI_CONTROL_AREA, TPI_OBSERVE_AREA,
};
use lite_core::scan::{extract_full_scan_lenient, insert_scan_ordered};

#[derive(Debug, Parser)]
#[command(name = "lite", version, about = "Scan-based DFT instrumentation, fault simulation and ATPG")]
struct Cli {
    /// Seed for random patterns, X-fill and planning.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Format of tabular output on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// CSV of `kind,area` rows overriding the default cell areas.
    #[arg(long, global = true, value_name = "FILE")]
    cell_areas: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// SCOAP measures and ranked candidate lists of the scan-stitched design.
    Analyze {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, default_value = "c1obs")]
        config: Variant,
        #[arg(long, default_value_t = 2)]
        xor_k: usize,
        /// Write the candidate lists as JSON.
        #[arg(long, value_name = "FILE")]
        lists: Option<PathBuf>,
        /// Write the hypergraph in Graphviz DOT form.
        #[arg(long, value_name = "FILE")]
        dot: Option<PathBuf>,
    },
    /// Stitch every flip-flop into one mux-scan chain.
    Scan {
        #[command(flatten)]
        input: InputArg,
        /// Output netlist; `.v` writes Verilog, anything else bench.
        #[arg(short, long)]
        out: PathBuf,
        /// File with one flip-flop instance name per line, scan-in first.
        #[arg(long, value_name = "FILE")]
        order: Option<PathBuf>,
    },
    /// Add observation and control logic to the scan flip-flops.
    Insert {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, default_value = "c1obs")]
        config: Variant,
        #[arg(long, default_value_t = 2)]
        xor_k: usize,
        /// `all` or the leading fraction of the chain to consider.
        #[arg(long, default_value = "all")]
        ff_coverage: String,
        #[arg(long, value_name = "FILE")]
        plan_out: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Config2 only: tie `sel` to 1, skipping the normal-mode check.
        #[arg(long)]
        config2_const_sel: bool,
        /// Skip the normal-mode equivalence check.
        #[arg(long)]
        no_verify: bool,
    },
    /// Stuck-at fault simulation over the full-scan model.
    Faultsim {
        #[command(flatten)]
        input: InputArg,
        /// `random:N[:SEED]` or a pattern file.
        #[arg(long)]
        patterns: String,
        #[arg(long)]
        collapse: bool,
        /// Stop simulating a fault once detected.
        #[arg(long)]
        drop: bool,
        /// Pattern counts at which to report coverage.
        #[arg(long, value_delimiter = ',')]
        curve: Vec<usize>,
    },
    /// PODEM test generation with fault dropping and compaction.
    Atpg {
        #[command(flatten)]
        input: InputArg,
        #[arg(long)]
        collapse: bool,
        #[arg(long, default_value_t = 10_000)]
        backtrack_limit: u64,
        #[arg(long, value_enum, default_value_t = CompactionArg::Reverse)]
        compaction: CompactionArg,
        #[arg(long, value_enum, default_value_t = FillArg::Random)]
        fill: FillArg,
        /// Write the patterns and expected responses.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Combinational equivalence of two designs' full-scan models.
    Equiv {
        a: String,
        b: String,
        /// `NAME=0|1`; defaults to `sel=0` and `sel_cc=0` where present.
        #[arg(long = "bind", value_name = "NAME=V")]
        bindings: Vec<String>,
    },
    /// Cell area by kind, instrumentation area and per-point overheads.
    Area {
        #[command(flatten)]
        input: InputArg,
    },
    /// Baseline plus each configuration, written as a report bundle.
    Experiment {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, value_delimiter = ',', default_value = "c1obs,c2obs,c1obscc,c2obscc")]
        configs: Vec<Variant>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        xor_k: Vec<usize>,
        /// Random-pattern seeds; defaults to the global seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "500,1000,5000,10000,50000")]
        samples: Vec<usize>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        no_atpg: bool,
        #[arg(long, default_value_t = 10_000)]
        backtrack_limit: u64,
        /// Run configurations concurrently.
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Debug, Args)]
struct InputArg {
    /// Netlist path (`.bench` or `.v`) or `bundled:NAME`.
    input: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompactionArg {
    None,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FillArg {
    Random,
    Zero,
}

/// Failure classes, mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Verification(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Res<T> = Result<T, Failure>;

const BUNDLED_PREFIX: &str = "bundled:";

fn source_of(spec: &str) -> InputSource {
    match spec.strip_prefix(BUNDLED_PREFIX) {
        Some(name) => InputSource::Bundled(name.to_string()),
        None => InputSource::Path(PathBuf::from(spec)),
    }
}

fn load(spec: &str) -> Res<Netlist> {
    match source_of(spec) {
        InputSource::Bundled(name) => benchmarks::load(&name).ok_or_else(|| {
            Failure::Input(anyhow::anyhow!(
                "no bundled benchmark `{name}` (available: {})",
                benchmarks::names().collect::<Vec<_>>().join(", ")
            ))
        }),
        InputSource::Path(p) => Ok(read_netlist(&p, ParseOptions { allow_reserved: true })?),
    }
}

fn write_file(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_netlist(path: &Path, n: &Netlist) -> Res<()> {
    let text = match path.extension().and_then(|e| e.to_str()) {
        Some("v" | "sv") => write_verilog(n),
        _ => write_bench(n),
    };
    write_file(path, &text)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn area_table(cli: &Cli) -> Res<CellAreaTable> {
    match &cli.cell_areas {
        None => Ok(CellAreaTable::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(CellAreaTable::from_csv(&text)?)
        }
    }
}

fn parse_coverage(s: &str) -> Res<FfCoverage> {
    if s == "all" {
        return Ok(FfCoverage::All);
    }
    match s.parse::<f64>() {
        Ok(f) if f > 0.0 && f <= 1.0 => Ok(FfCoverage::Fraction(f)),
        _ => Err(Failure::Input(anyhow::anyhow!("--ff-coverage must be `all` or a fraction in (0, 1], got `{s}`"))),
    }
}

fn analyze(cli: &Cli, input: &str, config: Variant, xor_k: usize, lists: Option<&Path>, dot: Option<&Path>) -> Res<()> {
    let n = load(input)?;
    if let Some(p) = dot {
        write_file(p, &Hypergraph::new(&n).to_dot())?;
    }
    let (base, _) = stitched(&n)?;
    let mut cfg = LiteConfig::new(config, xor_k);
    cfg.seed = cli.seed;
    let (scoap, cands) = lite::analyze(&base, &cfg)?;
    let lists_json = cands.to_json(&base);
    if let Some(p) = lists {
        write_file(p, &serde_json::to_string_pretty(&lists_json).expect("JSON values serialize"))?;
    }
    match cli.format {
        Format::Csv => print!("{}", scoap.to_csv(&base)),
        Format::Json => {
            let rows: Vec<_> = base
                .net_ids()
                .map(|id| {
                    let co = scoap.co(id);
                    json!({
                        "net_name": base.net_name(id),
                        "cc0": scoap.cc(id, false),
                        "cc1": scoap.cc(id, true),
                        "co": (co != lite_core::scoap::UNOBSERVABLE).then_some(co),
                    })
                })
                .collect();
            print_json(&json!({ "scoap": rows, "lists": lists_json }));
        }
    }
    Ok(())
}

fn scan(cli: &Cli, input: &str, out: &Path, order: Option<&Path>) -> Res<()> {
    let n = load(input)?;
    let order: Option<Vec<String>> = match order {
        Some(p) => Some(
            fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        ),
        None => None,
    };
    let (scanned, chain) = insert_scan_ordered(&n, order.as_deref())?;
    write_netlist(out, &scanned)?;
    let names: Vec<&str> = chain.order.iter().map(|&c| scanned.cell(c).name.as_str()).collect();
    match cli.format {
        Format::Csv => {
            println!("position,ff");
            for (i, name) in names.iter().enumerate() {
                println!("{i},{name}");
            }
        }
        Format::Json => print_json(&json!({ "length": names.len(), "order": names })),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn insert(
    cli: &Cli,
    input: &str,
    config: Variant,
    xor_k: usize,
    coverage: &str,
    plan_out: Option<&Path>,
    out: &Path,
    const_sel: bool,
    no_verify: bool,
) -> Res<()> {
    let n = load(input)?;
    let mut cfg = LiteConfig::new(config, xor_k);
    cfg.ff_coverage = parse_coverage(coverage)?;
    cfg.const_sel = const_sel;
    cfg.verify = !no_verify;
    cfg.seed = cli.seed;
    let res = run_pipeline(&n, &cfg).map_err(|e| match e {
        lite::LiteError::NotEquivalent(_) => Failure::Verification(e.to_string()),
        e => Failure::Input(e.into()),
    })?;
    write_netlist(out, &res.netlist)?;
    if let Some(p) = plan_out {
        write_file(p, &res.plan.to_json(&res.baseline))?;
    }
    let table = area_table(cli)?;
    let added = estimate_area(&res.netlist, &table).lite_um2;
    let verdict = match &res.verdict {
        Some(Verdict::Equivalent) => "equivalent",
        Some(Verdict::InconclusiveRandomPass { .. }) => "random-pass",
        Some(Verdict::Counterexample { .. }) => "counterexample",
        None => "skipped",
    };
    let summary = [
        ("config", config.short_name().to_string()),
        ("xor_k", xor_k.to_string()),
        ("instrumented_ffs", res.plan.records.len().to_string()),
        ("skipped_ffs", res.plan.skipped.len().to_string()),
        ("cells_added", (res.netlist.cell_count() - res.baseline.cell_count()).to_string()),
        ("area_added_um2", format!("{added:.2}")),
        ("normal_mode", verdict.to_string()),
    ];
    print_summary(cli.format, &summary);
    Ok(())
}

fn print_summary(format: Format, rows: &[(&str, String)]) {
    match format {
        Format::Csv => {
            println!("key,value");
            for (k, v) in rows {
                println!("{k},{v}");
            }
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = rows
                .iter()
                .map(|(k, v)| {
                    let val = v.parse::<f64>().map_or_else(|_| json!(v), |x| json!(x));
                    (k.to_string(), val)
                })
                .collect();
            print_json(&serde_json::Value::Object(map));
        }
    }
}

fn faultsim(cli: &Cli, input: &str, patterns: &str, collapse: bool, drop: bool, curve: &[usize]) -> Res<()> {
    let n = load(input)?;
    let model = extract_full_scan_lenient(&n)?;
    let c = CompiledCircuit::new(&model.netlist);
    let width = model.netlist.inputs().len();
    let set: PatternSet = if let Some(spec) = patterns.strip_prefix("random:") {
        let mut parts = spec.split(':');
        let count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Failure::Input(anyhow::anyhow!("expected `random:N[:SEED]`, got `{patterns}`")))?;
        let seed = match parts.next() {
            Some(s) => s.parse().with_context(|| format!("bad seed `{s}`"))?,
            None => cli.seed,
        };
        random_patterns(width, count, seed, 0.5)
    } else {
        let text = fs::read_to_string(patterns).with_context(|| format!("reading {patterns}"))?;
        let (header, stim, expected) = read_patterns(&text)?;
        let names: Vec<&str> = model.netlist.inputs().iter().map(|&i| model.netlist.net_name(i)).collect();
        if header.inputs != names {
            return Err(Failure::Input(anyhow::anyhow!("pattern file inputs do not match the design")));
        }
        if simulate_good(&c, &stim) != expected {
            return Err(Failure::Verification("expected responses in the pattern file differ from simulation".into()));
        }
        stim
    };
    let faults = enumerate_faults(&model.netlist, collapse);
    let res = simulate_faults(&c, &faults, &set, drop);
    let counts: Vec<usize> = if curve.is_empty() { vec![set.len()] } else { curve.to_vec() };
    let mut report = res.report;
    report.curve = curve_from_status(&res.status, &counts);
    let sw = switching_metrics(&model, &set);
    report.ass_pct = Some(sw.ass_pct);
    report.acs_pct = Some(sw.acs_pct);
    match cli.format {
        Format::Csv => {
            println!("patterns,coverage_pct");
            for (k, p) in &report.curve {
                println!("{k},{p:.4}");
            }
        }
        Format::Json => {
            let mut v = serde_json::to_value(&report).expect("report serializes");
            v["coverage_pct"] = json!(report.coverage_pct());
            print_json(&v);
        }
    }
    Ok(())
}

fn atpg(
    cli: &Cli,
    input: &str,
    collapse: bool,
    limit: u64,
    compaction: CompactionArg,
    fill: FillArg,
    out: Option<&Path>,
) -> Res<()> {
    let n = load(input)?;
    let model = extract_full_scan_lenient(&n)?;
    let faults = enumerate_faults(&model.netlist, collapse);
    let opts = AtpgOptions {
        backtrack_limit: limit,
        fill: match fill {
            FillArg::Random => XFill::Random(cli.seed),
            FillArg::Zero => XFill::Zero,
        },
        compaction: match compaction {
            CompactionArg::None => Compaction::None,
            CompactionArg::Reverse => Compaction::Reverse,
        },
        ..AtpgOptions::default()
    };
    let r = generate_all(&model.netlist, &faults, &opts);
    verify_patterns(&model.netlist, &faults, &r).map_err(|e| Failure::Verification(e.to_string()))?;
    if let Some(p) = out {
        let c = CompiledCircuit::new(&model.netlist);
        write_file(p, &write_patterns(&model, &r.patterns, &simulate_good(&c, &r.patterns)))?;
    }
    let s = &r.stats;
    let cycles = lite_core::scan::estimate_test_cycles(s.patterns as u64, model.ff_count() as u64);
    let summary = [
        ("faults", faults.len().to_string()),
        ("detected", s.detected.to_string()),
        ("untestable", s.untestable.to_string()),
        ("aborted", s.aborted.to_string()),
        ("patterns", s.patterns.to_string()),
        ("coverage_pct", format!("{:.4}", s.coverage_pct)),
        ("backtracks", s.backtracks.to_string()),
        ("cycles", cycles.to_string()),
        ("cpu_seconds", format!("{:.3}", s.cpu_seconds)),
    ];
    print_summary(cli.format, &summary);
    Ok(())
}

fn equiv(cli: &Cli, a: &str, b: &str, bindings: &[String]) -> Res<()> {
    let na = load(a)?;
    let nb = load(b)?;
    let mut binds: Vec<(String, bool)> = Vec::new();
    for s in bindings {
        let (name, v) = s
            .split_once('=')
            .filter(|(_, v)| matches!(*v, "0" | "1"))
            .ok_or_else(|| Failure::Input(anyhow::anyhow!("expected NAME=0|1, got `{s}`")))?;
        binds.push((name.to_string(), v == "1"));
    }
    if bindings.is_empty() {
        for name in [SEL, SEL_CC] {
            if na.find_net(name).is_some() != nb.find_net(name).is_some() {
                binds.push((name.to_string(), false));
            }
        }
    }
    let refs: Vec<(&str, bool)> = binds.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let verdict = check_equivalence(&na, &nb, &refs)?;
    match cli.format {
        Format::Csv => {
            let word = match &verdict {
                Verdict::Equivalent => "equivalent".to_string(),
                Verdict::InconclusiveRandomPass { vectors } => format!("random-pass ({vectors} vectors)"),
                Verdict::Counterexample { outputs, .. } => format!("counterexample on {}", outputs.join(" ")),
            };
            println!("{word}");
        }
        Format::Json => print_json(&serde_json::to_value(&verdict).expect("verdict serializes")),
    }
    if let Verdict::Counterexample { .. } = verdict {
        return Err(Failure::Verification("designs differ".into()));
    }
    Ok(())
}

fn area(cli: &Cli, input: &str) -> Res<()> {
    let n = load(input)?;
    let table = area_table(cli)?;
    let r = estimate_area(&n, &table);
    let p = point_overheads(&table);
    let t = compare_tpi(&table, TPI_CONTROL_AREA, TPI_OBSERVE_AREA);
    match cli.format {
        Format::Csv => {
            println!("item,area_um2");
            for (k, v) in &r.by_kind {
                println!("{k},{v:.2}");
            }
            println!("total,{:.2}", r.total_um2);
            println!("lite,{:.2}", r.lite_um2);
            println!("point_obs,{:.2}", p.obs);
            println!("point_cc,{:.2}", p.cc);
            println!("point_cc_obs,{:.2}", p.cc_obs);
        }
        Format::Json => print_json(&json!({
            "area": r,
            "point_overheads": p,
            "tpi_reduction_pct": t,
        })),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    cli: &Cli,
    input: &str,
    configs: &[Variant],
    xor_k: &[usize],
    seeds: &[u64],
    samples: &[usize],
    out: &Path,
    no_atpg: bool,
    limit: u64,
    parallel: bool,
) -> Res<()> {
    let mut spec = ExperimentSpec::new(source_of(input), out);
    spec.configs = configs.to_vec();
    spec.xor_k = xor_k.to_vec();
    spec.seeds = if seeds.is_empty() { vec![cli.seed] } else { seeds.to_vec() };
    spec.samples = samples.to_vec();
    spec.run_atpg = !no_atpg;
    spec.atpg.backtrack_limit = limit;
    spec.areas = area_table(cli)?;
    spec.parallel = parallel;
    let report = run_experiment(&spec)?;
    match cli.format {
        Format::Csv => {
            let p = out.join("comparison.csv");
            print!("{}", fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?);
        }
        Format::Json => print_json(&serde_json::to_value(&report).expect("report serializes")),
    }
    for f in &report.failures {
        eprintln!("{}: {}", f.config, f.error);
    }
    if report.failures.iter().any(|f| f.verification) {
        return Err(Failure::Verification("some configurations failed verification".into()));
    }
    if !report.failures.is_empty() {
        return Err(Failure::Input(anyhow::anyhow!("some configurations failed")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Command::Analyze { input, config, xor_k, lists, dot } => {
            analyze(cli, &input.input, *config, *xor_k, lists.as_deref(), dot.as_deref())
        }
        Command::Scan { input, out, order } => scan(cli, &input.input, out, order.as_deref()),
        Command::Insert { input, config, xor_k, ff_coverage, plan_out, out, config2_const_sel, no_verify } => {
            insert(cli, &input.input, *config, *xor_k, ff_coverage, plan_out.as_deref(), out, *config2_const_sel, *no_verify)
        }
        Command::Faultsim { input, patterns, collapse, drop, curve } => {
            faultsim(cli, &input.input, patterns, *collapse, *drop, curve)
        }
        Command::Atpg { input, collapse, backtrack_limit, compaction, fill, out } => {
            atpg(cli, &input.input, *collapse, *backtrack_limit, *compaction, *fill, out.as_deref())
        }
        Command::Equiv { a, b, bindings } => equiv(cli, a, b, bindings),
        Command::Area { input } => area(cli, &input.input),
        Command::Experiment { input, configs, xor_k, seeds, samples, out, no_atpg, backtrack_limit, parallel } => {
            experiment(cli, &input.input, configs, xor_k, seeds, samples, out, *no_atpg, *backtrack_limit, *parallel)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
    }
}
