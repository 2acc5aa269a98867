// SPDX-License-Identifier: Apache-2.0
//! Deterministic stuck-at test generation on the full-scan model.

mod podem;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faultsim::{scalar, simulate_faults, CompiledCircuit, Fault, FaultStatus, PatternSet, Scratch};
use crate::graph::Hypergraph;
use crate::netlist::{CellKind, Netlist};
use crate::scoap::{compute_scoap, ScoapTable};

pub use podem::{Podem, PodemOutcome, PodemStats};

/// Five-valued D-calculus value: a (good, faulty) pair with both halves
/// known, or unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicValue5 {
    Zero,
    One,
    X,
    /// Good 1, faulty 0.
    D,
    /// Good 0, faulty 1.
    DBar,
}

impl LogicValue5 {
    pub fn from_pair(good: Option<bool>, faulty: Option<bool>) -> Self {
        match (good, faulty) {
            (Some(false), Some(false)) => LogicValue5::Zero,
            (Some(true), Some(true)) => LogicValue5::One,
            (Some(true), Some(false)) => LogicValue5::D,
            (Some(false), Some(true)) => LogicValue5::DBar,
            _ => LogicValue5::X,
        }
    }

    pub fn good(self) -> Option<bool> {
        match self {
            LogicValue5::Zero | LogicValue5::DBar => Some(false),
            LogicValue5::One | LogicValue5::D => Some(true),
            LogicValue5::X => None,
        }
    }

    pub fn faulty(self) -> Option<bool> {
        match self {
            LogicValue5::Zero | LogicValue5::D => Some(false),
            LogicValue5::One | LogicValue5::DBar => Some(true),
            LogicValue5::X => None,
        }
    }

    /// Cell evaluation: both machines in three-valued logic, recombined.
    pub fn eval(kind: CellKind, ins: &[LogicValue5]) -> LogicValue5 {
        let enc = |v: Option<bool>| v.map_or(podem::X, u8::from);
        let dec = |v: u8| if v == podem::X { None } else { Some(v == 1) };
        let g: Vec<u8> = ins.iter().map(|v| enc(v.good())).collect();
        let f: Vec<u8> = ins.iter().map(|v| enc(v.faulty())).collect();
        LogicValue5::from_pair(dec(podem::eval3(kind, &g)), dec(podem::eval3(kind, &f)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum XFill {
    /// Seeded uniform random fill.
    Random(u64),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compaction {
    None,
    /// Drop patterns that detect nothing new when replayed last to first.
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtpgOptions {
    pub backtrack_limit: u64,
    pub fill: XFill,
    /// Fault-simulate each new pattern and skip faults it detects.
    pub drop: bool,
    pub compaction: Compaction,
}

impl Default for AtpgOptions {
    fn default() -> Self {
        AtpgOptions { backtrack_limit: 10_000, fill: XFill::Random(1), drop: true, compaction: Compaction::Reverse }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtpgStatus {
    /// Index of the first detecting pattern.
    Detected(usize),
    Untestable,
    /// Backtrack limit hit and never detected by chance.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtpgStats {
    pub backtracks: u64,
    pub decisions: u64,
    pub detected: usize,
    pub untestable: usize,
    pub aborted: usize,
    pub patterns: usize,
    pub coverage_pct: f64,
    /// Wall-clock seconds; not reproducible.
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AtpgResult {
    pub patterns: PatternSet,
    /// Indexed like the fault list passed to [`generate_all`].
    pub status: Vec<AtpgStatus>,
    pub stats: AtpgStats,
}

/// Generate a test for one fault.
pub fn podem(c: &CompiledCircuit, s: &ScoapTable, fault: Fault, backtrack_limit: u64) -> PodemOutcome {
    Podem::new(c, s).run(fault, backtrack_limit)
}

/// SCOAP of a combinational model netlist.
pub fn model_scoap(n: &Netlist) -> ScoapTable {
    let g = Hypergraph::new(n);
    let t = g.topo_sort().expect("combinational netlist");
    compute_scoap(n, &g, &t)
}

/// Test generation for every fault of a combinational model netlist.
///
/// Faults are targeted hardest first (SCOAP controllability of the
/// excitation value plus observability). Each generated cube is X-filled
/// and, with dropping, fault-simulated against the remaining faults.
pub fn generate_all(n: &Netlist, faults: &[Fault], opts: &AtpgOptions) -> AtpgResult {
    let t0 = Instant::now();
    let c = CompiledCircuit::new(n);
    let s = model_scoap(n);
    let mut engine = Podem::new(&c, &s);
    let mut order: Vec<usize> = (0..faults.len()).collect();
    let key = |i: usize| podem::hardness(&s, faults[i].net(n), faults[i].stuck);
    order.sort_by(|&a, &b| key(b).cmp(&key(a)).then(a.cmp(&b)));

    let width = c.inputs.len();
    let mut rng = match opts.fill {
        XFill::Random(seed) => Some(Xoshiro256PlusPlus::seed_from_u64(seed)),
        XFill::Zero => None,
    };
    let mut patterns = PatternSet::new(width);
    patterns.generator = "atpg".into();
    let mut status: Vec<Option<AtpgStatus>> = vec![None; faults.len()];
    let mut ins = Vec::new();
    let mut good = Vec::new();
    for &i in &order {
        if status[i].is_some() {
            continue;
        }
        match engine.run(faults[i], opts.backtrack_limit) {
            PodemOutcome::Untestable => status[i] = Some(AtpgStatus::Untestable),
            PodemOutcome::Aborted => status[i] = Some(AtpgStatus::Aborted),
            PodemOutcome::Test(cube) => {
                let row: Vec<bool> = cube
                    .iter()
                    .map(|&v| match v {
                        0 => false,
                        1 => true,
                        _ => rng.as_mut().is_some_and(|r| r.gen_bool(0.5)),
                    })
                    .collect();
                let p = patterns.len();
                patterns.push(&row);
                status[i] = Some(AtpgStatus::Detected(p));
                if opts.drop {
                    let one = patterns.slice(p, p + 1);
                    one.block_words(0, &mut ins);
                    c.eval_block(&ins, &mut good);
                    let pending: Vec<usize> =
                        (0..faults.len()).filter(|&j| status[j].is_none() || status[j] == Some(AtpgStatus::Aborted)).collect();
                    let hits: Vec<bool> = pending
                        .par_iter()
                        .map_init(Scratch::default, |sc, &j| c.detect_mask(&good, &faults[j], sc, 1) != 0)
                        .collect();
                    for (&j, hit) in pending.iter().zip(hits) {
                        if hit {
                            status[j] = Some(AtpgStatus::Detected(p));
                        }
                    }
                }
            }
        }
    }

    if opts.compaction == Compaction::Reverse && patterns.len() > 1 {
        patterns = reverse_compact(&c, faults, &patterns);
    }

    // Final detection indices from one pass over the kept patterns.
    let targets: Vec<usize> = (0..faults.len()).filter(|&j| status[j] != Some(AtpgStatus::Untestable)).collect();
    let sub: Vec<Fault> = targets.iter().map(|&j| faults[j]).collect();
    let sim = simulate_faults(&c, &sub, &patterns, true);
    let mut out: Vec<AtpgStatus> = status
        .iter()
        .map(|s| match s {
            Some(AtpgStatus::Untestable) => AtpgStatus::Untestable,
            _ => AtpgStatus::Aborted,
        })
        .collect();
    for (&j, st) in targets.iter().zip(&sim.status) {
        if let FaultStatus::Detected(p) = st {
            out[j] = AtpgStatus::Detected(*p);
        }
    }
    for (j, s) in out.iter().enumerate() {
        debug_assert!(
            !matches!(status[j], Some(AtpgStatus::Detected(_))) || matches!(s, AtpgStatus::Detected(_)),
            "compaction lost a detection"
        );
    }
    let detected = out.iter().filter(|s| matches!(s, AtpgStatus::Detected(_))).count();
    let untestable = out.iter().filter(|s| **s == AtpgStatus::Untestable).count();
    let aborted = out.len() - detected - untestable;
    let denom = out.len() - untestable;
    let stats = AtpgStats {
        backtracks: engine.stats.backtracks,
        decisions: engine.stats.decisions,
        detected,
        untestable,
        aborted,
        patterns: patterns.len(),
        coverage_pct: if denom == 0 { 100.0 } else { 100.0 * detected as f64 / denom as f64 },
        cpu_seconds: t0.elapsed().as_secs_f64(),
    };
    AtpgResult { patterns, status: out, stats }
}

/// Keep only patterns that detect something not detected by patterns
/// later in the list, replaying from the last pattern backwards.
fn reverse_compact(c: &CompiledCircuit, faults: &[Fault], patterns: &PatternSet) -> PatternSet {
    let mut rev = PatternSet::new(patterns.width());
    for p in (0..patterns.len()).rev() {
        rev.extend(&patterns.slice(p, p + 1));
    }
    let sim = simulate_faults(c, faults, &rev, true);
    let mut useful = vec![false; rev.len()];
    for st in &sim.status {
        if let FaultStatus::Detected(p) = st {
            useful[*p] = true;
        }
    }
    let mut out = PatternSet::new(patterns.width());
    out.generator = patterns.generator.clone();
    for p in 0..patterns.len() {
        if useful[patterns.len() - 1 - p] {
            out.extend(&patterns.slice(p, p + 1));
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("pattern {pattern} does not detect fault `{fault}`")]
pub struct VerifyError {
    pub fault: String,
    pub fault_index: usize,
    pub pattern: usize,
}

/// Replay every claimed detection through the scalar simulator.
pub fn verify_patterns(n: &Netlist, faults: &[Fault], result: &AtpgResult) -> Result<(), VerifyError> {
    let bad = result
        .status
        .par_iter()
        .enumerate()
        .filter_map(|(i, st)| match st {
            AtpgStatus::Detected(p) if !scalar::detects(n, &result.patterns.row(*p), &faults[i]) => Some((i, *p)),
            _ => None,
        })
        .min();
    match bad {
        None => Ok(()),
        Some((i, p)) => Err(VerifyError { fault: faults[i].describe(n), fault_index: i, pattern: p }),
    }
}
