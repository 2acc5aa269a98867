// SPDX-License-Identifier: Apache-2.0
//! Stuck-at fault simulation over the full-scan model.
//!
//! Faults live on the combinational model netlist. Good-machine values are
//! computed 64 patterns at a time; each fault is then propagated through
//! its fanout cone only (parallel-pattern single-fault propagation), with
//! faults distributed over threads.

pub mod equiv;
pub mod patterns;
pub mod scalar;
pub mod sim;
pub mod switching;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::netlist::{CellKind, NetId, Netlist, Pin};

pub use equiv::{check_equivalence, check_equivalence_with, EquivError, Verdict, EXHAUSTIVE_LIMIT, RANDOM_VECTORS};
pub use patterns::{
    exhaustive_patterns, random_patterns, read_patterns, simulate_good, write_patterns, PatternHeader, PatternSet,
};
pub use sim::{CompiledCircuit, Scratch};
pub use switching::{shift_switching, switching_metrics, Switching};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultSite {
    /// The whole net, as seen by every sink.
    Stem(NetId),
    /// One cell input pin of a net with more than one sink.
    Branch(Pin),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fault {
    pub site: FaultSite,
    /// Stuck-at value.
    pub stuck: bool,
}

impl Fault {
    pub fn net(&self, n: &Netlist) -> NetId {
        match self.site {
            FaultSite::Stem(x) => x,
            FaultSite::Branch(p) => n.cell(p.cell).inputs[p.pin as usize],
        }
    }

    /// `net/sa0` for stems, `net->cell.pin/sa1` for branches.
    pub fn describe(&self, n: &Netlist) -> String {
        let v = u8::from(self.stuck);
        match self.site {
            FaultSite::Stem(x) => format!("{}/sa{v}", n.net_name(x)),
            FaultSite::Branch(p) => format!("{}->{}.{}/sa{v}", n.net_name(self.net(n)), n.cell(p.cell).name, p.pin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultStatus {
    Undetected,
    /// Index of the first detecting pattern.
    Detected(usize),
    Untestable,
}

/// Sinks of a net: combinational pins plus output-port occurrences.
fn sink_count(n: &Netlist, net: NetId) -> usize {
    n.net(net).fanout.len() + n.outputs().iter().filter(|&&o| o == net).count()
}

/// Site of the fault seen by one cell input pin.
fn pin_site(n: &Netlist, p: Pin) -> FaultSite {
    let net = n.cell(p.cell).inputs[p.pin as usize];
    if sink_count(n, net) > 1 {
        FaultSite::Branch(p)
    } else {
        FaultSite::Stem(net)
    }
}

/// Stuck-at fault universe of a combinational (full-scan model) netlist:
/// both polarities on every net, plus both polarities on each cell input
/// pin of a net with more than one sink.
///
/// With `collapse`, structurally equivalent faults (through BUF/NOT and at
/// the controlling value of AND/NAND/OR/NOR) are merged into one
/// representative on the input side, and the output fault at the
/// non-controlling response of those gates is dropped as dominating.
pub fn enumerate_faults(n: &Netlist, collapse: bool) -> Vec<Fault> {
    let mut all = Vec::new();
    for net in n.net_ids() {
        for stuck in [false, true] {
            all.push(Fault { site: FaultSite::Stem(net), stuck });
        }
        if sink_count(n, net) > 1 {
            for p in &n.net(net).fanout {
                for stuck in [false, true] {
                    all.push(Fault { site: FaultSite::Branch(*p), stuck });
                }
            }
        }
    }
    if !collapse {
        return all;
    }

    let index: std::collections::HashMap<Fault, usize> = all.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let id = |site, stuck| index[&Fault { site, stuck }];
    let mut uf = UnionFind::new(all.len());
    let mut dropped = vec![false; all.len()];
    for c in n.cell_ids() {
        let cell = n.cell(c);
        let out = FaultSite::Stem(cell.output);
        let pins = (0..cell.inputs.len()).map(|k| pin_site(n, Pin { cell: c, pin: k as u8 }));
        // (input value that controls, output value it forces)
        let ctrl = match cell.kind {
            CellKind::Buf => {
                for s in pins {
                    uf.union(id(s, false), id(out, false));
                    uf.union(id(s, true), id(out, true));
                }
                continue;
            }
            CellKind::Not => {
                for s in pins {
                    uf.union(id(s, false), id(out, true));
                    uf.union(id(s, true), id(out, false));
                }
                continue;
            }
            CellKind::And => (false, false),
            CellKind::Nand => (false, true),
            CellKind::Or => (true, true),
            CellKind::Nor => (true, false),
            _ => continue,
        };
        for s in pins {
            uf.union(id(s, ctrl.0), id(out, ctrl.1));
        }
        dropped[id(out, !ctrl.1)] = true;
    }

    let level = net_levels(n);
    let key = |i: usize| {
        let f = all[i];
        let branch = matches!(f.site, FaultSite::Branch(_));
        (level[f.net(n).idx()], branch, i)
    };
    let mut best: Vec<Option<usize>> = vec![None; all.len()];
    let mut class_dropped = vec![false; all.len()];
    for (i, &d) in dropped.iter().enumerate() {
        let r = uf.find(i);
        class_dropped[r] |= d;
        best[r] = Some(match best[r] {
            Some(b) if key(b) <= key(i) => b,
            _ => i,
        });
    }
    let mut reps: Vec<usize> =
        (0..all.len()).filter(|&i| uf.find(i) == i && !class_dropped[i]).map(|i| best[i].unwrap()).collect();
    reps.sort_unstable();
    reps.into_iter().map(|i| all[i]).collect()
}

fn net_levels(n: &Netlist) -> Vec<u32> {
    let t = crate::graph::Hypergraph::new(n).topo_sort().expect("combinational netlist");
    let mut lv = vec![0u32; n.net_count()];
    for &c in t.order() {
        let cell = n.cell(c);
        lv[cell.output.idx()] = cell.inputs.iter().map(|&i| lv[i.idx()]).max().unwrap_or(0) + 1;
    }
    lv
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total: usize,
    pub detected: usize,
    pub untestable: usize,
    /// `(pattern count, coverage %)`, nondecreasing.
    pub curve: Vec<(usize, f64)>,
    pub ass_pct: Option<f64>,
    pub acs_pct: Option<f64>,
}

impl CoverageReport {
    /// `detected / (total − untestable)`, in percent.
    pub fn coverage_pct(&self) -> f64 {
        pct(self.detected, self.total - self.untestable)
    }
}

fn pct(a: usize, b: usize) -> f64 {
    if b == 0 {
        100.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

/// Per-fault outcome of a fault simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultSimResult {
    pub status: Vec<FaultStatus>,
    pub report: CoverageReport,
}

/// Simulate `faults` under `patterns`. A fault is detected at the first
/// pattern where some output differs from the good machine. With `drop`,
/// detected faults leave the active set; without it every fault is
/// simulated against every block. Faults that escape an exhaustive
/// pattern set are marked untestable.
pub fn simulate_faults(c: &CompiledCircuit, faults: &[Fault], patterns: &PatternSet, drop: bool) -> FaultSimResult {
    let mut first: Vec<Option<usize>> = vec![None; faults.len()];
    let mut active: Vec<usize> = (0..faults.len()).collect();
    let mut ins = Vec::new();
    let mut good = Vec::new();
    for b in 0..patterns.block_count() {
        if active.is_empty() {
            break;
        }
        let valid = patterns.block_words(b, &mut ins);
        c.eval_block(&ins, &mut good);
        let masks: Vec<u64> =
            active.par_iter().map_init(Scratch::default, |s, &i| c.detect_mask(&good, &faults[i], s, valid)).collect();
        for (&i, &m) in active.iter().zip(&masks) {
            if m != 0 && first[i].is_none() {
                first[i] = Some(b * 64 + m.trailing_zeros() as usize);
            }
        }
        if drop {
            active.retain(|&i| first[i].is_none());
        }
    }
    let status: Vec<FaultStatus> = first
        .iter()
        .map(|f| match f {
            Some(p) => FaultStatus::Detected(*p),
            None if patterns.exhaustive => FaultStatus::Untestable,
            None => FaultStatus::Undetected,
        })
        .collect();
    let detected = first.iter().filter(|f| f.is_some()).count();
    let untestable = status.iter().filter(|s| **s == FaultStatus::Untestable).count();
    let report = CoverageReport {
        total: faults.len(),
        detected,
        untestable,
        curve: vec![(patterns.len(), pct(detected, faults.len() - untestable))],
        ass_pct: None,
        acs_pct: None,
    };
    FaultSimResult { status, report }
}

/// Full detection sets: bit `p` of row `i` is set iff pattern `p` detects
/// fault `i`.
pub fn detection_sets(c: &CompiledCircuit, faults: &[Fault], patterns: &PatternSet) -> Vec<Vec<u64>> {
    let blocks = patterns.block_count();
    let mut sets = vec![vec![0u64; blocks]; faults.len()];
    let mut ins = Vec::new();
    let mut good = Vec::new();
    for b in 0..blocks {
        let valid = patterns.block_words(b, &mut ins);
        c.eval_block(&ins, &mut good);
        let masks: Vec<u64> = faults.par_iter().map_init(Scratch::default, |s, f| c.detect_mask(&good, f, s, valid)).collect();
        for (set, m) in sets.iter_mut().zip(masks) {
            set[b] = m;
        }
    }
    sets
}

/// Coverage after each prefix length in `counts` of one seeded random
/// pattern stream (bias 0.5).
pub fn coverage_curve(c: &CompiledCircuit, faults: &[Fault], counts: &[usize], seed: u64) -> CoverageReport {
    let max = counts.iter().copied().max().unwrap_or(0);
    let patterns = random_patterns(c.inputs.len(), max, seed, 0.5);
    let res = simulate_faults(c, faults, &patterns, true);
    let mut report = res.report;
    report.curve = curve_from_status(&res.status, counts);
    report
}

/// Coverage at each prefix length, from first-detection indices.
pub fn curve_from_status(status: &[FaultStatus], counts: &[usize]) -> Vec<(usize, f64)> {
    let untestable = status.iter().filter(|s| **s == FaultStatus::Untestable).count();
    let mut firsts: Vec<usize> = status
        .iter()
        .filter_map(|s| match s {
            FaultStatus::Detected(p) => Some(*p),
            _ => None,
        })
        .collect();
    firsts.sort_unstable();
    counts
        .iter()
        .map(|&cnt| {
            let d = firsts.partition_point(|&p| p < cnt);
            (cnt, pct(d, status.len() - untestable))
        })
        .collect()
}

/// Smallest pattern count at which coverage reaches `target_pct`, if it
/// does.
pub fn patterns_to_reach(status: &[FaultStatus], target_pct: f64) -> Option<usize> {
    let untestable = status.iter().filter(|s| **s == FaultStatus::Untestable).count();
    let denom = status.len() - untestable;
    let mut firsts: Vec<usize> = status
        .iter()
        .filter_map(|s| match s {
            FaultStatus::Detected(p) => Some(*p),
            _ => None,
        })
        .collect();
    firsts.sort_unstable();
    if denom == 0 {
        return Some(0);
    }
    firsts.iter().enumerate().find(|(k, _)| pct(k + 1, denom) >= target_pct).map(|(_, &p)| p + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    #[test]
    fn not_gate_universe() {
        let n = parse_bench("INPUT(a)\nOUTPUT(z)\nz = NOT(a)\n").unwrap();
        assert_eq!(enumerate_faults(&n, false).len(), 4);
        let c = enumerate_faults(&n, true);
        assert_eq!(c.len(), 2);
        let a = n.find_net("a").unwrap();
        assert!(c.iter().all(|f| f.site == FaultSite::Stem(a)));
    }

    #[test]
    fn stem_with_two_branches() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(z)\ny = AND(a, b)\nz = OR(a, b)\n").unwrap();
        let a = n.find_net("a").unwrap();
        let at_a = enumerate_faults(&n, false).into_iter().filter(|f| f.net(&n) == a).count();
        assert_eq!(at_a, 6);
    }

    #[test]
    fn simple_values() {
        let n =
            parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(x)\nOUTPUT(y)\nOUTPUT(m)\nx = AND(a, b)\ny = XOR(a, b)\nm = MUX2(a, b, a)\n")
                .unwrap();
        assert_eq!(scalar::simulate(&n, &[true, true], None), [true, false, true]);
        let c = CompiledCircuit::new(&n);
        let mut p = PatternSet::new(2);
        p.push(&[true, true]);
        p.push(&[false, true]);
        let r = simulate_good(&c, &p);
        assert_eq!(r.row(0), [true, false, true]);
        assert_eq!(r.row(1), [false, true, false]);
    }

    #[test]
    fn po_stuck_at_zero_detected_at_first_one() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = AND(a, b)\n").unwrap();
        let c = CompiledCircuit::new(&n);
        let z = n.find_net("z").unwrap();
        let f = Fault { site: FaultSite::Stem(z), stuck: false };
        let mut p = PatternSet::new(2);
        for row in [[false, false], [true, false], [true, true], [true, true]] {
            p.push(&row);
        }
        let r = simulate_faults(&c, &[f], &p, true);
        assert_eq!(r.status, [FaultStatus::Detected(2)]);
    }

    #[test]
    fn redundant_fault_is_untestable_under_exhaustive() {
        // z = a OR (a AND b): the AND output stuck-at-0 is redundant.
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nw = AND(a, b)\nz = OR(a, w)\n").unwrap();
        let c = CompiledCircuit::new(&n);
        let w = n.find_net("w").unwrap();
        let f = Fault { site: FaultSite::Stem(w), stuck: false };
        let r = simulate_faults(&c, &[f], &exhaustive_patterns(2), true);
        assert_eq!(r.status, [FaultStatus::Untestable]);
        assert_eq!(r.report.coverage_pct(), 100.0);
    }

    #[test]
    fn random_patterns_are_seeded_and_balanced() {
        assert!(random_patterns(10, 0, 1, 0.5).is_empty());
        assert_eq!(random_patterns(37, 100, 9, 0.5), random_patterns(37, 100, 9, 0.5));
        let p = random_patterns(100, 1000, 42, 0.5);
        let ones: usize = (0..p.len()).map(|i| p.row(i).iter().filter(|&&b| b).count()).sum();
        let frac = ones as f64 / 100_000.0;
        assert!((frac - 0.5).abs() <= 0.01, "{frac}");
        let long = random_patterns(70, 300, 5, 0.5);
        assert_eq!(long.slice(0, 100), random_patterns(70, 100, 5, 0.5));
    }

    #[test]
    fn curve_is_monotone_and_counts_first_detections() {
        let status = [FaultStatus::Detected(0), FaultStatus::Detected(10), FaultStatus::Undetected, FaultStatus::Untestable];
        let c = curve_from_status(&status, &[1, 10, 11]);
        assert_eq!(c[0], (1, 100.0 / 3.0));
        assert_eq!(c[1], (10, 100.0 / 3.0));
        assert_eq!(c[2], (11, 200.0 / 3.0));
        assert_eq!(patterns_to_reach(&status, 60.0), Some(11));
        assert_eq!(patterns_to_reach(&status, 90.0), None);
    }
}
