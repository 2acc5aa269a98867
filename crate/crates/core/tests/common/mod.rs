// SPDX-License-Identifier: Apache-2.0
//! Random circuits and brute-force oracles shared by the integration tests.
//!
//! The oracles are written against the netlist data model only; they do
//! not call the library's SCOAP, simulation or ATPG code.

#![allow(dead_code)]

use std::collections::HashMap;

use lite_core::faultsim::{Fault, FaultSite};
use lite_core::netlist::{CellKind, Driver, NetId, Netlist, NetlistBuilder, ParseOptions, FF_D};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub inputs: usize,
    pub ffs: usize,
    /// Combinational cells.
    pub cells: usize,
}

const COMB: [CellKind; 9] = [
    CellKind::Buf,
    CellKind::Not,
    CellKind::And,
    CellKind::Or,
    CellKind::Nand,
    CellKind::Nor,
    CellKind::Xor,
    CellKind::Xnor,
    CellKind::Mux2,
];

/// Random well-formed netlist. Gate inputs come from earlier nets, so the
/// combinational part is acyclic; DFF data pins read random gate outputs.
pub fn random_circuit(seed: u64, shape: Shape) -> Netlist {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut b = NetlistBuilder::new(format!("rand{seed}"), ParseOptions::default());
    let mut pool: Vec<String> = Vec::new();
    for i in 0..shape.inputs.max(1) {
        let name = format!("i{i}");
        b.input(&name).unwrap();
        pool.push(name);
    }
    for f in 0..shape.ffs {
        pool.push(format!("q{f}"));
    }
    let mut gates = Vec::new();
    for g in 0..shape.cells {
        let kind = COMB[rng.gen_range(0..COMB.len())];
        let (lo, hi) = kind.arity();
        let k = rng.gen_range(lo..=hi.min(4));
        let ins: Vec<String> = (0..k)
            .map(|_| {
                // Favor recent nets to get depth.
                let lo = pool.len().saturating_sub(12);
                let i = if rng.gen_bool(0.7) { rng.gen_range(lo..pool.len()) } else { rng.gen_range(0..pool.len()) };
                pool[i].clone()
            })
            .collect();
        let refs: Vec<&str> = ins.iter().map(String::as_str).collect();
        let out = format!("g{g}");
        b.cell(kind, &format!("c{g}"), &refs, &out).unwrap();
        pool.push(out.clone());
        gates.push(out);
    }
    let sources: &[String] = if gates.is_empty() { &pool[..shape.inputs.max(1)] } else { &gates };
    for f in 0..shape.ffs {
        let d = sources[rng.gen_range(0..sources.len())].clone();
        b.cell(CellKind::Dff, &format!("ff{f}"), &[&d], &format!("q{f}")).unwrap();
    }
    let pos = 1 + sources.len() / 8;
    for p in 0..pos {
        let i = if p == 0 { sources.len() - 1 } else { rng.gen_range(0..sources.len()) };
        b.output(&sources[i]).unwrap();
    }
    b.finish().unwrap()
}

/// Recursive, memoized SCOAP: CC per gate rule on demand, CO as the
/// minimum over sinks. Values are exact (no saturation inside).
pub struct ScoapOracle<'a> {
    n: &'a Netlist,
    cc: HashMap<(NetId, bool), u128>,
    co: HashMap<NetId, Option<u128>>,
}

impl<'a> ScoapOracle<'a> {
    pub fn new(n: &'a Netlist) -> Self {
        ScoapOracle { n, cc: HashMap::new(), co: HashMap::new() }
    }

    pub fn cc(&mut self, net: NetId, v: bool) -> u128 {
        if let Some(&x) = self.cc.get(&(net, v)) {
            return x;
        }
        let x = match self.n.net(net).driver {
            Driver::Input => 1,
            Driver::Cell(c) if self.n.cell(c).kind.is_sequential() => 1,
            Driver::Cell(c) => {
                let cell = self.n.cell(c).clone();
                let c0: Vec<u128> = cell.inputs.iter().map(|&i| self.cc(i, false)).collect();
                let c1: Vec<u128> = cell.inputs.iter().map(|&i| self.cc(i, true)).collect();
                1 + gate_cc(cell.kind, &c0, &c1, v)
            }
        };
        self.cc.insert((net, v), x);
        x
    }

    /// `None` when no sink path reaches an output or a flip-flop D pin.
    pub fn co(&mut self, net: NetId) -> Option<u128> {
        if let Some(&x) = self.co.get(&net) {
            return x;
        }
        let n = self.n;
        let boundary = n.outputs().contains(&net) || n.ffs().iter().any(|&f| n.cell(f).inputs[FF_D] == net);
        let x = if boundary {
            Some(0)
        } else {
            let mut best: Option<u128> = None;
            for p in n.net(net).fanout.clone() {
                let cell = n.cell(p.cell).clone();
                if cell.kind.is_sequential() {
                    continue;
                }
                let Some(out) = self.co(cell.output) else { continue };
                let pin = p.pin as usize;
                let c0: Vec<u128> = cell.inputs.iter().map(|&i| self.cc(i, false)).collect();
                let c1: Vec<u128> = cell.inputs.iter().map(|&i| self.cc(i, true)).collect();
                let others = |f: &dyn Fn(usize) -> u128| -> u128 { (0..c0.len()).filter(|&j| j != pin).map(f).sum() };
                let side = match cell.kind {
                    CellKind::Buf | CellKind::Not => 0,
                    CellKind::And | CellKind::Nand => others(&|j| c1[j]),
                    CellKind::Or | CellKind::Nor => others(&|j| c0[j]),
                    CellKind::Xor | CellKind::Xnor => others(&|j| c0[j].min(c1[j])),
                    CellKind::Mux2 => match pin {
                        0 => c0[2],
                        1 => c1[2],
                        _ => (c0[0] + c1[1]).min(c1[0] + c0[1]),
                    },
                    CellKind::Dff | CellKind::Sdff => unreachable!(),
                };
                let v = out + side + 1;
                best = Some(best.map_or(v, |b| b.min(v)));
            }
            best
        };
        self.co.insert(net, x);
        x
    }
}

/// Cheapest input assignment producing `v`, by enumeration where the rule
/// is stated over assignments.
fn gate_cc(kind: CellKind, c0: &[u128], c1: &[u128], v: bool) -> u128 {
    let min0 = || *c0.iter().min().unwrap();
    let min1 = || *c1.iter().min().unwrap();
    let sum0 = || c0.iter().sum::<u128>();
    let sum1 = || c1.iter().sum::<u128>();
    match (kind, v) {
        (CellKind::Buf, _) => {
            if v {
                c1[0]
            } else {
                c0[0]
            }
        }
        (CellKind::Not, _) => {
            if v {
                c0[0]
            } else {
                c1[0]
            }
        }
        (CellKind::And, true) | (CellKind::Nand, false) => sum1(),
        (CellKind::And, false) | (CellKind::Nand, true) => min0(),
        (CellKind::Or, true) | (CellKind::Nor, false) => min1(),
        (CellKind::Or, false) | (CellKind::Nor, true) => sum0(),
        (CellKind::Xor | CellKind::Xnor, _) => {
            let want_odd = v ^ (kind == CellKind::Xnor);
            (0u32..1 << c0.len())
                .filter(|a| (a.count_ones() % 2 == 1) == want_odd)
                .map(|a| (0..c0.len()).map(|i| if a >> i & 1 == 1 { c1[i] } else { c0[i] }).sum())
                .min()
                .unwrap()
        }
        (CellKind::Mux2, _) => {
            let (d0, d1) = if v { (c1[0], c1[1]) } else { (c0[0], c0[1]) };
            (c0[2] + d0).min(c1[2] + d1)
        }
        (CellKind::Dff | CellKind::Sdff, _) => unreachable!(),
    }
}

fn gate_value(kind: CellKind, x: &[bool]) -> bool {
    let ones = x.iter().filter(|&&b| b).count();
    match kind {
        CellKind::Buf => x[0],
        CellKind::Not => !x[0],
        CellKind::And => ones == x.len(),
        CellKind::Nand => ones != x.len(),
        CellKind::Or => ones > 0,
        CellKind::Nor => ones == 0,
        CellKind::Xor => ones % 2 == 1,
        CellKind::Xnor => ones % 2 == 0,
        CellKind::Mux2 => {
            if x[2] {
                x[1]
            } else {
                x[0]
            }
        }
        CellKind::Dff | CellKind::Sdff => unreachable!("combinational netlists only"),
    }
}

/// Output values of a combinational netlist by recursive evaluation, with
/// an optional stuck-at fault.
pub fn eval_outputs(n: &Netlist, inputs: &[bool], fault: Option<&Fault>) -> Vec<bool> {
    fn value(n: &Netlist, net: NetId, pi: &HashMap<NetId, bool>, fault: Option<&Fault>, memo: &mut HashMap<NetId, bool>) -> bool {
        if let Some(&v) = memo.get(&net) {
            return v;
        }
        let v = match fault {
            Some(Fault { site: FaultSite::Stem(s), stuck }) if *s == net => *stuck,
            _ => match n.net(net).driver {
                Driver::Input => pi[&net],
                Driver::Cell(c) => {
                    let cell = n.cell(c);
                    let x: Vec<bool> = cell
                        .inputs
                        .iter()
                        .enumerate()
                        .map(|(pin, &i)| match fault {
                            Some(Fault { site: FaultSite::Branch(p), stuck }) if p.cell == c && p.pin as usize == pin => *stuck,
                            _ => value(n, i, pi, fault, memo),
                        })
                        .collect();
                    gate_value(cell.kind, &x)
                }
            },
        };
        memo.insert(net, v);
        v
    }
    let pi: HashMap<NetId, bool> = n.inputs().iter().copied().zip(inputs.iter().copied()).collect();
    let mut memo = HashMap::new();
    n.outputs().iter().map(|&o| value(n, o, &pi, fault, &mut memo)).collect()
}

pub fn oracle_detects(n: &Netlist, inputs: &[bool], fault: &Fault) -> bool {
    eval_outputs(n, inputs, None) != eval_outputs(n, inputs, Some(fault))
}

/// Bits of `index` as an input vector, input 0 in the least significant bit.
pub fn assignment(index: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| index >> i & 1 == 1).collect()
}
