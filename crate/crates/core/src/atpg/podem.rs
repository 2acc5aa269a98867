// SPDX-License-Identifier: Apache-2.0
//! PODEM search over pseudo-primary-input assignments.
//!
//! Good and faulty machines are simulated side by side in three-valued
//! logic with event-driven implication, so every D/D̄ of the five-valued
//! calculus is a pair of known, differing values.

use crate::faultsim::{CompiledCircuit, Fault, FaultSite};
use crate::netlist::{CellId, CellKind, NetId, MUX_SEL};
use crate::scoap::{ScoapTable, UNOBSERVABLE};

pub(crate) const X: u8 = 2;

/// Three-valued evaluation; `ins` holds 0, 1 or [`X`].
pub(crate) fn eval3(kind: CellKind, ins: &[u8]) -> u8 {
    let and = |v: &[u8]| {
        if v.contains(&0) {
            0
        } else if v.contains(&X) {
            X
        } else {
            1
        }
    };
    let or = |v: &[u8]| {
        if v.contains(&1) {
            1
        } else if v.contains(&X) {
            X
        } else {
            0
        }
    };
    let inv = |x: u8| if x == X { X } else { 1 - x };
    let xor = |v: &[u8]| {
        if v.contains(&X) {
            X
        } else {
            v.iter().fold(0, |a, &b| a ^ b)
        }
    };
    match kind {
        CellKind::Buf => ins[0],
        CellKind::Not => inv(ins[0]),
        CellKind::And => and(ins),
        CellKind::Nand => inv(and(ins)),
        CellKind::Or => or(ins),
        CellKind::Nor => inv(or(ins)),
        CellKind::Xor => xor(ins),
        CellKind::Xnor => inv(xor(ins)),
        CellKind::Mux2 => match ins[MUX_SEL] {
            0 => ins[0],
            1 => ins[1],
            _ if ins[0] == ins[1] => ins[0],
            _ => X,
        },
        CellKind::Dff | CellKind::Sdff => unreachable!("combinational model"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PodemOutcome {
    /// Test cube over the circuit inputs (`X` = don't care).
    Test(Vec<u8>),
    Untestable,
    Aborted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PodemStats {
    pub backtracks: u64,
    pub decisions: u64,
}

/// Reusable PODEM engine for one circuit.
pub struct Podem<'a> {
    c: &'a CompiledCircuit,
    s: &'a ScoapTable,
    good: Vec<u8>,
    faulty: Vec<u8>,
    pi_of: Vec<Option<usize>>,
    drv: Vec<Option<CellId>>,
    queued: Vec<bool>,
    buckets: Vec<Vec<CellId>>,
    stamp: Vec<u32>,
    epoch: u32,
    fault: Fault,
    site_net: NetId,
    cone: Vec<CellId>,
    in_cone: Vec<bool>,
    pub stats: PodemStats,
}

enum Status {
    Detected,
    Conflict,
    Open,
}

impl<'a> Podem<'a> {
    pub fn new(c: &'a CompiledCircuit, s: &'a ScoapTable) -> Self {
        let mut pi_of = vec![None; c.net_count];
        for (k, &i) in c.inputs.iter().enumerate() {
            pi_of[i.idx()] = Some(k);
        }
        let mut drv = vec![None; c.net_count];
        for &cell in &c.order {
            drv[c.out[cell.idx()].idx()] = Some(cell);
        }
        Podem {
            c,
            s,
            drv,
            good: vec![X; c.net_count],
            faulty: vec![X; c.net_count],
            pi_of,
            queued: vec![false; c.kind.len()],
            buckets: vec![Vec::new(); c.max_level() as usize + 1],
            stamp: vec![0; c.net_count],
            epoch: 0,
            fault: Fault { site: FaultSite::Stem(NetId(0)), stuck: false },
            site_net: NetId(0),
            cone: Vec::new(),
            in_cone: vec![false; c.kind.len()],
            stats: PodemStats::default(),
        }
    }

    fn stuck(&self) -> u8 {
        u8::from(self.fault.stuck)
    }

    /// Faulty value seen by pin `k` of cell `c`.
    #[inline]
    fn fin(&self, c: CellId, k: usize, net: NetId) -> u8 {
        match self.fault.site {
            FaultSite::Branch(p) if p.cell == c && p.pin as usize == k => self.stuck(),
            _ => self.faulty[net.idx()],
        }
    }

    fn eval_cell(&self, c: CellId) -> (u8, u8) {
        let ins = self.c.cell_inputs(c);
        let mut g = [0u8; 5];
        let mut f = [0u8; 5];
        for (k, &i) in ins.iter().enumerate() {
            g[k] = self.good[i.idx()];
            f[k] = self.fin(c, k, i);
        }
        let kind = self.c.kind[c.idx()];
        (eval3(kind, &g[..ins.len()]), eval3(kind, &f[..ins.len()]))
    }

    fn schedule(&mut self, net: NetId) {
        for &(c, _) in self.c.fanout(net) {
            if !self.queued[c.idx()] {
                self.queued[c.idx()] = true;
                self.buckets[self.c.level[c.idx()] as usize].push(c);
            }
        }
    }

    fn propagate(&mut self, from_level: u32) {
        for l in from_level as usize..self.buckets.len() {
            let mut b = std::mem::take(&mut self.buckets[l]);
            for &c in &b {
                self.queued[c.idx()] = false;
                let (g, f) = self.eval_cell(c);
                let o = self.c.out[c.idx()];
                let f = if self.fault.site == FaultSite::Stem(o) { self.stuck() } else { f };
                if g != self.good[o.idx()] || f != self.faulty[o.idx()] {
                    self.good[o.idx()] = g;
                    self.faulty[o.idx()] = f;
                    self.schedule(o);
                }
            }
            b.clear();
            self.buckets[l] = b;
        }
    }

    fn set_input(&mut self, pi: usize, v: u8) {
        let net = self.c.inputs[pi];
        self.good[net.idx()] = v;
        if self.fault.site != FaultSite::Stem(net) {
            self.faulty[net.idx()] = v;
        }
        self.schedule(net);
        self.propagate(1);
    }

    fn reset(&mut self, fault: Fault) {
        self.fault = fault;
        self.good.iter_mut().for_each(|v| *v = X);
        self.faulty.iter_mut().for_each(|v| *v = X);
        match fault.site {
            FaultSite::Stem(n) => {
                self.site_net = n;
                self.faulty[n.idx()] = u8::from(fault.stuck);
                self.schedule(n);
            }
            FaultSite::Branch(p) => {
                self.site_net = self.c.cell_inputs(p.cell)[p.pin as usize];
                if !self.queued[p.cell.idx()] {
                    self.queued[p.cell.idx()] = true;
                    self.buckets[self.c.level[p.cell.idx()] as usize].push(p.cell);
                }
            }
        }
        self.propagate(1);
        // Cells that can carry the fault effect, by level.
        for &c in &self.cone {
            self.in_cone[c.idx()] = false;
        }
        self.cone.clear();
        let mut stack: Vec<CellId> = Vec::new();
        let push = |c: CellId, cone: &mut Vec<CellId>, in_cone: &mut Vec<bool>, st: &mut Vec<CellId>| {
            if !in_cone[c.idx()] {
                in_cone[c.idx()] = true;
                cone.push(c);
                st.push(c);
            }
        };
        match fault.site {
            FaultSite::Stem(n) => {
                for &(c, _) in self.c.fanout(n) {
                    push(c, &mut self.cone, &mut self.in_cone, &mut stack);
                }
            }
            FaultSite::Branch(p) => push(p.cell, &mut self.cone, &mut self.in_cone, &mut stack),
        }
        while let Some(c) = stack.pop() {
            for &(d, _) in self.c.fanout(self.c.out[c.idx()]) {
                push(d, &mut self.cone, &mut self.in_cone, &mut stack);
            }
        }
        let lv = &self.c.level;
        self.cone.sort_by_key(|c| (lv[c.idx()], *c));
    }

    fn is_d(&self, g: u8, f: u8) -> bool {
        g != X && f != X && g != f
    }

    fn status(&mut self) -> Status {
        let sg = self.good[self.site_net.idx()];
        if sg == self.stuck() {
            return Status::Conflict;
        }
        let site_is_po = self.c.po_count[self.site_net.idx()] > 0;
        if site_is_po && matches!(self.fault.site, FaultSite::Stem(_)) && self.is_d(sg, self.stuck()) {
            return Status::Detected;
        }
        for &c in &self.cone {
            let o = self.c.out[c.idx()];
            if self.c.po_count[o.idx()] > 0 && self.is_d(self.good[o.idx()], self.faulty[o.idx()]) {
                return Status::Detected;
            }
        }
        if sg == X {
            // Not yet excited: some path to an output must still be open.
            return if self.x_path_from_site() { Status::Open } else { Status::Conflict };
        }
        let frontier = self.d_frontier();
        if frontier.is_empty() {
            return Status::Conflict;
        }
        self.epoch += 1;
        for &c in &frontier {
            let o = self.c.out[c.idx()];
            if self.x_path(o) {
                return Status::Open;
            }
        }
        Status::Conflict
    }

    fn unknown(&self, n: NetId) -> bool {
        self.good[n.idx()] == X || self.faulty[n.idx()] == X
    }

    /// Path of not-fully-known nets from `n` to an output.
    fn x_path(&mut self, n: NetId) -> bool {
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            if self.stamp[x.idx()] == self.epoch {
                continue;
            }
            self.stamp[x.idx()] = self.epoch;
            if self.c.po_count[x.idx()] > 0 {
                return true;
            }
            for &(c, _) in self.c.fanout(x) {
                let o = self.c.out[c.idx()];
                if self.unknown(o) && self.stamp[o.idx()] != self.epoch {
                    stack.push(o);
                }
            }
        }
        false
    }

    fn x_path_from_site(&mut self) -> bool {
        self.epoch += 1;
        let n = self.site_net;
        match self.fault.site {
            FaultSite::Stem(_) => {
                if self.c.po_count[n.idx()] > 0 {
                    return true;
                }
                let outs: Vec<NetId> = self.c.fanout(n).iter().map(|&(c, _)| self.c.out[c.idx()]).collect();
                outs.into_iter().any(|o| self.unknown(o) && self.x_path(o))
            }
            FaultSite::Branch(p) => {
                let o = self.c.out[p.cell.idx()];
                self.unknown(o) && self.x_path(o)
            }
        }
    }

    /// Cells with a fault effect on an input, an unresolved output, and a
    /// way for the effect to pass, easiest to observe first.
    fn d_frontier(&self) -> Vec<CellId> {
        let mut v: Vec<CellId> = Vec::new();
        for &c in &self.cone {
            let o = self.c.out[c.idx()];
            if !self.unknown(o) {
                continue;
            }
            let ins = self.c.cell_inputs(c);
            let mut d_on = None;
            for (k, &i) in ins.iter().enumerate() {
                if self.is_d(self.good[i.idx()], self.fin(c, k, i)) {
                    d_on = Some(k);
                    break;
                }
            }
            let Some(k) = d_on else { continue };
            if self.c.kind[c.idx()] == CellKind::Mux2 && k != MUX_SEL {
                let sel = ins[MUX_SEL];
                let (sg, sf) = (self.good[sel.idx()], self.fin(c, MUX_SEL, sel));
                if sg != X && sg as usize != k && sf != X && sf as usize != k {
                    continue;
                }
            }
            v.push(c);
        }
        let co = |c: &CellId| {
            let x = self.s.co[self.c.out[c.idx()].idx()];
            (x, self.c.level[c.idx()], *c)
        };
        v.sort_by_key(co);
        v
    }

    fn cc(&self, n: NetId, v: u8) -> u32 {
        if v == 1 {
            self.s.cc1[n.idx()]
        } else {
            self.s.cc0[n.idx()]
        }
    }

    /// Next `(net, value)` to justify on the good machine.
    fn objective(&self) -> Option<(NetId, u8)> {
        let sg = self.good[self.site_net.idx()];
        if sg == X {
            return Some((self.site_net, 1 - self.stuck()));
        }
        for c in self.d_frontier() {
            let ins = self.c.cell_inputs(c);
            let kind = self.c.kind[c.idx()];
            let x_ins = || ins.iter().enumerate().filter(|&(k, &i)| self.good[i.idx()] == X || self.fin(c, k, i) == X);
            let pick = match kind {
                CellKind::And | CellKind::Nand => x_ins().map(|(_, &i)| (i, 1)).next(),
                CellKind::Or | CellKind::Nor => x_ins().map(|(_, &i)| (i, 0)).next(),
                CellKind::Xor | CellKind::Xnor => {
                    x_ins().map(|(_, &i)| (i, u8::from(self.s.cc1[i.idx()] < self.s.cc0[i.idx()]))).next()
                }
                CellKind::Mux2 => {
                    let d_k = (0..ins.len()).find(|&k| self.is_d(self.good[ins[k].idx()], self.fin(c, k, ins[k])));
                    match d_k {
                        Some(k) if k != MUX_SEL => {
                            let sel = ins[MUX_SEL];
                            if self.good[sel.idx()] == X {
                                Some((sel, k as u8))
                            } else {
                                x_ins().map(|(_, &i)| (i, 0)).next()
                            }
                        }
                        _ => {
                            // Effect on the select: make the data inputs differ.
                            let (a, b) = (ins[0], ins[1]);
                            let (ga, gb) = (self.good[a.idx()], self.good[b.idx()]);
                            if ga == X && gb != X {
                                Some((a, 1 - gb))
                            } else if gb == X && ga != X {
                                Some((b, 1 - ga))
                            } else if ga == X {
                                let v = u8::from(self.s.cc1[a.idx()] < self.s.cc0[a.idx()]);
                                Some((a, v))
                            } else {
                                x_ins().map(|(_, &i)| (i, 0)).next()
                            }
                        }
                    }
                }
                _ => x_ins().map(|(_, &i)| (i, 0)).next(),
            };
            if pick.is_some() {
                return pick;
            }
        }
        None
    }

    /// Walk an objective back to an unassigned input.
    fn backtrace(&self, mut net: NetId, mut v: u8) -> Option<(usize, u8)> {
        loop {
            if let Some(pi) = self.pi_of[net.idx()] {
                return if self.good[net.idx()] == X { Some((pi, v)) } else { None };
            }
            let c = self.drv[net.idx()]?;
            let ins = self.c.cell_inputs(c);
            let kind = self.c.kind[c.idx()];
            // Follow the good machine if it is unresolved, else the faulty one.
            let follow_good = self.good[net.idx()] == X;
            let open: Vec<(usize, NetId)> = ins
                .iter()
                .enumerate()
                .filter(|&(k, &i)| if follow_good { self.good[i.idx()] == X } else { self.fin(c, k, i) == X })
                .map(|(k, &i)| (k, i))
                .collect();
            if open.is_empty() {
                return None;
            }
            let inv = matches!(kind, CellKind::Nand | CellKind::Nor | CellKind::Not | CellKind::Xnor);
            let u = if inv { 1 - v } else { v };
            let hardest = |val: u8| *open.iter().max_by_key(|&&(_, i)| (self.cc(i, val), std::cmp::Reverse(i))).unwrap();
            let easiest = |val: u8| *open.iter().min_by_key(|&&(_, i)| (self.cc(i, val), i)).unwrap();
            let (next, nv) = match kind {
                CellKind::Buf | CellKind::Not => (open[0].1, u),
                CellKind::And | CellKind::Nand => {
                    if u == 1 {
                        (hardest(1).1, 1)
                    } else {
                        (easiest(0).1, 0)
                    }
                }
                CellKind::Or | CellKind::Nor => {
                    if u == 0 {
                        (hardest(0).1, 0)
                    } else {
                        (easiest(1).1, 1)
                    }
                }
                CellKind::Xor | CellKind::Xnor => {
                    let (k, i) = *open.iter().min_by_key(|&&(_, i)| (self.s.cc0[i.idx()].min(self.s.cc1[i.idx()]), i)).unwrap();
                    let others = ins.iter().enumerate().filter(|&(j, _)| j != k).fold(0u8, |a, (_, &x)| {
                        let g = self.good[x.idx()];
                        a ^ if g == X { 0 } else { g }
                    });
                    (i, u ^ others)
                }
                CellKind::Mux2 => self.mux_backtrace(c, &open, u),
                CellKind::Dff | CellKind::Sdff => return None,
            };
            net = next;
            v = nv;
        }
    }

    fn mux_backtrace(&self, c: CellId, open: &[(usize, NetId)], u: u8) -> (NetId, u8) {
        let ins = self.c.cell_inputs(c);
        let sel = ins[MUX_SEL];
        let sg = self.good[sel.idx()];
        if sg != X {
            let d = ins[sg as usize];
            if open.iter().any(|&(_, i)| i == d) {
                return (d, u);
            }
            return (open[0].1, u);
        }
        let mut best: Option<(u32, NetId, u8)> = None;
        for s in 0..2u8 {
            let d = ins[s as usize];
            let dg = self.good[d.idx()];
            if dg != X && dg != u {
                continue;
            }
            let cost = self.cc(sel, s).saturating_add(if dg == X { self.cc(d, u) } else { 0 });
            let step = if dg == X { (d, u) } else { (sel, s) };
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, step.0, step.1));
            }
        }
        match best {
            Some((_, n, v)) if open.iter().any(|&(_, i)| i == n) => (n, v),
            _ => (open[0].1, if open[0].0 == MUX_SEL { 0 } else { u }),
        }
    }

    /// Search for a test of `fault` within `backtrack_limit` backtracks.
    pub fn run(&mut self, fault: Fault, backtrack_limit: u64) -> PodemOutcome {
        self.reset(fault);
        let mut stack: Vec<(usize, u8, bool)> = Vec::new();
        let mut backtracks = 0u64;
        loop {
            let st = self.status();
            let mut conflict = matches!(st, Status::Conflict);
            if matches!(st, Status::Detected) {
                let cube = self.c.inputs.iter().map(|&i| self.good[i.idx()]).collect();
                self.stats.backtracks += backtracks;
                return PodemOutcome::Test(cube);
            }
            if !conflict {
                match self.objective().and_then(|(n, v)| self.backtrace(n, v)) {
                    Some((pi, v)) => {
                        self.stats.decisions += 1;
                        stack.push((pi, v, false));
                        self.set_input(pi, v);
                    }
                    None => conflict = true,
                }
            }
            if conflict {
                loop {
                    match stack.pop() {
                        None => {
                            self.stats.backtracks += backtracks;
                            return PodemOutcome::Untestable;
                        }
                        Some((pi, v, false)) => {
                            backtracks += 1;
                            if backtracks > backtrack_limit {
                                self.stats.backtracks += backtracks;
                                return PodemOutcome::Aborted;
                            }
                            stack.push((pi, 1 - v, true));
                            self.set_input(pi, 1 - v);
                            break;
                        }
                        Some((pi, _, true)) => self.set_input(pi, X),
                    }
                }
            }
        }
    }
}

/// Observability weight used to order faults, hardest first.
pub(crate) fn hardness(s: &ScoapTable, site_net: NetId, stuck: bool) -> u64 {
    let cc = if stuck { s.cc0[site_net.idx()] } else { s.cc1[site_net.idx()] } as u64;
    let co = s.co[site_net.idx()];
    let co = if co == UNOBSERVABLE { u32::MAX as u64 } else { co as u64 };
    cc.saturating_add(co)
}
