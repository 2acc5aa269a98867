// SPDX-License-Identifier: Apache-2.0
//! Compiled combinational circuit with 64-way bit-parallel good-machine
//! evaluation and event-driven single-fault propagation.

use crate::graph::Hypergraph;
use crate::netlist::{CellId, CellKind, NetId, Netlist};

use super::{Fault, FaultSite};

/// Flat, topologically ordered form of a combinational netlist.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    pub net_count: usize,
    pub inputs: Vec<NetId>,
    pub outputs: Vec<NetId>,
    /// Cells in topological order.
    pub order: Vec<CellId>,
    pub kind: Vec<CellKind>,
    ins_start: Vec<u32>,
    ins: Vec<NetId>,
    pub out: Vec<NetId>,
    /// Longest path from any input, per cell (1 for cells fed only by inputs).
    pub level: Vec<u32>,
    /// Longest path to the net, per net (0 for inputs).
    pub net_level: Vec<u32>,
    fo_start: Vec<u32>,
    fo: Vec<(CellId, u8)>,
    /// Number of PO occurrences per net.
    pub po_count: Vec<u32>,
    max_level: u32,
}

impl CompiledCircuit {
    /// Compile a combinational netlist. Sequential cells are ignored, so
    /// callers pass a full-scan model.
    pub fn new(n: &Netlist) -> Self {
        let topo = Hypergraph::new(n).topo_sort().expect("combinational netlist");
        let order: Vec<CellId> = topo.order().to_vec();
        let mut kind = Vec::with_capacity(n.cell_count());
        let mut ins_start = Vec::with_capacity(n.cell_count() + 1);
        let mut ins = Vec::new();
        let mut out = Vec::with_capacity(n.cell_count());
        for c in n.cells() {
            kind.push(c.kind);
            ins_start.push(ins.len() as u32);
            ins.extend_from_slice(&c.inputs);
            out.push(c.output);
        }
        ins_start.push(ins.len() as u32);
        let mut net_level = vec![0u32; n.net_count()];
        let mut level = vec![0u32; n.cell_count()];
        for &c in &order {
            let l = n.cell(c).inputs.iter().map(|&i| net_level[i.idx()]).max().unwrap_or(0) + 1;
            level[c.idx()] = l;
            net_level[n.cell(c).output.idx()] = l;
        }
        let mut fo_start = Vec::with_capacity(n.net_count() + 1);
        let mut fo = Vec::new();
        for net in n.nets() {
            fo_start.push(fo.len() as u32);
            for p in &net.fanout {
                if !n.cell(p.cell).kind.is_sequential() {
                    fo.push((p.cell, p.pin));
                }
            }
        }
        fo_start.push(fo.len() as u32);
        let mut po_count = vec![0u32; n.net_count()];
        for &o in n.outputs() {
            po_count[o.idx()] += 1;
        }
        let max_level = level.iter().copied().max().unwrap_or(0);
        CompiledCircuit {
            net_count: n.net_count(),
            inputs: n.inputs().to_vec(),
            outputs: n.outputs().to_vec(),
            order,
            kind,
            ins_start,
            ins,
            out,
            level,
            net_level,
            fo_start,
            fo,
            po_count,
            max_level,
        }
    }

    #[inline]
    pub fn cell_inputs(&self, c: CellId) -> &[NetId] {
        &self.ins[self.ins_start[c.idx()] as usize..self.ins_start[c.idx() + 1] as usize]
    }

    /// Combinational sinks of a net as `(cell, pin)`.
    #[inline]
    pub fn fanout(&self, n: NetId) -> &[(CellId, u8)] {
        &self.fo[self.fo_start[n.idx()] as usize..self.fo_start[n.idx() + 1] as usize]
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Good-machine evaluation of one 64-pattern block. `input_words` is
    /// indexed like `inputs`; `values` receives one word per net.
    pub fn eval_block(&self, input_words: &[u64], values: &mut Vec<u64>) {
        values.clear();
        values.resize(self.net_count, 0);
        for (&i, &w) in self.inputs.iter().zip(input_words) {
            values[i.idx()] = w;
        }
        let mut buf = [0u64; 5];
        for &c in &self.order {
            let ins = self.cell_inputs(c);
            for (k, &i) in ins.iter().enumerate() {
                buf[k] = values[i.idx()];
            }
            values[self.out[c.idx()].idx()] = self.kind[c.idx()].eval_words(&buf[..ins.len()]);
        }
    }

    /// Bits (within `valid`) where `fault` changes some output relative to
    /// the good values `good`.
    pub fn detect_mask(&self, good: &[u64], fault: &Fault, s: &mut Scratch, valid: u64) -> u64 {
        s.ensure(self);
        let forced = if fault.stuck { !0u64 } else { 0 };
        let mut detect = 0u64;
        let mut buf = [0u64; 5];
        match fault.site {
            FaultSite::Stem(net) => {
                if (forced ^ good[net.idx()]) & valid == 0 {
                    return 0;
                }
                s.set(net, forced);
                if self.po_count[net.idx()] > 0 {
                    detect |= forced ^ good[net.idx()];
                }
                self.schedule_fanout(net, s);
            }
            FaultSite::Branch(pin) => {
                let c = pin.cell;
                let ins = self.cell_inputs(c);
                for (k, &i) in ins.iter().enumerate() {
                    buf[k] = good[i.idx()];
                }
                buf[pin.pin as usize] = forced;
                let o = self.out[c.idx()];
                let v = self.kind[c.idx()].eval_words(&buf[..ins.len()]);
                if (v ^ good[o.idx()]) & valid == 0 {
                    return 0;
                }
                s.set(o, v);
                if self.po_count[o.idx()] > 0 {
                    detect |= v ^ good[o.idx()];
                }
                self.schedule_fanout(o, s);
            }
        }
        let mut l = s.lo;
        while l <= s.hi {
            let mut bucket = std::mem::take(&mut s.buckets[l as usize]);
            for &c in &bucket {
                s.queued[c.idx()] = false;
                let ins = self.cell_inputs(c);
                for (k, &i) in ins.iter().enumerate() {
                    buf[k] = if s.touched[i.idx()] { s.val[i.idx()] } else { good[i.idx()] };
                }
                let o = self.out[c.idx()];
                let v = self.kind[c.idx()].eval_words(&buf[..ins.len()]);
                if v != good[o.idx()] {
                    s.set(o, v);
                    if self.po_count[o.idx()] > 0 {
                        detect |= v ^ good[o.idx()];
                    }
                    self.schedule_fanout(o, s);
                } else if s.touched[o.idx()] {
                    s.val[o.idx()] = v;
                }
            }
            bucket.clear();
            s.buckets[l as usize] = bucket;
            l += 1;
        }
        s.reset();
        detect & valid
    }

    fn schedule_fanout(&self, net: NetId, s: &mut Scratch) {
        for &(c, _) in self.fanout(net) {
            if !s.queued[c.idx()] {
                s.queued[c.idx()] = true;
                let l = self.level[c.idx()];
                s.buckets[l as usize].push(c);
                s.lo = s.lo.min(l);
                s.hi = s.hi.max(l);
            }
        }
    }
}

/// Per-thread working storage for fault propagation.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    val: Vec<u64>,
    touched: Vec<bool>,
    touched_list: Vec<NetId>,
    queued: Vec<bool>,
    buckets: Vec<Vec<CellId>>,
    lo: u32,
    hi: u32,
}

impl Scratch {
    fn ensure(&mut self, c: &CompiledCircuit) {
        if self.val.len() != c.net_count {
            self.val = vec![0; c.net_count];
            self.touched = vec![false; c.net_count];
            self.queued = vec![false; c.kind.len()];
            self.buckets = vec![Vec::new(); c.max_level as usize + 1];
        }
        self.lo = u32::MAX;
        self.hi = 0;
    }

    fn set(&mut self, n: NetId, v: u64) {
        if !self.touched[n.idx()] {
            self.touched[n.idx()] = true;
            self.touched_list.push(n);
        }
        self.val[n.idx()] = v;
    }

    fn reset(&mut self) {
        for n in self.touched_list.drain(..) {
            self.touched[n.idx()] = false;
        }
    }
}
