// SPDX-License-Identifier: Apache-2.0
//! Gate-level netlist IR shared by every stage of the flow.
//!
//! Nets carry dense integer ids assigned in first-appearance order, so all
//! per-net tables downstream (SCOAP, simulation values, cones) are plain
//! vectors. Cells own their input/output net references; fanout lists are
//! derived and kept sorted by `(cell, pin)`.

mod bench;
mod iso;
mod verilog;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{parse_bench, parse_bench_with, write_bench};
pub use iso::{canonical_signature, isomorphic};
pub use verilog::{parse_verilog_subset, parse_verilog_subset_with, write_verilog};

/// Prefix reserved for nets and cells created by the instrumentation pass.
pub const RESERVED_PREFIX: &str = "lite_";

/// Dense net index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NetId(pub u32);

/// Dense cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId(pub u32);

impl NetId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl CellId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Cell primitives understood by the whole toolchain.
///
/// Ports are not cells: primary inputs are nets with [`Driver::Input`] and
/// primary outputs are entries of [`Netlist::outputs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Buf,
    Not,
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    /// Inputs `(in0, in1, sel)`; output is `sel ? in1 : in0`.
    Mux2,
    /// Input `(d)`.
    Dff,
    /// Mux-scan flip-flop, inputs `(d, si, se)`; captures `se ? si : d`.
    Sdff,
}

/// Pin index of the data input of a flip-flop.
pub const FF_D: usize = 0;
/// Pin index of the scan input of an [`CellKind::Sdff`].
pub const SDFF_SI: usize = 1;
/// Pin index of the scan enable of an [`CellKind::Sdff`].
pub const SDFF_SE: usize = 2;
/// Pin index of the select input of a [`CellKind::Mux2`].
pub const MUX_SEL: usize = 2;

impl CellKind {
    pub const ALL: [CellKind; 11] = [
        CellKind::Buf,
        CellKind::Not,
        CellKind::And,
        CellKind::Or,
        CellKind::Nand,
        CellKind::Nor,
        CellKind::Xor,
        CellKind::Xnor,
        CellKind::Mux2,
        CellKind::Dff,
        CellKind::Sdff,
    ];

    /// Inclusive range of legal input counts.
    pub fn arity(self) -> (usize, usize) {
        match self {
            CellKind::Buf | CellKind::Not | CellKind::Dff => (1, 1),
            CellKind::Mux2 | CellKind::Sdff => (3, 3),
            CellKind::And | CellKind::Or | CellKind::Nand | CellKind::Nor | CellKind::Xor | CellKind::Xnor => (2, 5),
        }
    }

    pub fn accepts(self, n: usize) -> bool {
        let (lo, hi) = self.arity();
        (lo..=hi).contains(&n)
    }

    pub fn is_sequential(self) -> bool {
        matches!(self, CellKind::Dff | CellKind::Sdff)
    }

    /// Upper-case keyword used by `.bench` and by named-cell Verilog instances.
    pub fn keyword(self) -> &'static str {
        match self {
            CellKind::Buf => "BUF",
            CellKind::Not => "NOT",
            CellKind::And => "AND",
            CellKind::Or => "OR",
            CellKind::Nand => "NAND",
            CellKind::Nor => "NOR",
            CellKind::Xor => "XOR",
            CellKind::Xnor => "XNOR",
            CellKind::Mux2 => "MUX2",
            CellKind::Dff => "DFF",
            CellKind::Sdff => "SDFF",
        }
    }

    /// Parse a gate keyword, case-insensitively. Accepts the common aliases
    /// `BUFF` and `INV`.
    pub fn from_keyword(word: &str) -> Option<CellKind> {
        let upper = word.to_ascii_uppercase();
        Some(match upper.as_str() {
            "BUF" | "BUFF" => CellKind::Buf,
            "NOT" | "INV" => CellKind::Not,
            "AND" => CellKind::And,
            "OR" => CellKind::Or,
            "NAND" => CellKind::Nand,
            "NOR" => CellKind::Nor,
            "XOR" => CellKind::Xor,
            "XNOR" => CellKind::Xnor,
            "MUX2" | "MUX" => CellKind::Mux2,
            "DFF" => CellKind::Dff,
            "SDFF" => CellKind::Sdff,
            _ => return None,
        })
    }

    /// Evaluate the combinational function on bit-parallel words.
    ///
    /// Flip-flops are not evaluated here; callers treat them as boundaries.
    #[inline]
    pub fn eval_words(self, ins: &[u64]) -> u64 {
        match self {
            CellKind::Buf => ins[0],
            CellKind::Not => !ins[0],
            CellKind::And => ins.iter().fold(!0, |a, &b| a & b),
            CellKind::Nand => !ins.iter().fold(!0, |a, &b| a & b),
            CellKind::Or => ins.iter().fold(0, |a, &b| a | b),
            CellKind::Nor => !ins.iter().fold(0, |a, &b| a | b),
            CellKind::Xor => ins.iter().fold(0, |a, &b| a ^ b),
            CellKind::Xnor => !ins.iter().fold(0, |a, &b| a ^ b),
            CellKind::Mux2 => (ins[0] & !ins[2]) | (ins[1] & ins[2]),
            CellKind::Dff => ins[0],
            CellKind::Sdff => (ins[0] & !ins[2]) | (ins[1] & ins[2]),
        }
    }

    /// Scalar evaluation, written independently of [`CellKind::eval_words`].
    pub fn eval_bools(self, ins: &[bool]) -> bool {
        match self {
            CellKind::Buf | CellKind::Dff => ins[0],
            CellKind::Not => !ins[0],
            CellKind::And => ins.iter().all(|&b| b),
            CellKind::Nand => !ins.iter().all(|&b| b),
            CellKind::Or => ins.iter().any(|&b| b),
            CellKind::Nor => !ins.iter().any(|&b| b),
            CellKind::Xor => ins.iter().filter(|&&b| b).count() % 2 == 1,
            CellKind::Xnor => ins.iter().filter(|&&b| b).count() % 2 == 0,
            CellKind::Mux2 | CellKind::Sdff => {
                if ins[2] {
                    ins[1]
                } else {
                    ins[0]
                }
            }
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A cell input pin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pin {
    pub cell: CellId,
    pub pin: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Driver {
    /// Primary input port.
    Input,
    Cell(CellId),
}

#[derive(Debug, Clone)]
pub struct Net {
    pub name: String,
    pub driver: Driver,
    /// Sink pins, sorted.
    pub fanout: Vec<Pin>,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub kind: CellKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    /// Instance name.
    pub name: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unsupported construct `{token}` at line {line}")]
    Unsupported { line: usize, token: String },
    #[error("net `{0}` has more than one driver")]
    DuplicateDriver(String),
    #[error("signal `{0}` is used but never driven")]
    UndefinedSignal(String),
    #[error("cell `{cell}`: {kind} does not accept {got} inputs")]
    FanIn { cell: String, kind: CellKind, got: usize },
    #[error("name `{0}` uses a reserved prefix or port name")]
    ReservedName(String),
    #[error("duplicate instance name `{0}`")]
    DuplicateInstance(String),
    #[error("combinational cycle through nets {0:?}")]
    CombinationalCycle(Vec<String>),
    #[error("unknown net `{0}`")]
    UnknownNet(String),
}

/// Knobs shared by both parsers.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept names in the reserved `lite_` namespace. Needed to reload
    /// instrumented netlists for verification.
    pub allow_reserved: bool,
}

/// Gate-level netlist.
#[derive(Debug, Clone)]
pub struct Netlist {
    name: String,
    nets: Vec<Net>,
    cells: Vec<Cell>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    ffs: Vec<CellId>,
    net_index: HashMap<String, NetId>,
    cell_index: HashMap<String, CellId>,
}

impl Netlist {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn nets(&self) -> &[Net] {
        &self.nets
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id.idx()]
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.idx()]
    }

    pub fn net_count(&self) -> usize {
        self.nets.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    /// Flip-flop cells in scan order (file order until a chain is stitched).
    pub fn ffs(&self) -> &[CellId] {
        &self.ffs
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id.idx()].name
    }

    pub fn find_net(&self, name: &str) -> Option<NetId> {
        self.net_index.get(name).copied()
    }

    pub fn find_cell(&self, name: &str) -> Option<CellId> {
        self.cell_index.get(name).copied()
    }

    pub fn net_ids(&self) -> impl Iterator<Item = NetId> + '_ {
        (0..self.nets.len() as u32).map(NetId)
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cells.len() as u32).map(CellId)
    }

    pub fn is_input(&self, id: NetId) -> bool {
        self.nets[id.idx()].driver == Driver::Input
    }

    pub fn driver_cell(&self, id: NetId) -> Option<CellId> {
        match self.nets[id.idx()].driver {
            Driver::Cell(c) => Some(c),
            Driver::Input => None,
        }
    }

    pub fn count_kind(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|c| c.kind == kind).count()
    }

    /// True if any net or cell name lives in the reserved `lite_` namespace.
    pub fn has_reserved_names(&self) -> bool {
        self.nets.iter().any(|n| n.name.starts_with(RESERVED_PREFIX))
            || self.cells.iter().any(|c| c.name.starts_with(RESERVED_PREFIX))
    }

    /// Check structural invariants: drivers, arity, fanout consistency and
    /// combinational acyclicity.
    pub fn validate(&self) -> Result<(), NetlistError> {
        for cell in &self.cells {
            if !cell.kind.accepts(cell.inputs.len()) {
                return Err(NetlistError::FanIn { cell: cell.name.clone(), kind: cell.kind, got: cell.inputs.len() });
            }
        }
        for (i, net) in self.nets.iter().enumerate() {
            match net.driver {
                Driver::Input => {
                    if !self.inputs.contains(&NetId(i as u32)) {
                        return Err(NetlistError::UndefinedSignal(net.name.clone()));
                    }
                }
                Driver::Cell(c) => {
                    if self.cells[c.idx()].output != NetId(i as u32) {
                        return Err(NetlistError::DuplicateDriver(net.name.clone()));
                    }
                }
            }
            for p in &net.fanout {
                if self.cells[p.cell.idx()].inputs[p.pin as usize] != NetId(i as u32) {
                    return Err(NetlistError::UnknownNet(net.name.clone()));
                }
            }
        }
        crate::graph::Hypergraph::new(self).topo_sort().map_err(|e| NetlistError::CombinationalCycle(e.net_names(self)))?;
        Ok(())
    }

    // ---- mutation used by the scan and instrumentation passes ----

    fn intern_net(&mut self, name: &str, driver: Driver) -> Result<NetId, NetlistError> {
        if self.net_index.contains_key(name) {
            return Err(NetlistError::DuplicateDriver(name.to_string()));
        }
        let id = NetId(self.nets.len() as u32);
        self.nets.push(Net { name: name.to_string(), driver, fanout: Vec::new() });
        self.net_index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Add a new primary input port.
    pub fn add_input(&mut self, name: &str) -> Result<NetId, NetlistError> {
        let id = self.intern_net(name, Driver::Input)?;
        self.inputs.push(id);
        Ok(id)
    }

    /// Mark an existing net as a primary output.
    pub fn add_output(&mut self, net: NetId) {
        self.outputs.push(net);
    }

    /// Add a cell driving a fresh net named `out_name`.
    pub fn add_cell(
        &mut self,
        kind: CellKind,
        inst: &str,
        inputs: Vec<NetId>,
        out_name: &str,
    ) -> Result<(CellId, NetId), NetlistError> {
        if !kind.accepts(inputs.len()) {
            return Err(NetlistError::FanIn { cell: inst.to_string(), kind, got: inputs.len() });
        }
        if self.cell_index.contains_key(inst) {
            return Err(NetlistError::DuplicateInstance(inst.to_string()));
        }
        let cid = CellId(self.cells.len() as u32);
        let out = self.intern_net(out_name, Driver::Cell(cid))?;
        for (pin, &n) in inputs.iter().enumerate() {
            insert_sorted(&mut self.nets[n.idx()].fanout, Pin { cell: cid, pin: pin as u8 });
        }
        self.cells.push(Cell { kind, inputs, output: out, name: inst.to_string() });
        self.cell_index.insert(inst.to_string(), cid);
        if kind.is_sequential() {
            self.ffs.push(cid);
        }
        Ok((cid, out))
    }

    /// Reconnect one input pin of a cell.
    pub fn set_cell_input(&mut self, cell: CellId, pin: usize, net: NetId) {
        let old = self.cells[cell.idx()].inputs[pin];
        let p = Pin { cell, pin: pin as u8 };
        self.nets[old.idx()].fanout.retain(|q| *q != p);
        self.cells[cell.idx()].inputs[pin] = net;
        insert_sorted(&mut self.nets[net.idx()].fanout, p);
    }

    /// Replace a DFF by a mux-scan flip-flop with the given scan pins.
    pub fn convert_to_sdff(&mut self, cell: CellId, si: NetId, se: NetId) {
        let c = &mut self.cells[cell.idx()];
        assert_eq!(c.kind, CellKind::Dff, "only DFFs can be converted");
        c.kind = CellKind::Sdff;
        c.inputs.push(si);
        c.inputs.push(se);
        insert_sorted(&mut self.nets[si.idx()].fanout, Pin { cell, pin: SDFF_SI as u8 });
        insert_sorted(&mut self.nets[se.idx()].fanout, Pin { cell, pin: SDFF_SE as u8 });
    }

    /// Reorder the flip-flop list (scan order). `order` must be a
    /// permutation of the current list.
    pub fn set_ff_order(&mut self, order: Vec<CellId>) {
        let mut a = order.clone();
        let mut b = self.ffs.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b, "flip-flop order must be a permutation");
        self.ffs = order;
    }

    /// Pick a net name derived from `base` that is not yet taken.
    pub fn fresh_name(&self, base: &str) -> String {
        if !self.net_index.contains_key(base) && !self.cell_index.contains_key(base) {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|n| !self.net_index.contains_key(n) && !self.cell_index.contains_key(n))
            .unwrap()
    }
}

fn insert_sorted(v: &mut Vec<Pin>, p: Pin) {
    match v.binary_search(&p) {
        Ok(_) => {}
        Err(pos) => v.insert(pos, p),
    }
}

/// Incremental netlist construction by name. Signals may be referenced
/// before they are driven; [`NetlistBuilder::finish`] checks that every
/// referenced net ends up with exactly one driver.
#[derive(Debug)]
pub struct NetlistBuilder {
    name: String,
    opts: ParseOptions,
    names: Vec<String>,
    drivers: Vec<Option<Driver>>,
    index: HashMap<String, NetId>,
    cells: Vec<Cell>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
}

impl NetlistBuilder {
    pub fn new(name: impl Into<String>, opts: ParseOptions) -> Self {
        NetlistBuilder {
            name: name.into(),
            opts,
            names: Vec::new(),
            drivers: Vec::new(),
            index: HashMap::new(),
            cells: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    fn check_name(&self, name: &str) -> Result<(), NetlistError> {
        if !self.opts.allow_reserved && name.starts_with(RESERVED_PREFIX) {
            return Err(NetlistError::ReservedName(name.to_string()));
        }
        Ok(())
    }

    /// Get or create the net called `name`.
    pub fn net(&mut self, name: &str) -> Result<NetId, NetlistError> {
        if let Some(&id) = self.index.get(name) {
            return Ok(id);
        }
        self.check_name(name)?;
        let id = NetId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.drivers.push(None);
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn input(&mut self, name: &str) -> Result<NetId, NetlistError> {
        let id = self.net(name)?;
        if self.drivers[id.idx()].is_some() {
            return Err(NetlistError::DuplicateDriver(name.to_string()));
        }
        self.drivers[id.idx()] = Some(Driver::Input);
        self.inputs.push(id);
        Ok(id)
    }

    pub fn output(&mut self, name: &str) -> Result<NetId, NetlistError> {
        let id = self.net(name)?;
        self.outputs.push(id);
        Ok(id)
    }

    pub fn cell(&mut self, kind: CellKind, inst: &str, inputs: &[&str], output: &str) -> Result<CellId, NetlistError> {
        let ins = inputs.iter().map(|n| self.net(n)).collect::<Result<Vec<_>, _>>()?;
        let out = self.net(output)?;
        self.cell_ids(kind, inst, ins, out)
    }

    pub fn cell_ids(&mut self, kind: CellKind, inst: &str, inputs: Vec<NetId>, output: NetId) -> Result<CellId, NetlistError> {
        self.check_name(inst)?;
        if !kind.accepts(inputs.len()) {
            return Err(NetlistError::FanIn { cell: inst.to_string(), kind, got: inputs.len() });
        }
        let id = CellId(self.cells.len() as u32);
        if self.drivers[output.idx()].is_some() {
            return Err(NetlistError::DuplicateDriver(self.names[output.idx()].clone()));
        }
        self.drivers[output.idx()] = Some(Driver::Cell(id));
        self.cells.push(Cell { kind, inputs, output, name: inst.to_string() });
        Ok(id)
    }

    pub fn finish(self) -> Result<Netlist, NetlistError> {
        let mut nets = Vec::with_capacity(self.names.len());
        for (name, driver) in self.names.into_iter().zip(self.drivers) {
            let driver = driver.ok_or_else(|| NetlistError::UndefinedSignal(name.clone()))?;
            nets.push(Net { name, driver, fanout: Vec::new() });
        }
        let mut cell_index = HashMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            if cell_index.insert(c.name.clone(), CellId(i as u32)).is_some() {
                return Err(NetlistError::DuplicateInstance(c.name.clone()));
            }
            for (pin, &n) in c.inputs.iter().enumerate() {
                nets[n.idx()].fanout.push(Pin { cell: CellId(i as u32), pin: pin as u8 });
            }
        }
        let ffs = self.cells.iter().enumerate().filter(|(_, c)| c.kind.is_sequential()).map(|(i, _)| CellId(i as u32)).collect();
        let netlist = Netlist {
            name: self.name,
            nets,
            cells: self.cells,
            inputs: self.inputs,
            outputs: self.outputs,
            ffs,
            net_index: self.index,
            cell_index,
        };
        netlist.validate()?;
        Ok(netlist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_limits() {
        assert!(CellKind::And.accepts(2));
        assert!(CellKind::And.accepts(5));
        assert!(!CellKind::And.accepts(1));
        assert!(!CellKind::Xor.accepts(6));
        assert!(CellKind::Mux2.accepts(3));
        assert!(!CellKind::Sdff.accepts(1));
    }

    #[test]
    fn word_and_scalar_eval_agree() {
        for kind in CellKind::ALL {
            let (lo, hi) = kind.arity();
            for n in lo..=hi {
                for m in 0u32..(1 << n) {
                    let bools: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
                    let words: Vec<u64> = bools.iter().map(|&b| if b { !0 } else { 0 }).collect();
                    let w = kind.eval_words(&words);
                    assert_eq!(w == !0, kind.eval_bools(&bools), "{kind} {bools:?}");
                }
            }
        }
    }

    #[test]
    fn builder_rejects_double_driver() {
        let mut b = NetlistBuilder::new("t", ParseOptions::default());
        b.input("a").unwrap();
        b.cell(CellKind::Not, "g1", &["a"], "z").unwrap();
        let err = b.cell(CellKind::Buf, "g2", &["a"], "z").unwrap_err();
        assert_eq!(err, NetlistError::DuplicateDriver("z".into()));
    }

    #[test]
    fn builder_rejects_undriven() {
        let mut b = NetlistBuilder::new("t", ParseOptions::default());
        b.input("a").unwrap();
        b.cell(CellKind::And, "g1", &["a", "b"], "z").unwrap();
        b.output("z").unwrap();
        assert_eq!(b.finish().unwrap_err(), NetlistError::UndefinedSignal("b".into()));
    }

    #[test]
    fn reserved_prefix_is_rejected_by_default() {
        let mut b = NetlistBuilder::new("t", ParseOptions::default());
        assert!(matches!(b.input("lite_x"), Err(NetlistError::ReservedName(_))));
        let mut b = NetlistBuilder::new("t", ParseOptions { allow_reserved: true });
        assert!(b.input("lite_x").is_ok());
    }

    #[test]
    fn mutation_keeps_fanout_sorted() {
        let mut b = NetlistBuilder::new("t", ParseOptions::default());
        b.input("a").unwrap();
        b.input("b").unwrap();
        b.cell(CellKind::And, "g1", &["a", "b"], "z").unwrap();
        b.output("z").unwrap();
        let mut n = b.finish().unwrap();
        let a = n.find_net("a").unwrap();
        let bnet = n.find_net("b").unwrap();
        let (c2, _) = n.add_cell(CellKind::Not, "g2", vec![bnet], "y").unwrap();
        n.set_cell_input(CellId(0), 1, a);
        n.set_cell_input(c2, 0, a);
        assert!(n.net(bnet).fanout.is_empty());
        let fo = &n.net(a).fanout;
        assert_eq!(fo.len(), 3);
        assert!(fo.windows(2).all(|w| w[0] < w[1]));
        n.validate().unwrap();
    }
}
