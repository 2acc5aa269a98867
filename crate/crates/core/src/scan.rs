// SPDX-License-Identifier: Apache-2.0
//! Mux-scan insertion and the full-scan combinational test model.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::graph::Hypergraph;
use crate::netlist::{
    CellId, CellKind, Driver, NetId, Netlist, NetlistBuilder, NetlistError, ParseOptions, FF_D, SDFF_SE, SDFF_SI,
};

pub const SCAN_IN: &str = "scan_in";
pub const SCAN_OUT: &str = "scan_out";
pub const SCAN_ENABLE: &str = "scan_enable";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("netlist is already scan-stitched (`{0}` present)")]
    AlreadyStitched(String),
    #[error("netlist has no flip-flops to stitch")]
    NoFlipFlops,
    #[error("chain order: {0}")]
    BadOrder(String),
    #[error("flip-flop `{0}` is not on a scan chain")]
    NonScannedFf(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// A single scan chain, scan-in side first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanChain {
    pub order: Vec<CellId>,
    pub si_port: NetId,
    /// Output of the `scan_out` buffer.
    pub so_port: NetId,
    pub se_port: NetId,
}

impl ScanChain {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Recover the chain of an already stitched netlist by following SI
    /// links from `scan_in`.
    pub fn recover(n: &Netlist) -> Result<ScanChain, ScanError> {
        let missing = |s: &str| ScanError::BadOrder(format!("missing `{s}`"));
        let si = n.find_net(SCAN_IN).ok_or_else(|| missing(SCAN_IN))?;
        let se = n.find_net(SCAN_ENABLE).ok_or_else(|| missing(SCAN_ENABLE))?;
        let so = n.find_net(SCAN_OUT).ok_or_else(|| missing(SCAN_OUT))?;
        let mut by_si: HashMap<NetId, CellId> = HashMap::new();
        for &f in n.ffs() {
            let c = n.cell(f);
            if c.kind != CellKind::Sdff {
                return Err(ScanError::NonScannedFf(c.name.clone()));
            }
            if by_si.insert(c.inputs[SDFF_SI], f).is_some() {
                return Err(ScanError::BadOrder(format!("two flip-flops shift from `{}`", n.net_name(c.inputs[SDFF_SI]))));
            }
        }
        let mut order = Vec::with_capacity(n.ffs().len());
        let mut cur = si;
        while let Some(&f) = by_si.get(&cur) {
            if order.len() > n.ffs().len() {
                return Err(ScanError::BadOrder("scan loop".into()));
            }
            order.push(f);
            cur = n.cell(f).output;
        }
        if order.len() != n.ffs().len() {
            return Err(ScanError::BadOrder("chain does not reach every flip-flop".into()));
        }
        Ok(ScanChain { order, si_port: si, so_port: so, se_port: se })
    }
}

/// Stitch all DFFs in ascending cell-id order.
pub fn insert_scan(n: &Netlist) -> Result<(Netlist, ScanChain), ScanError> {
    insert_scan_ordered(n, None)
}

/// Stitch all DFFs, optionally in the order given by instance names.
///
/// Each DFF becomes an SDFF (`SE ? SI : D`); new ports `scan_in`,
/// `scan_enable` and `scan_out` (a buffer on the last Q) are added.
pub fn insert_scan_ordered(n: &Netlist, order: Option<&[String]>) -> Result<(Netlist, ScanChain), ScanError> {
    for name in [SCAN_IN, SCAN_OUT, SCAN_ENABLE] {
        if n.find_net(name).is_some() || n.find_cell(name).is_some() {
            return Err(ScanError::AlreadyStitched(name.into()));
        }
    }
    if let Some(&f) = n.ffs().iter().find(|&&f| n.cell(f).kind == CellKind::Sdff) {
        return Err(ScanError::AlreadyStitched(n.cell(f).name.clone()));
    }
    if n.ffs().is_empty() {
        return Err(ScanError::NoFlipFlops);
    }
    let chain: Vec<CellId> = match order {
        None => {
            let mut v = n.ffs().to_vec();
            v.sort();
            v
        }
        Some(names) => {
            let mut seen = HashSet::new();
            let mut v = Vec::with_capacity(names.len());
            for name in names {
                let c = n
                    .find_cell(name)
                    .filter(|&c| n.cell(c).kind == CellKind::Dff)
                    .ok_or_else(|| ScanError::BadOrder(format!("`{name}` is not a flip-flop")))?;
                if !seen.insert(c) {
                    return Err(ScanError::BadOrder(format!("`{name}` listed twice")));
                }
                v.push(c);
            }
            if v.len() != n.ffs().len() {
                return Err(ScanError::BadOrder(format!("{} of {} flip-flops listed", v.len(), n.ffs().len())));
            }
            v
        }
    };

    let mut out = n.clone();
    let si = out.add_input(SCAN_IN)?;
    let se = out.add_input(SCAN_ENABLE)?;
    let mut prev = si;
    for &f in &chain {
        out.convert_to_sdff(f, prev, se);
        prev = out.cell(f).output;
    }
    let (_, so) = out.add_cell(CellKind::Buf, SCAN_OUT, vec![prev], SCAN_OUT)?;
    out.add_output(so);
    out.set_ff_order(chain.clone());
    Ok((out, ScanChain { order: chain, si_port: si, so_port: so, se_port: se }))
}

/// `pattern_count × (L + 1) + L`: overlapped shift, one capture per
/// pattern, final flush.
pub fn estimate_test_cycles(pattern_count: u64, chain_len: u64) -> u64 {
    pattern_count * (chain_len + 1) + chain_len
}

/// Where a pseudo-primary input of the test model comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoInput {
    Pi(NetId),
    /// Q of the flip-flop.
    Ff(CellId),
}

/// Where a pseudo-primary output of the test model goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoOutput {
    Po(NetId),
    /// D pin of the flip-flop.
    Ff(CellId),
}

/// Capture-mode combinational view of a (scanned) netlist.
///
/// Pseudo-inputs are the functional PIs followed by flip-flop outputs in
/// scan order; pseudo-outputs are the functional POs followed by flip-flop
/// D pins. Net and instance names are those of the source netlist.
#[derive(Debug, Clone)]
pub struct FullScanModel {
    pub netlist: Netlist,
    /// Indexed like `netlist.inputs()`.
    pub inputs: Vec<PseudoInput>,
    /// Indexed like `netlist.outputs()`.
    pub outputs: Vec<PseudoOutput>,
    /// Source net → model net.
    pub to_model: Vec<Option<NetId>>,
    /// Model net → source net.
    pub to_source: Vec<NetId>,
    pub pi_count: usize,
    pub po_count: usize,
}

impl FullScanModel {
    pub fn ff_count(&self) -> usize {
        self.inputs.len() - self.pi_count
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.netlist.inputs().iter().map(|&i| self.netlist.net_name(i)).collect()
    }

    /// Name of pseudo-output `j`: the PO net name, or the flip-flop
    /// instance name for D pins.
    pub fn output_label(&self, src: &Netlist, j: usize) -> String {
        match self.outputs[j] {
            PseudoOutput::Po(net) => src.net_name(net).to_string(),
            PseudoOutput::Ff(c) => format!("{}/D", src.cell(c).name),
        }
    }
}

/// Build the full-scan model of a scan-stitched netlist.
pub fn extract_full_scan(n: &Netlist) -> Result<FullScanModel, ScanError> {
    if let Some(&f) = n.ffs().iter().find(|&&f| n.cell(f).kind != CellKind::Sdff) {
        return Err(ScanError::NonScannedFf(n.cell(f).name.clone()));
    }
    build_model(n)
}

/// Like [`extract_full_scan`] but also accepts plain DFFs, treating them
/// as scanned. Used to compare netlists before and after stitching.
pub fn extract_full_scan_lenient(n: &Netlist) -> Result<FullScanModel, ScanError> {
    build_model(n)
}

fn is_scan_pin(n: &Netlist, net: NetId) -> bool {
    let x = n.net(net);
    x.driver == Driver::Input
        && !x.fanout.is_empty()
        && !n.outputs().contains(&net)
        && x.fanout
            .iter()
            .all(|p| n.cell(p.cell).kind == CellKind::Sdff && (p.pin as usize == SDFF_SI || p.pin as usize == SDFF_SE))
}

fn is_scan_out(n: &Netlist, c: CellId) -> bool {
    let cell = n.cell(c);
    cell.kind == CellKind::Buf && cell.name == SCAN_OUT && n.net_name(cell.output) == SCAN_OUT
}

fn build_model(n: &Netlist) -> Result<FullScanModel, ScanError> {
    let mut b = NetlistBuilder::new(n.name(), ParseOptions { allow_reserved: true });
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for &pi in n.inputs() {
        if !is_scan_pin(n, pi) {
            b.input(n.net_name(pi))?;
            inputs.push(PseudoInput::Pi(pi));
        }
    }
    let pi_count = inputs.len();
    for &f in n.ffs() {
        b.input(n.net_name(n.cell(f).output))?;
        inputs.push(PseudoInput::Ff(f));
    }
    for c in n.cell_ids() {
        let cell = n.cell(c);
        if cell.kind.is_sequential() || is_scan_out(n, c) {
            continue;
        }
        let ins: Vec<&str> = cell.inputs.iter().map(|&i| n.net_name(i)).collect();
        b.cell(cell.kind, &cell.name, &ins, n.net_name(cell.output))?;
    }
    for &po in n.outputs() {
        if n.driver_cell(po).is_some_and(|c| is_scan_out(n, c)) {
            continue;
        }
        b.output(n.net_name(po))?;
        outputs.push(PseudoOutput::Po(po));
    }
    let po_count = outputs.len();
    for &f in n.ffs() {
        b.output(n.net_name(n.cell(f).inputs[FF_D]))?;
        outputs.push(PseudoOutput::Ff(f));
    }
    let netlist = b.finish()?;
    let mut to_model = vec![None; n.net_count()];
    let mut to_source = Vec::with_capacity(netlist.net_count());
    for id in netlist.net_ids() {
        let src = n.find_net(netlist.net_name(id)).expect("model nets come from the source");
        to_model[src.idx()] = Some(id);
        to_source.push(src);
    }
    debug_assert!(Hypergraph::new(&netlist).topo_sort().is_ok());
    Ok(FullScanModel { netlist, inputs, outputs, to_model, to_source, pi_count, po_count })
}

/// Cycle-accurate scalar simulator of a sequential netlist.
///
/// All flip-flops share one clock; state starts at zero.
#[derive(Debug, Clone)]
pub struct SequentialSim<'a> {
    n: &'a Netlist,
    order: Vec<CellId>,
    values: Vec<bool>,
    /// Indexed like `n.ffs()`.
    pub state: Vec<bool>,
}

impl<'a> SequentialSim<'a> {
    pub fn new(n: &'a Netlist) -> Result<Self, ScanError> {
        let order =
            Hypergraph::new(n).topo_sort().map_err(|e| NetlistError::CombinationalCycle(e.net_names(n)))?.order().to_vec();
        Ok(SequentialSim { n, order, values: vec![false; n.net_count()], state: vec![false; n.ffs().len()] })
    }

    /// Settle the combinational logic for `inputs` (indexed like
    /// `n.inputs()`) and return the PO values.
    pub fn settle(&mut self, inputs: &[bool]) -> Vec<bool> {
        let n = self.n;
        for (&pi, &v) in n.inputs().iter().zip(inputs) {
            self.values[pi.idx()] = v;
        }
        for (&f, &v) in n.ffs().iter().zip(&self.state) {
            self.values[n.cell(f).output.idx()] = v;
        }
        let mut buf = Vec::with_capacity(5);
        for &c in &self.order {
            let cell = n.cell(c);
            buf.clear();
            buf.extend(cell.inputs.iter().map(|&i| self.values[i.idx()]));
            self.values[cell.output.idx()] = cell.kind.eval_bools(&buf);
        }
        n.outputs().iter().map(|&o| self.values[o.idx()]).collect()
    }

    /// One clock: settle, latch next state, and return the pre-edge PO
    /// values.
    pub fn step(&mut self, inputs: &[bool]) -> Vec<bool> {
        let out = self.settle(inputs);
        let n = self.n;
        let mut buf = Vec::with_capacity(3);
        for (k, &f) in n.ffs().iter().enumerate() {
            let cell = n.cell(f);
            buf.clear();
            buf.extend(cell.inputs.iter().map(|&i| self.values[i.idx()]));
            self.state[k] = cell.kind.eval_bools(&buf);
        }
        out
    }

    pub fn value(&self, net: NetId) -> bool {
        self.values[net.idx()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    const S27: &str = include_str!("../benchmarks/s27.bench");

    #[test]
    fn one_ff_chain() {
        let n = parse_bench("INPUT(a)\nOUTPUT(z)\nq = DFF(a)\nz = NOT(q)\n").unwrap();
        let (s, chain) = insert_scan(&n).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(s.inputs().len(), 3);
        assert_eq!(s.outputs().len(), 2);
        assert_eq!(s.count_kind(CellKind::Sdff), 1);
        assert_eq!(s.net_name(chain.si_port), SCAN_IN);
        assert_eq!(s.net_name(chain.so_port), SCAN_OUT);
        assert_eq!(s.net_name(chain.se_port), SCAN_ENABLE);
        assert_eq!(ScanChain::recover(&s).unwrap(), chain);
        s.validate().unwrap();
    }

    #[test]
    fn s27_chain_and_model() {
        let n = parse_bench(S27).unwrap();
        let (s, chain) = insert_scan(&n).unwrap();
        assert_eq!(chain.len(), 3);
        let m = extract_full_scan(&s).unwrap();
        assert_eq!(m.netlist.inputs().len(), 4 + 3);
        assert_eq!(m.netlist.outputs().len(), 1 + 3);
        assert_eq!(m.pi_count, 4);
        assert_eq!(m.po_count, 1);
        assert!(m.netlist.ffs().is_empty());
        assert!(matches!(extract_full_scan(&n), Err(ScanError::NonScannedFf(_))));
        assert!(matches!(insert_scan(&s), Err(ScanError::AlreadyStitched(_))));
    }

    #[test]
    fn explicit_order() {
        let n = parse_bench(S27).unwrap();
        let names: Vec<String> = ["G7", "G5", "G6"].iter().map(|s| s.to_string()).collect();
        let (s, chain) = insert_scan_ordered(&n, Some(&names)).unwrap();
        let got: Vec<&str> = chain.order.iter().map(|&c| s.cell(c).name.as_str()).collect();
        assert_eq!(got, ["G7", "G5", "G6"]);
        assert_eq!(ScanChain::recover(&s).unwrap().order, chain.order);
        let bad: Vec<String> = vec!["G7".into(), "G7".into(), "G6".into()];
        assert!(matches!(insert_scan_ordered(&n, Some(&bad)), Err(ScanError::BadOrder(_))));
    }

    #[test]
    fn combinational_model_is_identity() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nw = AND(a, b)\nz = NOT(w)\n").unwrap();
        let m = extract_full_scan(&n).unwrap();
        assert!(crate::netlist::isomorphic(&n, &m.netlist));
        assert_eq!(m.netlist.net_count(), n.net_count());
        assert!(matches!(insert_scan(&n), Err(ScanError::NoFlipFlops)));
    }

    #[test]
    fn cycle_formula() {
        assert_eq!(estimate_test_cycles(0, 5), 5);
        assert_eq!(estimate_test_cycles(1, 0), 1);
        assert_eq!(estimate_test_cycles(186, 145), 27_301);
    }

    /// Normal mode: all length-4 sequences of s27 inputs agree with the
    /// unscanned circuit.
    #[test]
    fn s27_normal_mode_equivalence() {
        let n = parse_bench(S27).unwrap();
        let (s, _) = insert_scan(&n).unwrap();
        let npi = n.inputs().len();
        let mut seq = vec![0usize; 4];
        loop {
            let mut a = SequentialSim::new(&n).unwrap();
            let mut b = SequentialSim::new(&s).unwrap();
            for &v in &seq {
                let ins: Vec<bool> = (0..npi).map(|i| v >> i & 1 == 1).collect();
                let mut ins_s = ins.clone();
                ins_s.extend([false, false]); // scan_in, scan_enable
                let oa = a.step(&ins);
                let ob = b.step(&ins_s);
                assert_eq!(oa[..], ob[..oa.len()]);
                assert_eq!(a.state, b.state);
            }
            let mut i = 0;
            while i < 4 {
                seq[i] += 1;
                if seq[i] < 1 << npi {
                    break;
                }
                seq[i] = 0;
                i += 1;
            }
            if i == 4 {
                break;
            }
        }
    }
}
