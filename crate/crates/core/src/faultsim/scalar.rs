// SPDX-License-Identifier: Apache-2.0
//! One-pattern-at-a-time reference simulator with optional fault
//! injection. Deliberately naive: full re-evaluation, no events, no words.

use crate::graph::Hypergraph;
use crate::netlist::Netlist;

use super::{Fault, FaultSite};

/// Output values of a combinational netlist for one input assignment
/// (indexed like `n.inputs()`), with `fault` injected if given.
pub fn simulate(n: &Netlist, inputs: &[bool], fault: Option<&Fault>) -> Vec<bool> {
    let v = net_values(n, inputs, fault);
    n.outputs().iter().map(|&o| v[o.idx()]).collect()
}

/// Value of every net, indexed by net id.
pub fn net_values(n: &Netlist, inputs: &[bool], fault: Option<&Fault>) -> Vec<bool> {
    let order = Hypergraph::new(n).topo_sort().expect("combinational netlist");
    let mut v = vec![false; n.net_count()];
    let stem = |net, val: bool| match fault {
        Some(Fault { site: FaultSite::Stem(s), stuck }) if *s == net => *stuck,
        _ => val,
    };
    for (&pi, &b) in n.inputs().iter().zip(inputs) {
        v[pi.idx()] = stem(pi, b);
    }
    for &c in order.order() {
        let cell = n.cell(c);
        let ins: Vec<bool> = cell
            .inputs
            .iter()
            .enumerate()
            .map(|(pin, &i)| match fault {
                Some(Fault { site: FaultSite::Branch(p), stuck }) if p.cell == c && p.pin as usize == pin => *stuck,
                _ => v[i.idx()],
            })
            .collect();
        v[cell.output.idx()] = stem(cell.output, cell.kind.eval_bools(&ins));
    }
    v
}

/// True if `fault` flips at least one output under `inputs`.
pub fn detects(n: &Netlist, inputs: &[bool], fault: &Fault) -> bool {
    simulate(n, inputs, None) != simulate(n, inputs, Some(fault))
}
