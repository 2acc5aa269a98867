// SPDX-License-Identifier: Apache-2.0
//! Structural isomorphism up to net and instance renaming.
//!
//! Ports are matched by position, flip-flops by their order in
//! [`Netlist::ffs`]. Every net receives a structural hash derived from its
//! driver and the hashes of the driver's inputs; two netlists are
//! isomorphic when their cell multisets and port/flip-flop hashes agree.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::{Driver, Netlist};
use crate::graph::Hypergraph;

/// Port-anchored structural signature of a netlist, or `None` if it has a
/// combinational cycle.
pub fn canonical_signature(n: &Netlist) -> Option<Vec<u64>> {
    let order = Hypergraph::new(n).topo_sort().ok()?;
    let mut label = vec![0u64; n.net_count()];
    let h = |parts: &dyn Fn(&mut DefaultHasher)| {
        let mut s = DefaultHasher::new();
        parts(&mut s);
        s.finish()
    };
    for (i, &pi) in n.inputs().iter().enumerate() {
        label[pi.idx()] = h(&|s| ("PI", i).hash(s));
    }
    for (j, &ff) in n.ffs().iter().enumerate() {
        let c = n.cell(ff);
        label[c.output.idx()] = h(&|s| ("FF", j, c.kind).hash(s));
    }
    for &cid in order.order() {
        let c = n.cell(cid);
        let ins: Vec<u64> = c.inputs.iter().map(|&i| label[i.idx()]).collect();
        label[c.output.idx()] = h(&|s| ("G", c.kind, &ins).hash(s));
    }
    debug_assert!(n.nets().iter().all(|net| matches!(net.driver, Driver::Input | Driver::Cell(_))));

    let mut cells: Vec<u64> = n
        .cells()
        .iter()
        .map(|c| {
            let ins: Vec<u64> = c.inputs.iter().map(|&i| label[i.idx()]).collect();
            h(&|s| (c.kind, &ins, label[c.output.idx()]).hash(s))
        })
        .collect();
    cells.sort_unstable();

    let mut sig = vec![n.inputs().len() as u64, n.outputs().len() as u64, n.ffs().len() as u64];
    sig.extend(n.outputs().iter().map(|&o| label[o.idx()]));
    for &ff in n.ffs() {
        let c = n.cell(ff);
        sig.extend(c.inputs.iter().map(|&i| label[i.idx()]));
    }
    sig.push(cells.len() as u64);
    sig.extend(cells);
    Some(sig)
}

/// True if the two netlists are the same circuit up to renaming.
pub fn isomorphic(a: &Netlist, b: &Netlist) -> bool {
    match (canonical_signature(a), canonical_signature(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}
