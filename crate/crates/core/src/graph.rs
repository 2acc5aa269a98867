// SPDX-License-Identifier: Apache-2.0
//! Hypergraph view of a netlist: cells are vertices, nets are hyperedges
//! from one driver to many sinks.
//!
//! Sequential cells cut the topological relation. A flip-flop output acts as
//! a source and its input pins as sinks, so sequential loops are legal while
//! combinational ones are reported.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::netlist::{CellId, Driver, NetId, Netlist, Pin};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("combinational cycle through {} nets", .0.len())]
    CombinationalCycle(Vec<NetId>),
    #[error("unknown net id {0}")]
    UnknownNet(NetId),
}

impl GraphError {
    /// Net names of a cycle, for user-facing errors.
    pub fn net_names(&self, n: &Netlist) -> Vec<String> {
        match self {
            GraphError::CombinationalCycle(v) => v.iter().map(|&x| n.net_name(x).to_string()).collect(),
            GraphError::UnknownNet(x) => vec![x.to_string()],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Hypergraph<'a> {
    n: &'a Netlist,
}

/// Topological order of the combinational cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoOrder {
    order: Vec<CellId>,
    /// Rank of each cell in `order`; `u32::MAX` for sequential cells.
    position: Vec<u32>,
}

impl TopoOrder {
    pub fn order(&self) -> &[CellId] {
        &self.order
    }

    pub fn position(&self, c: CellId) -> Option<usize> {
        match self.position[c.idx()] {
            u32::MAX => None,
            p => Some(p as usize),
        }
    }
}

impl<'a> Hypergraph<'a> {
    pub fn new(n: &'a Netlist) -> Self {
        Hypergraph { n }
    }

    pub fn netlist(&self) -> &'a Netlist {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.n.cell_count()
    }

    pub fn edge_count(&self) -> usize {
        self.n.net_count()
    }

    /// Driver and sinks of one hyperedge.
    pub fn hyperedge(&self, net: NetId) -> (Option<CellId>, &'a [Pin]) {
        let n = &self.n.nets()[net.idx()];
        let d = match n.driver {
            Driver::Cell(c) => Some(c),
            Driver::Input => None,
        };
        (d, &n.fanout)
    }

    fn comb_driver(&self, net: NetId) -> Option<CellId> {
        self.n.driver_cell(net).filter(|&c| !self.n.cell(c).kind.is_sequential())
    }

    /// Kahn's algorithm over combinational cells with ties broken by
    /// ascending cell id.
    pub fn topo_sort(&self) -> Result<TopoOrder, GraphError> {
        let n = self.n;
        let cells = n.cells();
        let mut indeg = vec![0u32; cells.len()];
        let mut heap = BinaryHeap::new();
        let mut comb = 0usize;
        for (i, c) in cells.iter().enumerate() {
            if c.kind.is_sequential() {
                continue;
            }
            comb += 1;
            indeg[i] = c.inputs.iter().filter(|&&x| self.comb_driver(x).is_some()).count() as u32;
            if indeg[i] == 0 {
                heap.push(Reverse(i as u32));
            }
        }
        let mut order = Vec::with_capacity(comb);
        let mut position = vec![u32::MAX; cells.len()];
        while let Some(Reverse(i)) = heap.pop() {
            position[i as usize] = order.len() as u32;
            order.push(CellId(i));
            for p in &n.net(cells[i as usize].output).fanout {
                let j = p.cell.idx();
                if cells[j].kind.is_sequential() {
                    continue;
                }
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    heap.push(Reverse(j as u32));
                }
            }
        }
        if order.len() == comb {
            return Ok(TopoOrder { order, position });
        }
        Err(GraphError::CombinationalCycle(self.find_cycle(&indeg)))
    }

    /// Walk backwards through unsorted cells until a cell repeats.
    fn find_cycle(&self, indeg: &[u32]) -> Vec<NetId> {
        let n = self.n;
        let start = (0..indeg.len()).find(|&i| indeg[i] > 0 && !n.cells()[i].kind.is_sequential()).expect("cycle exists");
        let mut seen = vec![usize::MAX; indeg.len()];
        let mut path: Vec<usize> = Vec::new();
        let mut cur = start;
        loop {
            if seen[cur] != usize::MAX {
                let mut cyc: Vec<NetId> = path[seen[cur]..].iter().map(|&c| n.cells()[c].output).collect();
                cyc.reverse();
                return cyc;
            }
            seen[cur] = path.len();
            path.push(cur);
            cur = n.cells()[cur]
                .inputs
                .iter()
                .filter_map(|&x| self.comb_driver(x))
                .map(|c| c.idx())
                .find(|&c| indeg[c] > 0)
                .expect("unsorted cell has an unsorted predecessor");
        }
    }

    fn check(&self, net: NetId) -> Result<(), GraphError> {
        if net.idx() < self.n.net_count() {
            Ok(())
        } else {
            Err(GraphError::UnknownNet(net))
        }
    }

    /// Transitive combinational fan-in of `net`, including `net`. Stops at
    /// primary inputs and flip-flop outputs.
    pub fn fanin_cone(&self, net: NetId) -> Result<BTreeSet<NetId>, GraphError> {
        self.check(net)?;
        let mut seen = vec![false; self.n.net_count()];
        let mut stack = vec![net];
        seen[net.idx()] = true;
        while let Some(x) = stack.pop() {
            if let Some(c) = self.comb_driver(x) {
                for &i in &self.n.cell(c).inputs {
                    if !seen[i.idx()] {
                        seen[i.idx()] = true;
                        stack.push(i);
                    }
                }
            }
        }
        Ok(collect(&seen))
    }

    /// Transitive combinational fan-out of `net`, including `net`. Stops at
    /// flip-flop input pins.
    pub fn fanout_cone(&self, net: NetId) -> Result<BTreeSet<NetId>, GraphError> {
        self.check(net)?;
        let mut seen = vec![false; self.n.net_count()];
        self.mark_fanout(net, &mut seen, &|_| &[]);
        Ok(collect(&seen))
    }

    /// Forward marking with extra virtual edges: whenever a net `x` is
    /// reached, traversal also continues into `extra(x)`.
    pub(crate) fn mark_fanout<'e>(&self, net: NetId, seen: &mut [bool], extra: &dyn Fn(NetId) -> &'e [NetId]) {
        let mut stack = vec![net];
        seen[net.idx()] = true;
        while let Some(x) = stack.pop() {
            for p in &self.n.net(x).fanout {
                let c = self.n.cell(p.cell);
                if c.kind.is_sequential() {
                    continue;
                }
                if !seen[c.output.idx()] {
                    seen[c.output.idx()] = true;
                    stack.push(c.output);
                }
            }
            for &y in extra(x) {
                if !seen[y.idx()] {
                    seen[y.idx()] = true;
                    stack.push(y);
                }
            }
        }
    }

    /// Source nets (primary inputs and flip-flop outputs) in the fan-in cone.
    pub fn support(&self, net: NetId) -> Result<Vec<NetId>, GraphError> {
        Ok(self.fanin_cone(net)?.into_iter().filter(|&x| self.comb_driver(x).is_none()).collect())
    }

    /// Graphviz rendering for debugging.
    pub fn to_dot(&self) -> String {
        let n = self.n;
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{}\" {{", n.name());
        for &i in n.inputs() {
            let _ = writeln!(s, "  \"pi:{0}\" [shape=triangle,label=\"{0}\"];", n.net_name(i));
        }
        for c in n.cells() {
            let _ = writeln!(s, "  \"{}\" [shape=box,label=\"{}\\n{}\"];", c.name, c.kind, c.name);
        }
        for &o in n.outputs() {
            let _ = writeln!(s, "  \"po:{0}\" [shape=invtriangle,label=\"{0}\"];", n.net_name(o));
        }
        let src = |x: NetId| match n.net(x).driver {
            Driver::Input => format!("pi:{}", n.net_name(x)),
            Driver::Cell(c) => n.cell(c).name.clone(),
        };
        for c in n.cells() {
            for &i in &c.inputs {
                let _ = writeln!(s, "  \"{}\" -> \"{}\" [label=\"{}\"];", src(i), c.name, n.net_name(i));
            }
        }
        for &o in n.outputs() {
            let _ = writeln!(s, "  \"{}\" -> \"po:{}\";", src(o), n.net_name(o));
        }
        s.push_str("}\n");
        s
    }
}

fn collect(seen: &[bool]) -> BTreeSet<NetId> {
    seen.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| NetId(i as u32)).collect()
}
