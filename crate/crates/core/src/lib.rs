// SPDX-License-Identifier: Apache-2.0
//! Gate-level design-for-testability toolkit.
//!
//! The flow parses a netlist ([`netlist`]), builds its hypergraph and
//! topological order ([`graph`]), computes SCOAP measures ([`scoap`]),
//! stitches a mux-scan chain ([`scan`]) and instruments scan flip-flops with
//! XOR/MUX observation and MUX control logic ([`lite`]). The resulting
//! testability is measured with a bit-parallel stuck-at fault simulator
//! ([`faultsim`]), a PODEM test generator ([`atpg`]) and an area/experiment
//! harness ([`report`]).

pub mod atpg;
pub mod benchmarks;
pub mod faultsim;
pub mod graph;
pub mod lite;
pub mod netlist;
pub mod report;
pub mod scan;
pub mod scoap;

pub use graph::{GraphError, Hypergraph, TopoOrder};
pub use netlist::{CellId, CellKind, NetId, Netlist, NetlistError};
