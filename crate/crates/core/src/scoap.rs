// SPDX-License-Identifier: Apache-2.0
//! SCOAP combinational controllability (CC0/CC1) and observability (CO).
//!
//! Full-scan semantics: flip-flop outputs behave as primary inputs and
//! flip-flop data pins as primary outputs. Scan-only pins (SI, SE) do not
//! observe anything in capture mode and contribute no observability.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{Hypergraph, TopoOrder};
use crate::netlist::{CellKind, Driver, NetId, Netlist, FF_D, MUX_SEL, RESERVED_PREFIX};

/// Observability of a net with no path to any (pseudo-)primary output.
pub const UNOBSERVABLE: u32 = u32::MAX;

/// Net names that belong to scan or instrumentation control and are never
/// candidates.
pub const CONTROL_NETS: &[&str] = &["scan_in", "scan_enable", "scan_out", "sel", "sel_cc"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoapTable {
    pub cc0: Vec<u32>,
    pub cc1: Vec<u32>,
    /// [`UNOBSERVABLE`] marks nets that reach no output.
    pub co: Vec<u32>,
}

impl ScoapTable {
    pub fn cc(&self, net: NetId, value: bool) -> u32 {
        if value {
            self.cc1[net.idx()]
        } else {
            self.cc0[net.idx()]
        }
    }

    pub fn co(&self, net: NetId) -> u32 {
        self.co[net.idx()]
    }

    /// CSV dump: `net_name,cc0,cc1,co` with `inf` for unobservable nets.
    pub fn to_csv(&self, n: &Netlist) -> String {
        let mut s = String::from("net_name,cc0,cc1,co\n");
        for id in n.net_ids() {
            let co = match self.co[id.idx()] {
                UNOBSERVABLE => "inf".to_string(),
                v => v.to_string(),
            };
            let _ = writeln!(s, "{},{},{},{}", n.net_name(id), self.cc0[id.idx()], self.cc1[id.idx()], co);
        }
        s
    }
}

#[inline]
fn add(a: u32, b: u32) -> u32 {
    a.saturating_add(b)
}

/// Minimum cost of driving the inputs to an assignment with the given
/// parity: returns `(cost_even, cost_odd)`.
fn parity_costs(cc0: &[u32], cc1: &[u32]) -> (u32, u32) {
    let (mut even, mut odd) = (0u32, u32::MAX);
    for (&z, &o) in cc0.iter().zip(cc1) {
        let e = add(even, z).min(add(odd, o));
        let d = add(even, o).min(add(odd, z));
        even = e;
        odd = d;
    }
    (even, odd)
}

/// Controllability of one cell output from its input controllabilities.
pub fn gate_controllability(kind: CellKind, cc0: &[u32], cc1: &[u32]) -> (u32, u32) {
    let sum = |v: &[u32]| v.iter().fold(0u32, |a, &b| add(a, b));
    let min = |v: &[u32]| v.iter().copied().min().unwrap_or(u32::MAX);
    let (c0, c1) = match kind {
        CellKind::Buf | CellKind::Dff => (cc0[0], cc1[0]),
        CellKind::Not => (cc1[0], cc0[0]),
        CellKind::And => (min(cc0), sum(cc1)),
        CellKind::Nand => (sum(cc1), min(cc0)),
        CellKind::Or => (sum(cc0), min(cc1)),
        CellKind::Nor => (min(cc1), sum(cc0)),
        CellKind::Xor => parity_costs(cc0, cc1),
        CellKind::Xnor => {
            let (e, o) = parity_costs(cc0, cc1);
            (o, e)
        }
        CellKind::Mux2 | CellKind::Sdff => {
            (add(cc0[MUX_SEL], cc0[0]).min(add(cc1[MUX_SEL], cc0[1])), add(cc0[MUX_SEL], cc1[0]).min(add(cc1[MUX_SEL], cc1[1])))
        }
    };
    (add(c0, 1), add(c1, 1))
}

/// Observability of input pin `pin` given the output observability.
pub fn pin_observability(kind: CellKind, pin: usize, co_out: u32, cc0: &[u32], cc1: &[u32]) -> u32 {
    if co_out == UNOBSERVABLE {
        return UNOBSERVABLE;
    }
    let others = |f: &dyn Fn(usize) -> u32| (0..cc0.len()).filter(|&j| j != pin).fold(0u32, |a, j| add(a, f(j)));
    let side = match kind {
        CellKind::Buf | CellKind::Not => 0,
        CellKind::And | CellKind::Nand => others(&|j| cc1[j]),
        CellKind::Or | CellKind::Nor => others(&|j| cc0[j]),
        CellKind::Xor | CellKind::Xnor => others(&|j| cc0[j].min(cc1[j])),
        CellKind::Mux2 => match pin {
            0 => cc0[MUX_SEL],
            1 => cc1[MUX_SEL],
            _ => add(cc0[0], cc1[1]).min(add(cc1[0], cc0[1])),
        },
        CellKind::Dff | CellKind::Sdff => unreachable!("flip-flop pins are boundaries"),
    };
    add(add(co_out, side), 1)
}

/// Forward pass in topological order, then backward pass in reverse order.
pub fn compute_scoap(n: &Netlist, _g: &Hypergraph<'_>, t: &TopoOrder) -> ScoapTable {
    let nn = n.net_count();
    let mut cc0 = vec![1u32; nn];
    let mut cc1 = vec![1u32; nn];
    let mut ins0 = Vec::with_capacity(5);
    let mut ins1 = Vec::with_capacity(5);
    for &cid in t.order() {
        let c = n.cell(cid);
        ins0.clear();
        ins1.clear();
        ins0.extend(c.inputs.iter().map(|&i| cc0[i.idx()]));
        ins1.extend(c.inputs.iter().map(|&i| cc1[i.idx()]));
        let (z, o) = gate_controllability(c.kind, &ins0, &ins1);
        cc0[c.output.idx()] = z;
        cc1[c.output.idx()] = o;
    }

    let mut co = vec![UNOBSERVABLE; nn];
    for &o in n.outputs() {
        co[o.idx()] = 0;
    }
    for &ff in n.ffs() {
        co[n.cell(ff).inputs[FF_D].idx()] = 0;
    }
    for &cid in t.order().iter().rev() {
        let c = n.cell(cid);
        let co_out = co[c.output.idx()];
        ins0.clear();
        ins1.clear();
        ins0.extend(c.inputs.iter().map(|&i| cc0[i.idx()]));
        ins1.extend(c.inputs.iter().map(|&i| cc1[i.idx()]));
        for (pin, &i) in c.inputs.iter().enumerate() {
            let v = pin_observability(c.kind, pin, co_out, &ins0, &ins1);
            if v < co[i.idx()] {
                co[i.idx()] = v;
            }
        }
    }
    ScoapTable { cc0, cc1, co }
}

/// How many candidates each list keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// The `k` hardest nets.
    TopK(usize),
    /// Nets at or above this percentile (0..=100, nearest rank) of the
    /// eligible values.
    Percentile(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub obs: Threshold,
    pub cc: Threshold,
}

impl CandidateConfig {
    /// `max(#SFF × nets_per_ff, 64)` per list, with `obs_per_ff` nets per
    /// flip-flop for observation and one for each controllability list.
    pub fn auto(ff_count: usize, obs_per_ff: usize) -> Self {
        CandidateConfig { obs: Threshold::TopK((ff_count * obs_per_ff).max(64)), cc: Threshold::TopK(ff_count.max(64)) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateLists {
    /// Descending CC0.
    pub hard_cc0: Vec<NetId>,
    /// Descending CC1.
    pub hard_cc1: Vec<NetId>,
    /// Descending CO, unobservable nets first.
    pub hard_obs: Vec<NetId>,
}

impl CandidateLists {
    pub fn to_json(&self, n: &Netlist) -> serde_json::Value {
        let names = |v: &[NetId]| v.iter().map(|&x| n.net_name(x).to_string()).collect::<Vec<_>>();
        serde_json::json!({
            "hard_cc0": names(&self.hard_cc0),
            "hard_cc1": names(&self.hard_cc1),
            "hard_obs": names(&self.hard_obs),
        })
    }
}

/// Nets that may be routed to instrumentation logic: not reserved, not a
/// scan/instrumentation control net, and not a scan-only net.
pub fn is_eligible(n: &Netlist, net: NetId) -> bool {
    let x = n.net(net);
    if x.name.starts_with(RESERVED_PREFIX) || CONTROL_NETS.contains(&x.name.as_str()) {
        return false;
    }
    // Nets whose every sink is a scan pin only serve the scan path.
    let scan_only = !x.fanout.is_empty()
        && !n.outputs().contains(&net)
        && x.fanout.iter().all(|p| {
            let c = n.cell(p.cell);
            c.kind == CellKind::Sdff && p.pin as usize != FF_D
        });
    if scan_only && x.driver == Driver::Input {
        return false;
    }
    true
}

fn rank(values: &[u32], eligible: &[NetId], skip: u32, th: Threshold) -> Vec<NetId> {
    let mut v: Vec<NetId> = eligible.iter().copied().filter(|&x| values[x.idx()] != skip).collect();
    v.sort_by(|&a, &b| values[b.idx()].cmp(&values[a.idx()]).then(a.cmp(&b)));
    let keep = match th {
        Threshold::TopK(k) => k.min(v.len()),
        Threshold::Percentile(p) => {
            if v.is_empty() {
                0
            } else {
                let mut asc: Vec<u32> = v.iter().map(|x| values[x.idx()]).collect();
                asc.sort_unstable();
                let p = p.clamp(0.0, 100.0);
                let rank = ((p / 100.0) * asc.len() as f64).ceil().max(1.0) as usize;
                let cut = asc[rank - 1];
                v.iter().take_while(|x| values[x.idx()] >= cut).count()
            }
        }
    };
    v.truncate(keep);
    v
}

/// Build the three ranked candidate lists. Ties break by ascending net id.
///
/// Nets that are already trivially testable are left out: controllability
/// 1 (ports and flip-flop outputs) for the CC lists and observability 0
/// for the observation list.
pub fn rank_candidates(n: &Netlist, s: &ScoapTable, cfg: &CandidateConfig) -> CandidateLists {
    let eligible: Vec<NetId> = n.net_ids().filter(|&x| is_eligible(n, x)).collect();
    CandidateLists {
        hard_cc0: rank(&s.cc0, &eligible, 1, cfg.cc),
        hard_cc1: rank(&s.cc1, &eligible, 1, cfg.cc),
        hard_obs: rank(&s.co, &eligible, 0, cfg.obs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    fn scoap(src: &str) -> (Netlist, ScoapTable) {
        let n = parse_bench(src).unwrap();
        let g = Hypergraph::new(&n);
        let t = g.topo_sort().unwrap();
        let s = compute_scoap(&n, &g, &t);
        (n, s)
    }

    #[test]
    fn and_gate_hand_values() {
        let (n, s) = scoap("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = AND(a, b)\n");
        let id = |x: &str| n.find_net(x).unwrap();
        assert_eq!(s.cc1[id("z").idx()], 3);
        assert_eq!(s.cc0[id("z").idx()], 2);
        assert_eq!(s.co(id("z")), 0);
        assert_eq!(s.co(id("a")), 2);
        assert_eq!(s.co(id("b")), 2);
        assert_eq!(s.cc0[id("a").idx()], 1);
        assert_eq!(s.cc1[id("a").idx()], 1);
    }

    #[test]
    fn xor_and_mux_rules() {
        let (n, s) =
            scoap("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(x)\nOUTPUT(m)\nab = AND(a, b)\nx = XOR(ab, c)\nm = MUX2(a, ab, c)\n");
        let id = |x: &str| n.find_net(x).unwrap().idx();
        // ab: cc0 = 2, cc1 = 3
        assert_eq!((s.cc0[id("ab")], s.cc1[id("ab")]), (2, 3));
        // x = ab ^ c: cc1 = min(3+1, 2+1)+1 = 4; cc0 = min(2+1, 3+1)+1 = 4
        assert_eq!((s.cc0[id("x")], s.cc1[id("x")]), (4, 4));
        // m = c ? ab : a: cc1 = min(cc0c+cc1a, cc1c+cc1ab)+1 = min(2, 4)+1 = 3
        assert_eq!(s.cc1[id("m")], 3);
        // cc0 = min(1+1, 1+2)+1 = 3
        assert_eq!(s.cc0[id("m")], 3);
        // select observability: 0 + min(cc0a+cc1ab, cc1a+cc0ab)+1 = min(4, 3)+1 = 4
        // via XOR: 0 + min(cc0ab, cc1ab) + 1 = 3
        assert_eq!(s.co[id("c")], 3);
    }

    #[test]
    fn unobservable_net_ranks_first() {
        let (n, s) = scoap("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = AND(a, b)\nd = NOT(a)\n");
        let d = n.find_net("d").unwrap();
        assert_eq!(s.co(d), UNOBSERVABLE);
        let l = rank_candidates(&n, &s, &CandidateConfig::auto(0, 1));
        assert_eq!(l.hard_obs[0], d);
    }

    #[test]
    fn obs_list_is_sorted_and_tie_broken() {
        let (n, s) = scoap("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z)\nx = NOT(a)\ny = NOT(x)\nz = AND(y, b, c)\n");
        let l = rank_candidates(&n, &s, &CandidateConfig::auto(0, 1));
        let cos: Vec<u32> = l.hard_obs.iter().map(|&x| s.co(x)).collect();
        assert!(cos.windows(2).all(|w| w[0] >= w[1]), "{cos:?}");
        for w in l.hard_obs.windows(2) {
            if s.co(w[0]) == s.co(w[1]) {
                assert!(w[0] < w[1]);
            }
        }
        let empty = rank_candidates(&n, &s, &CandidateConfig { obs: Threshold::TopK(0), cc: Threshold::TopK(0) });
        assert!(empty.hard_obs.is_empty() && empty.hard_cc0.is_empty() && empty.hard_cc1.is_empty());
    }

    #[test]
    fn percentile_threshold() {
        let (n, s) = scoap("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z)\nx = NOT(a)\ny = NOT(x)\nz = AND(y, b, c)\n");
        let all = rank_candidates(&n, &s, &CandidateConfig { obs: Threshold::Percentile(0.0), cc: Threshold::Percentile(0.0) });
        let top =
            rank_candidates(&n, &s, &CandidateConfig { obs: Threshold::Percentile(100.0), cc: Threshold::Percentile(100.0) });
        assert!(top.hard_obs.len() <= all.hard_obs.len());
        assert!(top.hard_obs.iter().all(|&x| s.co(x) == s.co(all.hard_obs[0])));
    }

    #[test]
    fn ff_boundaries() {
        let (n, s) = scoap("INPUT(a)\nOUTPUT(z)\nq = DFF(d)\nd = AND(a, q)\nz = NOT(q)\n");
        let q = n.find_net("q").unwrap();
        let d = n.find_net("d").unwrap();
        assert_eq!((s.cc0[q.idx()], s.cc1[q.idx()]), (1, 1));
        assert_eq!(s.co(d), 0);
        assert!(s.to_csv(&n).starts_with("net_name,cc0,cc1,co\n"));
    }
}
