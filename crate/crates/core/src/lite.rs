// SPDX-License-Identifier: Apache-2.0
//! Scan flip-flop instrumentation.
//!
//! Each selected scan flip-flop gets an observation structure on its D pin
//! (an XOR tree over hard-to-observe nets feeding a 2:1 MUX selected by the
//! shared `sel` input) and, for the `*ObsCc` variants, a control structure
//! on its Q pin (a 2:1 MUX choosing between Q and a hard-to-control net,
//! selected by the shared `sel_cc` input). With both selects at 0 the
//! instrumented netlist computes exactly what the scanned netlist did.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faultsim::{check_equivalence, CompiledCircuit, EquivError, Verdict};
use crate::graph::Hypergraph;
use crate::netlist::{CellId, CellKind, NetId, Netlist, NetlistError, FF_D, SDFF_SE, SDFF_SI};
use crate::scan::{extract_full_scan, insert_scan, ScanChain, ScanError, SCAN_OUT};
use crate::scoap::{compute_scoap, rank_candidates, CandidateConfig, CandidateLists, ScoapTable};

pub const SEL: &str = "sel";
pub const SEL_CC: &str = "sel_cc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// XOR of `k` observed nets into the D-side MUX.
    #[serde(rename = "c1obs")]
    Config1Obs,
    /// XOR of the original D and `k − 1` observed nets.
    #[serde(rename = "c2obs")]
    Config2Obs,
    #[serde(rename = "c1obscc")]
    Config1ObsCc,
    #[serde(rename = "c2obscc")]
    Config2ObsCc,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Config1Obs, Variant::Config2Obs, Variant::Config1ObsCc, Variant::Config2ObsCc];

    pub fn has_cc(self) -> bool {
        matches!(self, Variant::Config1ObsCc | Variant::Config2ObsCc)
    }

    /// The original D is one XOR leg.
    pub fn xors_d(self) -> bool {
        matches!(self, Variant::Config2Obs | Variant::Config2ObsCc)
    }

    /// Observed nets needed per flip-flop for XOR fan-in `k`.
    pub fn obs_per_ff(self, k: usize) -> usize {
        if self.xors_d() {
            k - 1
        } else {
            k
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Variant::Config1Obs => "c1obs",
            Variant::Config2Obs => "c2obs",
            Variant::Config1ObsCc => "c1obscc",
            Variant::Config2ObsCc => "c2obscc",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.short_name() == s)
            .ok_or_else(|| format!("unknown configuration `{s}` (expected c1obs, c2obs, c1obscc, c2obscc)"))
    }
}

/// Which scan flip-flops are considered, in chain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FfCoverage {
    All,
    /// The first `ceil(f × L)` flip-flops of the chain.
    Fraction(f64),
    /// Instance names.
    List(Vec<String>),
}

/// How independence of the XOR legs of one flip-flop is established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConflictMode {
    /// Pairwise-disjoint input supports.
    ConeDisjoint,
    /// Every value combination of the legs shows up under random
    /// simulation of the full-scan model.
    RandomProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiteConfig {
    pub variant: Variant,
    /// XOR fan-in, 2..=5.
    pub xor_k: usize,
    pub ff_coverage: FfCoverage,
    /// Candidate pool sizes; `None` derives them from the chain length.
    pub candidates: Option<CandidateConfig>,
    pub conflict: ConflictMode,
    /// Config2 with `sel` tied to 1 in test application. The
    /// normal-mode equivalence gate does not apply.
    pub const_sel: bool,
    /// Run the normal-mode equivalence gate after insertion.
    pub verify: bool,
    pub seed: u64,
}

impl LiteConfig {
    pub fn new(variant: Variant, xor_k: usize) -> Self {
        LiteConfig {
            variant,
            xor_k,
            ff_coverage: FfCoverage::All,
            candidates: None,
            conflict: ConflictMode::ConeDisjoint,
            const_sel: false,
            verify: true,
            seed: 1,
        }
    }

    /// Inputs held constant while applying tests in this configuration.
    pub fn test_bindings(&self) -> Vec<(&'static str, bool)> {
        if self.const_sel {
            vec![(SEL, true)]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// Taken from the hard-to-set-to-0 list.
    #[serde(rename = "cc0")]
    Zero,
    #[serde(rename = "cc1")]
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    #[serde(rename = "pool exhausted")]
    PoolExhausted,
    #[serde(rename = "topo fail")]
    TopoFail,
    #[serde(rename = "conflict fail")]
    ConflictFail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FfRecord {
    pub ff: CellId,
    pub obs: Vec<NetId>,
    pub cc: Option<(NetId, Polarity)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertionPlan {
    pub variant: Variant,
    pub xor_k: usize,
    pub records: Vec<FfRecord>,
    pub skipped: Vec<(CellId, SkipReason)>,
}

/// Serialized form of one flip-flop's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub ff: String,
    pub instrumented: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cc_polarity: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<SkipReason>,
}

impl InsertionPlan {
    pub fn empty(variant: Variant, xor_k: usize) -> Self {
        InsertionPlan { variant, xor_k, records: Vec::new(), skipped: Vec::new() }
    }

    /// Every net assigned by the plan, in record order.
    pub fn assigned_nets(&self) -> Vec<NetId> {
        let mut v = Vec::new();
        for r in &self.records {
            v.extend(&r.obs);
            v.extend(r.cc.map(|c| c.0));
        }
        v
    }

    /// Records followed by skips, flip-flops named.
    pub fn entries(&self, n: &Netlist) -> Vec<PlanEntry> {
        let name = |x: NetId| n.net_name(x).to_string();
        let mut v: Vec<PlanEntry> = self
            .records
            .iter()
            .map(|r| PlanEntry {
                ff: n.cell(r.ff).name.clone(),
                instrumented: true,
                obs: r.obs.iter().map(|&x| name(x)).collect(),
                cc: r.cc.map(|c| name(c.0)),
                cc_polarity: r.cc.map(|c| c.1),
                reason: None,
            })
            .collect();
        v.extend(self.skipped.iter().map(|&(ff, reason)| PlanEntry {
            ff: n.cell(ff).name.clone(),
            instrumented: false,
            obs: Vec::new(),
            cc: None,
            cc_polarity: None,
            reason: Some(reason),
        }));
        v
    }

    pub fn to_json(&self, n: &Netlist) -> String {
        serde_json::to_string_pretty(&self.entries(n)).expect("plan serializes")
    }

    /// Rebuild a plan from its serialized entries.
    pub fn from_entries(n: &Netlist, variant: Variant, xor_k: usize, entries: &[PlanEntry]) -> Result<Self, LiteError> {
        let cell = |s: &str| n.find_cell(s).ok_or_else(|| LiteError::PlanMismatch(format!("no cell `{s}`")));
        let net = |s: &str| n.find_net(s).ok_or_else(|| LiteError::PlanMismatch(format!("no net `{s}`")));
        let mut p = InsertionPlan::empty(variant, xor_k);
        for e in entries {
            let ff = cell(&e.ff)?;
            if e.instrumented {
                let obs = e.obs.iter().map(|s| net(s)).collect::<Result<_, _>>()?;
                let cc = match (&e.cc, e.cc_polarity) {
                    (Some(c), Some(pol)) => Some((net(c)?, pol)),
                    (None, None) => None,
                    _ => return Err(LiteError::PlanMismatch(format!("`{}`: cc net without polarity", e.ff))),
                };
                p.records.push(FfRecord { ff, obs, cc });
            } else {
                p.skipped.push((ff, e.reason.unwrap_or(SkipReason::PoolExhausted)));
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Error)]
pub enum LiteError {
    #[error("XOR fan-in {0} outside 2..=5")]
    BadFanIn(usize),
    #[error("input already contains reserved `lite_` names; refusing to instrument twice")]
    AlreadyInstrumented,
    #[error("`{0}` already exists in the netlist")]
    NameClash(String),
    #[error("plan does not match netlist: {0}")]
    PlanMismatch(String),
    #[error("instrumented netlist is not equivalent in normal mode: {0:?}")]
    NotEquivalent(Verdict),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Equiv(#[from] EquivError),
}

/// Where new edges would enter the flip-flop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertionPoint {
    /// Observation logic feeding the D pin.
    D(CellId),
    /// Control MUX on the Q pin.
    Q(CellId),
}

/// Whether connecting `nets` at `point` keeps the combinational logic
/// acyclic, given control insertions already planned (`planned_cc` maps
/// each planned control net to the Q net it will stand in for).
///
/// Edges into a D pin end at a flip-flop, so they never close a loop. A
/// control net closes one exactly when it lies in the combinational fanout
/// of the Q it replaces, including paths through planned control MUXes.
pub fn check_topo_order(
    g: &Hypergraph<'_>,
    planned_cc: &HashMap<NetId, Vec<NetId>>,
    nets: &[NetId],
    point: InsertionPoint,
) -> bool {
    let n = g.netlist();
    match point {
        InsertionPoint::D(_) => true,
        InsertionPoint::Q(ff) => {
            let q = n.cell(ff).output;
            let mut seen = vec![false; n.net_count()];
            g.mark_fanout(q, &mut seen, &|x| planned_cc.get(&x).map_or(&[][..], |v| v.as_slice()));
            nets.iter().all(|&x| !seen[x.idx()])
        }
    }
}

/// Supports as bitsets over the source nets (PIs and flip-flop outputs).
struct SupportCache<'g, 'n> {
    g: &'g Hypergraph<'n>,
    src_index: HashMap<NetId, usize>,
    words: usize,
    cache: HashMap<NetId, Vec<u64>>,
}

impl<'g, 'n> SupportCache<'g, 'n> {
    fn new(g: &'g Hypergraph<'n>) -> Self {
        let n = g.netlist();
        let mut src_index = HashMap::new();
        for &i in n.inputs() {
            let k = src_index.len();
            src_index.insert(i, k);
        }
        for &f in n.ffs() {
            let k = src_index.len();
            src_index.entry(n.cell(f).output).or_insert(k);
        }
        let words = src_index.len().div_ceil(64).max(1);
        SupportCache { g, src_index, words, cache: HashMap::new() }
    }

    fn get(&mut self, net: NetId) -> &Vec<u64> {
        if !self.cache.contains_key(&net) {
            let mut bits = vec![0u64; self.words];
            for s in self.g.support(net).expect("net exists") {
                if let Some(&k) = self.src_index.get(&s) {
                    bits[k / 64] |= 1 << (k % 64);
                }
            }
            self.cache.insert(net, bits);
        }
        &self.cache[&net]
    }
}

/// True iff the input supports of `nets` are pairwise disjoint, so any
/// combination of their values can be set independently.
pub fn check_conflict_pi(g: &Hypergraph<'_>, nets: &[NetId]) -> bool {
    let mut cache = SupportCache::new(g);
    disjoint(&mut cache, nets)
}

fn disjoint(cache: &mut SupportCache<'_, '_>, nets: &[NetId]) -> bool {
    let mut acc = vec![0u64; cache.words];
    for &x in nets {
        let s = cache.get(x);
        if acc.iter().zip(s).any(|(a, b)| a & b != 0) {
            return false;
        }
        for (a, b) in acc.iter_mut().zip(s) {
            *a |= b;
        }
    }
    true
}

/// Random-simulation independence probe over the full-scan model.
struct Probe {
    to_model: Vec<Option<NetId>>,
    values: Vec<Vec<u64>>,
}

const PROBE_BLOCKS: usize = 16;

impl Probe {
    fn new(n: &Netlist, seed: u64) -> Result<Self, LiteError> {
        let m = extract_full_scan(n)?;
        let c = CompiledCircuit::new(&m.netlist);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut values = Vec::with_capacity(PROBE_BLOCKS);
        for _ in 0..PROBE_BLOCKS {
            let ins: Vec<u64> = (0..c.inputs.len()).map(|_| rng.next_u64()).collect();
            let mut v = Vec::new();
            c.eval_block(&ins, &mut v);
            values.push(v);
        }
        Ok(Probe { to_model: m.to_model, values })
    }

    /// Every one of the `2^m` value combinations of `nets` occurs.
    fn independent(&self, nets: &[NetId]) -> bool {
        let ids: Option<Vec<NetId>> = nets.iter().map(|x| self.to_model[x.idx()]).collect();
        let Some(ids) = ids else { return false };
        let mut seen = vec![false; 1 << ids.len()];
        for v in &self.values {
            for bit in 0..64 {
                let combo = ids.iter().enumerate().fold(0usize, |a, (i, x)| a | ((v[x.idx()] >> bit & 1) as usize) << i);
                seen[combo] = true;
            }
        }
        seen.iter().all(|&s| s)
    }
}

/// Candidate lists and SCOAP for a scanned netlist.
pub fn analyze(n: &Netlist, cfg: &LiteConfig) -> Result<(ScoapTable, CandidateLists), LiteError> {
    let g = Hypergraph::new(n);
    let t = g.topo_sort().map_err(|e| NetlistError::CombinationalCycle(e.net_names(n)))?;
    let s = compute_scoap(n, &g, &t);
    let cc = cfg.candidates.unwrap_or_else(|| CandidateConfig::auto(n.ffs().len(), cfg.xor_k));
    let lists = rank_candidates(n, &s, &cc);
    Ok((s, lists))
}

/// Flip-flops considered for instrumentation, in chain order.
fn targets(n: &Netlist, chain: &ScanChain, cov: &FfCoverage) -> Result<Vec<CellId>, LiteError> {
    Ok(match cov {
        FfCoverage::All => chain.order.clone(),
        FfCoverage::Fraction(f) => {
            let k = (f.clamp(0.0, 1.0) * chain.len() as f64).ceil() as usize;
            chain.order[..k].to_vec()
        }
        FfCoverage::List(names) => {
            let want: HashSet<CellId> = names
                .iter()
                .map(|s| {
                    n.find_cell(s)
                        .filter(|c| chain.order.contains(c))
                        .ok_or_else(|| LiteError::PlanMismatch(format!("`{s}` is not a scan flip-flop")))
                })
                .collect::<Result<_, _>>()?;
            chain.order.iter().copied().filter(|c| want.contains(c)).collect()
        }
    })
}

/// Greedily pick the hardest unassigned observation nets for `ff`.
///
/// Returns the nets or the reason the flip-flop cannot be served.
pub fn select_nets_obs(
    n: &Netlist,
    lists: &CandidateLists,
    used: &HashSet<NetId>,
    ff: CellId,
    cfg: &LiteConfig,
    independent: &mut dyn FnMut(&[NetId]) -> bool,
) -> Result<Vec<NetId>, SkipReason> {
    let need = cfg.variant.obs_per_ff(cfg.xor_k);
    let d = n.cell(ff).inputs[FF_D];
    let check_conflict = !cfg.variant.xors_d() && need >= 2;
    let mut picked = Vec::with_capacity(need);
    let mut conflicted = false;
    for &x in &lists.hard_obs {
        if picked.len() == need {
            break;
        }
        if used.contains(&x) || x == d || picked.contains(&x) {
            continue;
        }
        if check_conflict && !picked.is_empty() {
            let mut trial = picked.clone();
            trial.push(x);
            if !independent(&trial) {
                conflicted = true;
                continue;
            }
        }
        picked.push(x);
    }
    if picked.len() == need {
        Ok(picked)
    } else if conflicted {
        Err(SkipReason::ConflictFail)
    } else {
        Err(SkipReason::PoolExhausted)
    }
}

/// Build the insertion plan for a scanned netlist.
pub fn plan_insertion(
    n: &Netlist,
    chain: &ScanChain,
    lists: &CandidateLists,
    cfg: &LiteConfig,
) -> Result<InsertionPlan, LiteError> {
    if !(2..=5).contains(&cfg.xor_k) {
        return Err(LiteError::BadFanIn(cfg.xor_k));
    }
    let g = Hypergraph::new(n);
    let mut supports = SupportCache::new(&g);
    let probe = match cfg.conflict {
        ConflictMode::RandomProbe => Some(Probe::new(n, cfg.seed)?),
        ConflictMode::ConeDisjoint => None,
    };
    let mut independent = |nets: &[NetId]| match &probe {
        Some(p) => p.independent(nets),
        None => disjoint(&mut supports, nets),
    };

    let mut plan = InsertionPlan::empty(cfg.variant, cfg.xor_k);
    let mut used: HashSet<NetId> = HashSet::new();
    let mut planned_cc: HashMap<NetId, Vec<NetId>> = HashMap::new();
    for ff in targets(n, chain, &cfg.ff_coverage)? {
        let obs = match select_nets_obs(n, lists, &used, ff, cfg, &mut independent) {
            Ok(v) => v,
            Err(r) => {
                plan.skipped.push((ff, r));
                continue;
            }
        };
        let mut cc = None;
        if cfg.variant.has_cc() {
            let pol = if plan.records.len().is_multiple_of(2) { Polarity::Zero } else { Polarity::One };
            let list = match pol {
                Polarity::Zero => &lists.hard_cc0,
                Polarity::One => &lists.hard_cc1,
            };
            let mut topo_failed = false;
            for &x in list {
                if used.contains(&x) || obs.contains(&x) {
                    continue;
                }
                if !check_topo_order(&g, &planned_cc, &[x], InsertionPoint::Q(ff)) {
                    topo_failed = true;
                    continue;
                }
                cc = Some((x, pol));
                break;
            }
            if cc.is_none() {
                let reason = if topo_failed { SkipReason::TopoFail } else { SkipReason::PoolExhausted };
                plan.skipped.push((ff, reason));
                continue;
            }
        }
        debug_assert!(check_topo_order(&g, &planned_cc, &obs, InsertionPoint::D(ff)));
        used.extend(&obs);
        if let Some((x, _)) = cc {
            used.insert(x);
            planned_cc.entry(x).or_default().push(n.cell(ff).output);
        }
        plan.records.push(FfRecord { ff, obs, cc });
    }
    Ok(plan)
}

/// Apply `plan` to a scanned netlist. An empty plan returns the netlist
/// unchanged.
pub fn insert_lite(n: &Netlist, plan: &InsertionPlan) -> Result<Netlist, LiteError> {
    let mut plan = plan.clone();
    loop {
        let out = build_instrumented(n, &plan)?;
        match Hypergraph::new(&out).topo_sort() {
            Ok(_) => return Ok(out),
            Err(e) => {
                // Roll back the control insertion on the cycle, or the
                // latest one if none can be identified.
                let cyc: HashSet<String> = e.net_names(&out).into_iter().collect();
                let pos = plan
                    .records
                    .iter()
                    .position(|r| r.cc.is_some() && cyc.contains(&format!("{}_y", muxq_name(n, r.ff))))
                    .or_else(|| plan.records.iter().rposition(|r| r.cc.is_some()))
                    .ok_or_else(|| NetlistError::CombinationalCycle(e.net_names(&out)))?;
                let r = plan.records.remove(pos);
                log::warn!("rolled back `{}`: insertion closes a loop", n.cell(r.ff).name);
                plan.skipped.push((r.ff, SkipReason::TopoFail));
            }
        }
    }
}

fn muxq_name(n: &Netlist, ff: CellId) -> String {
    format!("lite_muxq_{}", n.cell(ff).name)
}

fn build_instrumented(n: &Netlist, plan: &InsertionPlan) -> Result<Netlist, LiteError> {
    let mut out = n.clone();
    if plan.records.is_empty() {
        return Ok(out);
    }
    let need = plan.variant.obs_per_ff(plan.xor_k);
    let mut seen = HashSet::new();
    for r in &plan.records {
        if out.cell(r.ff).kind != CellKind::Sdff {
            return Err(LiteError::PlanMismatch(format!("`{}` is not a scan flip-flop", out.cell(r.ff).name)));
        }
        if r.obs.len() != need || r.cc.is_some() != plan.variant.has_cc() {
            return Err(LiteError::PlanMismatch(format!("record for `{}` has the wrong shape", out.cell(r.ff).name)));
        }
        for x in r.obs.iter().chain(r.cc.as_ref().map(|c| &c.0)) {
            if !seen.insert(*x) {
                return Err(LiteError::PlanMismatch(format!("net `{}` assigned twice", out.net_name(*x))));
            }
        }
    }
    for name in [SEL, SEL_CC] {
        if out.find_net(name).is_some() {
            return Err(LiteError::NameClash(name.into()));
        }
    }
    let sel = out.add_input(SEL)?;
    let sel_cc = if plan.variant.has_cc() { Some(out.add_input(SEL_CC)?) } else { None };

    for r in &plan.records {
        let ffname = out.cell(r.ff).name.clone();
        let d = out.cell(r.ff).inputs[FF_D];
        let mut legs: Vec<NetId> = Vec::with_capacity(plan.xor_k);
        if plan.variant.xors_d() {
            legs.push(d);
        }
        legs.extend(&r.obs);
        let root = xor_tree(&mut out, &ffname, legs)?;
        let mname = format!("lite_muxd_{ffname}");
        let (_, m) = out.add_cell(CellKind::Mux2, &mname, vec![d, root, sel], &format!("{mname}_y"))?;
        out.set_cell_input(r.ff, FF_D, m);
    }
    if let Some(sel_cc) = sel_cc {
        for r in &plan.records {
            let (cc, _) = r.cc.expect("shape checked");
            let q = out.cell(r.ff).output;
            let sinks: Vec<_> = out
                .net(q)
                .fanout
                .iter()
                .copied()
                .filter(|p| {
                    let c = out.cell(p.cell);
                    let scan_pin = c.kind == CellKind::Sdff && (p.pin as usize == SDFF_SI || p.pin as usize == SDFF_SE);
                    let scan_out = c.kind == CellKind::Buf && c.name == SCAN_OUT;
                    !scan_pin && !scan_out
                })
                .collect();
            let name = muxq_name(&out, r.ff);
            let (_, m) = out.add_cell(CellKind::Mux2, &name, vec![q, cc, sel_cc], &format!("{name}_y"))?;
            for p in sinks {
                out.set_cell_input(p.cell, p.pin as usize, m);
            }
        }
    }
    Ok(out)
}

/// Balanced tree of XOR2 cells over `legs`; returns the root net. The
/// root is `lite_xor_<ff>`, inner cells `lite_xor_<ff>_<i>`.
fn xor_tree(out: &mut Netlist, ff: &str, mut legs: Vec<NetId>) -> Result<NetId, LiteError> {
    let total = legs.len() - 1;
    let mut made = 0;
    while legs.len() > 1 {
        let mut next = Vec::with_capacity(legs.len().div_ceil(2));
        for pair in legs.chunks(2) {
            if pair.len() == 1 {
                next.push(pair[0]);
                continue;
            }
            made += 1;
            let name = if made == total { format!("lite_xor_{ff}") } else { format!("lite_xor_{ff}_{made}") };
            let (_, y) = out.add_cell(CellKind::Xor, &name, vec![pair[0], pair[1]], &format!("{name}_y"))?;
            next.push(y);
        }
        legs = next;
    }
    Ok(legs[0])
}

/// Outcome of the full flow.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Scan-stitched input.
    pub baseline: Netlist,
    pub chain: ScanChain,
    pub scoap: ScoapTable,
    pub lists: CandidateLists,
    pub plan: InsertionPlan,
    pub netlist: Netlist,
    pub verdict: Option<Verdict>,
}

/// Stitch (if needed), analyze, plan, insert, and check normal-mode
/// equivalence against the stitched input.
pub fn run_pipeline(input: &Netlist, cfg: &LiteConfig) -> Result<PipelineOutput, LiteError> {
    if input.has_reserved_names() {
        return Err(LiteError::AlreadyInstrumented);
    }
    let (baseline, chain) = stitched(input)?;
    let (scoap, lists) = analyze(&baseline, cfg)?;
    let plan = plan_insertion(&baseline, &chain, &lists, cfg)?;
    let netlist = insert_lite(&baseline, &plan)?;
    netlist.validate()?;
    // Rolled-back records are reflected by re-deriving the applied plan.
    let plan = applied_plan(&baseline, &netlist, plan);
    let verdict = if cfg.verify && !cfg.const_sel {
        let mut binds = vec![(SEL, false)];
        if cfg.variant.has_cc() {
            binds.push((SEL_CC, false));
        }
        let v = check_equivalence(&baseline, &netlist, &binds)?;
        if matches!(v, Verdict::Counterexample { .. }) {
            return Err(LiteError::NotEquivalent(v));
        }
        Some(v)
    } else {
        None
    };
    Ok(PipelineOutput { baseline, chain, scoap, lists, plan, netlist, verdict })
}

/// The scan-stitched form of `n` and its chain.
pub fn stitched(n: &Netlist) -> Result<(Netlist, ScanChain), LiteError> {
    if n.ffs().iter().all(|&f| n.cell(f).kind == CellKind::Sdff) && !n.ffs().is_empty() {
        let chain = ScanChain::recover(n)?;
        let mut b = n.clone();
        b.set_ff_order(chain.order.clone());
        Ok((b, chain))
    } else {
        Ok(insert_scan(n)?)
    }
}

fn applied_plan(base: &Netlist, out: &Netlist, mut plan: InsertionPlan) -> InsertionPlan {
    let (kept, dropped): (Vec<_>, Vec<_>) =
        plan.records.into_iter().partition(|r| out.find_cell(&format!("lite_muxd_{}", base.cell(r.ff).name)).is_some());
    plan.records = kept;
    plan.skipped.extend(dropped.into_iter().map(|r| (r.ff, SkipReason::TopoFail)));
    plan
}

/// Cells and inputs added by the plan: `(xor2, mux2, new PIs)`.
pub fn expected_delta(plan: &InsertionPlan) -> (usize, usize, usize) {
    let r = plan.records.len();
    if r == 0 {
        return (0, 0, 0);
    }
    let xors = r * (plan.xor_k - 1);
    let cc = plan.variant.has_cc();
    (xors, r * if cc { 2 } else { 1 }, if cc { 2 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_bench, write_verilog};

    const ONE_FF: &str = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z)\nq = DFF(d)\nd = AND(a, b)\nw = OR(b, c)\nz = XOR(q, w)\n";

    fn lists(hard_obs: Vec<NetId>, cc0: Vec<NetId>, cc1: Vec<NetId>) -> CandidateLists {
        CandidateLists { hard_cc0: cc0, hard_cc1: cc1, hard_obs }
    }

    #[test]
    fn exact_pool_assigns_all_then_exhausts() {
        let n = parse_bench(
            "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z)\nq = DFF(z)\nr = DFF(q)\nx = NOT(a)\ny = NOT(b)\nz = AND(x, y, c, r)\n",
        )
        .unwrap();
        let (s, chain) = insert_scan(&n).unwrap();
        let x = s.find_net("x").unwrap();
        let y = s.find_net("y").unwrap();
        let cfg = LiteConfig::new(Variant::Config1Obs, 2);
        let plan = plan_insertion(&s, &chain, &lists(vec![x, y], vec![], vec![]), &cfg).unwrap();
        assert_eq!(plan.records.len(), 1);
        assert_eq!(plan.records[0].obs, [x, y]);
        assert_eq!(plan.skipped, [(chain.order[1], SkipReason::PoolExhausted)]);
    }

    #[test]
    fn conflict_checks() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(z1)\nOUTPUT(z2)\nOUTPUT(na)\nz1 = AND(a, b)\nz2 = OR(b, c)\nna = NOT(z1)\nu = BUFF(c)\n").unwrap();
        let g = Hypergraph::new(&n);
        let id = |s| n.find_net(s).unwrap();
        assert!(!check_conflict_pi(&g, &[id("z1"), id("z2")]));
        assert!(!check_conflict_pi(&g, &[id("z1"), id("na")]));
        assert!(check_conflict_pi(&g, &[id("z1"), id("u")]));
    }

    #[test]
    fn obs_topo_always_passes_cc_inside_fanout_fails() {
        let n = parse_bench(ONE_FF).unwrap();
        let (s, _) = insert_scan(&n).unwrap();
        let g = Hypergraph::new(&s);
        let ff = s.ffs()[0];
        let z = s.find_net("z").unwrap();
        let w = s.find_net("w").unwrap();
        let none = HashMap::new();
        assert!(check_topo_order(&g, &none, &[z], InsertionPoint::D(ff)));
        assert!(!check_topo_order(&g, &none, &[z], InsertionPoint::Q(ff)));
        assert!(check_topo_order(&g, &none, &[w], InsertionPoint::Q(ff)));
    }

    #[test]
    fn empty_plan_is_identity() {
        let n = parse_bench(ONE_FF).unwrap();
        let (s, _) = insert_scan(&n).unwrap();
        let cfg = LiteConfig::new(Variant::Config1ObsCc, 2);
        let out = insert_lite(&s, &InsertionPlan::empty(cfg.variant, 2)).unwrap();
        assert_eq!(write_verilog(&out), write_verilog(&s));
    }

    #[test]
    fn one_ff_config1_obs_structure() {
        let n = parse_bench(ONE_FF).unwrap();
        let (s, chain) = insert_scan(&n).unwrap();
        let id = |x| s.find_net(x).unwrap();
        let cfg = LiteConfig::new(Variant::Config1Obs, 2);
        let plan = plan_insertion(&s, &chain, &lists(vec![id("w"), id("a")], vec![], vec![]), &cfg);
        // w and a share no inputs only if their supports are disjoint: {b,c} vs {a}.
        let plan = plan.unwrap();
        assert_eq!(plan.records.len(), 1);
        let out = insert_lite(&s, &plan).unwrap();
        assert_eq!(out.count_kind(CellKind::Xor) - s.count_kind(CellKind::Xor), 1);
        assert_eq!(out.count_kind(CellKind::Mux2), 1);
        assert_eq!(out.inputs().len(), s.inputs().len() + 1);
        assert_eq!(check_equivalence(&s, &out, &[(SEL, false)]).unwrap(), Verdict::Equivalent);
        assert!(matches!(check_equivalence(&s, &out, &[(SEL, true)]).unwrap(), Verdict::Counterexample { .. }));
    }

    #[test]
    fn one_ff_config2_obs_cc_structure() {
        let n = parse_bench(ONE_FF).unwrap();
        let (s, chain) = insert_scan(&n).unwrap();
        let id = |x| s.find_net(x).unwrap();
        let cfg = LiteConfig::new(Variant::Config2ObsCc, 2);
        let plan = plan_insertion(&s, &chain, &lists(vec![id("w")], vec![id("d")], vec![]), &cfg).unwrap();
        assert_eq!(plan.records[0].cc, Some((id("d"), Polarity::Zero)));
        let out = insert_lite(&s, &plan).unwrap();
        assert_eq!(out.count_kind(CellKind::Xor) - s.count_kind(CellKind::Xor), 1);
        assert_eq!(out.count_kind(CellKind::Mux2), 2);
        assert_eq!(out.inputs().len(), s.inputs().len() + 2);
        // Q still drives the scan path directly.
        let q = s.cell(s.ffs()[0]).output;
        let so = out.find_cell(SCAN_OUT).unwrap();
        assert_eq!(out.cell(so).inputs[0], q);
        assert_eq!(check_equivalence(&s, &out, &[(SEL, false), (SEL_CC, false)]).unwrap(), Verdict::Equivalent);
    }

    #[test]
    fn pipeline_guards_and_delta() {
        let n = parse_bench(include_str!("../benchmarks/s27.bench")).unwrap();
        let cfg = LiteConfig::new(Variant::Config1ObsCc, 2);
        let out = run_pipeline(&n, &cfg).unwrap();
        let (x, m, p) = expected_delta(&out.plan);
        assert_eq!(out.netlist.cell_count() - out.baseline.cell_count(), x + m);
        assert_eq!(out.netlist.inputs().len() - out.baseline.inputs().len(), p);
        assert!(matches!(run_pipeline(&out.netlist, &cfg), Err(LiteError::AlreadyInstrumented)));
        let json = out.plan.to_json(&out.baseline);
        let entries: Vec<PlanEntry> = serde_json::from_str(&json).unwrap();
        let back = InsertionPlan::from_entries(&out.baseline, cfg.variant, 2, &entries).unwrap();
        assert_eq!(back, out.plan);
    }
}
