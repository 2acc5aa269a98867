// SPDX-License-Identifier: Apache-2.0
//! Bundled benchmark circuits and the generator behind the synthetic ones.
//!
//! The synthetic circuits are sequential gate-level netlists in the style of
//! the ISCAS89 suite: random multi-level NAND/NOR-heavy logic over primary
//! inputs and flip-flop outputs, plus random-pattern-resistant blocks. Each
//! block is a wide AND enable gating a small private data cone, so the cone
//! is observable only under a rare input combination.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use rayon::prelude::*;

use crate::atpg::{model_scoap, Podem, PodemOutcome};
use crate::faultsim::{enumerate_faults, CompiledCircuit, FaultSite};
use crate::netlist::{parse_bench, CellKind, Netlist};
use crate::scan::extract_full_scan_lenient;

pub const S27: &str = include_str!("../benchmarks/s27.bench");

/// Shape of a generated circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub name: &'static str,
    pub inputs: usize,
    pub outputs: usize,
    pub ffs: usize,
    /// Loosely coupled partitions; inputs, outputs and flip-flops are
    /// dealt round-robin.
    pub modules: usize,
    /// Random logic gates per module.
    pub gates: usize,
    /// Random-pattern-resistant blocks per module.
    pub blocks: usize,
    /// Fan-in of each block's enable.
    pub enable_width: usize,
    /// Gates in each block's private data cone.
    pub cone: usize,
    /// Flip-flop outputs of other modules read by each module.
    pub cross: usize,
    pub seed: u64,
}

/// The five synthetic benchmarks, smallest first.
pub const SYNTHETIC: [GenSpec; 5] = [
    GenSpec {
        name: "syn1",
        inputs: 18,
        outputs: 12,
        ffs: 24,
        modules: 3,
        gates: 90,
        blocks: 2,
        enable_width: 10,
        cone: 8,
        cross: 2,
        seed: 0x51,
    },
    GenSpec {
        name: "syn2",
        inputs: 30,
        outputs: 20,
        ffs: 50,
        modules: 5,
        gates: 100,
        blocks: 2,
        enable_width: 11,
        cone: 8,
        cross: 2,
        seed: 0x52,
    },
    GenSpec {
        name: "syn3",
        inputs: 42,
        outputs: 28,
        ffs: 70,
        modules: 7,
        gates: 110,
        blocks: 2,
        enable_width: 12,
        cone: 8,
        cross: 3,
        seed: 0x53,
    },
    GenSpec {
        name: "syn4",
        inputs: 54,
        outputs: 36,
        ffs: 99,
        modules: 9,
        gates: 120,
        blocks: 3,
        enable_width: 12,
        cone: 8,
        cross: 3,
        seed: 0x54,
    },
    GenSpec {
        name: "syn5",
        inputs: 72,
        outputs: 48,
        ffs: 144,
        modules: 12,
        gates: 130,
        blocks: 3,
        enable_width: 13,
        cone: 9,
        cross: 3,
        seed: 0x55,
    },
];

const BUNDLED: [(&str, &str); 6] = [
    ("s27", S27),
    ("syn1", include_str!("../benchmarks/syn1.bench")),
    ("syn2", include_str!("../benchmarks/syn2.bench")),
    ("syn3", include_str!("../benchmarks/syn3.bench")),
    ("syn4", include_str!("../benchmarks/syn4.bench")),
    ("syn5", include_str!("../benchmarks/syn5.bench")),
];

/// Names of all bundled circuits.
pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Source text of a bundled circuit.
pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// A bundled circuit, parsed.
pub fn load(name: &str) -> Option<Netlist> {
    let mut n = parse_bench(source(name)?).expect("bundled benchmark parses");
    n.set_name(name);
    Some(n)
}

/// Probability of drawing a gate input from nets without sinks.
const FRONTIER_BIAS: f64 = 0.88;

/// Random-simulation words kept per net.
const SIG_WORDS: usize = 64;

struct Builder {
    rng: Xoshiro256PlusPlus,
    lines: Vec<String>,
    uses: HashMap<String, usize>,
    /// Response of each net to one fixed random input sample.
    sig: HashMap<String, Vec<u64>>,
    /// Module-local source indices each net depends on.
    support: HashMap<String, u64>,
    next: usize,
}

/// Nets one module draws from.
struct Module {
    pool: Vec<String>,
    /// Pool nets without a sink yet.
    frontier: Vec<String>,
}

impl Module {
    fn new(nets: &[String]) -> Self {
        Module { pool: nets.to_vec(), frontier: nets.to_vec() }
    }
}

impl Builder {
    fn eval(&self, kind: &str, ins: &[String]) -> Vec<u64> {
        let k = CellKind::from_keyword(kind).expect("known keyword");
        (0..SIG_WORDS)
            .map(|w| {
                let words: Vec<u64> = ins.iter().map(|i| self.sig[i][w]).collect();
                k.eval_words(&words)
            })
            .collect()
    }

    fn gate_with(&mut self, kind: &str, ins: &[String], sig: Vec<u64>) -> String {
        self.next += 1;
        let out = format!("N{}", self.next);
        for i in ins {
            *self.uses.entry(i.clone()).or_default() += 1;
        }
        self.lines.push(format!("{out} = {kind}({})", ins.join(", ")));
        self.sig.insert(out.clone(), sig);
        let sup = ins.iter().fold(0, |a, i| a | self.support.get(i).copied().unwrap_or(0));
        self.support.insert(out.clone(), sup);
        out
    }

    fn gate(&mut self, kind: &str, ins: &[String]) -> String {
        let sig = self.eval(kind, ins);
        self.gate_with(kind, ins, sig)
    }

    /// Fraction of ones in a signature.
    fn density(sig: &[u64]) -> f64 {
        sig.iter().map(|w| w.count_ones() as f64).sum::<f64>() / (64 * SIG_WORDS) as f64
    }

    /// True if `sig` is within the density window and differs from every
    /// input and its complement.
    fn acceptable(&self, sig: &[u64], ins: &[String], window: f64) -> bool {
        let d = Self::density(sig);
        if d < window || d > 1.0 - window {
            return false;
        }
        ins.iter().all(|i| {
            let s = &self.sig[i];
            s.as_slice() != sig && s.iter().zip(sig).any(|(a, b)| *a != !*b)
        })
    }

    /// Mostly a net without sinks, so the logic stays close to a tree.
    fn pick(&mut self, m: &Module, avoid: &[String]) -> Option<String> {
        let fresh: Vec<&String> = m.frontier.iter().filter(|s| !avoid.contains(s)).collect();
        if !fresh.is_empty() && self.rng.gen_bool(FRONTIER_BIAS) {
            return fresh.choose(&mut self.rng).map(|s| (*s).clone());
        }
        let any: Vec<&String> = m.pool.iter().filter(|s| !avoid.contains(s)).collect();
        any.choose(&mut self.rng).map(|s| (*s).clone())
    }

    fn random_kind(&mut self) -> (&'static str, usize) {
        let r: f64 = self.rng.gen();
        let kind = match r {
            r if r < 0.26 => "NAND",
            r if r < 0.48 => "NOR",
            r if r < 0.64 => "AND",
            r if r < 0.78 => "OR",
            r if r < 0.94 => "NOT",
            _ => "XOR",
        };
        let arity = match kind {
            "NOT" => 1,
            "XOR" => 2,
            _ => *[2, 2, 2, 3, 3, 4].choose(&mut self.rng).expect("non-empty"),
        };
        (kind, arity)
    }

    /// A random gate over `m` (and `local`, preferred when given) whose
    /// signal probability stays inside the window.
    fn random_gate(&mut self, m: &Module, local: Option<&Module>, window: f64) -> (String, Vec<String>, Vec<u64>) {
        let mut last = None;
        for _ in 0..32 {
            let (kind, arity) = self.random_kind();
            let mut ins: Vec<String> = Vec::with_capacity(arity);
            for _ in 0..arity {
                let near = match local {
                    Some(l) if !l.frontier.is_empty() && self.rng.gen_bool(0.6) => self.pick(l, &ins),
                    _ => None,
                };
                let s = near.or_else(|| self.pick(m, &ins)).expect("module has enough sources");
                ins.push(s);
            }
            let sig = self.eval(kind, &ins);
            if self.acceptable(&sig, &ins, window) {
                return (kind.to_string(), ins, sig);
            }
            if kind == "NOT" {
                last = Some((kind.to_string(), ins, sig));
            }
        }
        last.unwrap_or_else(|| {
            let x = self.pick(m, &[]).expect("non-empty pool");
            let sig = self.eval("NOT", std::slice::from_ref(&x));
            ("NOT".to_string(), vec![x], sig)
        })
    }

    fn add_to(&self, m: &mut Module, net: String) {
        m.frontier.retain(|s| !self.uses.contains_key(s));
        m.pool.push(net.clone());
        m.frontier.push(net);
    }
}

/// Deterministic `.bench` text for `spec`.
pub fn generate(spec: &GenSpec) -> String {
    let mut b = Builder {
        rng: Xoshiro256PlusPlus::seed_from_u64(spec.seed),
        lines: Vec::new(),
        uses: HashMap::new(),
        sig: HashMap::new(),
        support: HashMap::new(),
        next: 0,
    };
    let pis: Vec<String> = (0..spec.inputs).map(|i| format!("I{i}")).collect();
    let qs: Vec<String> = (0..spec.ffs).map(|i| format!("Q{i}")).collect();
    for s in pis.iter().chain(&qs) {
        let words = (0..SIG_WORDS).map(|_| b.rng.gen()).collect();
        b.sig.insert(s.clone(), words);
    }
    let deal = |total: usize, m: usize| -> Vec<usize> { (0..total).filter(|i| i % spec.modules == m).collect() };

    let mut drivers: Vec<Option<String>> = vec![None; spec.ffs + spec.outputs];
    for mi in 0..spec.modules {
        let own_q = deal(spec.ffs, mi);
        let mut sources: Vec<String> = deal(spec.inputs, mi).into_iter().map(|i| pis[i].clone()).collect();
        sources.extend(own_q.iter().map(|&i| qs[i].clone()));
        let foreign: Vec<&String> = qs.iter().enumerate().filter(|(i, _)| i % spec.modules != mi).map(|(_, q)| q).collect();
        sources.extend(foreign.choose_multiple(&mut b.rng, spec.cross).map(|q| (*q).clone()));
        for (i, src) in sources.iter().enumerate() {
            b.support.insert(src.clone(), 1 << i);
        }
        let mut m = Module::new(&sources);
        // Gated outputs reach sinks only through XOR, which never masks.
        let mut gated: Vec<String> = Vec::new();

        let per_block = spec.gates / (spec.blocks + 1);
        for blk in 0..=spec.blocks {
            for _ in 0..per_block {
                let (kind, ins, sig) = b.random_gate(&m, None, 1.0 / 16.0);
                let y = b.gate_with(&kind, &ins, sig);
                b.add_to(&mut m, y);
            }
            if blk == spec.blocks {
                break;
            }
            // Enable: wide AND over module sources, some inverted.
            let width = spec.enable_width.min(sources.len());
            let mut legs: Vec<String> = sources.choose_multiple(&mut b.rng, width).cloned().collect();
            let leg_mask = legs.iter().fold(0, |a, l| a | b.support[l]);
            for leg in legs.iter_mut() {
                if b.rng.gen_bool(0.5) {
                    *leg = b.gate("NOT", std::slice::from_ref(leg));
                }
            }
            while legs.len() > 1 {
                let take = legs.len().min(4);
                let group: Vec<String> = legs.drain(..take).collect();
                let y = b.gate("AND", &group);
                legs.push(y);
            }
            let enable = legs.pop().expect("enable width >= 1");
            // Private data cone: reads the module, feeds only the gating cells.
            // The cone avoids the enable's sources, so enabling it leaves
            // the cone free.
            let free = |v: &[String]| -> Vec<String> { v.iter().filter(|x| b.support[*x] & leg_mask == 0).cloned().collect() };
            let view = Module { pool: free(&m.pool), frontier: free(&m.frontier) };
            let view = if view.pool.len() >= 4 { view } else { Module::new(&m.pool) };
            let mut cone = Module::new(&[]);
            for _ in 0..spec.cone {
                let (kind, ins, sig) = b.random_gate(&view, Some(&cone), 1.0 / 16.0);
                let y = b.gate_with(&kind, &ins, sig);
                b.add_to(&mut cone, y);
            }
            let tips: Vec<String> = cone.pool.iter().filter(|s| !b.uses.contains_key(*s)).cloned().collect();
            for t in tips {
                gated.push(b.gate("AND", &[enable.clone(), t]));
            }
        }

        // Fold dangling nets until they fit this module's sinks, keeping
        // the folded signal as balanced as possible.
        let sinks: Vec<usize> = own_q.iter().copied().chain(deal(spec.outputs, mi).into_iter().map(|o| spec.ffs + o)).collect();
        let mut dangling: Vec<String> = m.pool.iter().filter(|s| !b.uses.contains_key(*s)).cloned().collect();
        for (i, g) in gated.into_iter().enumerate() {
            let slot = i % dangling.len();
            let pair = [dangling[slot].clone(), g];
            dangling[slot] = b.gate("XOR", &pair);
        }
        while dangling.len() > sinks.len() {
            let pair = [dangling.remove(0), dangling.remove(0)];
            let kind = ["NAND", "NOR", "XOR"]
                .into_iter()
                .filter(|k| b.acceptable(&b.eval(k, &pair), &pair, 1.0 / 16.0))
                .min_by(|x, y| {
                    let dx = (Builder::density(&b.eval(x, &pair)) - 0.5).abs();
                    let dy = (Builder::density(&b.eval(y, &pair)) - 0.5).abs();
                    dx.total_cmp(&dy)
                })
                .unwrap_or("XOR");
            let z = b.gate(kind, &pair);
            m.pool.push(z.clone());
            dangling.push(z);
        }
        let gates: Vec<String> = m.pool[sources.len()..].to_vec();
        for (i, &slot) in sinks.iter().enumerate() {
            drivers[slot] = Some(match dangling.get(i) {
                Some(s) => s.clone(),
                None => gates.choose(&mut b.rng).expect("module has gates").clone(),
            });
        }
    }
    let drivers: Vec<String> = drivers.into_iter().map(|d| d.expect("every sink assigned")).collect();

    let mut text =
        format!("# {}\n# {} inputs\n# {} outputs\n# {} D-type flipflops\n\n", spec.name, spec.inputs, spec.outputs, spec.ffs);
    for p in &pis {
        text.push_str(&format!("INPUT({p})\n"));
    }
    text.push('\n');
    let mut seen = std::collections::HashSet::new();
    for d in &drivers[spec.ffs..] {
        if seen.insert(d) {
            text.push_str(&format!("OUTPUT({d})\n"));
        }
    }
    text.push('\n');
    for (q, d) in qs.iter().zip(&drivers) {
        text.push_str(&format!("{q} = DFF({d})\n"));
    }
    text.push('\n');
    for l in &b.lines {
        text.push_str(l);
        text.push('\n');
    }
    remove_redundancy(&text, PRUNE_ROUNDS)
}

/// Rounds of pin dropping applied to generated circuits.
const PRUNE_ROUNDS: usize = 6;

/// Backtrack limit used when proving faults untestable during pruning.
const PRUNE_BACKTRACKS: u64 = 2_000;

/// Drop gate pins whose non-controlling stuck-at fault is proven
/// untestable on the full-scan model, then delete logic left without
/// sinks. Tying such a pin to the non-controlling value is
/// function-preserving, so each round keeps the circuit equivalent.
pub fn remove_redundancy(text: &str, rounds: usize) -> String {
    let mut text = text.to_string();
    for _ in 0..rounds {
        let n = parse_bench(&text).expect("generated text parses");
        let m = extract_full_scan_lenient(&n).expect("generated circuit has a full-scan model");
        let mn = &m.netlist;
        let c = CompiledCircuit::new(mn);
        let s = model_scoap(mn);
        let faults = enumerate_faults(mn, false);
        let outcomes: Vec<PodemOutcome> =
            faults.par_iter().map_init(|| Podem::new(&c, &s), |p, f| p.run(*f, PRUNE_BACKTRACKS)).collect();
        let mut drops: HashMap<String, usize> = HashMap::new();
        for (f, o) in faults.iter().zip(&outcomes) {
            if *o != PodemOutcome::Untestable {
                continue;
            }
            let pin = match f.site {
                FaultSite::Branch(p) => p,
                FaultSite::Stem(net) => {
                    let fo = &mn.net(net).fanout;
                    if fo.len() != 1 || mn.outputs().contains(&net) {
                        continue;
                    }
                    fo[0]
                }
            };
            let cell = mn.cell(pin.cell);
            let droppable = match cell.kind {
                CellKind::And | CellKind::Nand => f.stuck,
                CellKind::Or | CellKind::Nor => !f.stuck,
                CellKind::Xor | CellKind::Xnor => true,
                _ => false,
            };
            if droppable && cell.inputs.len() > 1 {
                drops.entry(mn.net_name(cell.output).to_string()).or_insert(pin.pin as usize);
            }
        }
        if drops.is_empty() {
            break;
        }
        text = rewrite(&text, &drops);
    }
    text
}

/// Apply pin drops to gate lines and delete gates without sinks.
fn rewrite(text: &str, drops: &HashMap<String, usize>) -> String {
    struct Gate {
        out: String,
        kind: String,
        ins: Vec<String>,
    }
    let mut head: Vec<String> = Vec::new();
    let mut gates: Vec<Gate> = Vec::new();
    let mut roots: Vec<String> = Vec::new();
    for line in text.lines() {
        let gate = line.split_once(" = ").and_then(|(out, rhs)| {
            let (kind, args) = rhs.strip_suffix(')')?.split_once('(')?;
            Some((out.to_string(), kind.to_string(), args.split(", ").map(str::to_string).collect::<Vec<_>>()))
        });
        match gate {
            Some((out, kind, ins)) if kind != "DFF" => gates.push(Gate { out, kind, ins }),
            Some((_, _, ins)) => {
                roots.extend(ins);
                head.push(line.to_string());
            }
            None => {
                if let Some(o) = line.strip_prefix("OUTPUT(").and_then(|r| r.strip_suffix(')')) {
                    roots.push(o.to_string());
                }
                head.push(line.to_string());
            }
        }
    }
    for g in gates.iter_mut() {
        if let Some(&pin) = drops.get(&g.out) {
            g.ins.remove(pin);
            if g.ins.len() == 1 {
                g.kind = match g.kind.as_str() {
                    "NAND" | "NOR" => "NOT",
                    _ => "BUFF",
                }
                .to_string();
            }
        }
    }
    // Keep gates reachable backwards from flip-flops and outputs.
    let index: HashMap<&str, usize> = gates.iter().enumerate().map(|(i, g)| (g.out.as_str(), i)).collect();
    let mut live = vec![false; gates.len()];
    let mut stack: Vec<&str> = roots.iter().map(String::as_str).collect();
    while let Some(net) = stack.pop() {
        if let Some(&i) = index.get(net) {
            if !live[i] {
                live[i] = true;
                stack.extend(gates[i].ins.iter().map(String::as_str));
            }
        }
    }
    let mut out = head.join("\n");
    out.push('\n');
    for (g, keep) in gates.iter().zip(&live) {
        if *keep {
            out.push_str(&format!("{} = {}({})\n", g.out, g.kind, g.ins.join(", ")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_match_generator() {
        for spec in &SYNTHETIC {
            assert_eq!(source(spec.name).unwrap(), generate(spec), "{} is stale", spec.name);
        }
    }

    #[test]
    fn bundled_circuits_are_well_formed() {
        for name in names() {
            let n = load(name).unwrap();
            n.validate().unwrap();
            assert!(!n.ffs().is_empty(), "{name}");
            crate::Hypergraph::new(&n).topo_sort().unwrap();
        }
    }

    #[test]
    fn every_synthetic_net_has_a_sink() {
        for spec in &SYNTHETIC {
            let n = load(spec.name).unwrap();
            for id in n.net_ids() {
                let sinks = n.net(id).fanout.len() + n.outputs().iter().filter(|&&o| o == id).count();
                assert!(sinks > 0, "{}: `{}` dangles", spec.name, n.net_name(id));
            }
        }
    }
}
