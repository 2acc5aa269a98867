// SPDX-License-Identifier: Apache-2.0
//! Combinational miter over full-scan models.
//!
//! Inputs are matched by primary-input name or flip-flop instance,
//! outputs by primary-output name or flip-flop instance D pin. Outputs in
//! the reserved `lite_` namespace are ignored.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::patterns::random_patterns;
use super::sim::CompiledCircuit;
use crate::netlist::{Netlist, RESERVED_PREFIX};
use crate::scan::{extract_full_scan_lenient, FullScanModel, PseudoInput, PseudoOutput, ScanError};

/// Up to this many free inputs the miter is decided exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 22;
/// Random vectors applied above [`EXHAUSTIVE_LIMIT`].
pub const RANDOM_VECTORS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Equivalent,
    Counterexample {
        /// Free inputs of the failing vector.
        inputs: Vec<(String, bool)>,
        /// Outputs that differ.
        outputs: Vec<String>,
    },
    InconclusiveRandomPass {
        vectors: usize,
    },
}

#[derive(Debug, Error)]
pub enum EquivError {
    #[error("interface mismatch: {0}")]
    Interface(String),
    #[error(transparent)]
    Scan(#[from] ScanError),
}

fn input_keys(src: &Netlist, m: &FullScanModel) -> Vec<String> {
    m.inputs
        .iter()
        .map(|p| match *p {
            PseudoInput::Pi(net) => format!("pi:{}", src.net_name(net)),
            PseudoInput::Ff(c) => format!("ff:{}", src.cell(c).name),
        })
        .collect()
}

fn output_keys(src: &Netlist, m: &FullScanModel) -> Vec<Option<String>> {
    m.outputs
        .iter()
        .map(|p| match *p {
            PseudoOutput::Po(net) if src.net_name(net).starts_with(RESERVED_PREFIX) => None,
            PseudoOutput::Po(net) => Some(format!("po:{}", src.net_name(net))),
            PseudoOutput::Ff(c) => Some(format!("ff:{}/D", src.cell(c).name)),
        })
        .collect()
}

/// Where each model input gets its value: a bound constant or a free
/// variable index.
#[derive(Clone, Copy)]
enum Source {
    Const(bool),
    Free(usize),
}

/// Check `a` and `b` for combinational equivalence of their full-scan
/// models, with the named primary inputs held at constants.
pub fn check_equivalence(a: &Netlist, b: &Netlist, bindings: &[(&str, bool)]) -> Result<Verdict, EquivError> {
    check_equivalence_with(a, b, bindings, EXHAUSTIVE_LIMIT, RANDOM_VECTORS, 0x5eed)
}

pub fn check_equivalence_with(
    a: &Netlist,
    b: &Netlist,
    bindings: &[(&str, bool)],
    exhaustive_limit: usize,
    random_vectors: usize,
    seed: u64,
) -> Result<Verdict, EquivError> {
    let ma = extract_full_scan_lenient(a)?;
    let mb = extract_full_scan_lenient(b)?;
    let ka = input_keys(a, &ma);
    let kb = input_keys(b, &mb);
    let bound: BTreeMap<String, bool> = bindings.iter().map(|(n, v)| (format!("pi:{n}"), *v)).collect();

    let mut free: BTreeMap<String, usize> = BTreeMap::new();
    for k in ka.iter().chain(&kb) {
        if !bound.contains_key(k) && !free.contains_key(k) {
            let in_a = ka.contains(k);
            let in_b = kb.contains(k);
            if !(in_a && in_b) {
                return Err(EquivError::Interface(format!("unbound input `{k}` exists on one side only")));
            }
            let idx = free.len();
            free.insert(k.clone(), idx);
        }
    }
    let sources = |keys: &[String]| -> Vec<Source> {
        keys.iter()
            .map(|k| match bound.get(k) {
                Some(&v) => Source::Const(v),
                None => Source::Free(free[k]),
            })
            .collect()
    };
    let sa = sources(&ka);
    let sb = sources(&kb);

    let oa = output_keys(a, &ma);
    let ob = output_keys(b, &mb);
    let pos_b: BTreeMap<&String, usize> = ob.iter().enumerate().filter_map(|(j, k)| k.as_ref().map(|k| (k, j))).collect();
    let mut pairs = Vec::new();
    for (j, k) in oa.iter().enumerate() {
        let Some(k) = k else { continue };
        let jb = *pos_b.get(k).ok_or_else(|| EquivError::Interface(format!("output `{k}` missing on the right")))?;
        pairs.push((k.clone(), ma.netlist.outputs()[j], mb.netlist.outputs()[jb]));
    }
    // Duplicate output ports compare once per occurrence; the key sets must match.
    let keys_a: std::collections::BTreeSet<&String> = oa.iter().flatten().collect();
    if keys_a.len() != pos_b.len() {
        return Err(EquivError::Interface("right side has extra outputs".into()));
    }

    let ca = CompiledCircuit::new(&ma.netlist);
    let cb = CompiledCircuit::new(&mb.netlist);
    let nfree = free.len();
    let names: Vec<String> = {
        let mut v = vec![String::new(); nfree];
        for (k, &i) in &free {
            v[i] = k.clone();
        }
        v
    };

    let exhaustive = nfree <= exhaustive_limit;
    let (blocks, random) = if exhaustive {
        ((1usize << nfree).div_ceil(64), None)
    } else {
        let p = random_patterns(nfree, random_vectors, seed, 0.5);
        (p.block_count(), Some(p))
    };
    let mut fw = Vec::new();
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    let (mut va, mut vb) = (Vec::new(), Vec::new());
    for blk in 0..blocks {
        let valid = match &random {
            Some(p) => p.block_words(blk, &mut fw),
            None => exhaustive_block(nfree, blk, &mut fw),
        };
        let fill = |src: &[Source], w: &mut Vec<u64>| {
            w.clear();
            w.extend(src.iter().map(|s| match *s {
                Source::Const(v) => {
                    if v {
                        !0
                    } else {
                        0
                    }
                }
                Source::Free(i) => fw[i],
            }));
        };
        fill(&sa, &mut wa);
        fill(&sb, &mut wb);
        ca.eval_block(&wa, &mut va);
        cb.eval_block(&wb, &mut vb);
        let mut diff = 0u64;
        for (_, x, y) in &pairs {
            diff |= (va[x.idx()] ^ vb[y.idx()]) & valid;
        }
        if diff != 0 {
            let j = diff.trailing_zeros();
            let inputs = names.iter().enumerate().map(|(i, n)| (n.clone(), fw[i] >> j & 1 == 1)).collect();
            let outputs =
                pairs.iter().filter(|(_, x, y)| (va[x.idx()] ^ vb[y.idx()]) >> j & 1 == 1).map(|(k, _, _)| k.clone()).collect();
            return Ok(Verdict::Counterexample { inputs, outputs });
        }
    }
    Ok(if exhaustive { Verdict::Equivalent } else { Verdict::InconclusiveRandomPass { vectors: random_vectors } })
}

/// Block `b` of the enumeration of `n` variables, vector `v` assigning
/// `(v >> i) & 1` to variable `i`.
fn exhaustive_block(n: usize, b: usize, out: &mut Vec<u64>) -> u64 {
    const LOW: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    out.clear();
    out.extend(LOW.iter().copied().take(n));
    out.extend((6..n).map(|i| if b >> (i - 6) & 1 == 1 { !0 } else { 0 }));
    if n >= 6 {
        !0
    } else {
        (1u64 << (1 << n)) - 1
    }
}
