// SPDX-License-Identifier: Apache-2.0
//! Fully specified test patterns over the pseudo-primary inputs, random
//! and exhaustive generators, and the on-disk pattern format.

use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::sim::CompiledCircuit;
use crate::scan::FullScanModel;

/// Packed row-major bit matrix: one row per pattern.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternSet {
    width: usize,
    words: usize,
    bits: Vec<u64>,
    len: usize,
    pub seed: Option<u64>,
    pub generator: String,
    /// Rows enumerate every assignment, so undetected faults are untestable.
    pub exhaustive: bool,
}

impl PatternSet {
    pub fn new(width: usize) -> Self {
        PatternSet { width, words: width.div_ceil(64).max(1), ..Default::default() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, row: &[bool]) {
        assert_eq!(row.len(), self.width, "pattern width");
        let base = self.bits.len();
        self.bits.resize(base + self.words, 0);
        for (i, &b) in row.iter().enumerate() {
            if b {
                self.bits[base + i / 64] |= 1 << (i % 64);
            }
        }
        self.len += 1;
    }

    fn push_words(&mut self, words: &[u64]) {
        self.bits.extend_from_slice(words);
        self.len += 1;
    }

    pub fn get(&self, p: usize, i: usize) -> bool {
        self.bits[p * self.words + i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, p: usize, i: usize, b: bool) {
        let w = &mut self.bits[p * self.words + i / 64];
        if b {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn row(&self, p: usize) -> Vec<bool> {
        (0..self.width).map(|i| self.get(p, i)).collect()
    }

    /// Keep only the first `count` patterns.
    pub fn truncate(&mut self, count: usize) {
        if count < self.len {
            self.len = count;
            self.bits.truncate(count * self.words);
        }
    }

    /// Patterns `[lo, hi)` as a new set.
    pub fn slice(&self, lo: usize, hi: usize) -> PatternSet {
        let mut s = PatternSet::new(self.width);
        s.seed = self.seed;
        s.generator = self.generator.clone();
        s.bits = self.bits[lo * self.words..hi * self.words].to_vec();
        s.len = hi - lo;
        s
    }

    pub fn extend(&mut self, other: &PatternSet) {
        assert_eq!(self.width, other.width, "pattern width");
        self.bits.extend_from_slice(&other.bits);
        self.len += other.len;
        self.exhaustive = false;
    }

    pub fn block_count(&self) -> usize {
        self.len.div_ceil(64)
    }

    /// Transpose block `b` (patterns `64b..64b+64`) into one word per
    /// column; returns the mask of valid pattern bits.
    pub fn block_words(&self, b: usize, out: &mut Vec<u64>) -> u64 {
        out.clear();
        out.resize(self.width, 0);
        let lo = b * 64;
        let hi = (lo + 64).min(self.len);
        for p in lo..hi {
            let j = p - lo;
            let row = &self.bits[p * self.words..(p + 1) * self.words];
            for (wi, &w) in row.iter().enumerate() {
                let mut w = w;
                while w != 0 {
                    let t = w.trailing_zeros() as usize;
                    out[wi * 64 + t] |= 1 << j;
                    w &= w - 1;
                }
            }
        }
        if hi - lo == 64 {
            !0
        } else {
            (1u64 << (hi - lo)) - 1
        }
    }
}

/// I.i.d. bits from a seeded xoshiro256++ stream; each bit is 1 with
/// probability `bias`. Pattern `p` depends only on the seed and `p`, so a
/// shorter set is always a prefix of a longer one.
pub fn random_patterns(width: usize, count: usize, seed: u64, bias: f64) -> PatternSet {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut s = PatternSet::new(width);
    s.seed = Some(seed);
    s.generator = format!("random:bias={bias}");
    s.bits.reserve(count * s.words);
    let mut row = vec![0u64; s.words];
    let tail = if width.is_multiple_of(64) { !0 } else { (1u64 << (width % 64)) - 1 };
    for _ in 0..count {
        if bias == 0.5 {
            for w in row.iter_mut() {
                *w = rng.next_u64();
            }
        } else {
            row.iter_mut().for_each(|w| *w = 0);
            for i in 0..width {
                if rng.gen_bool(bias) {
                    row[i / 64] |= 1 << (i % 64);
                }
            }
        }
        if width == 0 {
            row[0] = 0;
        } else {
            let last = s.words - 1;
            row[last] &= tail;
        }
        s.push_words(&row);
    }
    s
}

/// Every assignment of `width` bits, pattern `p` setting bit `i` to
/// `(p >> i) & 1`.
pub fn exhaustive_patterns(width: usize) -> PatternSet {
    assert!(width <= 26, "exhaustive enumeration of {width} inputs");
    let mut s = PatternSet::new(width);
    s.generator = "exhaustive".into();
    s.exhaustive = true;
    for p in 0u64..1 << width {
        s.push_words(&[p]);
    }
    s
}

/// Good-machine responses: one row per pattern over the circuit outputs.
pub fn simulate_good(c: &CompiledCircuit, patterns: &PatternSet) -> PatternSet {
    let mut out = PatternSet::new(c.outputs.len());
    let mut ins = Vec::new();
    let mut vals = Vec::new();
    let mut rows = vec![vec![0u64; out.words]; 64];
    for b in 0..patterns.block_count() {
        let valid = patterns.block_words(b, &mut ins);
        c.eval_block(&ins, &mut vals);
        let n = valid.count_ones() as usize;
        for r in rows.iter_mut().take(n) {
            r.iter_mut().for_each(|w| *w = 0);
        }
        for (k, &o) in c.outputs.iter().enumerate() {
            let mut w = vals[o.idx()] & valid;
            while w != 0 {
                let j = w.trailing_zeros() as usize;
                rows[j][k / 64] |= 1 << (k % 64);
                w &= w - 1;
            }
        }
        for r in rows.iter().take(n) {
            out.push_words(r);
        }
    }
    out
}

/// Metadata line at the top of a pattern file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternHeader {
    pub format: String,
    pub seed: Option<u64>,
    pub generator: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub pi_count: usize,
    pub po_count: usize,
}

pub const PATTERN_FORMAT: &str = "lite-patterns-1";

/// One line per pattern: `PI-bits | scan-bits | PO-bits | scan-out-bits`,
/// after a JSON header line.
pub fn write_patterns(model: &FullScanModel, patterns: &PatternSet, responses: &PatternSet) -> String {
    let n = &model.netlist;
    let header = PatternHeader {
        format: PATTERN_FORMAT.into(),
        seed: patterns.seed,
        generator: patterns.generator.clone(),
        inputs: n.inputs().iter().map(|&i| n.net_name(i).to_string()).collect(),
        outputs: n.outputs().iter().map(|&o| n.net_name(o).to_string()).collect(),
        pi_count: model.pi_count,
        po_count: model.po_count,
    };
    let mut s = serde_json::to_string(&header).expect("header serializes");
    s.push('\n');
    let bits = |set: &PatternSet, p: usize, lo: usize, hi: usize| -> String {
        (lo..hi).map(|i| if set.get(p, i) { '1' } else { '0' }).collect()
    };
    for p in 0..patterns.len() {
        let _ = writeln!(
            s,
            "{} | {} | {} | {}",
            bits(patterns, p, 0, model.pi_count),
            bits(patterns, p, model.pi_count, patterns.width()),
            bits(responses, p, 0, model.po_count),
            bits(responses, p, model.po_count, responses.width()),
        );
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum PatternFileError {
    #[error("pattern file header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("pattern file line {0}: {1}")]
    Line(usize, String),
}

/// Parse a pattern file into `(header, stimuli, expected responses)`.
pub fn read_patterns(text: &str) -> Result<(PatternHeader, PatternSet, PatternSet), PatternFileError> {
    let mut lines = text.lines();
    let header: PatternHeader = serde_json::from_str(lines.next().unwrap_or(""))?;
    if header.format != PATTERN_FORMAT {
        return Err(PatternFileError::Line(1, format!("unknown format `{}`", header.format)));
    }
    let mut ins = PatternSet::new(header.inputs.len());
    ins.seed = header.seed;
    ins.generator = header.generator.clone();
    let mut outs = PatternSet::new(header.outputs.len());
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(PatternFileError::Line(k + 2, "expected four `|`-separated fields".into()));
        }
        let parse = |s: &str| -> Result<Vec<bool>, PatternFileError> {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(PatternFileError::Line(k + 2, format!("bad bit `{c}`"))),
                })
                .collect()
        };
        let mut a = parse(parts[0])?;
        a.extend(parse(parts[1])?);
        let mut b = parse(parts[2])?;
        b.extend(parse(parts[3])?);
        if a.len() != ins.width() || b.len() != outs.width() {
            return Err(PatternFileError::Line(k + 2, "width does not match header".into()));
        }
        ins.push(&a);
        outs.push(&b);
    }
    Ok((header, ins, outs))
}
