// SPDX-License-Identifier: Apache-2.0
//! Scan shift and capture switching activity.
//!
//! Patterns are applied back to back: the chain starts at all zeros, each
//! pattern is shifted in over `L` cycles (unloading the previous
//! response), captured once, and a final `L`-cycle flush of zeros
//! unloads the last response.

use serde::{Deserialize, Serialize};

use super::patterns::{simulate_good, PatternSet};
use super::sim::CompiledCircuit;
use crate::scan::FullScanModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Switching {
    /// Mean fraction of flip-flops toggling per shift cycle, in percent.
    pub ass_pct: f64,
    /// Mean fraction of flip-flops whose captured value differs from the
    /// loaded one, in percent.
    pub acs_pct: f64,
}

/// Chain of length `L`: stage 0 is next to scan-in.
struct Chain {
    bits: Vec<bool>,
    toggles: u64,
    cycles: u64,
}

impl Chain {
    fn shift(&mut self, inb: bool) {
        let mut carry = inb;
        for b in self.bits.iter_mut() {
            if *b != carry {
                self.toggles += 1;
            }
            std::mem::swap(b, &mut carry);
        }
        self.cycles += 1;
    }

    fn pct(&self) -> f64 {
        if self.cycles == 0 || self.bits.is_empty() {
            0.0
        } else {
            100.0 * self.toggles as f64 / (self.cycles * self.bits.len() as u64) as f64
        }
    }
}

/// Shift activity of feeding `stream` into an all-zero chain of length
/// `len`, in percent.
pub fn shift_switching(len: usize, stream: &[bool]) -> f64 {
    let mut c = Chain { bits: vec![false; len], toggles: 0, cycles: 0 };
    for &b in stream {
        c.shift(b);
    }
    c.pct()
}

/// ASS/ACS of applying `patterns` (over the model's pseudo-inputs) through
/// the scan chain. Chain order is the model's flip-flop order.
pub fn switching_metrics(model: &FullScanModel, patterns: &PatternSet) -> Switching {
    let l = model.ff_count();
    let c = CompiledCircuit::new(&model.netlist);
    let resp = simulate_good(&c, patterns);
    let mut chain = Chain { bits: vec![false; l], toggles: 0, cycles: 0 };
    let (mut cap_toggles, mut caps) = (0u64, 0u64);
    for p in 0..patterns.len() {
        // The bit for stage k enters first when k is the far end.
        for k in (0..l).rev() {
            chain.shift(patterns.get(p, model.pi_count + k));
        }
        for k in 0..l {
            let captured = resp.get(p, model.po_count + k);
            if captured != chain.bits[k] {
                cap_toggles += 1;
            }
            chain.bits[k] = captured;
        }
        caps += 1;
    }
    for _ in 0..l {
        chain.shift(false);
    }
    Switching {
        ass_pct: chain.pct(),
        acs_pct: if caps == 0 || l == 0 { 0.0 } else { 100.0 * cap_toggles as f64 / (caps * l as u64) as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_do_not_switch() {
        assert_eq!(shift_switching(8, &[false; 100]), 0.0);
    }

    #[test]
    fn alternating_stream_approaches_full_activity() {
        let stream: Vec<bool> = (0..10_000).map(|i| i % 2 == 1).collect();
        let short = shift_switching(4, &stream);
        let long = shift_switching(64, &stream);
        assert!(short > 99.0, "{short}");
        assert!(long > 99.0, "{long}");
    }
}
