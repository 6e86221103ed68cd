//! Event counters shared by every engine.

use crate::fixed::WEIGHT_BITS;
use serde::{Deserialize, Serialize};

/// Memory-traffic and work counters accumulated over a run.
///
/// Fetch counters record events; the `*_bits` fields record the traffic those
/// events move (one bit per input spike read, `WEIGHT_BITS` per weight word).
/// Iteration counters break the streaming engine's cycles down by kind; the
/// dense reference engine leaves them at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    /// Input spike bits read (enable-map and FC input reads).
    pub input_fetches: u64,
    /// Weight words read.
    pub weight_fetches: u64,
    /// Saturating adds actually performed into membrane accumulators.
    pub accumulations: u64,
    /// Potential-bank row loads.
    pub bank_loads: u64,
    /// Potential-bank row stores.
    pub bank_stores: u64,
    /// Iterations that processed a nonzero weight.
    pub iters_normal: u64,
    /// Iterations spent waiting for an input channel to arrive.
    pub iters_empty: u64,
    /// Iterations that flushed an all-zero output channel.
    pub iters_extra: u64,
    /// Input traffic in bits (1 bit per fetch).
    pub input_bits: u64,
    /// Weight traffic in bits (`WEIGHT_BITS` per fetch).
    pub weight_bits: u64,
}

impl CostCounters {
    pub fn count_input_fetches(&mut self, n: u64) {
        self.input_fetches += n;
        self.input_bits += n;
    }

    pub fn count_weight_fetches(&mut self, n: u64) {
        self.weight_fetches += n;
        self.weight_bits += n * WEIGHT_BITS as u64;
    }

    /// Total memory traffic in bits.
    pub fn bit_traffic(&self) -> u64 {
        self.input_bits + self.weight_bits
    }

    pub fn add(&mut self, other: &CostCounters) {
        self.input_fetches += other.input_fetches;
        self.weight_fetches += other.weight_fetches;
        self.accumulations += other.accumulations;
        self.bank_loads += other.bank_loads;
        self.bank_stores += other.bank_stores;
        self.iters_normal += other.iters_normal;
        self.iters_empty += other.iters_empty;
        self.iters_extra += other.iters_extra;
        self.input_bits += other.input_bits;
        self.weight_bits += other.weight_bits;
    }
}
