//! Fixed-point leaky integrate-and-fire neuron.
//!
//! Per timestep a neuron applies leak and the previous spike's soft reset,
//! integrates weighted input spikes, then fires on a strict threshold
//! compare:
//!
//! ```text
//! u' = alpha * u - theta * s_prev       (round-to-nearest-even multiply,
//! u' += sum of gated weights             saturating adds)
//! s  = 1 if u' > u_th0 else 0
//! ```
//!
//! The reset is realized at the *start* of the next timestep, so an emitted
//! spike and the stored potential never disagree within a timestep. Every
//! engine in this crate funnels through these two functions; bit-exact
//! agreement between engines follows from that plus a shared accumulation
//! order.

use crate::error::Error;
use crate::fixed::{Accumulator, FixedPoint16};

/// Leak, reset, and threshold parameters for one neuron (or a whole layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeuronParams {
    /// Leak factor, in `[0, 1]`.
    pub alpha: FixedPoint16,
    /// Soft-reset decrement applied after a spike; non-negative.
    pub theta: FixedPoint16,
    /// Firing threshold (strict compare).
    pub u_th0: FixedPoint16,
}

impl NeuronParams {
    pub fn new(
        alpha: FixedPoint16,
        theta: FixedPoint16,
        u_th0: FixedPoint16,
        frac_bits: u32,
    ) -> Result<Self, Error> {
        let one = 1i32 << frac_bits;
        if (alpha.raw() as i32) < 0 || (alpha.raw() as i32) > one.min(i16::MAX as i32) {
            return Err(Error::BadParam(format!(
                "leak factor {} outside [0, 1]",
                alpha.to_decimal(frac_bits)
            )));
        }
        if theta.raw() < 0 {
            return Err(Error::BadParam(format!(
                "reset decrement {} is negative",
                theta.to_decimal(frac_bits)
            )));
        }
        Ok(Self {
            alpha,
            theta,
            u_th0,
        })
    }
}

/// Per-neuron state carried between timesteps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NeuronState {
    /// Membrane potential.
    pub v: Accumulator,
    /// Spike emitted on the previous timestep (pending soft reset).
    pub s_prev: bool,
}

impl NeuronState {
    /// Applies leak and the pending soft reset. Call exactly once per neuron
    /// per timestep, before any accumulation.
    pub fn begin_timestep(self, p: &NeuronParams, frac_bits: u32) -> Self {
        let mut v = self.v.scale(p.alpha, frac_bits);
        if self.s_prev {
            v = v.sub_weight(p.theta);
        }
        Self { v, s_prev: self.s_prev }
    }

    /// Threshold compare after integration; returns the spike and the state
    /// to carry into the next timestep.
    pub fn fire(self, p: &NeuronParams) -> (bool, Self) {
        let spike = self.v.exceeds(p.u_th0);
        (spike, Self { v: self.v, s_prev: spike })
    }
}

/// Neuron parameters for one layer: a shared base with optional per-neuron
/// overrides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    base: NeuronParams,
    per_neuron: Option<Vec<NeuronParams>>,
}

impl LayerParams {
    pub fn uniform(base: NeuronParams) -> Self {
        Self {
            base,
            per_neuron: None,
        }
    }

    pub fn per_neuron(
        base: NeuronParams,
        table: Vec<NeuronParams>,
        neuron_count: usize,
    ) -> Result<Self, Error> {
        if table.len() != neuron_count {
            return Err(Error::DimMismatch {
                what: "per-neuron parameter table length",
                expected: neuron_count,
                actual: table.len(),
            });
        }
        Ok(Self {
            base,
            per_neuron: Some(table),
        })
    }

    pub fn base(&self) -> NeuronParams {
        self.base
    }

    pub fn overrides(&self) -> Option<&[NeuronParams]> {
        self.per_neuron.as_deref()
    }

    #[inline]
    pub fn get(&self, neuron: usize) -> NeuronParams {
        match &self.per_neuron {
            Some(t) => t[neuron],
            None => self.base,
        }
    }
}

/// All neuron states of one layer, organized as rows (one per output channel
/// for convolutions; a single row for fully connected layers).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialBank {
    states: Vec<NeuronState>,
    row_width: usize,
}

impl PotentialBank {
    pub fn zeros(rows: usize, row_width: usize) -> Self {
        Self {
            states: vec![NeuronState::default(); rows * row_width],
            row_width,
        }
    }

    pub fn rows(&self) -> usize {
        self.states.len() / self.row_width.max(1)
    }

    pub fn row_width(&self) -> usize {
        self.row_width
    }

    pub fn row(&self, r: usize) -> &[NeuronState] {
        &self.states[r * self.row_width..(r + 1) * self.row_width]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [NeuronState] {
        &mut self.states[r * self.row_width..(r + 1) * self.row_width]
    }

    /// Flat view over all neurons, row-major.
    pub fn states(&self) -> &[NeuronState] {
        &self.states
    }
}
