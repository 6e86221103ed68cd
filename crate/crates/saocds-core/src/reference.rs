//! Dense sliding-window reference engines.
//!
//! These are deliberately naive: every weight position is visited, every
//! window's input bits are read, and only the spike gate (skip the add when
//! the input bit is zero) is exploited. They exist to validate the streaming
//! engines bit-for-bit and to provide the dense cost baseline the savings
//! numbers are measured against.
//!
//! Bit-exactness with the streaming engines is by construction: for each
//! neuron the reference applies leak/reset first and then accumulates taps in
//! ascending `(ic, ci)` order — the same order the sorted COO walk uses — and
//! skipped zero-weight adds would be no-ops anyway, so the saturating
//! accumulator passes through identical states.

use crate::coo::DenseKernel;
use crate::counters::CostCounters;
use crate::error::Error;
use crate::fixed::FixedPoint16;
use crate::lif::{LayerParams, PotentialBank};
use crate::spike::SpikeTensor;

/// Dense convolution engine state.
pub struct SwConvEngine<'a> {
    kernel: &'a DenseKernel,
    params: &'a LayerParams,
    frac_bits: u32,
    pad: usize,
    bank: PotentialBank,
    counters: CostCounters,
}

impl<'a> SwConvEngine<'a> {
    pub fn new(
        kernel: &'a DenseKernel,
        params: &'a LayerParams,
        pad: usize,
        frac_bits: u32,
    ) -> Result<Self, Error> {
        let dims = kernel.dims();
        if dims.in_w() < 2 * pad + 1 {
            return Err(Error::BadParam(format!(
                "padding {pad} too large for input width {}",
                dims.in_w()
            )));
        }
        Ok(Self {
            kernel,
            params,
            frac_bits,
            pad,
            bank: PotentialBank::zeros(dims.oc, dims.oi),
            counters: CostCounters::default(),
        })
    }

    pub fn source_width(&self) -> usize {
        self.kernel.dims().in_w() - 2 * self.pad
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    pub fn bank(&self) -> &PotentialBank {
        &self.bank
    }

    /// Runs one timestep over pre-gathered input rows (unpadded).
    pub fn run_timestep(&mut self, rows: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, Error> {
        let dims = self.kernel.dims();
        if rows.len() != dims.ic {
            return Err(Error::DimMismatch {
                what: "input channel count",
                expected: dims.ic,
                actual: rows.len(),
            });
        }
        let width = self.source_width();
        let mut padded = vec![vec![0u8; dims.in_w()]; dims.ic];
        for (ic, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::DimMismatch {
                    what: "input row width",
                    expected: width,
                    actual: row.len(),
                });
            }
            padded[ic][self.pad..self.pad + width].copy_from_slice(row);
        }

        // Leak and pending reset, all neurons, before any accumulation.
        for oc in 0..dims.oc {
            self.counters.bank_loads += 1;
            for (x, st) in self.bank.row_mut(oc).iter_mut().enumerate() {
                *st = st.begin_timestep(&self.params.get(oc * dims.oi + x), self.frac_bits);
            }
        }

        // Sliding window: each window's input patch is read once and shared
        // by every output channel; every weight is fetched per window.
        for x in 0..dims.oi {
            self.counters.count_input_fetches((dims.kw * dims.ic) as u64);
            for oc in 0..dims.oc {
                let states = self.bank.row_mut(oc);
                for ic in 0..dims.ic {
                    for ci in 0..dims.kw {
                        self.counters.count_weight_fetches(1);
                        if padded[ic][x + ci] != 0 {
                            let w = self.kernel.get(oc, ic, ci);
                            states[x].v = states[x].v.add_weight(w);
                            self.counters.accumulations += 1;
                        }
                    }
                }
            }
        }

        // Fire and store.
        let mut out = Vec::with_capacity(dims.oc);
        for oc in 0..dims.oc {
            let mut row = vec![0u8; dims.oi];
            for (x, st) in self.bank.row_mut(oc).iter_mut().enumerate() {
                let (spike, next) = st.fire(&self.params.get(oc * dims.oi + x));
                row[x] = spike as u8;
                *st = next;
            }
            self.counters.bank_stores += 1;
            out.push(row);
        }
        Ok(out)
    }

    /// Convenience run over a whole materialized trace.
    pub fn run_trace(mut self, input: &SpikeTensor) -> Result<(SpikeTensor, CostCounters), Error> {
        let dims = self.kernel.dims();
        if input.channels() != dims.ic {
            return Err(Error::DimMismatch {
                what: "input channel count",
                expected: dims.ic,
                actual: input.channels(),
            });
        }
        let mut ofm = SpikeTensor::zeros(input.timesteps(), dims.oc, dims.oi);
        for t in 0..input.timesteps() {
            let rows: Vec<Vec<u8>> = (0..dims.ic).map(|c| input.row(t, c).to_vec()).collect();
            let out = self.run_timestep(&rows)?;
            for (oc, row) in out.iter().enumerate() {
                ofm.set_row(t, oc, row);
            }
        }
        Ok((ofm, self.counters))
    }
}

/// Dense fully-connected reference: input-gated accumulation with no weight
/// masking, so every active input costs a weight fetch and an add — zero
/// weights included.
pub struct SwFcEngine<'a> {
    weights: &'a [FixedPoint16],
    in_width: usize,
    out_width: usize,
    params: &'a LayerParams,
    frac_bits: u32,
    bank: PotentialBank,
    counters: CostCounters,
}

impl<'a> SwFcEngine<'a> {
    pub fn new(
        weights: &'a [FixedPoint16],
        in_width: usize,
        out_width: usize,
        params: &'a LayerParams,
        frac_bits: u32,
    ) -> Result<Self, Error> {
        if weights.len() != in_width * out_width {
            return Err(Error::DimMismatch {
                what: "fc weight count",
                expected: in_width * out_width,
                actual: weights.len(),
            });
        }
        Ok(Self {
            weights,
            in_width,
            out_width,
            params,
            frac_bits,
            bank: PotentialBank::zeros(1, out_width),
            counters: CostCounters::default(),
        })
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    pub fn bank(&self) -> &PotentialBank {
        &self.bank
    }

    pub fn run_timestep(&mut self, ifm: &[u8]) -> Result<Vec<u8>, Error> {
        if ifm.len() != self.in_width {
            return Err(Error::DimMismatch {
                what: "fc input width",
                expected: self.in_width,
                actual: ifm.len(),
            });
        }
        let mut out = vec![0u8; self.out_width];
        for o in 0..self.out_width {
            self.counters.bank_loads += 1;
            let p = self.params.get(o);
            let st = &mut self.bank.row_mut(0)[o];
            *st = st.begin_timestep(&p, self.frac_bits);
            self.counters.count_input_fetches(self.in_width as u64);
            for (i, &bit) in ifm.iter().enumerate() {
                if bit != 0 {
                    self.counters.count_weight_fetches(1);
                    st.v = st.v.add_weight(self.weights[o * self.in_width + i]);
                    self.counters.accumulations += 1;
                }
            }
            let (spike, next) = st.fire(&p);
            out[o] = spike as u8;
            *st = next;
            self.counters.bank_stores += 1;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coo::ConvDims;
    use crate::lif::NeuronParams;

    fn fx(raw: i16) -> FixedPoint16 {
        FixedPoint16::from_raw(raw)
    }

    fn uniform_params(alpha: i16, theta: i16, u_th0: i16) -> LayerParams {
        LayerParams::uniform(NeuronParams::new(fx(alpha), fx(theta), fx(u_th0), 8).unwrap())
    }

    #[test]
    fn dense_costs_ignore_weight_sparsity() {
        // A kernel that is mostly zeros still pays full dense fetch costs.
        let dims = ConvDims::new(3, 2, 4, 4).unwrap();
        let mut kernel = DenseKernel::zeros(dims);
        kernel.set(0, 0, 0, fx(50));
        let params = uniform_params(128, 0, 255);
        let engine = SwConvEngine::new(&kernel, &params, 0, 8).unwrap();
        let mut input = SpikeTensor::zeros(1, 2, 6);
        for x in 0..6 {
            input.set(0, 0, x, true);
            input.set(0, 1, x, true);
        }
        let (_, counters) = engine.run_trace(&input).unwrap();
        // Per window: kw*ic input reads once, kw*ic weight reads per oc.
        assert_eq!(counters.input_fetches, 4 * 6);
        assert_eq!(counters.weight_fetches, 4 * 6 * 4);
        // Every input bit is 1, so every visit accumulates (zeros included).
        assert_eq!(counters.accumulations, 4 * 6 * 4);
    }

    #[test]
    fn fc_counts_active_inputs_only() {
        let params = uniform_params(0, 0, 100);
        let weights: Vec<FixedPoint16> = (0..8).map(|i| fx(if i % 2 == 0 { 60 } else { 0 })).collect();
        let mut engine = SwFcEngine::new(&weights, 4, 2, &params, 8).unwrap();
        let out = engine.run_timestep(&[1, 0, 1, 1]).unwrap();
        // 3 active inputs, 2 neurons: 6 fetches and 6 adds, even though two
        // of the touched weights are zero.
        assert_eq!(engine.counters.weight_fetches, 6);
        assert_eq!(engine.counters.accumulations, 6);
        assert_eq!(engine.counters.input_fetches, 8);
        assert_eq!(out[0], 1);
    }
}
