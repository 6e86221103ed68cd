//! Weight-masked fully-connected engine and the max-pool helper.
//!
//! The FC engine keeps a one-bit weight mask per position. Each timestep it
//! reads the whole input row once per neuron, ANDs it with the neuron's mask,
//! and fetches only the weights that survive — so a weight is fetched exactly
//! when it is nonzero *and* its input spiked. Against an input-gated dense
//! baseline this saves the fetches and adds that zero weights would have
//! wasted, while producing bit-identical potentials (the skipped adds are
//! zero).

use crate::counters::CostCounters;
use crate::error::Error;
use crate::fixed::FixedPoint16;
use crate::lif::{LayerParams, PotentialBank};

/// Fully-connected weights with their nonzero mask, row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedFcWeights {
    in_width: usize,
    out_width: usize,
    w: Vec<FixedPoint16>,
    /// `wm[o * in_width + i] == 1` iff `w[o * in_width + i] != 0`.
    wm: Vec<u8>,
}

impl MaskedFcWeights {
    pub fn from_dense(
        w: Vec<FixedPoint16>,
        in_width: usize,
        out_width: usize,
    ) -> Result<Self, Error> {
        if w.len() != in_width * out_width {
            return Err(Error::DimMismatch {
                what: "fc weight count",
                expected: in_width * out_width,
                actual: w.len(),
            });
        }
        let wm = w.iter().map(|v| (!v.is_zero()) as u8).collect();
        Ok(Self {
            in_width,
            out_width,
            w,
            wm,
        })
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn weights(&self) -> &[FixedPoint16] {
        &self.w
    }

    pub fn mask(&self) -> &[u8] {
        &self.wm
    }

    pub fn nonzero_count(&self) -> usize {
        self.wm.iter().map(|&m| m as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.nonzero_count() as f64 / self.w.len().max(1) as f64
    }
}

/// Streaming state for one masked FC layer.
pub struct FcEngine<'a> {
    weights: &'a MaskedFcWeights,
    params: &'a LayerParams,
    frac_bits: u32,
    bank: PotentialBank,
    counters: CostCounters,
}

impl<'a> FcEngine<'a> {
    pub fn new(weights: &'a MaskedFcWeights, params: &'a LayerParams, frac_bits: u32) -> Self {
        Self {
            weights,
            params,
            frac_bits,
            bank: PotentialBank::zeros(1, weights.out_width),
            counters: CostCounters::default(),
        }
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    pub fn bank(&self) -> &PotentialBank {
        &self.bank
    }

    /// One timestep: the flattened input row in, one output row out.
    pub fn run_timestep(&mut self, ifm: &[u8]) -> Result<Vec<u8>, Error> {
        let (in_w, out_w) = (self.weights.in_width, self.weights.out_width);
        if ifm.len() != in_w {
            return Err(Error::DimMismatch {
                what: "fc input width",
                expected: in_w,
                actual: ifm.len(),
            });
        }
        let mut out = vec![0u8; out_w];
        for o in 0..out_w {
            self.counters.bank_loads += 1;
            let p = self.params.get(o);
            let st = &mut self.bank.row_mut(0)[o];
            *st = st.begin_timestep(&p, self.frac_bits);
            // The full input row is scanned once per neuron; only positions
            // where input and mask agree cost a weight fetch and an add.
            self.counters.count_input_fetches(in_w as u64);
            let row = o * in_w;
            for (i, &bit) in ifm.iter().enumerate() {
                if bit != 0 && self.weights.wm[row + i] != 0 {
                    self.counters.count_weight_fetches(1);
                    st.v = st.v.add_weight(self.weights.w[row + i]);
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

/// Max-pools one spike row: OR over non-overlapping windows (stride equal to
/// the window), shrinking the row by the window factor. On spike values max
/// and OR are the same operation.
pub fn max_pool_row(row: &[u8], window: usize) -> Result<Vec<u8>, Error> {
    if window == 0 || row.len() % window != 0 {
        return Err(Error::BadParam(format!(
            "pool window {window} does not divide row width {}",
            row.len()
        )));
    }
    Ok(row
        .chunks(window)
        .map(|c| c.iter().copied().max().unwrap())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lif::NeuronParams;
    use crate::reference::SwFcEngine;
    use proptest::prelude::*;

    fn fx(raw: i16) -> FixedPoint16 {
        FixedPoint16::from_raw(raw)
    }

    fn uniform_params(alpha: i16, theta: i16, u_th0: i16) -> LayerParams {
        LayerParams::uniform(NeuronParams::new(fx(alpha), fx(theta), fx(u_th0), 8).unwrap())
    }

    #[test]
    fn mask_gates_fetches() {
        // Four inputs, one neuron, weights [0, w, w, 0]: with input 1011 the
        // fetch mask is 0010 — one fetch where the dense baseline pays three.
        let weights =
            MaskedFcWeights::from_dense(vec![fx(0), fx(80), fx(80), fx(0)], 4, 1).unwrap();
        let params = uniform_params(0, 0, 50);
        let mut engine = FcEngine::new(&weights, &params, 8);
        let out = engine.run_timestep(&[1, 0, 1, 1]).unwrap();
        assert_eq!(engine.counters.weight_fetches, 1);
        assert_eq!(engine.counters.accumulations, 1);
        assert_eq!(engine.counters.input_fetches, 4);
        // Single add of 80 > threshold 50.
        assert_eq!(out, vec![1]);

        let mut baseline = SwFcEngine::new(weights.weights(), 4, 1, &params, 8).unwrap();
        let base_out = baseline.run_timestep(&[1, 0, 1, 1]).unwrap();
        assert_eq!(base_out, out);
        assert_eq!(baseline.counters().weight_fetches, 3);
    }

    #[test]
    fn pool_is_windowed_or() {
        assert_eq!(
            max_pool_row(&[1, 0, 0, 0, 0, 1, 0, 0], 2).unwrap(),
            vec![1, 0, 1, 0]
        );
        assert_eq!(max_pool_row(&[0, 0, 0], 3).unwrap(), vec![0]);
        assert!(max_pool_row(&[1, 0, 1], 2).is_err());
        assert!(max_pool_row(&[1, 0], 0).is_err());
    }

    proptest! {
        #[test]
        fn masked_fc_matches_dense_baseline(
            in_w in 1usize..=24,
            out_w in 1usize..=8,
            seed in 0u64..1000,
        ) {
            // Random weights with plenty of zeros, random input, multiple
            // timesteps: outputs and final potentials must agree exactly.
            let mut x = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            let mut next = || {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                x
            };
            let w: Vec<FixedPoint16> = (0..in_w * out_w)
                .map(|_| {
                    let r = next();
                    if r % 3 == 0 { fx(0) } else { fx((r % 200) as i16 - 100) }
                })
                .collect();
            let weights = MaskedFcWeights::from_dense(w.clone(), in_w, out_w).unwrap();
            let params = uniform_params(128, 64, 40);
            let mut masked = FcEngine::new(&weights, &params, 8);
            let mut dense = SwFcEngine::new(&w, in_w, out_w, &params, 8).unwrap();
            for _ in 0..6 {
                let ifm: Vec<u8> = (0..in_w).map(|_| (next() % 2) as u8).collect();
                let a = masked.run_timestep(&ifm).unwrap();
                let b = dense.run_timestep(&ifm).unwrap();
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(masked.bank().states(), dense.bank().states());
            // The mask can only reduce traffic.
            prop_assert!(
                masked.counters().weight_fetches <= dense.counters().weight_fetches
            );
        }
    }
}
