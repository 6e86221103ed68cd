//! Streaming sparse convolution engine.
//!
//! The engine consumes input spike rows one channel at a time, walks the COO
//! kernel in `(oc, ic, ci)` order as driven by a precomputed
//! [`IterationSchedule`], and produces output rows strictly in output-channel
//! order. Each nonzero weight is fetched exactly once per timestep and
//! applied across all output pixels, with the accumulate gated per pixel by
//! the input spike bit — zero input bits cost no accumulator work.

use crate::coo::{ic_index, oc_index, SparseKernelCOO};
use crate::counters::CostCounters;
use crate::error::Error;
use crate::lif::{LayerParams, PotentialBank};
use crate::schedule::{IterationSchedule, IterationTag};
use crate::spike::SpikeTensor;

/// Supplies input rows to an engine, one channel per call.
pub trait RowSource {
    fn next_row(&mut self) -> Result<Vec<u8>, Error>;
}

/// Receives output rows from an engine in emission order.
pub trait RowSink {
    fn emit_row(&mut self, row: Vec<u8>) -> Result<(), Error>;
}

/// Result of running one convolution layer over a full input trace.
#[derive(Debug, Clone)]
pub struct LayerRunResult {
    /// Output spikes, `[t][oc][oi]`.
    pub ofm: SpikeTensor,
    /// Work and traffic accumulated over the run.
    pub counters: CostCounters,
    /// Final membrane state (carried across timesteps during the run).
    pub bank: PotentialBank,
}

/// One convolution layer's streaming state.
///
/// The engine owns the potential bank and counters; the kernel, schedule and
/// parameters are borrowed so pipeline threads can share them.
pub struct ConvEngine<'a> {
    kernel: &'a SparseKernelCOO,
    schedule: &'a IterationSchedule,
    params: &'a LayerParams,
    frac_bits: u32,
    pad: usize,
    /// Layer position, only for error reporting.
    layer_index: usize,
    bank: PotentialBank,
    counters: CostCounters,
    /// Padded input rows buffered this timestep, `[ic][in_w]`.
    input_rows: Vec<Vec<u8>>,
    /// Which output-channel rows have been loaded and decayed this timestep.
    touched: Vec<bool>,
}

impl<'a> ConvEngine<'a> {
    pub fn new(
        kernel: &'a SparseKernelCOO,
        schedule: &'a IterationSchedule,
        params: &'a LayerParams,
        pad: usize,
        frac_bits: u32,
        layer_index: usize,
    ) -> Result<Self, Error> {
        let dims = kernel.dims();
        if schedule.n_normal() != kernel.nnz() as u64 {
            return Err(Error::DimMismatch {
                what: "schedule nonzero count",
                expected: kernel.nnz(),
                actual: schedule.n_normal() as usize,
            });
        }
        if dims.in_w() < 2 * pad + 1 {
            return Err(Error::BadParam(format!(
                "padding {pad} too large for input width {}",
                dims.in_w()
            )));
        }
        Ok(Self {
            kernel,
            schedule,
            params,
            frac_bits,
            pad,
            layer_index,
            bank: PotentialBank::zeros(dims.oc, dims.oi),
            counters: CostCounters::default(),
            input_rows: vec![vec![0u8; dims.in_w()]; dims.ic],
            touched: vec![false; dims.oc],
        })
    }

    /// Unpadded input row width this engine expects from upstream.
    pub fn source_width(&self) -> usize {
        self.kernel.dims().in_w() - 2 * self.pad
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    pub fn bank(&self) -> &PotentialBank {
        &self.bank
    }

    pub fn into_bank(self) -> PotentialBank {
        self.bank
    }

    /// Runs one timestep: consumes up to `ic` rows from `src` (always exactly
    /// `ic` by the end, draining any the schedule did not need early) and
    /// emits exactly `oc` rows to `sink` in channel order.
    pub fn run_timestep(
        &mut self,
        src: &mut impl RowSource,
        sink: &mut impl RowSink,
    ) -> Result<(), Error> {
        let dims = self.kernel.dims();
        let entries = self.kernel.entries();
        self.touched.fill(false);
        let mut ic_read = 0usize;
        let mut next_emit = 0usize;

        for tag in self.schedule.tags() {
            // One input channel streams in per iteration until all have
            // arrived. Buffering a row is plain dataflow, not a counted
            // fetch; fetches are the per-pixel enable-map reads below.
            if ic_read < dims.ic {
                self.buffer_row(ic_read, src)?;
                ic_read += 1;
            }
            match *tag {
                IterationTag::Normal(idx) => {
                    let e = entries[idx as usize];
                    let oc = oc_index(e.ri, dims.ic);
                    let ic = ic_index(e.ri, dims.ic);
                    debug_assert!(
                        ic < ic_read,
                        "schedule gated on a channel that has not arrived"
                    );
                    if !self.touched[oc] {
                        self.load_and_decay(oc);
                    }
                    self.counters.count_weight_fetches(1);
                    let row = &self.input_rows[ic];
                    let states = self.bank.row_mut(oc);
                    let ci = e.ci as usize;
                    let mut gated = 0u64;
                    for x in 0..dims.oi {
                        if row[x + ci] != 0 {
                            states[x].v = states[x].v.add_weight(e.d);
                            gated += 1;
                        }
                    }
                    self.counters.count_input_fetches(dims.oi as u64);
                    self.counters.accumulations += gated;
                    self.counters.iters_normal += 1;
                    let last_of_oc = match entries.get(idx as usize + 1) {
                        Some(n) => oc_index(n.ri, dims.ic) != oc,
                        None => true,
                    };
                    if last_of_oc {
                        self.fire_and_emit(oc, &mut next_emit, sink)?;
                    }
                }
                IterationTag::Empty => {
                    self.counters.iters_empty += 1;
                }
                IterationTag::Extra(oc) => {
                    let oc = oc as usize;
                    debug_assert!(!self.touched[oc], "all-zero channel flushed twice");
                    self.load_and_decay(oc);
                    self.fire_and_emit(oc, &mut next_emit, sink)?;
                    self.counters.iters_extra += 1;
                }
            }
        }

        // A very sparse schedule can finish before every input channel has
        // streamed in; pull the stragglers so upstream never blocks.
        while ic_read < dims.ic {
            self.buffer_row(ic_read, src)?;
            ic_read += 1;
        }

        if next_emit != dims.oc {
            return Err(Error::EmissionOrder {
                layer: self.layer_index,
                expected: dims.oc,
                actual: next_emit,
            });
        }
        Ok(())
    }

    /// Convenience run over a whole materialized trace.
    pub fn run_trace(mut self, input: &SpikeTensor) -> Result<LayerRunResult, Error> {
        let dims = self.kernel.dims();
        if input.channels() != dims.ic {
            return Err(Error::DimMismatch {
                what: "input channel count",
                expected: dims.ic,
                actual: input.channels(),
            });
        }
        if input.width() != self.source_width() {
            return Err(Error::DimMismatch {
                what: "input row width",
                expected: self.source_width(),
                actual: input.width(),
            });
        }
        let mut ofm = SpikeTensor::zeros(input.timesteps(), dims.oc, dims.oi);
        for t in 0..input.timesteps() {
            let mut src = TensorSource::new(input, t, self.layer_index);
            let mut sink = TensorSink::new(&mut ofm, t);
            self.run_timestep(&mut src, &mut sink)?;
        }
        Ok(LayerRunResult {
            ofm,
            counters: self.counters,
            bank: self.bank,
        })
    }

    fn buffer_row(&mut self, ic: usize, src: &mut impl RowSource) -> Result<(), Error> {
        let row = src.next_row()?;
        let width = self.source_width();
        if row.len() != width {
            return Err(Error::DimMismatch {
                what: "input row width",
                expected: width,
                actual: row.len(),
            });
        }
        let buf = &mut self.input_rows[ic];
        buf.fill(0);
        buf[self.pad..self.pad + width].copy_from_slice(&row);
        Ok(())
    }

    /// First touch of an output-channel row in a timestep: one bank load,
    /// then leak + pending reset for every neuron in the row.
    fn load_and_decay(&mut self, oc: usize) {
        let dims = self.kernel.dims();
        self.counters.bank_loads += 1;
        let frac = self.frac_bits;
        let params = self.params;
        for (x, st) in self.bank.row_mut(oc).iter_mut().enumerate() {
            *st = st.begin_timestep(&params.get(oc * dims.oi + x), frac);
        }
        self.touched[oc] = true;
    }

    /// Threshold the row, emit its spikes, and store it back (one bank
    /// store). Channels must leave in order.
    fn fire_and_emit(
        &mut self,
        oc: usize,
        next_emit: &mut usize,
        sink: &mut impl RowSink,
    ) -> Result<(), Error> {
        if oc != *next_emit {
            return Err(Error::EmissionOrder {
                layer: self.layer_index,
                expected: *next_emit,
                actual: oc,
            });
        }
        let dims = self.kernel.dims();
        let mut out = vec![0u8; dims.oi];
        let params = self.params;
        for (x, st) in self.bank.row_mut(oc).iter_mut().enumerate() {
            let (spike, next) = st.fire(&params.get(oc * dims.oi + x));
            out[x] = spike as u8;
            *st = next;
        }
        self.counters.bank_stores += 1;
        *next_emit += 1;
        sink.emit_row(out)
    }
}

/// Reads one timestep's rows out of a materialized tensor.
pub struct TensorSource<'a> {
    tensor: &'a SpikeTensor,
    t: usize,
    next_channel: usize,
    layer_index: usize,
}

impl<'a> TensorSource<'a> {
    pub fn new(tensor: &'a SpikeTensor, t: usize, layer_index: usize) -> Self {
        Self {
            tensor,
            t,
            next_channel: 0,
            layer_index,
        }
    }
}

impl RowSource for TensorSource<'_> {
    fn next_row(&mut self) -> Result<Vec<u8>, Error> {
        if self.next_channel >= self.tensor.channels() {
            return Err(Error::StreamUnderrun {
                layer: self.layer_index,
            });
        }
        let row = self.tensor.row(self.t, self.next_channel).to_vec();
        self.next_channel += 1;
        Ok(row)
    }
}

/// Writes emitted rows into a materialized tensor at one timestep.
pub struct TensorSink<'a> {
    tensor: &'a mut SpikeTensor,
    t: usize,
    next_channel: usize,
}

impl<'a> TensorSink<'a> {
    pub fn new(tensor: &'a mut SpikeTensor, t: usize) -> Self {
        Self {
            tensor,
            t,
            next_channel: 0,
        }
    }

    pub fn emitted(&self) -> usize {
        self.next_channel
    }
}

impl RowSink for TensorSink<'_> {
    fn emit_row(&mut self, row: Vec<u8>) -> Result<(), Error> {
        self.tensor.set_row(self.t, self.next_channel, &row);
        self.next_channel += 1;
        Ok(())
    }
}
