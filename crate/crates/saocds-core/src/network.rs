//! Multi-layer networks: shape-checked layer chains and the two runners
//! (sequential and pipelined) for both engine families.
//!
//! The pipelined runner mirrors the intended hardware organization: one
//! thread per layer, rows flowing through small bounded queues, every layer
//! working on the same timestep's data as it streams past. It must produce
//! exactly the same spikes and counters as the sequential runner — the only
//! difference is wall-clock concurrency.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, SyncSender};
use std::time::Duration;

use crate::conv::{ConvEngine, RowSink, RowSource};
use crate::coo::SparseKernelCOO;
use crate::counters::CostCounters;
use crate::error::Error;
use crate::fc::{max_pool_row, FcEngine, MaskedFcWeights};
use crate::lif::LayerParams;
use crate::metrics::{latency_model, LatencyReport};
use crate::reference::{SwConvEngine, SwFcEngine};
use crate::schedule::{build_schedule, IterationSchedule};
use crate::spike::SpikeTensor;

/// How long the pipelined collector waits on a silent pipe before declaring
/// the run wedged. Generous: healthy runs never get close.
const WATCHDOG_TIMEOUT: Duration = Duration::from_secs(30);

/// Sparse streaming convolution layer: kernel, its derived schedule, neuron
/// parameters, and symmetric zero padding.
#[derive(Debug, Clone)]
pub struct ConvLayerSpec {
    pub kernel: SparseKernelCOO,
    pub schedule: IterationSchedule,
    pub params: LayerParams,
    pub pad: usize,
}

/// Weight-masked fully-connected layer. Upstream `(channels, width)` rows are
/// flattened channel-major: input index = `channel * width + pixel`.
#[derive(Debug, Clone)]
pub struct FcLayerSpec {
    pub weights: MaskedFcWeights,
    pub params: LayerParams,
}

/// Non-overlapping max pool over the width dimension, per channel.
#[derive(Debug, Clone)]
pub struct PoolLayerSpec {
    pub window: usize,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(ConvLayerSpec),
    MaxPool(PoolLayerSpec),
    Fc(FcLayerSpec),
}

impl Layer {
    /// Builds a convolution layer, deriving its iteration schedule.
    pub fn conv(kernel: SparseKernelCOO, params: LayerParams, pad: usize) -> Self {
        let schedule = build_schedule(&kernel);
        Layer::Conv(ConvLayerSpec {
            kernel,
            schedule,
            params,
            pad,
        })
    }

    pub fn fc(weights: MaskedFcWeights, params: LayerParams) -> Self {
        Layer::Fc(FcLayerSpec { weights, params })
    }

    pub fn max_pool(window: usize) -> Self {
        Layer::MaxPool(PoolLayerSpec { window })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::MaxPool(_) => "max_pool",
            Layer::Fc(_) => "fc",
        }
    }
}

/// A validated layer chain plus global configuration.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    frac_bits: u32,
    input_channels: usize,
    input_width: usize,
    layers: Vec<Layer>,
    /// When set, runs also report the final layer's membrane potentials
    /// (classification readout by potential instead of spike count).
    pub report_final_potentials: bool,
}

impl NetworkSpec {
    pub fn new(
        frac_bits: u32,
        input_channels: usize,
        input_width: usize,
        layers: Vec<Layer>,
    ) -> Result<Self, Error> {
        let net = Self {
            frac_bits,
            input_channels,
            input_width,
            layers,
            report_final_potentials: false,
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks that every layer's input shape matches what the previous layer
    /// produces. Returns the full shape chain, `(channels, width)` per stage,
    /// starting with the network input.
    pub fn validate(&self) -> Result<Vec<(usize, usize)>, Error> {
        if self.input_channels == 0 || self.input_width == 0 {
            return Err(Error::BadParam(
                "network input shape must be non-empty".into(),
            ));
        }
        let mut shapes = vec![(self.input_channels, self.input_width)];
        let (mut c, mut w) = (self.input_channels, self.input_width);
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(spec) => {
                    let dims = spec.kernel.dims();
                    if dims.ic != c {
                        return Err(Error::ChainMismatch {
                            layer: i,
                            detail: format!(
                                "kernel expects {} input channels, upstream provides {c}",
                                dims.ic
                            ),
                        });
                    }
                    if dims.in_w() != w + 2 * spec.pad {
                        return Err(Error::ChainMismatch {
                            layer: i,
                            detail: format!(
                                "kernel padded width {} but upstream width {w} with padding {}",
                                dims.in_w(),
                                spec.pad
                            ),
                        });
                    }
                    if spec.schedule.n_normal() != spec.kernel.nnz() as u64 {
                        return Err(Error::ChainMismatch {
                            layer: i,
                            detail: "schedule does not match kernel nonzero count".into(),
                        });
                    }
                    if let Some(t) = spec.params.overrides() {
                        if t.len() != dims.oc * dims.oi {
                            return Err(Error::ChainMismatch {
                                layer: i,
                                detail: format!(
                                    "{} per-neuron overrides for {} neurons",
                                    t.len(),
                                    dims.oc * dims.oi
                                ),
                            });
                        }
                    }
                    c = dims.oc;
                    w = dims.oi;
                }
                Layer::MaxPool(spec) => {
                    if spec.window == 0 || w % spec.window != 0 {
                        return Err(Error::ChainMismatch {
                            layer: i,
                            detail: format!(
                                "pool window {} does not divide width {w}",
                                spec.window
                            ),
                        });
                    }
                    w /= spec.window;
                }
                Layer::Fc(spec) => {
                    if spec.weights.in_width() != c * w {
                        return Err(Error::ChainMismatch {
                            layer: i,
                            detail: format!(
                                "fc expects {} inputs, upstream provides {c}x{w} = {}",
                                spec.weights.in_width(),
                                c * w
                            ),
                        });
                    }
                    if let Some(t) = spec.params.overrides() {
                        if t.len() != spec.weights.out_width() {
                            return Err(Error::ChainMismatch {
                                layer: i,
                                detail: format!(
                                    "{} per-neuron overrides for {} neurons",
                                    t.len(),
                                    spec.weights.out_width()
                                ),
                            });
                        }
                    }
                    c = 1;
                    w = spec.weights.out_width();
                }
            }
            shapes.push((c, w));
        }
        Ok(shapes)
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output_shape(&self) -> (usize, usize) {
        *self
            .validate()
            .expect("validated at construction")
            .last()
            .unwrap()
    }
}

/// Execution strategy for the streaming engine family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// One layer at a time over the whole trace, intermediates materialized.
    Sequential,
    /// One thread per layer with bounded row queues.
    Pipelined,
}

/// Everything a network run produces.
#[derive(Debug, Clone)]
pub struct NetworkRunOutput {
    /// Final layer's spike output, `[t][channel][pixel]`.
    pub output: SpikeTensor,
    /// Counters per layer, in layer order.
    pub per_layer: Vec<CostCounters>,
    /// Static latency estimate for this network and timestep count.
    pub latency: LatencyReport,
    /// Final layer's membrane potentials (raw accumulator values, row-major)
    /// when the network requests potential readout and the final layer has
    /// neurons.
    pub final_potentials: Option<Vec<i32>>,
    /// Every layer's output trace, when capture was requested (sequential
    /// runs only).
    pub layer_outputs: Option<Vec<SpikeTensor>>,
}

impl NetworkRunOutput {
    /// Sum of all per-layer counters.
    pub fn totals(&self) -> CostCounters {
        let mut total = CostCounters::default();
        for c in &self.per_layer {
            total.add(c);
        }
        total
    }
}

fn check_input(net: &NetworkSpec, input: &SpikeTensor) -> Result<(), Error> {
    if input.channels() != net.input_channels {
        return Err(Error::DimMismatch {
            what: "network input channels",
            expected: net.input_channels,
            actual: input.channels(),
        });
    }
    if input.width() != net.input_width {
        return Err(Error::DimMismatch {
            what: "network input width",
            expected: net.input_width,
            actual: input.width(),
        });
    }
    Ok(())
}

/// Runs the streaming engine family over a full input trace.
pub fn saocds_network_run(
    net: &NetworkSpec,
    input: &SpikeTensor,
    mode: RunMode,
    capture_layer_outputs: bool,
) -> Result<NetworkRunOutput, Error> {
    check_input(net, input)?;
    match mode {
        RunMode::Sequential => run_sequential(net, input, EngineFamily::Streaming, capture_layer_outputs),
        RunMode::Pipelined => run_pipelined(net, input),
    }
}

/// Runs the dense reference family (always sequential).
pub fn sw_network_run(
    net: &NetworkSpec,
    input: &SpikeTensor,
    capture_layer_outputs: bool,
) -> Result<NetworkRunOutput, Error> {
    check_input(net, input)?;
    run_sequential(net, input, EngineFamily::DenseReference, capture_layer_outputs)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum EngineFamily {
    Streaming,
    DenseReference,
}

fn run_sequential(
    net: &NetworkSpec,
    input: &SpikeTensor,
    family: EngineFamily,
    capture: bool,
) -> Result<NetworkRunOutput, Error> {
    let t_steps = input.timesteps();
    let mut cur = input.clone();
    let mut per_layer = Vec::with_capacity(net.layers.len());
    let mut captured = Vec::new();
    let mut final_potentials = None;

    for (i, layer) in net.layers.iter().enumerate() {
        let is_last = i + 1 == net.layers.len();
        match layer {
            Layer::Conv(spec) => match family {
                EngineFamily::Streaming => {
                    let engine = ConvEngine::new(
                        &spec.kernel,
                        &spec.schedule,
                        &spec.params,
                        spec.pad,
                        net.frac_bits,
                        i,
                    )?;
                    let result = engine.run_trace(&cur)?;
                    per_layer.push(result.counters);
                    if is_last && net.report_final_potentials {
                        final_potentials =
                            Some(result.bank.states().iter().map(|s| s.v.raw()).collect());
                    }
                    cur = result.ofm;
                }
                EngineFamily::DenseReference => {
                    let dense = spec.kernel.to_dense();
                    let engine = SwConvEngine::new(&dense, &spec.params, spec.pad, net.frac_bits)?;
                    if is_last && net.report_final_potentials {
                        // Need the bank after the run; run timestep by
                        // timestep to keep access to the engine.
                        let mut engine = engine;
                        let dims = dense.dims();
                        let mut ofm = SpikeTensor::zeros(t_steps, dims.oc, dims.oi);
                        for t in 0..t_steps {
                            let rows: Vec<Vec<u8>> =
                                (0..dims.ic).map(|c| cur.row(t, c).to_vec()).collect();
                            let out = engine.run_timestep(&rows)?;
                            for (oc, row) in out.iter().enumerate() {
                                ofm.set_row(t, oc, row);
                            }
                        }
                        per_layer.push(*engine.counters());
                        final_potentials =
                            Some(engine.bank().states().iter().map(|s| s.v.raw()).collect());
                        cur = ofm;
                    } else {
                        let (ofm, counters) = engine.run_trace(&cur)?;
                        per_layer.push(counters);
                        cur = ofm;
                    }
                }
            },
            Layer::MaxPool(spec) => {
                let (c_in, w_in) = (cur.channels(), cur.width());
                let mut out = SpikeTensor::zeros(t_steps, c_in, w_in / spec.window);
                let mut counters = CostCounters::default();
                for t in 0..t_steps {
                    for c in 0..c_in {
                        let pooled = max_pool_row(cur.row(t, c), spec.window)?;
                        counters.count_input_fetches(w_in as u64);
                        out.set_row(t, c, &pooled);
                    }
                }
                per_layer.push(counters);
                cur = out;
            }
            Layer::Fc(spec) => {
                let (c_in, w_in) = (cur.channels(), cur.width());
                let out_w = spec.weights.out_width();
                let mut out = SpikeTensor::zeros(t_steps, 1, out_w);
                let run_result = match family {
                    EngineFamily::Streaming => {
                        let mut engine = FcEngine::new(&spec.weights, &spec.params, net.frac_bits);
                        for t in 0..t_steps {
                            let ifm = flatten_rows(&cur, t, c_in, w_in);
                            let row = engine.run_timestep(&ifm)?;
                            out.set_row(t, 0, &row);
                        }
                        (*engine.counters(), bank_potentials(engine.bank()))
                    }
                    EngineFamily::DenseReference => {
                        let mut engine = SwFcEngine::new(
                            spec.weights.weights(),
                            spec.weights.in_width(),
                            out_w,
                            &spec.params,
                            net.frac_bits,
                        )?;
                        for t in 0..t_steps {
                            let ifm = flatten_rows(&cur, t, c_in, w_in);
                            let row = engine.run_timestep(&ifm)?;
                            out.set_row(t, 0, &row);
                        }
                        (*engine.counters(), bank_potentials(engine.bank()))
                    }
                };
                per_layer.push(run_result.0);
                if is_last && net.report_final_potentials {
                    final_potentials = Some(run_result.1);
                }
                cur = out;
            }
        }
        if capture {
            captured.push(cur.clone());
        }
    }

    Ok(NetworkRunOutput {
        output: cur,
        per_layer,
        latency: latency_model(net, t_steps as u64),
        final_potentials,
        layer_outputs: capture.then_some(captured),
    })
}

fn flatten_rows(tensor: &SpikeTensor, t: usize, channels: usize, width: usize) -> Vec<u8> {
    let mut flat = Vec::with_capacity(channels * width);
    for c in 0..channels {
        flat.extend_from_slice(tensor.row(t, c));
    }
    flat
}

fn bank_potentials(bank: &crate::lif::PotentialBank) -> Vec<i32> {
    bank.states().iter().map(|s| s.v.raw()).collect()
}

// ---------------------------------------------------------------------------
// Pipelined runner
// ---------------------------------------------------------------------------

struct ChannelSource<'a> {
    rx: &'a Receiver<Vec<u8>>,
    layer: usize,
}

impl RowSource for ChannelSource<'_> {
    fn next_row(&mut self) -> Result<Vec<u8>, Error> {
        self.rx
            .recv()
            .map_err(|_| Error::StreamUnderrun { layer: self.layer })
    }
}

struct ChannelSink<'a> {
    tx: &'a SyncSender<Vec<u8>>,
    layer: usize,
    rows_out: &'a AtomicU64,
}

impl RowSink for ChannelSink<'_> {
    fn emit_row(&mut self, row: Vec<u8>) -> Result<(), Error> {
        self.tx.send(row).map_err(|_| Error::PipelineStalled {
            layer: self.layer,
            detail: "downstream hung up".into(),
        })?;
        self.rows_out.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }
}

/// Per-layer worker body: pulls rows for `t_steps` timesteps, pushes results
/// downstream, returns its counters (and final potentials for the last
/// layer).
fn run_stage(
    net: &NetworkSpec,
    index: usize,
    shapes: &[(usize, usize)],
    t_steps: usize,
    rx: Receiver<Vec<u8>>,
    tx: SyncSender<Vec<u8>>,
    rows_out: &AtomicU64,
) -> Result<(CostCounters, Option<Vec<i32>>), Error> {
    let layer = &net.layers()[index];
    let (c_in, w_in) = shapes[index];
    let is_last = index + 1 == net.layers().len();
    let want_bank = is_last && net.report_final_potentials;
    let mut src = ChannelSource { rx: &rx, layer: index };
    let mut sink = ChannelSink {
        tx: &tx,
        layer: index,
        rows_out,
    };
    match layer {
        Layer::Conv(spec) => {
            let mut engine = ConvEngine::new(
                &spec.kernel,
                &spec.schedule,
                &spec.params,
                spec.pad,
                net.frac_bits(),
                index,
            )?;
            for _ in 0..t_steps {
                engine.run_timestep(&mut src, &mut sink)?;
            }
            let counters = *engine.counters();
            let bank = want_bank.then(|| bank_potentials(engine.bank()));
            Ok((counters, bank))
        }
        Layer::MaxPool(spec) => {
            let mut counters = CostCounters::default();
            for _ in 0..t_steps {
                for _ in 0..c_in {
                    let row = src.next_row()?;
                    counters.count_input_fetches(w_in as u64);
                    sink.emit_row(max_pool_row(&row, spec.window)?)?;
                }
            }
            Ok((counters, None))
        }
        Layer::Fc(spec) => {
            let mut engine = FcEngine::new(&spec.weights, &spec.params, net.frac_bits());
            for _ in 0..t_steps {
                let mut ifm = Vec::with_capacity(c_in * w_in);
                for _ in 0..c_in {
                    ifm.extend_from_slice(&src.next_row()?);
                }
                sink.emit_row(engine.run_timestep(&ifm)?)?;
            }
            let counters = *engine.counters();
            let bank = want_bank.then(|| bank_potentials(engine.bank()));
            Ok((counters, bank))
        }
    }
}

fn run_pipelined(net: &NetworkSpec, input: &SpikeTensor) -> Result<NetworkRunOutput, Error> {
    let t_steps = input.timesteps();
    let n = net.layers().len();
    let shapes = net.validate()?;
    if n == 0 {
        return Ok(NetworkRunOutput {
            output: input.clone(),
            per_layer: Vec::new(),
            latency: latency_model(net, t_steps as u64),
            final_potentials: None,
            layer_outputs: None,
        });
    }

    let (out_c, out_w) = shapes[n];
    let mut output = SpikeTensor::zeros(t_steps, out_c, out_w);
    let rows_out: Vec<AtomicU64> = (0..n).map(|_| AtomicU64::new(0)).collect();
    let mut stage_results: Vec<Option<Result<(CostCounters, Option<Vec<i32>>), Error>>> =
        (0..n).map(|_| None).collect();
    let mut collect_err: Option<Error> = None;

    std::thread::scope(|scope| {
        // Row queues between stages; depth 2 gives each hop double buffering
        // without letting any stage run far ahead.
        let mut txs = Vec::with_capacity(n + 1);
        let mut rxs = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            let (tx, rx) = std::sync::mpsc::sync_channel::<Vec<u8>>(2);
            txs.push(tx);
            rxs.push(rx);
        }
        // Wire up: feeder -> stage 0 -> ... -> stage n-1 -> collector.
        rxs.reverse();

        let feeder_tx = txs.remove(0);
        scope.spawn(move || {
            for t in 0..t_steps {
                for c in 0..input.channels() {
                    if feeder_tx.send(input.row(t, c).to_vec()).is_err() {
                        return; // downstream died; its error is reported
                    }
                }
            }
        });

        let mut handles = Vec::with_capacity(n);
        for (i, tx) in txs.into_iter().enumerate() {
            let rx = rxs.pop().expect("one receiver per stage");
            let rows_out = &rows_out[i];
            let shapes = &shapes;
            handles.push(
                scope.spawn(move || run_stage(net, i, shapes, t_steps, rx, tx, rows_out)),
            );
        }

        let collector_rx = rxs.pop().expect("collector receiver");
        'collect: for t in 0..t_steps {
            for c in 0..out_c {
                match collector_rx.recv_timeout(WATCHDOG_TIMEOUT) {
                    Ok(row) => {
                        if row.len() == out_w {
                            output.set_row(t, c, &row);
                        } else {
                            collect_err = Some(Error::DimMismatch {
                                what: "final row width",
                                expected: out_w,
                                actual: row.len(),
                            });
                            break 'collect;
                        }
                    }
                    Err(std::sync::mpsc::RecvTimeoutError::Timeout) => {
                        let expected: Vec<u64> = (0..n)
                            .map(|i| (t_steps * shapes[i + 1].0) as u64)
                            .collect();
                        let stalled = (0..n)
                            .find(|&i| rows_out[i].load(Ordering::Relaxed) < expected[i])
                            .unwrap_or(n - 1);
                        collect_err = Some(Error::PipelineStalled {
                            layer: stalled,
                            detail: format!(
                                "no output for {}s; stage emitted {} of {} rows",
                                WATCHDOG_TIMEOUT.as_secs(),
                                rows_out[stalled].load(Ordering::Relaxed),
                                expected[stalled]
                            ),
                        });
                        break 'collect;
                    }
                    Err(std::sync::mpsc::RecvTimeoutError::Disconnected) => {
                        // A stage died; its own error (joined below) explains why.
                        break 'collect;
                    }
                }
            }
        }
        // Drop our receiver so erroring stages unblock, then join.
        drop(collector_rx);
        for (i, h) in handles.into_iter().enumerate() {
            stage_results[i] = Some(h.join().unwrap_or_else(|_| {
                Err(Error::PipelineStalled {
                    layer: i,
                    detail: "stage thread panicked".into(),
                })
            }));
        }
    });

    // Prefer a stage's root-cause error over secondary disconnect noise, and
    // either over a collector complaint.
    let mut secondary = None;
    let mut per_layer = Vec::with_capacity(n);
    let mut final_potentials = None;
    let mut first_error = None;
    for (i, r) in stage_results.into_iter().enumerate() {
        match r.expect("joined") {
            Ok((counters, bank)) => {
                per_layer.push(counters);
                if i + 1 == n {
                    final_potentials = bank;
                }
            }
            Err(e) => {
                let is_secondary = matches!(
                    &e,
                    Error::PipelineStalled { detail, .. } if detail == "downstream hung up"
                ) || matches!(&e, Error::StreamUnderrun { .. });
                if is_secondary {
                    secondary.get_or_insert(e);
                } else {
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    if let Some(e) = first_error.or(collect_err).or(secondary) {
        return Err(e);
    }

    Ok(NetworkRunOutput {
        output,
        per_layer,
        latency: latency_model(net, t_steps as u64),
        final_potentials,
        layer_outputs: None,
    })
}
