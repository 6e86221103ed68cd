//! Derived metrics: accumulation-savings ratios, the pipeline latency model,
//! and the LUT-power-throughput figure of merit.

use crate::counters::CostCounters;
use crate::error::Error;
use crate::network::{Layer, NetworkSpec};
use serde::{Deserialize, Serialize};

/// Fraction of the dense engine's accumulations the sparse engine performed.
/// `None` when the dense baseline did no accumulations at all.
pub fn accumulation_ratio(sparse: &CostCounters, dense: &CostCounters) -> Option<f64> {
    if dense.accumulations == 0 {
        None
    } else {
        Some(sparse.accumulations as f64 / dense.accumulations as f64)
    }
}

/// One pipeline stage's cycle cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLatency {
    pub kind: String,
    /// Cycles this stage needs per timestep.
    pub cycles_per_timestep: u64,
}

/// Static latency estimate for a layer-pipelined execution.
///
/// Every stage must finish its timestep before the pipeline advances, so the
/// slowest stage sets the steady-state rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub per_layer: Vec<LayerLatency>,
    /// Index of the slowest stage (first one on ties).
    pub bottleneck: usize,
    /// Whether the slowest stage is fully connected — the sign that weight
    /// sparsity has stopped helping end-to-end latency.
    pub bottleneck_is_fc: bool,
    /// Cycles to fill the pipeline: sum of all stage costs.
    pub pipeline_fill: u64,
    pub timesteps: u64,
    /// Fill plus `timesteps` repetitions of the bottleneck stage.
    pub total_cycles: u64,
    /// Steady-state timesteps per cycle: `1 / bottleneck cycles`.
    pub throughput_proxy: f64,
}

/// Cycle cost per timestep of each stage:
///
/// - convolution: iterations of its schedule (nonzeros + waits + flushes) —
///   this is where weight sparsity buys latency;
/// - max pool: one pass over its input row width (channels in parallel);
/// - fully connected: its input width — every input bit is scanned no matter
///   how sparse the weights are, so this floor never moves.
pub fn latency_model(net: &NetworkSpec, timesteps: u64) -> LatencyReport {
    let shapes = net.validate().expect("network validated at construction");
    let per_layer: Vec<LayerLatency> = net
        .layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let cycles = match layer {
                Layer::Conv(spec) => spec.schedule.reps(),
                Layer::MaxPool(_) => shapes[i].1 as u64,
                Layer::Fc(spec) => spec.weights.in_width() as u64,
            };
            LayerLatency {
                kind: layer.kind().to_string(),
                cycles_per_timestep: cycles,
            }
        })
        .collect();

    // Strict comparison keeps the earliest stage on ties.
    let mut bottleneck = 0usize;
    for (i, l) in per_layer.iter().enumerate() {
        if l.cycles_per_timestep > per_layer[bottleneck].cycles_per_timestep {
            bottleneck = i;
        }
    }
    let max_cycles = per_layer
        .get(bottleneck)
        .map(|l| l.cycles_per_timestep)
        .unwrap_or(0);
    let pipeline_fill: u64 = per_layer.iter().map(|l| l.cycles_per_timestep).sum();
    let bottleneck_is_fc = per_layer
        .get(bottleneck)
        .map(|l| l.kind == "fc")
        .unwrap_or(false);

    LatencyReport {
        bottleneck,
        bottleneck_is_fc,
        pipeline_fill,
        timesteps,
        total_cycles: pipeline_fill + timesteps * max_cycles,
        throughput_proxy: if max_cycles == 0 {
            0.0
        } else {
            1.0 / max_cycles as f64
        },
        per_layer,
    }
}

/// Figure of merit: `lut_count * dynamic_power / throughput`. Lower is
/// better — it rewards small, low-power designs that still run fast.
///
/// Units follow the inputs: with power in watts and throughput in hertz the
/// result is joule-weighted LUT cost; multiply by 1e6 to quote it on a
/// micro scale.
pub fn fom(lut_count: f64, dynamic_power: f64, throughput: f64) -> Result<f64, Error> {
    if !(throughput > 0.0) {
        return Err(Error::BadParam(format!(
            "throughput must be positive, got {throughput}"
        )));
    }
    if !(lut_count >= 0.0) || !(dynamic_power >= 0.0) {
        return Err(Error::BadParam(
            "lut count and power must be non-negative".into(),
        ));
    }
    Ok(lut_count * dynamic_power / throughput)
}
