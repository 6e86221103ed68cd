//! JSON model files.
//!
//! A model file fully describes a network: global fixed-point scale, input
//! shape, and per-layer topology, neuron parameters, and weights. Weights can
//! be given three ways:
//!
//! - `dense` / `rows`: nested arrays of decimal strings (real-valued models);
//!   literals are converted by exact scaled-integer arithmetic, never through
//!   an intermediate float, so loads are reproducible to the bit;
//! - `dense_raw` / `rows_raw`: nested arrays of raw fixed-point integers;
//! - `coo` (convolutions only): the compressed nonzero list, which must
//!   already be in canonical `(oc, ic, ci)` order.
//!
//! Neuron parameters are decimal strings, either one scalar per field or one
//! array entry per neuron. Saving always emits the canonical form (raw
//! integers, `coo` for convolutions), so save-load-save is byte-stable.

use crate::coo::{ConvDims, CooEntry, DenseKernel, SparseKernelCOO};
use crate::error::Error;
use crate::fc::MaskedFcWeights;
use crate::fixed::FixedPoint16;
use crate::lif::{LayerParams, NeuronParams};
use crate::network::{ConvLayerSpec, FcLayerSpec, Layer, NetworkSpec, PoolLayerSpec};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Supported model format version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub frac_bits: u32,
    pub input: InputShape,
    #[serde(default)]
    pub report_final_potentials: bool,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub channels: usize,
    pub width: usize,
}

/// One layer as stored on disk. `kind` selects which of the optional fields
/// apply; irrelevant fields must be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kw: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pad: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neuron: Option<NeuronRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsRecord>,
}

impl LayerRecord {
    fn empty(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            kw: None,
            oc: None,
            pad: None,
            window: None,
            out_width: None,
            neuron: None,
            weights: None,
        }
    }
}

/// A neuron parameter: one decimal for the whole layer or one per neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRecord {
    Scalar(String),
    PerNeuron(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronRecord {
    pub alpha: ParamRecord,
    pub theta: ParamRecord,
    pub u_th0: ParamRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsRecord {
    /// Convolution weights `[oc][ic][kw]` as decimal strings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense: Option<Vec<Vec<Vec<String>>>>,
    /// Convolution weights `[oc][ic][kw]` as raw fixed-point integers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_raw: Option<Vec<Vec<Vec<i16>>>>,
    /// FC weights `[out][in]` as decimal strings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<String>>>,
    /// FC weights `[out][in]` as raw fixed-point integers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows_raw: Option<Vec<Vec<i16>>>,
    /// Convolution nonzeros in canonical order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coo: Option<Vec<CooRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CooRecord {
    pub d: i16,
    pub ri: u32,
    pub ci: u32,
}

impl ModelFile {
    /// Parses the JSON and checks the format version. Semantic validation
    /// happens in [`ModelFile::to_network`].
    pub fn from_reader(r: &mut impl Read) -> Result<Self, Error> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let model: ModelFile = serde_json::from_str(&text)?;
        if model.version != MODEL_VERSION {
            return Err(Error::VersionMismatch {
                found: model.version,
                supported: MODEL_VERSION,
            });
        }
        Ok(model)
    }

    /// Canonical serialized form: pretty JSON plus trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model records always serialize");
        s.push('\n');
        s
    }

    /// Builds and validates the runnable network.
    pub fn to_network(&self) -> Result<NetworkSpec, Error> {
        if self.frac_bits > 15 {
            return Err(Error::BadParam(format!(
                "frac_bits {} exceeds the 16-bit weight format",
                self.frac_bits
            )));
        }
        let f = self.frac_bits;
        let (mut c, mut w) = (self.input.channels, self.input.width);
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.iter().enumerate() {
            let layer = match rec.kind.as_str() {
                "conv" => {
                    deny(i, rec.window.is_some(), "window")?;
                    deny(i, rec.out_width.is_some(), "out_width")?;
                    let kw = require(i, rec.kw, "kw")?;
                    let oc = require(i, rec.oc, "oc")?;
                    let pad = rec.pad.unwrap_or(0);
                    let padded = w + 2 * pad;
                    if padded < kw {
                        return Err(Error::ChainMismatch {
                            layer: i,
                            detail: format!("kernel width {kw} exceeds padded input {padded}"),
                        });
                    }
                    let dims = ConvDims::new(kw, c, oc, padded - kw + 1)?;
                    let kernel = conv_kernel(i, rec, dims, f)?;
                    let neuron = rec
                        .neuron
                        .as_ref()
                        .ok_or_else(|| missing(i, "neuron"))?;
                    let params = layer_params(i, neuron, dims.oc * dims.oi, f)?;
                    Layer::Conv(ConvLayerSpec {
                        schedule: crate::schedule::build_schedule(&kernel),
                        kernel,
                        params,
                        pad,
                    })
                }
                "max_pool" => {
                    for (present, name) in [
                        (rec.kw.is_some(), "kw"),
                        (rec.oc.is_some(), "oc"),
                        (rec.pad.is_some(), "pad"),
                        (rec.out_width.is_some(), "out_width"),
                        (rec.neuron.is_some(), "neuron"),
                        (rec.weights.is_some(), "weights"),
                    ] {
                        deny(i, present, name)?;
                    }
                    Layer::MaxPool(PoolLayerSpec {
                        window: require(i, rec.window, "window")?,
                    })
                }
                "fc" => {
                    for (present, name) in [
                        (rec.kw.is_some(), "kw"),
                        (rec.oc.is_some(), "oc"),
                        (rec.pad.is_some(), "pad"),
                        (rec.window.is_some(), "window"),
                    ] {
                        deny(i, present, name)?;
                    }
                    let out_width = require(i, rec.out_width, "out_width")?;
                    let weights = fc_weights(i, rec, c * w, out_width, f)?;
                    let neuron = rec
                        .neuron
                        .as_ref()
                        .ok_or_else(|| missing(i, "neuron"))?;
                    let params = layer_params(i, neuron, out_width, f)?;
                    Layer::Fc(FcLayerSpec { weights, params })
                }
                other => {
                    return Err(Error::ModelFile(format!(
                        "layer {i}: unknown kind {other:?}"
                    )))
                }
            };
            // Track the shape chain for the record-level checks above;
            // NetworkSpec::new re-validates the assembled layers.
            match &layer {
                Layer::Conv(spec) => {
                    c = spec.kernel.dims().oc;
                    w = spec.kernel.dims().oi;
                }
                Layer::MaxPool(spec) => {
                    if spec.window == 0 || w % spec.window != 0 {
                        return Err(Error::ChainMismatch {
                            layer: i,
                            detail: format!("pool window {} does not divide width {w}", spec.window),
                        });
                    }
                    w /= spec.window;
                }
                Layer::Fc(spec) => {
                    c = 1;
                    w = spec.weights.out_width();
                }
            }
            layers.push(layer);
        }
        let mut net = NetworkSpec::new(f, self.input.channels, self.input.width, layers)?;
        net.report_final_potentials = self.report_final_potentials;
        Ok(net)
    }

    /// Canonical records for a runnable network.
    pub fn from_network(net: &NetworkSpec) -> Self {
        let f = net.frac_bits();
        let layers = net
            .layers()
            .iter()
            .map(|layer| match layer {
                Layer::Conv(spec) => {
                    let dims = spec.kernel.dims();
                    let mut rec = LayerRecord::empty("conv");
                    rec.kw = Some(dims.kw);
                    rec.oc = Some(dims.oc);
                    rec.pad = Some(spec.pad);
                    rec.neuron = Some(params_record(&spec.params, f));
                    rec.weights = Some(WeightsRecord {
                        dense: None,
                        dense_raw: None,
                        rows: None,
                        rows_raw: None,
                        coo: Some(
                            spec.kernel
                                .entries()
                                .iter()
                                .map(|e| CooRecord {
                                    d: e.d.raw(),
                                    ri: e.ri,
                                    ci: e.ci,
                                })
                                .collect(),
                        ),
                    });
                    rec
                }
                Layer::MaxPool(spec) => {
                    let mut rec = LayerRecord::empty("max_pool");
                    rec.window = Some(spec.window);
                    rec
                }
                Layer::Fc(spec) => {
                    let mut rec = LayerRecord::empty("fc");
                    rec.out_width = Some(spec.weights.out_width());
                    rec.neuron = Some(params_record(&spec.params, f));
                    let in_w = spec.weights.in_width();
                    rec.weights = Some(WeightsRecord {
                        dense: None,
                        dense_raw: None,
                        rows: None,
                        rows_raw: Some(
                            (0..spec.weights.out_width())
                                .map(|o| {
                                    spec.weights.weights()[o * in_w..(o + 1) * in_w]
                                        .iter()
                                        .map(|v| v.raw())
                                        .collect()
                                })
                                .collect(),
                        ),
                        coo: None,
                    });
                    rec
                }
            })
            .collect();
        ModelFile {
            version: MODEL_VERSION,
            frac_bits: f,
            input: InputShape {
                channels: net.input_channels(),
                width: net.input_width(),
            },
            report_final_potentials: net.report_final_potentials,
            layers,
        }
    }
}

/// Loads and validates a model in one step.
pub fn load_model(r: &mut impl Read) -> Result<NetworkSpec, Error> {
    ModelFile::from_reader(r)?.to_network()
}

/// Writes the canonical serialized form of a network.
pub fn save_model(w: &mut impl Write, net: &NetworkSpec) -> Result<(), Error> {
    w.write_all(ModelFile::from_network(net).to_json_string().as_bytes())?;
    Ok(())
}

fn missing(layer: usize, field: &str) -> Error {
    Error::ModelFile(format!("layer {layer}: missing field {field:?}"))
}

fn require<T>(layer: usize, v: Option<T>, field: &str) -> Result<T, Error> {
    v.ok_or_else(|| missing(layer, field))
}

fn deny(layer: usize, present: bool, field: &str) -> Result<(), Error> {
    if present {
        Err(Error::ModelFile(format!(
            "layer {layer}: field {field:?} does not apply to this kind"
        )))
    } else {
        Ok(())
    }
}

fn conv_kernel(
    layer: usize,
    rec: &LayerRecord,
    dims: ConvDims,
    frac_bits: u32,
) -> Result<SparseKernelCOO, Error> {
    let weights = rec.weights.as_ref().ok_or_else(|| missing(layer, "weights"))?;
    let reps = [
        weights.dense.is_some(),
        weights.dense_raw.is_some(),
        weights.coo.is_some(),
    ];
    if weights.rows.is_some() || weights.rows_raw.is_some() {
        return Err(Error::ModelFile(format!(
            "layer {layer}: fc weight fields on a convolution"
        )));
    }
    if reps.iter().filter(|&&p| p).count() != 1 {
        return Err(Error::ModelFile(format!(
            "layer {layer}: exactly one of dense, dense_raw, coo required"
        )));
    }
    if let Some(entries) = &weights.coo {
        let entries = entries
            .iter()
            .map(|e| CooEntry {
                d: FixedPoint16::from_raw(e.d),
                ri: e.ri,
                ci: e.ci,
            })
            .collect();
        return SparseKernelCOO::from_entries(dims, entries);
    }
    let mut flat = Vec::with_capacity(dims.weight_count());
    if let Some(nested) = &weights.dense {
        check_nested(layer, nested.len(), dims.oc, "oc")?;
        for per_oc in nested {
            check_nested(layer, per_oc.len(), dims.ic, "ic")?;
            for per_ic in per_oc {
                check_nested(layer, per_ic.len(), dims.kw, "kw")?;
                for s in per_ic {
                    flat.push(FixedPoint16::from_decimal(s, frac_bits)?);
                }
            }
        }
    } else if let Some(nested) = &weights.dense_raw {
        check_nested(layer, nested.len(), dims.oc, "oc")?;
        for per_oc in nested {
            check_nested(layer, per_oc.len(), dims.ic, "ic")?;
            for per_ic in per_oc {
                check_nested(layer, per_ic.len(), dims.kw, "kw")?;
                for &rawv in per_ic {
                    flat.push(FixedPoint16::from_raw(rawv));
                }
            }
        }
    }
    Ok(SparseKernelCOO::from_dense(&DenseKernel::new(dims, flat)?))
}

fn check_nested(layer: usize, actual: usize, expected: usize, axis: &str) -> Result<(), Error> {
    if actual != expected {
        return Err(Error::ModelFile(format!(
            "layer {layer}: weight array {axis} extent {actual}, expected {expected}"
        )));
    }
    Ok(())
}

fn fc_weights(
    layer: usize,
    rec: &LayerRecord,
    in_width: usize,
    out_width: usize,
    frac_bits: u32,
) -> Result<MaskedFcWeights, Error> {
    let weights = rec.weights.as_ref().ok_or_else(|| missing(layer, "weights"))?;
    if weights.dense.is_some() || weights.dense_raw.is_some() || weights.coo.is_some() {
        return Err(Error::ModelFile(format!(
            "layer {layer}: convolution weight fields on an fc layer"
        )));
    }
    let mut flat = Vec::with_capacity(in_width * out_width);
    match (&weights.rows, &weights.rows_raw) {
        (Some(nested), None) => {
            check_nested(layer, nested.len(), out_width, "out")?;
            for row in nested {
                check_nested(layer, row.len(), in_width, "in")?;
                for s in row {
                    flat.push(FixedPoint16::from_decimal(s, frac_bits)?);
                }
            }
        }
        (None, Some(nested)) => {
            check_nested(layer, nested.len(), out_width, "out")?;
            for row in nested {
                check_nested(layer, row.len(), in_width, "in")?;
                for &rawv in row {
                    flat.push(FixedPoint16::from_raw(rawv));
                }
            }
        }
        _ => {
            return Err(Error::ModelFile(format!(
                "layer {layer}: exactly one of rows, rows_raw required"
            )))
        }
    }
    MaskedFcWeights::from_dense(flat, in_width, out_width)
}

fn param_value(
    layer: usize,
    rec: &ParamRecord,
    neuron: usize,
    count: usize,
    frac_bits: u32,
    name: &str,
) -> Result<FixedPoint16, Error> {
    match rec {
        ParamRecord::Scalar(s) => FixedPoint16::from_decimal(s, frac_bits),
        ParamRecord::PerNeuron(v) => {
            if v.len() != count {
                return Err(Error::ModelFile(format!(
                    "layer {layer}: {name} has {} entries for {count} neurons",
                    v.len()
                )));
            }
            FixedPoint16::from_decimal(&v[neuron], frac_bits)
        }
    }
}

fn layer_params(
    layer: usize,
    rec: &NeuronRecord,
    neuron_count: usize,
    frac_bits: u32,
) -> Result<LayerParams, Error> {
    let any_per_neuron = matches!(rec.alpha, ParamRecord::PerNeuron(_))
        || matches!(rec.theta, ParamRecord::PerNeuron(_))
        || matches!(rec.u_th0, ParamRecord::PerNeuron(_));
    if !any_per_neuron {
        let p = NeuronParams::new(
            param_value(layer, &rec.alpha, 0, neuron_count, frac_bits, "alpha")?,
            param_value(layer, &rec.theta, 0, neuron_count, frac_bits, "theta")?,
            param_value(layer, &rec.u_th0, 0, neuron_count, frac_bits, "u_th0")?,
            frac_bits,
        )?;
        return Ok(LayerParams::uniform(p));
    }
    let mut table = Vec::with_capacity(neuron_count);
    for n in 0..neuron_count {
        table.push(NeuronParams::new(
            param_value(layer, &rec.alpha, n, neuron_count, frac_bits, "alpha")?,
            param_value(layer, &rec.theta, n, neuron_count, frac_bits, "theta")?,
            param_value(layer, &rec.u_th0, n, neuron_count, frac_bits, "u_th0")?,
            frac_bits,
        )?);
    }
    let base = table[0];
    LayerParams::per_neuron(base, table, neuron_count)
}

fn params_record(params: &LayerParams, frac_bits: u32) -> NeuronRecord {
    match params.overrides() {
        None => {
            let p = params.base();
            NeuronRecord {
                alpha: ParamRecord::Scalar(p.alpha.to_decimal(frac_bits)),
                theta: ParamRecord::Scalar(p.theta.to_decimal(frac_bits)),
                u_th0: ParamRecord::Scalar(p.u_th0.to_decimal(frac_bits)),
            }
        }
        Some(table) => NeuronRecord {
            alpha: ParamRecord::PerNeuron(
                table.iter().map(|p| p.alpha.to_decimal(frac_bits)).collect(),
            ),
            theta: ParamRecord::PerNeuron(
                table.iter().map(|p| p.theta.to_decimal(frac_bits)).collect(),
            ),
            u_th0: ParamRecord::PerNeuron(
                table.iter().map(|p| p.u_th0.to_decimal(frac_bits)).collect(),
            ),
        },
    }
}

/// One weight position's on-disk value, used by compression to reach the
/// pre-quantization literal when one exists.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightLiteral {
    /// Exact decimal string from a real-valued model.
    Decimal(String),
    /// Already-quantized raw value at the file's `frac_bits`.
    Raw(i16),
}

impl WeightLiteral {
    /// Approximate magnitude for ranking (pruning order only).
    pub fn approx_f64(&self, frac_bits: u32) -> Result<f64, Error> {
        match self {
            WeightLiteral::Decimal(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::BadDecimal(s.clone())),
            WeightLiteral::Raw(r) => Ok(*r as f64 / (1u64 << frac_bits) as f64),
        }
    }

    /// Exact requantization to a target scale. Decimal literals go through
    /// scaled-integer arithmetic; raw values are rescaled (their real value
    /// is exactly representable in f64, so this is double-rounding free).
    pub fn quantize(&self, source_frac: u32, target_frac: u32) -> Result<FixedPoint16, Error> {
        match self {
            WeightLiteral::Decimal(s) => FixedPoint16::from_decimal(s, target_frac),
            WeightLiteral::Raw(r) => Ok(FixedPoint16::quantize(
                *r as f64 / (1u64 << source_frac) as f64,
                target_frac,
            )),
        }
    }
}

impl LayerRecord {
    /// Flattens this layer's weights to literals: `[oc][ic][kw]` order for
    /// convolutions, `[out][in]` for fc layers. COO holes appear as raw
    /// zeros. `None` for layers without weights.
    pub fn weight_literals(
        &self,
        layer: usize,
        dims: Option<ConvDims>,
    ) -> Result<Option<Vec<WeightLiteral>>, Error> {
        let Some(weights) = &self.weights else {
            return Ok(None);
        };
        if let Some(nested) = &weights.dense {
            return Ok(Some(
                nested
                    .iter()
                    .flatten()
                    .flatten()
                    .map(|s| WeightLiteral::Decimal(s.clone()))
                    .collect(),
            ));
        }
        if let Some(nested) = &weights.dense_raw {
            return Ok(Some(
                nested
                    .iter()
                    .flatten()
                    .flatten()
                    .map(|&r| WeightLiteral::Raw(r))
                    .collect(),
            ));
        }
        if let Some(nested) = &weights.rows {
            return Ok(Some(
                nested
                    .iter()
                    .flatten()
                    .map(|s| WeightLiteral::Decimal(s.clone()))
                    .collect(),
            ));
        }
        if let Some(nested) = &weights.rows_raw {
            return Ok(Some(
                nested
                    .iter()
                    .flatten()
                    .map(|&r| WeightLiteral::Raw(r))
                    .collect(),
            ));
        }
        if let Some(entries) = &weights.coo {
            let dims = dims.ok_or_else(|| {
                Error::ModelFile(format!("layer {layer}: coo weights need conv dims"))
            })?;
            let mut flat = vec![WeightLiteral::Raw(0); dims.weight_count()];
            for e in entries {
                let oc = crate::coo::oc_index(e.ri, dims.ic);
                let ic = crate::coo::ic_index(e.ri, dims.ic);
                let idx = (oc * dims.ic + ic) * dims.kw + e.ci as usize;
                flat[idx] = WeightLiteral::Raw(e.d);
            }
            return Ok(Some(flat));
        }
        Err(Error::ModelFile(format!(
            "layer {layer}: weights present but empty"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{saocds_network_run, RunMode};
    use crate::spike::SpikeTensor;

    fn tiny_model_json() -> String {
        r#"{
  "version": 1,
  "frac_bits": 8,
  "input": { "channels": 2, "width": 6 },
  "layers": [
    {
      "kind": "conv",
      "kw": 3,
      "oc": 2,
      "pad": 1,
      "neuron": { "alpha": "0.5", "theta": "1", "u_th0": "0.75" },
      "weights": {
        "dense": [
          [["0.5", "0", "-0.25"], ["0", "1", "0"]],
          [["0", "0", "0"], ["0.125", "0", "0.125"]]
        ]
      }
    },
    { "kind": "max_pool", "window": 2 },
    {
      "kind": "fc",
      "out_width": 3,
      "neuron": { "alpha": "0", "theta": "0", "u_th0": "0.5" },
      "weights": {
        "rows": [
          ["1", "0", "0", "0", "0", "0"],
          ["0", "0", "-0.5", "0", "0.5", "0"],
          ["0", "0", "0", "0", "0", "1"]
        ]
      }
    }
  ]
}"#
        .to_string()
    }

    #[test]
    fn loads_decimal_model_and_runs() {
        let net = load_model(&mut tiny_model_json().as_bytes()).unwrap();
        assert_eq!(net.frac_bits(), 8);
        assert_eq!(net.output_shape(), (1, 3));
        // Layer 0 nonzeros: oc0 has 3, oc1 has 2.
        let Layer::Conv(spec) = &net.layers()[0] else {
            panic!("expected conv");
        };
        assert_eq!(spec.kernel.nnz(), 5);
        assert_eq!(spec.kernel.entries()[0].d.raw(), 128);
        let input = SpikeTensor::zeros(2, 2, 6);
        let out = saocds_network_run(&net, &input, RunMode::Sequential, false).unwrap();
        assert_eq!(out.output.channels(), 1);
        assert_eq!(out.output.width(), 3);
    }

    #[test]
    fn canonical_save_is_byte_stable() {
        let net = load_model(&mut tiny_model_json().as_bytes()).unwrap();
        let first = ModelFile::from_network(&net).to_json_string();
        let net2 = ModelFile::from_reader(&mut first.as_bytes())
            .unwrap()
            .to_network()
            .unwrap();
        let second = ModelFile::from_network(&net2).to_json_string();
        assert_eq!(first, second);
    }

    #[test]
    fn unknown_field_is_located() {
        let json = "{\n  \"version\": 1,\n  \"frac_bits\": 8,\n  \"bogus\": 3,\n  \"input\": { \"channels\": 1, \"width\": 4 },\n  \"layers\": []\n}";
        let err = ModelFile::from_reader(&mut json.as_bytes()).unwrap_err();
        match err {
            Error::Json { line, detail, .. } => {
                assert_eq!(line, 4, "unknown field reported at its line");
                assert!(detail.contains("bogus"), "{detail}");
            }
            other => panic!("expected json error, got {other}"),
        }
    }

    #[test]
    fn version_is_checked() {
        let json = r#"{ "version": 7, "frac_bits": 8, "input": { "channels": 1, "width": 4 }, "layers": [] }"#;
        assert!(matches!(
            ModelFile::from_reader(&mut json.as_bytes()),
            Err(Error::VersionMismatch { found: 7, .. })
        ));
    }

    #[test]
    fn kind_specific_fields_are_enforced() {
        let json = r#"{
  "version": 1, "frac_bits": 8,
  "input": { "channels": 1, "width": 4 },
  "layers": [ { "kind": "max_pool", "window": 2, "kw": 3 } ]
}"#;
        let err = ModelFile::from_reader(&mut json.as_bytes())
            .unwrap()
            .to_network()
            .unwrap_err();
        assert!(matches!(err, Error::ModelFile(_)), "{err}");
    }

    #[test]
    fn unsorted_coo_is_rejected() {
        let json = r#"{
  "version": 1, "frac_bits": 8,
  "input": { "channels": 1, "width": 4 },
  "layers": [ {
    "kind": "conv", "kw": 2, "oc": 2, "pad": 0,
    "neuron": { "alpha": "0.5", "theta": "0", "u_th0": "0.5" },
    "weights": { "coo": [ { "d": 3, "ri": 1, "ci": 0 }, { "d": 2, "ri": 0, "ci": 0 } ] }
  } ]
}"#;
        let err = ModelFile::from_reader(&mut json.as_bytes())
            .unwrap()
            .to_network()
            .unwrap_err();
        assert!(matches!(err, Error::CorruptKernel(_)), "{err}");
    }

    #[test]
    fn chain_mismatch_is_reported() {
        // fc expects 8 inputs but upstream provides 1x4.
        let json = r#"{
  "version": 1, "frac_bits": 8,
  "input": { "channels": 1, "width": 4 },
  "layers": [ {
    "kind": "fc", "out_width": 2,
    "neuron": { "alpha": "0", "theta": "0", "u_th0": "0.5" },
    "weights": { "rows_raw": [[1,1,1,1,1,1,1,1],[1,1,1,1,1,1,1,1]] }
  } ]
}"#;
        let err = ModelFile::from_reader(&mut json.as_bytes())
            .unwrap()
            .to_network()
            .unwrap_err();
        assert!(matches!(err, Error::ModelFile(_)), "{err}");
    }

    #[test]
    fn per_neuron_params_roundtrip() {
        let json = r#"{
  "version": 1, "frac_bits": 8,
  "input": { "channels": 1, "width": 2 },
  "layers": [ {
    "kind": "fc", "out_width": 2,
    "neuron": { "alpha": "0.5", "theta": ["0.25", "0.5"], "u_th0": "1" },
    "weights": { "rows_raw": [[256, 0], [0, 256]] }
  } ]
}"#;
        let net = load_model(&mut json.as_bytes()).unwrap();
        let Layer::Fc(spec) = &net.layers()[0] else {
            panic!()
        };
        let table = spec.params.overrides().expect("per-neuron table");
        assert_eq!(table[0].theta.raw(), 64);
        assert_eq!(table[1].theta.raw(), 128);
        assert_eq!(table[1].alpha.raw(), 128);
        // Canonical form keeps the per-neuron structure.
        let saved = ModelFile::from_network(&net).to_json_string();
        let net2 = load_model(&mut saved.as_bytes()).unwrap();
        let Layer::Fc(spec2) = &net2.layers()[0] else {
            panic!()
        };
        assert_eq!(spec2.params.overrides(), spec.params.overrides());
    }
}
