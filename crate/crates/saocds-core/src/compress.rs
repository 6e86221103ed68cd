//! Model compression: magnitude pruning, fixed-point quantization, and
//! applying a per-layer density profile to a whole network.

use crate::coo::{DenseKernel, SparseKernelCOO};
use crate::error::Error;
use crate::fixed::FixedPoint16;
use serde::{Deserialize, Serialize};

/// L1 (magnitude) pruning: keep the `round(density * n)` largest-magnitude
/// weights, zeroing the rest. Ties are broken by position (earlier index
/// wins), which makes the result deterministic and the keep-sets nested:
/// raising the density never drops a weight that a lower density kept.
///
/// Returns the keep mask, aligned with `weights`.
pub fn prune_l1(weights: &[f64], density: f64) -> Result<Vec<bool>, Error> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::BadParam(format!(
            "density {density} outside [0, 1]"
        )));
    }
    if weights.is_empty() {
        return Err(Error::BadParam("cannot prune an empty weight array".into()));
    }
    // Round half away from zero, so e.g. 0.25 * 10 keeps 3 of 10.
    let keep_count = (density * weights.len() as f64).round() as usize;
    let keep_count = keep_count.min(weights.len());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Sort by descending magnitude, ascending index on ties. The index
    // tiebreak is what makes keep-sets nested across densities.
    order.sort_by(|&a, &b| {
        weights[b]
            .abs()
            .partial_cmp(&weights[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut mask = vec![false; weights.len()];
    for &i in &order[..keep_count] {
        mask[i] = true;
    }
    Ok(mask)
}

/// Quantizes a real weight array to fixed point (round to nearest, ties to
/// even, clipped to the 16-bit range). Exact zeros stay exactly zero, so a
/// pruned position can never come back as a nonzero.
pub fn quantize_w(weights: &[f64], frac_bits: u32) -> Vec<FixedPoint16> {
    weights
        .iter()
        .map(|&w| FixedPoint16::quantize(w, frac_bits))
        .collect()
}

/// Picks the fractional-bit count in `[min_bits, max_bits]` minimizing mean
/// squared quantization error over the given weights. Ties prefer fewer bits.
pub fn best_frac_bits(weights: &[f64], min_bits: u32, max_bits: u32) -> u32 {
    let mut best = (min_bits, f64::INFINITY);
    for bits in min_bits..=max_bits {
        let mse: f64 = weights
            .iter()
            .map(|&w| {
                let q = FixedPoint16::quantize(w, bits).to_f64(bits);
                (w - q) * (w - q)
            })
            .sum::<f64>()
            / weights.len().max(1) as f64;
        if mse < best.1 {
            best = (bits, mse);
        }
    }
    best.0
}

/// What pruning and quantizing one layer actually achieved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerDensityReport {
    pub layer: usize,
    pub kind: String,
    pub weight_count: usize,
    /// Weights kept by the pruning mask.
    pub kept: usize,
    /// Nonzeros after quantization (kept weights can still round to zero).
    pub nonzero: usize,
    pub requested_density: f64,
    pub achieved_density: f64,
}

/// Prunes one dense convolution kernel's real weights to a target density,
/// quantizes the survivors, and compresses the result.
pub fn prune_and_encode_kernel(
    weights: &[f64],
    dims: crate::coo::ConvDims,
    density: f64,
    frac_bits: u32,
) -> Result<(SparseKernelCOO, usize), Error> {
    if weights.len() != dims.weight_count() {
        return Err(Error::DimMismatch {
            what: "kernel weight count",
            expected: dims.weight_count(),
            actual: weights.len(),
        });
    }
    let mask = prune_l1(weights, density)?;
    let kept = mask.iter().filter(|&&k| k).count();
    let pruned: Vec<f64> = weights
        .iter()
        .zip(&mask)
        .map(|(&w, &keep)| if keep { w } else { 0.0 })
        .collect();
    let q = quantize_w(&pruned, frac_bits);
    let dense = DenseKernel::new(dims, q)?;
    Ok((SparseKernelCOO::from_dense(&dense), kept))
}

/// Prunes and requantizes every weighted layer of a model.
///
/// `profile` gives one target density per weighted layer (convolutions and
/// fc layers, in network order; pooling layers are passed through). Ranking
/// uses the literal magnitudes from the file; survivors are requantized to
/// `frac_bits` through the exact decimal path when the file stores decimal
/// strings, so the result does not depend on how the source was rounded.
/// Returns the compressed model (canonical weight encodings) and a per-layer
/// report.
pub fn apply_density_profile(
    model: &crate::io::model::ModelFile,
    profile: &[f64],
    frac_bits: u32,
) -> Result<(crate::io::model::ModelFile, Vec<LayerDensityReport>), Error> {
    use crate::io::model::{CooRecord, ModelFile, WeightsRecord};
    use crate::network::Layer;

    // A full validation pass up front; it also hands us each layer's
    // resolved dimensions.
    let net = model.to_network()?;
    let weighted = net
        .layers()
        .iter()
        .filter(|l| !matches!(l, Layer::MaxPool(_)))
        .count();
    if profile.len() != weighted {
        return Err(Error::BadParam(format!(
            "density profile has {} entries for {weighted} weighted layers",
            profile.len()
        )));
    }

    let mut reports = Vec::with_capacity(weighted);
    let mut out_layers = Vec::with_capacity(model.layers.len());
    let mut next_density = profile.iter().copied();
    for (i, (rec, layer)) in model.layers.iter().zip(net.layers()).enumerate() {
        let mut out_rec = rec.clone();
        match layer {
            Layer::MaxPool(_) => {}
            Layer::Conv(spec) => {
                let dims = spec.kernel.dims();
                let density = next_density.next().expect("counted above");
                let literals = rec
                    .weight_literals(i, Some(dims))?
                    .expect("validated conv has weights");
                let (quantized, kept) =
                    prune_literals(&literals, density, model.frac_bits, frac_bits)?;
                let kernel = SparseKernelCOO::from_dense(&DenseKernel::new(dims, quantized)?);
                reports.push(LayerDensityReport {
                    layer: i,
                    kind: "conv".to_string(),
                    weight_count: dims.weight_count(),
                    kept,
                    nonzero: kernel.nnz(),
                    requested_density: density,
                    achieved_density: kernel.density(),
                });
                out_rec.weights = Some(WeightsRecord {
                    dense: None,
                    dense_raw: None,
                    rows: None,
                    rows_raw: None,
                    coo: Some(
                        kernel
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
            }
            Layer::Fc(spec) => {
                let (in_w, out_w) = (spec.weights.in_width(), spec.weights.out_width());
                let density = next_density.next().expect("counted above");
                let literals = rec
                    .weight_literals(i, None)?
                    .expect("validated fc has weights");
                let (quantized, kept) =
                    prune_literals(&literals, density, model.frac_bits, frac_bits)?;
                let nonzero = quantized.iter().filter(|v| !v.is_zero()).count();
                reports.push(LayerDensityReport {
                    layer: i,
                    kind: "fc".to_string(),
                    weight_count: in_w * out_w,
                    kept,
                    nonzero,
                    requested_density: density,
                    achieved_density: nonzero as f64 / (in_w * out_w) as f64,
                });
                out_rec.weights = Some(WeightsRecord {
                    dense: None,
                    dense_raw: None,
                    rows: None,
                    rows_raw: Some(
                        (0..out_w)
                            .map(|o| {
                                quantized[o * in_w..(o + 1) * in_w]
                                    .iter()
                                    .map(|v| v.raw())
                                    .collect()
                            })
                            .collect(),
                    ),
                    coo: None,
                });
            }
        }
        out_layers.push(out_rec);
    }

    let out = ModelFile {
        version: model.version,
        frac_bits,
        input: model.input,
        report_final_potentials: model.report_final_potentials,
        layers: out_layers,
    };
    // The rebuilt file must itself be loadable; catching that here turns a
    // bug into an error instead of a broken artifact.
    out.to_network()?;
    Ok((out, reports))
}

fn prune_literals(
    literals: &[crate::io::model::WeightLiteral],
    density: f64,
    source_frac: u32,
    target_frac: u32,
) -> Result<(Vec<FixedPoint16>, usize), Error> {
    let mut mags = Vec::with_capacity(literals.len());
    for lit in literals {
        mags.push(lit.approx_f64(source_frac)?);
    }
    let mask = prune_l1(&mags, density)?;
    let kept = mask.iter().filter(|&&k| k).count();
    let mut quantized = Vec::with_capacity(literals.len());
    for (lit, &keep) in literals.iter().zip(&mask) {
        quantized.push(if keep {
            lit.quantize(source_frac, target_frac)?
        } else {
            FixedPoint16::from_raw(0)
        });
    }
    Ok((quantized, kept))
}
