//! Ready-made network shapes and seeded weight generators.
//!
//! Everything here is deterministic in the seed: the same seed produces the
//! same network on every platform, which keeps experiment sweeps and
//! regression baselines reproducible.

use crate::coo::{ConvDims, DenseKernel, SparseKernelCOO};
use crate::error::Error;
use crate::fc::MaskedFcWeights;
use crate::fixed::FixedPoint16;
use crate::io::gen::next_unit;
use crate::lif::{LayerParams, NeuronParams};
use crate::network::{ConvLayerSpec, FcLayerSpec, Layer, NetworkSpec, PoolLayerSpec};
use crate::schedule::build_schedule;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Random weights with magnitude in `[0.05, 1)` and independent sign. The
/// magnitude floor keeps every weight nonzero after quantization at 6 or
/// more fractional bits, so generated kernels start fully dense.
pub fn random_weights(rng: &mut ChaCha8Rng, count: usize, frac_bits: u32) -> Vec<FixedPoint16> {
    (0..count)
        .map(|_| {
            let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
            let mag = 0.05 + 0.95 * next_unit(rng);
            FixedPoint16::quantize(sign * mag, frac_bits)
        })
        .collect()
}

/// A fully dense random kernel.
pub fn random_dense_kernel(dims: ConvDims, seed: u64, frac_bits: u32) -> DenseKernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseKernel::new(dims, random_weights(&mut rng, dims.weight_count(), frac_bits))
        .expect("generated weight count matches dims")
}

/// A random kernel pruned to the requested density by magnitude, then
/// compressed. The kept count is deterministic: `round(density * weights)`.
pub fn random_kernel_with_density(
    dims: ConvDims,
    density: f64,
    seed: u64,
    frac_bits: u32,
) -> Result<SparseKernelCOO, Error> {
    let dense = random_dense_kernel(dims, seed, frac_bits);
    let reals: Vec<f64> = dense.weights().iter().map(|w| w.to_f64(frac_bits)).collect();
    let mask = crate::compress::prune_l1(&reals, density)?;
    let weights: Vec<FixedPoint16> = dense
        .weights()
        .iter()
        .zip(&mask)
        .map(|(&w, &keep)| if keep { w } else { FixedPoint16::from_raw(0) })
        .collect();
    Ok(SparseKernelCOO::from_dense(&DenseKernel::new(dims, weights)?))
}

fn quantized(s: &str, frac_bits: u32) -> FixedPoint16 {
    FixedPoint16::from_decimal(s, frac_bits).expect("preset constants parse")
}

fn preset_params(frac_bits: u32) -> LayerParams {
    let half = quantized("0.5", frac_bits);
    LayerParams::uniform(
        NeuronParams::new(half, half, half, frac_bits).expect("preset constants validate"),
    )
}

fn conv_layer(dims: ConvDims, pad: usize, seed: u64, frac_bits: u32) -> Layer {
    let kernel = SparseKernelCOO::from_dense(&random_dense_kernel(dims, seed, frac_bits));
    let schedule = build_schedule(&kernel);
    Layer::Conv(ConvLayerSpec {
        kernel,
        schedule,
        params: preset_params(frac_bits),
        pad,
    })
}

fn fc_layer(in_width: usize, out_width: usize, seed: u64, frac_bits: u32) -> Layer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = MaskedFcWeights::from_dense(
        random_weights(&mut rng, in_width * out_width, frac_bits),
        in_width,
        out_width,
    )
    .expect("generated weight count matches shape");
    Layer::Fc(FcLayerSpec {
        weights,
        params: preset_params(frac_bits),
    })
}

/// The default five-layer benchmark network: three padded convolutions with
/// 2x pooling after each, then two fc layers narrowing to 11 outputs.
/// Takes 2-channel, 128-pixel input rows. All layers start fully dense;
/// prune with a density profile to study sparsity effects.
pub fn default_network(seed: u64, frac_bits: u32) -> NetworkSpec {
    let layers = vec![
        conv_layer(
            ConvDims::new(11, 2, 16, 128).expect("preset dims"),
            5,
            seed ^ 0x01,
            frac_bits,
        ),
        Layer::MaxPool(PoolLayerSpec { window: 2 }),
        conv_layer(
            ConvDims::new(11, 16, 32, 64).expect("preset dims"),
            5,
            seed ^ 0x02,
            frac_bits,
        ),
        Layer::MaxPool(PoolLayerSpec { window: 2 }),
        conv_layer(
            ConvDims::new(5, 32, 64, 32).expect("preset dims"),
            2,
            seed ^ 0x03,
            frac_bits,
        ),
        Layer::MaxPool(PoolLayerSpec { window: 2 }),
        fc_layer(64 * 16, 128, seed ^ 0x04, frac_bits),
        fc_layer(128, 11, seed ^ 0x05, frac_bits),
    ];
    NetworkSpec::new(frac_bits, 2, 128, layers).expect("preset network validates")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_network_shape_chain() {
        let net = default_network(7, 8);
        assert_eq!(net.output_shape(), (1, 11));
        let counts: Vec<usize> = net
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Conv(s) => Some(s.kernel.dims().weight_count()),
                Layer::Fc(s) => Some(s.weights.in_width() * s.weights.out_width()),
                Layer::MaxPool(_) => None,
            })
            .collect();
        assert_eq!(counts, vec![352, 5632, 10240, 131072, 1408]);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = default_network(42, 8);
        let b = default_network(42, 8);
        let (Layer::Conv(ca), Layer::Conv(cb)) = (&a.layers()[0], &b.layers()[0]) else {
            panic!()
        };
        assert_eq!(ca.kernel.entries(), cb.kernel.entries());
        let c = default_network(43, 8);
        let Layer::Conv(cc) = &c.layers()[0] else {
            panic!()
        };
        assert_ne!(ca.kernel.entries(), cc.kernel.entries());
    }

    #[test]
    fn preset_weights_start_dense() {
        let net = default_network(3, 8);
        for layer in net.layers() {
            if let Layer::Conv(s) = layer {
                assert_eq!(s.kernel.nnz(), s.kernel.dims().weight_count());
            }
        }
    }

    #[test]
    fn density_target_is_hit_exactly() {
        let dims = ConvDims::new(3, 4, 4, 8).unwrap();
        let k = random_kernel_with_density(dims, 0.25, 9, 8).unwrap();
        assert_eq!(k.nnz(), 12); // 48 weights * 0.25
    }
}
