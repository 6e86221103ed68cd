//! Shared fixtures for the benchmark suite.

use saocds_core::coo::{ConvDims, SparseKernelCOO};
use saocds_core::io::gen::gen_bernoulli_input;
use saocds_core::lif::{LayerParams, NeuronParams};
use saocds_core::network::{Layer, NetworkSpec};
use saocds_core::presets::random_kernel_with_density;
use saocds_core::spike::SpikeTensor;
use saocds_core::FixedPoint16;

pub const FRAC_BITS: u32 = 8;

fn params() -> LayerParams {
    let half = FixedPoint16::from_decimal("0.5", FRAC_BITS).unwrap();
    LayerParams::uniform(NeuronParams::new(half, half, half, FRAC_BITS).unwrap())
}

/// Mid-size convolution layer (11-tap, 16-in, 32-out, 64-wide) at the given
/// kernel density, with a matching Bernoulli input trace.
pub fn conv_fixture(density: f64, timesteps: usize) -> (NetworkSpec, SpikeTensor) {
    let dims = ConvDims::new(11, 16, 32, 64).unwrap();
    let kernel = random_kernel_with_density(dims, density, 7, FRAC_BITS).unwrap();
    let net = NetworkSpec::new(
        FRAC_BITS,
        16,
        dims.in_w(),
        vec![Layer::conv(kernel, params(), 0)],
    )
    .unwrap();
    let input = gen_bernoulli_input(timesteps, 16, dims.in_w(), 0.5, 99).unwrap();
    (net, input)
}

/// Large kernel (5-tap, 32-in, 64-out) for schedule-construction timing.
pub fn wide_kernel(density: f64) -> SparseKernelCOO {
    let dims = ConvDims::new(5, 32, 64, 32).unwrap();
    random_kernel_with_density(dims, density, 11, FRAC_BITS).unwrap()
}

/// Sample grid shaped like the default network's input.
pub fn sample_rows() -> Vec<Vec<f64>> {
    (0..2)
        .map(|c| {
            (0..128)
                .map(|x| (x as f64 * 0.13 + c as f64).sin())
                .collect()
        })
        .collect()
}
