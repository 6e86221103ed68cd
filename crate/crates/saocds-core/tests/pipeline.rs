//! The pipelined runner must be indistinguishable from the sequential one:
//! same spikes, same counters, same final potentials. Threading only changes
//! when work happens, never what work happens.

use saocds_core::coo::ConvDims;
use saocds_core::fc::MaskedFcWeights;
use saocds_core::io::gen::gen_bernoulli_input;
use saocds_core::lif::{LayerParams, NeuronParams};
use saocds_core::network::{saocds_network_run, Layer, NetworkSpec, RunMode};
use saocds_core::presets::{random_kernel_with_density, random_weights};
use saocds_core::spike::SpikeTensor;
use saocds_core::FixedPoint16;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn params(frac_bits: u32) -> LayerParams {
    let half = FixedPoint16::from_decimal("0.5", frac_bits).unwrap();
    LayerParams::uniform(NeuronParams::new(half, half, half, frac_bits).unwrap())
}

/// conv -> pool -> conv -> fc chain with mixed densities.
fn test_network(seed: u64) -> NetworkSpec {
    let f = 8;
    let k0 = random_kernel_with_density(ConvDims::new(3, 2, 6, 16).unwrap(), 0.6, seed, f).unwrap();
    let k1 = random_kernel_with_density(ConvDims::new(3, 6, 8, 8).unwrap(), 0.3, seed ^ 1, f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let fcw = MaskedFcWeights::from_dense(random_weights(&mut rng, 64 * 5, f), 64, 5).unwrap();
    let mut net = NetworkSpec::new(
        f,
        2,
        16,
        vec![
            Layer::conv(k0, params(f), 1),
            Layer::max_pool(2),
            Layer::conv(k1, params(f), 1),
            Layer::fc(fcw, params(f)),
        ],
    )
    .unwrap();
    net.report_final_potentials = true;
    net
}

#[test]
fn pipelined_matches_sequential_bit_for_bit() {
    for seed in 0..8u64 {
        let net = test_network(seed);
        let input = gen_bernoulli_input(6, 2, 16, 0.4, seed ^ 99).unwrap();
        let seq = saocds_network_run(&net, &input, RunMode::Sequential, false).unwrap();
        let pipe = saocds_network_run(&net, &input, RunMode::Pipelined, false).unwrap();
        assert_eq!(seq.output, pipe.output, "seed {seed}: spike outputs differ");
        assert_eq!(
            seq.per_layer, pipe.per_layer,
            "seed {seed}: cost counters differ"
        );
        assert_eq!(
            seq.final_potentials, pipe.final_potentials,
            "seed {seed}: final potentials differ"
        );
        assert_eq!(seq.latency.total_cycles, pipe.latency.total_cycles);
    }
}

#[test]
fn pipelined_handles_single_layer_and_empty_trace() {
    let net = test_network(3);
    // Zero timesteps: nothing flows, everything shuts down cleanly.
    let empty = SpikeTensor::zeros(0, 2, 16);
    let out = saocds_network_run(&net, &empty, RunMode::Pipelined, false).unwrap();
    assert_eq!(out.output.timesteps(), 0);

    // Single layer network.
    let f = 8;
    let k = random_kernel_with_density(ConvDims::new(3, 2, 4, 16).unwrap(), 0.5, 7, f).unwrap();
    let single =
        NetworkSpec::new(f, 2, 16, vec![Layer::conv(k, params(f), 1)]).unwrap();
    let input = gen_bernoulli_input(4, 2, 16, 0.5, 11).unwrap();
    let seq = saocds_network_run(&single, &input, RunMode::Sequential, false).unwrap();
    let pipe = saocds_network_run(&single, &input, RunMode::Pipelined, false).unwrap();
    assert_eq!(seq.output, pipe.output);
    assert_eq!(seq.per_layer, pipe.per_layer);
}

#[test]
fn pipelined_rejects_malformed_input_like_sequential() {
    let net = test_network(5);
    let wrong = SpikeTensor::zeros(4, 3, 16); // three channels, expected two
    let seq = saocds_network_run(&net, &wrong, RunMode::Sequential, false);
    let pipe = saocds_network_run(&net, &wrong, RunMode::Pipelined, false);
    assert!(seq.is_err());
    assert!(pipe.is_err());
}
