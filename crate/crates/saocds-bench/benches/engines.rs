//! Engine throughput benchmarks: streaming vs dense reference at different
//! kernel densities, schedule construction, and input encoding.

use criterion::{criterion_group, criterion_main, Criterion};
use saocds_bench::{conv_fixture, sample_rows, wide_kernel};
use saocds_core::io::encode::{sigma_delta_encode, ModulatorOrder};
use saocds_core::network::{saocds_network_run, sw_network_run, RunMode};
use saocds_core::schedule::build_schedule;
use std::hint::black_box;

fn engines(c: &mut Criterion) {
    let timesteps = 4;
    for density in [1.0, 0.25, 0.05] {
        let (net, input) = conv_fixture(density, timesteps);
        c.bench_function(&format!("streaming_conv_d{density}"), |b| {
            b.iter(|| {
                black_box(
                    saocds_network_run(&net, &input, RunMode::Sequential, false).unwrap(),
                )
            })
        });
        c.bench_function(&format!("dense_reference_conv_d{density}"), |b| {
            b.iter(|| black_box(sw_network_run(&net, &input, false).unwrap()))
        });
    }
}

fn schedule(c: &mut Criterion) {
    let kernel = wide_kernel(0.25);
    c.bench_function("build_schedule_10k_weights", |b| {
        b.iter(|| black_box(build_schedule(black_box(&kernel))))
    });
}

fn encoder(c: &mut Criterion) {
    let samples = sample_rows();
    c.bench_function("sigma_delta_encode_2x128_osr64", |b| {
        b.iter(|| {
            black_box(
                sigma_delta_encode(black_box(&samples), 64, ModulatorOrder::First).unwrap(),
            )
        })
    });
}

criterion_group!(benches, engines, schedule, encoder);
criterion_main!(benches);
