//! Cross-checks the schedule builder against an independently constructed
//! expectation.
//!
//! The builder in the library mirrors the engine's control loop (a cursor
//! over the entry list plus a pending-channel gate). The oracle here takes a
//! different route and derives the same sequence analytically: entry `g`
//! with input channel `ic` can execute no earlier than iteration `ic`
//! (zero-based), because exactly one input row arrives per iteration. So the
//! expected stream is built by walking output channels in order, padding
//! with waits until each entry's channel has arrived, and spending one
//! flush iteration on every channel with no entries.

use proptest::prelude::*;
use saocds_core::coo::{ic_index, oc_index, ConvDims, DenseKernel, SparseKernelCOO};
use saocds_core::fixed::FixedPoint16;
use saocds_core::schedule::{build_schedule, IterationTag};

/// Constructive oracle: see the module comment for the argument.
fn expected_tags(kernel: &SparseKernelCOO) -> Vec<IterationTag> {
    let dims = kernel.dims();
    let mut tags = Vec::new();
    let mut t = 0usize; // iteration index == rows arrived so far
    let mut next = 0usize; // cursor into the sorted entry list
    for oc in 0..dims.oc {
        let start = next;
        while next < kernel.entries().len()
            && oc_index(kernel.entries()[next].ri, dims.ic) == oc
        {
            next += 1;
        }
        if start == next {
            tags.push(IterationTag::Extra(oc as u32));
            t += 1;
            continue;
        }
        for g in start..next {
            let ic = ic_index(kernel.entries()[g].ri, dims.ic);
            while t < ic {
                tags.push(IterationTag::Empty);
                t += 1;
            }
            tags.push(IterationTag::Normal(g as u32));
            t += 1;
        }
    }
    tags
}

fn kernel_from_mask(dims: ConvDims, mask: &[bool]) -> SparseKernelCOO {
    let weights = mask
        .iter()
        .map(|&keep| FixedPoint16::from_raw(if keep { 1 } else { 0 }))
        .collect();
    SparseKernelCOO::from_dense(&DenseKernel::new(dims, weights).unwrap())
}

#[test]
fn oracle_agrees_on_corner_cases() {
    let cases: &[(usize, usize, usize, fn(usize, usize, usize) -> bool)] = &[
        // Fully dense.
        (3, 4, 4, |_, _, _| true),
        // Single entry at the last channel of the first output channel.
        (2, 5, 2, |oc, ic, ci| oc == 0 && ic == 4 && ci == 0),
        // First output channel empty, second populated.
        (2, 3, 2, |oc, _, _| oc == 1),
        // Alternating empty output channels.
        (2, 2, 6, |oc, ic, _| oc % 2 == 0 && ic == 1),
        // Everything zero: pure flush.
        (3, 3, 3, |_, _, _| false),
        // One entry per output channel, all needing the last input row.
        (1, 4, 3, |_, ic, _| ic == 3),
    ];
    for &(kw, ic, oc, pred) in cases {
        let dims = ConvDims::new(kw, ic, oc, 4).unwrap();
        let mut mask = vec![false; dims.weight_count()];
        for o in 0..oc {
            for i in 0..ic {
                for c in 0..kw {
                    mask[(o * ic + i) * kw + c] = pred(o, i, c);
                }
            }
        }
        let kernel = kernel_from_mask(dims, &mask);
        let schedule = build_schedule(&kernel);
        assert_eq!(
            schedule.tags(),
            expected_tags(&kernel).as_slice(),
            "kw={kw} ic={ic} oc={oc}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn oracle_agrees_on_random_kernels(
        kw in 1usize..=5,
        ic in 1usize..=9,
        oc in 1usize..=9,
        seed in any::<u64>(),
        density in 0.0f64..=1.0,
    ) {
        let dims = ConvDims::new(kw, ic, oc, 4).unwrap();
        // Seeded mask, independent of the library's generators.
        let mut state = seed | 1;
        let mask: Vec<bool> = (0..dims.weight_count())
            .map(|_| {
                // xorshift64*
                state ^= state >> 12;
                state ^= state << 25;
                state ^= state >> 27;
                let r = state.wrapping_mul(0x2545_F491_4F6C_DD1D);
                (r >> 11) as f64 / (1u64 << 53) as f64 } )
            .map(|u| u < density)
            .collect();
        let kernel = kernel_from_mask(dims, &mask);
        let schedule = build_schedule(&kernel);
        let expect = expected_tags(&kernel);
        prop_assert_eq!(schedule.tags(), expect.as_slice());
        // Category counters match the tag stream they summarize.
        let n_normal = expect.iter().filter(|t| matches!(t, IterationTag::Normal(_))).count() as u64;
        let n_empty = expect.iter().filter(|t| matches!(t, IterationTag::Empty)).count() as u64;
        let n_extra = expect.iter().filter(|t| matches!(t, IterationTag::Extra(_))).count() as u64;
        prop_assert_eq!(schedule.n_normal(), n_normal);
        prop_assert_eq!(schedule.n_empty(), n_empty);
        prop_assert_eq!(schedule.n_extra(), n_extra);
        prop_assert_eq!(schedule.reps(), expect.len() as u64);
    }
}
