//! Static iteration schedule for the streaming convolution engine.
//!
//! The engine walks a sorted COO kernel one entry at a time while input
//! channels arrive one row per iteration. Because the walk depends only on
//! kernel structure (never on input data), the full per-timestep iteration
//! sequence can be derived up front; the engine then replays it, and the
//! latency model reads costs straight off it.

use crate::coo::{ic_index, oc_index, SparseKernelCOO};

/// What one engine iteration does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationTag {
    /// Process nonzero entry `n`: one weight fetch, a gated accumulation
    /// sweep, and an output-row emission if this is the channel's last entry.
    Normal(u32),
    /// The next nonzero needs an input channel that has not streamed in yet;
    /// the iteration only advances the input reader.
    Empty,
    /// Output channel `oc` has no nonzero weights at all; the iteration
    /// decays, fires, and emits it without touching any weight.
    Extra(u32),
}

/// Complete per-timestep iteration sequence for one convolution layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationSchedule {
    tags: Vec<IterationTag>,
    n_normal: u64,
    n_empty: u64,
    n_extra: u64,
}

impl IterationSchedule {
    pub fn tags(&self) -> &[IterationTag] {
        &self.tags
    }

    /// Iterations per timestep — the layer's cycle cost in the latency model.
    pub fn reps(&self) -> u64 {
        self.tags.len() as u64
    }

    pub fn n_normal(&self) -> u64 {
        self.n_normal
    }

    pub fn n_empty(&self) -> u64 {
        self.n_empty
    }

    pub fn n_extra(&self) -> u64 {
        self.n_extra
    }
}

/// Derives the iteration schedule for a kernel.
///
/// Mirrors the engine's control loop: each iteration first consumes one more
/// input row if any remain, then either flushes an all-zero output channel
/// (`Extra`), processes the pending nonzero if its input channel has already
/// arrived (`Normal`), or waits (`Empty`). An output channel is closed out
/// when its last nonzero is consumed; after the final entry every remaining
/// channel is all-zero and flushes as `Extra`.
///
/// Two consequences worth noting:
/// - `reps == nnz + n_empty + n_extra` always holds;
/// - `Empty` can only occur while input rows are still arriving, so
///   `n_empty <= ic - 1` (the first row lands before the first wait can
///   resolve, and each wait consumes a row).
pub fn build_schedule(kernel: &SparseKernelCOO) -> IterationSchedule {
    let dims = kernel.dims();
    let entries = kernel.entries();
    let mut tags = Vec::new();
    let (mut n_empty, mut n_extra) = (0u64, 0u64);

    let mut oc = 0usize; // output channel currently being produced
    let mut next = 0usize; // next unconsumed nonzero entry
    let mut ic_read = 0usize; // input rows streamed in so far

    while oc < dims.oc {
        if ic_read < dims.ic {
            ic_read += 1;
        }
        // Output channel owning the pending nonzero; one past the end once
        // all entries are consumed, so trailing all-zero channels flush.
        let pending_oc = match entries.get(next) {
            Some(e) => oc_index(e.ri, dims.ic),
            None => dims.oc,
        };
        if oc != pending_oc {
            debug_assert!(pending_oc > oc, "entries sorted by output channel");
            tags.push(IterationTag::Extra(oc as u32));
            n_extra += 1;
            oc += 1;
        } else {
            let pending_ic = ic_index(entries[next].ri, dims.ic);
            if pending_ic < ic_read {
                tags.push(IterationTag::Normal(next as u32));
                let last_of_oc = match entries.get(next + 1) {
                    Some(e) => oc_index(e.ri, dims.ic) != oc,
                    None => true,
                };
                if last_of_oc {
                    oc += 1;
                }
                next += 1;
            } else {
                tags.push(IterationTag::Empty);
                n_empty += 1;
            }
        }
    }
    debug_assert_eq!(next, entries.len(), "every nonzero consumed");

    IterationSchedule {
        n_normal: entries.len() as u64,
        n_empty,
        n_extra,
        tags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coo::{ConvDims, DenseKernel};
    use crate::fixed::FixedPoint16;
    use proptest::prelude::*;

    fn kernel_from_mask(kw: usize, ic: usize, oc: usize, mask: &[(usize, usize, usize)]) -> SparseKernelCOO {
        let dims = ConvDims::new(kw, ic, oc, 4).unwrap();
        let mut dense = DenseKernel::zeros(dims);
        for &(o, i, c) in mask {
            dense.set(o, i, c, FixedPoint16::from_raw(1));
        }
        SparseKernelCOO::from_dense(&dense)
    }

    fn tag_counts(s: &IterationSchedule) -> (u64, u64, u64) {
        let mut n = (0, 0, 0);
        for t in s.tags() {
            match t {
                IterationTag::Normal(_) => n.0 += 1,
                IterationTag::Empty => n.1 += 1,
                IterationTag::Extra(_) => n.2 += 1,
            }
        }
        n
    }

    #[test]
    fn fully_dense_kernel_has_no_overhead() {
        let dims = ConvDims::new(3, 4, 5, 8).unwrap();
        let mut dense = DenseKernel::zeros(dims);
        for oc in 0..5 {
            for ic in 0..4 {
                for ci in 0..3 {
                    dense.set(oc, ic, ci, FixedPoint16::from_raw(1));
                }
            }
        }
        let s = build_schedule(&SparseKernelCOO::from_dense(&dense));
        assert_eq!(s.reps(), 60);
        assert_eq!(s.n_empty(), 0);
        assert_eq!(s.n_extra(), 0);
    }

    #[test]
    fn one_nonzero_per_channel_pair_has_no_overhead() {
        // One nonzero for every (oc, ic) pair covers each input channel in
        // arrival order, so nothing ever waits and nothing is all-zero.
        let mut mask = Vec::new();
        for o in 0..3 {
            for i in 0..4 {
                mask.push((o, i, 1));
            }
        }
        let s = build_schedule(&kernel_from_mask(3, 4, 3, &mask));
        assert_eq!(s.reps(), 12);
        assert_eq!((s.n_empty(), s.n_extra()), (0, 0));
    }

    #[test]
    fn all_zero_kernel_is_pure_flush() {
        let s = build_schedule(&kernel_from_mask(3, 2, 4, &[]));
        assert_eq!(s.reps(), 4);
        assert_eq!(s.n_extra(), 4);
        assert_eq!(s.n_empty(), 0);
        for (i, t) in s.tags().iter().enumerate() {
            assert_eq!(*t, IterationTag::Extra(i as u32));
        }
    }

    #[test]
    fn waiting_for_late_input_channel() {
        // Single nonzero on the last input channel of oc 0: the engine must
        // wait ic-1 iterations for that row to stream in.
        let s = build_schedule(&kernel_from_mask(3, 4, 1, &[(0, 3, 0)]));
        assert_eq!(s.reps(), 4);
        assert_eq!(s.n_empty(), 3);
        assert_eq!(
            s.tags(),
            &[
                IterationTag::Empty,
                IterationTag::Empty,
                IterationTag::Empty,
                IterationTag::Normal(0),
            ]
        );
    }

    #[test]
    fn skipped_channel_flushes_between_populated_ones() {
        // oc 0 and oc 2 have weights, oc 1 has none.
        let s = build_schedule(&kernel_from_mask(3, 2, 3, &[(0, 0, 0), (2, 1, 2)]));
        assert_eq!(
            s.tags(),
            &[
                IterationTag::Normal(0),
                IterationTag::Extra(1),
                IterationTag::Normal(1),
            ]
        );
        assert_eq!(s.reps(), 3);
    }

    #[test]
    fn wait_can_occur_while_flushing() {
        // oc 0 holds a nonzero on ic 2, oc 1 is empty: iteration 0 waits
        // (only ic 0 has arrived), iteration 1 still waits, iteration 2
        // processes it, iteration 3 flushes oc 1.
        let s = build_schedule(&kernel_from_mask(1, 3, 2, &[(0, 2, 0)]));
        assert_eq!(
            s.tags(),
            &[
                IterationTag::Empty,
                IterationTag::Empty,
                IterationTag::Normal(0),
                IterationTag::Extra(1),
            ]
        );
    }

    fn arb_kernel() -> impl Strategy<Value = SparseKernelCOO> {
        (1usize..=5, 1usize..=8, 1usize..=8, 1usize..=12).prop_flat_map(|(kw, ic, oc, oi)| {
            let dims = ConvDims::new(kw, ic, oc, oi).unwrap();
            proptest::collection::vec(proptest::bool::weighted(0.3), dims.weight_count()).prop_map(
                move |mask| {
                    let mut dense = DenseKernel::zeros(dims);
                    let mut i = 0;
                    for o in 0..dims.oc {
                        for c in 0..dims.ic {
                            for k in 0..dims.kw {
                                if mask[i] {
                                    dense.set(o, c, k, FixedPoint16::from_raw(3));
                                }
                                i += 1;
                            }
                        }
                    }
                    SparseKernelCOO::from_dense(&dense)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn rep_count_identity(kernel in arb_kernel()) {
            let s = build_schedule(&kernel);
            let (normal, empty, extra) = tag_counts(&s);
            prop_assert_eq!(normal, kernel.nnz() as u64);
            prop_assert_eq!(s.n_empty(), empty);
            prop_assert_eq!(s.n_extra(), extra);
            prop_assert_eq!(s.reps(), normal + empty + extra);
        }

        #[test]
        fn empties_only_while_input_streams_in(kernel in arb_kernel()) {
            let s = build_schedule(&kernel);
            let ic = kernel.dims().ic as u64;
            prop_assert!(s.n_empty() <= ic.saturating_sub(1));
            for (i, t) in s.tags().iter().enumerate() {
                if *t == IterationTag::Empty {
                    prop_assert!((i as u64) < ic - 1);
                }
            }
        }

        #[test]
        fn one_extra_per_all_zero_channel(kernel in arb_kernel()) {
            let s = build_schedule(&kernel);
            let per_oc = kernel.per_oc_nnz();
            let zero_channels: Vec<u32> = (0..kernel.dims().oc)
                .filter(|&o| per_oc[o] == 0)
                .map(|o| o as u32)
                .collect();
            let extras: Vec<u32> = s
                .tags()
                .iter()
                .filter_map(|t| match t {
                    IterationTag::Extra(o) => Some(*o),
                    _ => None,
                })
                .collect();
            prop_assert_eq!(extras, zero_channels);
        }

        #[test]
        fn normals_walk_entries_in_order(kernel in arb_kernel()) {
            let s = build_schedule(&kernel);
            let normals: Vec<u32> = s
                .tags()
                .iter()
                .filter_map(|t| match t {
                    IterationTag::Normal(n) => Some(*n),
                    _ => None,
                })
                .collect();
            let expect: Vec<u32> = (0..kernel.nnz() as u32).collect();
            prop_assert_eq!(normals, expect);
        }

        #[test]
        fn empties_precede_first_emission_when_first_channel_is_covered(kernel in arb_kernel()) {
            // When output channel 0 holds at least `ic` nonzeros spanning
            // every input channel, all waiting resolves before the first
            // channel transition.
            let dims = kernel.dims();
            let covered = (0..dims.ic).all(|c| {
                kernel.entries().iter().any(|e| {
                    crate::coo::oc_index(e.ri, dims.ic) == 0
                        && crate::coo::ic_index(e.ri, dims.ic) == c
                })
            });
            prop_assume!(covered);
            let s = build_schedule(&kernel);
            let first_transition = s.tags().iter().position(|t| match t {
                IterationTag::Normal(n) => {
                    let next = *n as usize + 1;
                    match kernel.entries().get(next) {
                        Some(e) => crate::coo::oc_index(e.ri, dims.ic) != 0,
                        None => true,
                    }
                }
                IterationTag::Extra(_) => true,
                IterationTag::Empty => false,
            });
            if let Some(limit) = first_transition {
                for (i, t) in s.tags().iter().enumerate() {
                    if *t == IterationTag::Empty {
                        prop_assert!(i < limit);
                    }
                }
            }
        }
    }
}
