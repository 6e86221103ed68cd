//! Convolution kernel storage: dense arrays and the compressed COO form the
//! streaming engine consumes.
//!
//! A COO entry packs the input- and output-channel coordinates into one row
//! index `ri = oc * ic_count + ic`; the column index `ci` is the kernel tap.
//! Entries are kept sorted by `(oc, ic, ci)` — the exact order in which the
//! engine walks them — and never store explicit zeros.

use crate::error::Error;
use crate::fixed::FixedPoint16;

/// Shape of one 1-D convolution layer.
///
/// `oi` is the output width; the padded input width is derived as
/// `oi + kw - 1` so the two can never disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    /// Kernel taps per (input channel, output channel) pair.
    pub kw: usize,
    /// Input channels.
    pub ic: usize,
    /// Output channels.
    pub oc: usize,
    /// Output pixels per channel.
    pub oi: usize,
}

impl ConvDims {
    pub fn new(kw: usize, ic: usize, oc: usize, oi: usize) -> Result<Self, Error> {
        if kw == 0 || ic == 0 || oc == 0 || oi == 0 {
            return Err(Error::BadParam(format!(
                "convolution dims must be positive (kw={kw}, ic={ic}, oc={oc}, oi={oi})"
            )));
        }
        Ok(Self { kw, ic, oc, oi })
    }

    /// Padded input width seen by the sliding window.
    pub fn in_w(&self) -> usize {
        self.oi + self.kw - 1
    }

    /// Total weight positions in the dense kernel.
    pub fn weight_count(&self) -> usize {
        self.kw * self.ic * self.oc
    }
}

/// Input-channel coordinate packed inside a row index.
pub fn ic_index(ri: u32, ic_count: usize) -> usize {
    ri as usize % ic_count
}

/// Output-channel coordinate packed inside a row index.
pub fn oc_index(ri: u32, ic_count: usize) -> usize {
    ri as usize / ic_count
}

/// Packs `(oc, ic)` into a row index.
pub fn pack_ri(oc: usize, ic: usize, ic_count: usize) -> u32 {
    debug_assert!(ic < ic_count);
    (oc * ic_count + ic) as u32
}

/// One nonzero weight: value plus packed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CooEntry {
    /// Weight value (never zero in a valid kernel).
    pub d: FixedPoint16,
    /// Packed row index, `oc * ic_count + ic`, in `[0, ic_count * oc_count)`.
    pub ri: u32,
    /// Kernel tap, in `[0, kw)`.
    pub ci: u32,
}

/// Dense kernel weights laid out `[oc][ic][ci]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseKernel {
    dims: ConvDims,
    w: Vec<FixedPoint16>,
}

impl DenseKernel {
    pub fn new(dims: ConvDims, w: Vec<FixedPoint16>) -> Result<Self, Error> {
        if w.len() != dims.weight_count() {
            return Err(Error::DimMismatch {
                what: "dense kernel weight count",
                expected: dims.weight_count(),
                actual: w.len(),
            });
        }
        Ok(Self { dims, w })
    }

    pub fn zeros(dims: ConvDims) -> Self {
        let n = dims.weight_count();
        Self {
            dims,
            w: vec![FixedPoint16::ZERO; n],
        }
    }

    pub fn dims(&self) -> ConvDims {
        self.dims
    }

    fn offset(&self, oc: usize, ic: usize, ci: usize) -> usize {
        debug_assert!(oc < self.dims.oc && ic < self.dims.ic && ci < self.dims.kw);
        (oc * self.dims.ic + ic) * self.dims.kw + ci
    }

    pub fn get(&self, oc: usize, ic: usize, ci: usize) -> FixedPoint16 {
        self.w[self.offset(oc, ic, ci)]
    }

    pub fn set(&mut self, oc: usize, ic: usize, ci: usize, w: FixedPoint16) {
        let i = self.offset(oc, ic, ci);
        self.w[i] = w;
    }

    /// Flat weights in `[oc][ic][ci]` order.
    pub fn weights(&self) -> &[FixedPoint16] {
        &self.w
    }

    pub fn nonzero_count(&self) -> usize {
        self.w.iter().filter(|w| !w.is_zero()).count()
    }
}

/// A validated, sorted, zero-free COO kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseKernelCOO {
    dims: ConvDims,
    entries: Vec<CooEntry>,
}

impl SparseKernelCOO {
    /// Compresses a dense kernel, dropping zeros and emitting entries in
    /// canonical `(oc, ic, ci)` order.
    pub fn from_dense(dense: &DenseKernel) -> Self {
        let dims = dense.dims();
        let mut entries = Vec::with_capacity(dense.nonzero_count());
        for oc in 0..dims.oc {
            for ic in 0..dims.ic {
                for ci in 0..dims.kw {
                    let d = dense.get(oc, ic, ci);
                    if !d.is_zero() {
                        entries.push(CooEntry {
                            d,
                            ri: pack_ri(oc, ic, dims.ic),
                            ci: ci as u32,
                        });
                    }
                }
            }
        }
        Self { dims, entries }
    }

    /// Builds a kernel from raw entries, enforcing every structural
    /// invariant: index ranges, strict `(oc, ic, ci)` order (which also rules
    /// out duplicates), and absence of explicit zeros.
    pub fn from_entries(dims: ConvDims, entries: Vec<CooEntry>) -> Result<Self, Error> {
        let ri_limit = (dims.ic * dims.oc) as u32;
        for (i, e) in entries.iter().enumerate() {
            if e.ri >= ri_limit {
                return Err(Error::CorruptKernel(format!(
                    "entry {i}: row index {} out of range (limit {ri_limit})",
                    e.ri
                )));
            }
            if e.ci >= dims.kw as u32 {
                return Err(Error::CorruptKernel(format!(
                    "entry {i}: column index {} out of range (kw {})",
                    e.ci, dims.kw
                )));
            }
            if e.d.is_zero() {
                return Err(Error::CorruptKernel(format!(
                    "entry {i}: explicit zero weight at ri={}, ci={}",
                    e.ri, e.ci
                )));
            }
        }
        for (i, pair) in entries.windows(2).enumerate() {
            let a = sort_key(&pair[0], dims.ic);
            let b = sort_key(&pair[1], dims.ic);
            if a == b {
                return Err(Error::CorruptKernel(format!(
                    "entries {i} and {}: duplicate position ri={}, ci={}",
                    i + 1,
                    pair[1].ri,
                    pair[1].ci
                )));
            }
            if a > b {
                return Err(Error::CorruptKernel(format!(
                    "entries {i} and {}: not sorted by (oc, ic, ci)",
                    i + 1
                )));
            }
        }
        Ok(Self { dims, entries })
    }

    /// Expands back to the dense `[oc][ic][ci]` array.
    pub fn to_dense(&self) -> DenseKernel {
        let mut dense = DenseKernel::zeros(self.dims);
        for e in &self.entries {
            dense.set(
                oc_index(e.ri, self.dims.ic),
                ic_index(e.ri, self.dims.ic),
                e.ci as usize,
                e.d,
            );
        }
        dense
    }

    pub fn dims(&self) -> ConvDims {
        self.dims
    }

    pub fn entries(&self) -> &[CooEntry] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Nonzero density relative to the dense weight count.
    pub fn density(&self) -> f64 {
        self.entries.len() as f64 / self.dims.weight_count() as f64
    }

    /// Number of nonzero entries per output channel.
    pub fn per_oc_nnz(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.dims.oc];
        for e in &self.entries {
            counts[oc_index(e.ri, self.dims.ic)] += 1;
        }
        counts
    }
}

fn sort_key(e: &CooEntry, ic_count: usize) -> (usize, usize, u32) {
    (oc_index(e.ri, ic_count), ic_index(e.ri, ic_count), e.ci)
}
