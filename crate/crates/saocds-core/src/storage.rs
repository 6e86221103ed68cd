//! Weight-storage cost model: dense versus COO footprints and the density
//! below which compression pays off.

use crate::coo::{ConvDims, SparseKernelCOO};
use crate::error::Error;

/// Bits needed to index `count` distinct values (0 for a single value).
pub fn ceil_log2(count: usize) -> u32 {
    debug_assert!(count > 0);
    (usize::BITS - (count - 1).leading_zeros()) as u32
}

/// Smallest row-index width for a kernel shape (`ic * oc` rows).
pub fn min_ri_bits(dims: ConvDims) -> u32 {
    ceil_log2(dims.ic * dims.oc)
}

/// Smallest column-index width for a kernel shape (`kw` taps).
pub fn min_ci_bits(dims: ConvDims) -> u32 {
    ceil_log2(dims.kw)
}

/// Bits per COO entry.
pub fn entry_bits(d_bits: u32, ri_bits: u32, ci_bits: u32) -> u32 {
    d_bits + ri_bits + ci_bits
}

/// Density at which COO storage equals dense storage.
///
/// Dense stores `N * d_bits`; COO stores `nnz * (d_bits + ri_bits + ci_bits)`.
/// The two meet at `nnz / N = d_bits / (d_bits + ri_bits + ci_bits)`; below
/// that density the compressed form is strictly smaller.
pub fn break_even_density(d_bits: u32, ri_bits: u32, ci_bits: u32) -> f64 {
    assert!(d_bits > 0, "weight width must be positive");
    d_bits as f64 / entry_bits(d_bits, ri_bits, ci_bits) as f64
}

/// Total bits to store a dense weight array.
pub fn dense_storage_bits(weight_count: usize, d_bits: u32) -> u64 {
    weight_count as u64 * d_bits as u64
}

/// Total bits to store a kernel in COO form at the given field widths.
///
/// Fails if an index width cannot cover the kernel's coordinate range.
pub fn coo_storage_bits(
    kernel: &SparseKernelCOO,
    d_bits: u32,
    ri_bits: u32,
    ci_bits: u32,
) -> Result<u64, Error> {
    let dims = kernel.dims();
    if ri_bits < min_ri_bits(dims) {
        return Err(Error::IndexWidth {
            what: "row index",
            needed: min_ri_bits(dims),
            given: ri_bits,
        });
    }
    if ci_bits < min_ci_bits(dims) {
        return Err(Error::IndexWidth {
            what: "column index",
            needed: min_ci_bits(dims),
            given: ci_bits,
        });
    }
    Ok(kernel.nnz() as u64 * entry_bits(d_bits, ri_bits, ci_bits) as u64)
}
