//! Fixed-point arithmetic: 16-bit weights and 32-bit membrane accumulators.
//!
//! All values in one network share a single fractional-bit count (`frac_bits`),
//! so the types store only the raw integer and the scale is passed to the few
//! operations that need it. Multiplies round to nearest with ties to even;
//! additions and subtractions saturate instead of wrapping.

use crate::error::Error;

/// Bit width of a stored weight word.
pub const WEIGHT_BITS: u32 = 16;

/// Default fractional-bit count used by the bundled configurations.
pub const DEFAULT_FRAC_BITS: u32 = 8;

/// Signed 16-bit fixed-point value (weights, decay/threshold parameters).
///
/// The represented value is `raw / 2^frac_bits`; `frac_bits` is global to a
/// network configuration and is passed explicitly where the scale matters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FixedPoint16 {
    raw: i16,
}

impl FixedPoint16 {
    pub const ZERO: Self = Self { raw: 0 };

    pub fn from_raw(raw: i16) -> Self {
        Self { raw }
    }

    pub fn raw(self) -> i16 {
        self.raw
    }

    pub fn is_zero(self) -> bool {
        self.raw == 0
    }

    /// Quantizes a real value: scale by `2^frac_bits`, round to nearest with
    /// ties to even, then clip to the representable range. Zero maps to zero
    /// and NaN is treated as zero.
    pub fn quantize(value: f64, frac_bits: u32) -> Self {
        let scaled = value * (1u64 << frac_bits) as f64;
        let rounded = scaled.round_ties_even();
        // Comparisons with NaN are false, so NaN falls through to the zero arm.
        let raw = if rounded >= i16::MAX as f64 {
            i16::MAX
        } else if rounded <= i16::MIN as f64 {
            i16::MIN
        } else if rounded.is_nan() {
            0
        } else {
            rounded as i16
        };
        Self { raw }
    }

    /// Parses a plain decimal literal (`-1.25`, `0.5`, `3`) exactly, rounding
    /// the rational value to nearest raw with ties to even, then clipping.
    ///
    /// Exact integer parsing keeps file loads reproducible across platforms;
    /// no intermediate float is involved.
    pub fn from_decimal(s: &str, frac_bits: u32) -> Result<Self, Error> {
        let bad = || Error::BadDecimal(s.to_string());
        let t = s.trim();
        let (neg, digits) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        // Enough for any value that survives the i16 clip, with headroom.
        if int_part.len() + frac_part.len() > 25 {
            return Err(bad());
        }
        let mut numerator: i128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            numerator = numerator * 10 + i128::from(b - b'0');
        }
        let denominator: i128 = 10i128.pow(frac_part.len() as u32);
        // Round |numerator| * 2^f / denominator to nearest, ties to even.
        let scaled = numerator << frac_bits;
        let q = scaled / denominator;
        let r = scaled % denominator;
        let mut mag = q;
        let twice = r * 2;
        if twice > denominator || (twice == denominator && q % 2 == 1) {
            mag += 1;
        }
        let signed = if neg { -mag } else { mag };
        let raw = signed.clamp(i16::MIN as i128, i16::MAX as i128) as i16;
        Ok(Self { raw })
    }

    /// Renders the exact represented value as a minimal decimal literal.
    ///
    /// `raw / 2^f` always has a finite decimal expansion, so
    /// `from_decimal(to_decimal(x)) == x` for every value.
    pub fn to_decimal(self, frac_bits: u32) -> String {
        let neg = self.raw < 0;
        let mag = (self.raw as i64).unsigned_abs() as u128;
        // |raw| / 2^f == |raw| * 5^f / 10^f.
        let scaled = mag * 5u128.pow(frac_bits);
        let mut digits = scaled.to_string();
        let f = frac_bits as usize;
        if digits.len() <= f {
            digits = format!("{:0>width$}", digits, width = f + 1);
        }
        let split = digits.len() - f;
        let (int_part, frac_part) = digits.split_at(split);
        let frac_part = frac_part.trim_end_matches('0');
        let mut out = String::new();
        if neg && scaled != 0 {
            out.push('-');
        }
        out.push_str(int_part);
        if !frac_part.is_empty() {
            out.push('.');
            out.push_str(frac_part);
        }
        out
    }

    pub fn to_f64(self, frac_bits: u32) -> f64 {
        self.raw as f64 / (1u64 << frac_bits) as f64
    }
}

/// Signed 32-bit accumulator holding a membrane potential at the same
/// `frac_bits` scale as the weights feeding it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Accumulator {
    raw: i32,
}

impl Accumulator {
    pub const ZERO: Self = Self { raw: 0 };

    pub fn from_raw(raw: i32) -> Self {
        Self { raw }
    }

    pub fn raw(self) -> i32 {
        self.raw
    }

    /// Saturating add of a weight (sign-extended to 32 bits).
    pub fn add_weight(self, w: FixedPoint16) -> Self {
        Self {
            raw: self.raw.saturating_add(w.raw as i32),
        }
    }

    /// Saturating subtract of a non-negative parameter (threshold decrement).
    pub fn sub_weight(self, w: FixedPoint16) -> Self {
        Self {
            raw: self.raw.saturating_sub(w.raw as i32),
        }
    }

    /// Multiplies by a fixed-point factor, rounding the product back to the
    /// accumulator scale (nearest, ties to even) and saturating.
    pub fn scale(self, factor: FixedPoint16, frac_bits: u32) -> Self {
        let product = self.raw as i64 * factor.raw as i64;
        let rounded = round_half_even_shift(product, frac_bits);
        Self {
            raw: rounded.clamp(i32::MIN as i64, i32::MAX as i64) as i32,
        }
    }

    /// Reports whether `scale` would round (i.e. drop nonzero low bits).
    /// Used by tests that must drive the engine through exact-arithmetic
    /// regions where a plain float model is a valid oracle.
    pub fn scale_is_exact(self, factor: FixedPoint16, frac_bits: u32) -> bool {
        let product = self.raw as i64 * factor.raw as i64;
        frac_bits == 0 || product & ((1i64 << frac_bits) - 1) == 0
    }

    /// Strict comparison against a threshold at the same scale.
    pub fn exceeds(self, threshold: FixedPoint16) -> bool {
        self.raw > threshold.raw as i32
    }

    pub fn to_f64(self, frac_bits: u32) -> f64 {
        self.raw as f64 / (1u64 << frac_bits) as f64
    }
}

/// Arithmetic shift right by `shift` with round-to-nearest, ties to even.
fn round_half_even_shift(x: i64, shift: u32) -> i64 {
    if shift == 0 {
        return x;
    }
    let floor = x >> shift;
    let rem = x - (floor << shift);
    let half = 1i64 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}
