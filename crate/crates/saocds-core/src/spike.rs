//! Binary spike tensors: `[timestep][channel][pixel]` arrays of 0/1 values.

use crate::error::Error;

/// A dense record of spike activity over a run.
///
/// Storage is one byte per bit (values are always 0 or 1), laid out
/// timestep-major, then channel, then pixel. Rows (`[channel]` slices at one
/// timestep) are the unit the streaming engines consume and emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTensor {
    timesteps: usize,
    channels: usize,
    width: usize,
    bits: Vec<u8>,
}

impl SpikeTensor {
    pub fn zeros(timesteps: usize, channels: usize, width: usize) -> Self {
        Self {
            timesteps,
            channels,
            width,
            bits: vec![0; timesteps * channels * width],
        }
    }

    /// Builds a tensor from raw bytes in `[t][c][x]` order; every byte must
    /// be 0 or 1.
    pub fn from_bits(
        timesteps: usize,
        channels: usize,
        width: usize,
        bits: Vec<u8>,
    ) -> Result<Self, Error> {
        if bits.len() != timesteps * channels * width {
            return Err(Error::DimMismatch {
                what: "spike tensor payload length",
                expected: timesteps * channels * width,
                actual: bits.len(),
            });
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::BadParam(format!(
                "spike tensor holds non-binary value {b}"
            )));
        }
        Ok(Self {
            timesteps,
            channels,
            width,
            bits,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn row_index(&self, t: usize, c: usize) -> usize {
        debug_assert!(t < self.timesteps && c < self.channels);
        (t * self.channels + c) * self.width
    }

    pub fn get(&self, t: usize, c: usize, x: usize) -> bool {
        debug_assert!(x < self.width);
        self.bits[self.row_index(t, c) + x] != 0
    }

    pub fn set(&mut self, t: usize, c: usize, x: usize, value: bool) {
        debug_assert!(x < self.width);
        let i = self.row_index(t, c) + x;
        self.bits[i] = value as u8;
    }

    /// One channel's pixels at one timestep.
    pub fn row(&self, t: usize, c: usize) -> &[u8] {
        let i = self.row_index(t, c);
        &self.bits[i..i + self.width]
    }

    pub fn set_row(&mut self, t: usize, c: usize, row: &[u8]) {
        debug_assert_eq!(row.len(), self.width);
        debug_assert!(row.iter().all(|&b| b <= 1));
        let i = self.row_index(t, c);
        self.bits[i..i + self.width].copy_from_slice(row);
    }

    /// Raw payload in `[t][c][x]` order, one byte per bit.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    /// Fraction of bits set, or 0 for an empty tensor.
    pub fn fire_rate(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.count_ones() as f64 / self.bits.len() as f64
        }
    }
}
