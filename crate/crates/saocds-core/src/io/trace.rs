//! Packed binary spike traces.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SPKT"
//! 4       1     format version (1)
//! 5       4     timesteps
//! 9       4     channels
//! 13      4     width
//! 17      ...   payload: ceil(t*c*w / 8) bytes
//! ```
//!
//! Payload bits run in `[timestep][channel][pixel]` order, least-significant
//! bit of each byte first. Trailing padding bits in the final byte must be
//! zero, so a given tensor has exactly one on-disk form.

use crate::error::Error;
use crate::spike::SpikeTensor;
use std::io::{Read, Write};

const MAGIC: [u8; 4] = *b"SPKT";
const VERSION: u8 = 1;

/// Serializes a tensor to the packed format.
pub fn save_trace(w: &mut impl Write, tensor: &SpikeTensor) -> Result<(), Error> {
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION])?;
    for dim in [tensor.timesteps(), tensor.channels(), tensor.width()] {
        let v = u32::try_from(dim).map_err(|_| {
            Error::TraceFile(format!("dimension {dim} exceeds the u32 header field"))
        })?;
        w.write_all(&v.to_le_bytes())?;
    }
    let bits = tensor.bits();
    let mut payload = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        payload[i / 8] |= b << (i % 8);
    }
    w.write_all(&payload)?;
    Ok(())
}

/// Reads a packed trace back, checking header, length, and padding.
pub fn load_trace(r: &mut impl Read) -> Result<SpikeTensor, Error> {
    let mut header = [0u8; 17];
    r.read_exact(&mut header)
        .map_err(|_| Error::TraceFile("truncated header".into()))?;
    if header[0..4] != MAGIC {
        return Err(Error::TraceFile("bad magic (not a spike trace)".into()));
    }
    if header[4] != VERSION {
        return Err(Error::VersionMismatch {
            found: header[4] as u32,
            supported: VERSION as u32,
        });
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (t, c, w) = (word(5), word(9), word(13));
    let bit_count = t
        .checked_mul(c)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::TraceFile("dimensions overflow".into()))?;
    let byte_count = bit_count.div_ceil(8);
    let mut payload = vec![0u8; byte_count];
    r.read_exact(&mut payload)
        .map_err(|_| Error::TraceFile(format!("payload shorter than {byte_count} bytes")))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::TraceFile("trailing bytes after payload".into()));
    }
    let mut bits = vec![0u8; bit_count];
    for (i, bit) in bits.iter_mut().enumerate() {
        *bit = (payload[i / 8] >> (i % 8)) & 1;
    }
    // Padding bits beyond the tensor must be clear.
    if bit_count % 8 != 0 {
        let last = payload[byte_count - 1];
        if last >> (bit_count % 8) != 0 {
            return Err(Error::TraceFile("nonzero padding bits".into()));
        }
    }
    SpikeTensor::from_bits(t, c, w, bits)
}
