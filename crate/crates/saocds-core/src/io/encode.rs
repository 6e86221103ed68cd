//! Sigma-delta front end: turns slowly varying real-valued samples into
//! spike trains whose density tracks the signal level.
//!
//! Each `(channel, pixel)` sample is held constant and run through an
//! error-feedback modulator for `osr` steps; the resulting ±1 decisions map
//! to spike bits (+1 → 1). For a constant input `x` the first-order loop's
//! bit density converges to `(x + 1) / 2` with error at most `1/osr`.

use crate::error::Error;
use crate::spike::SpikeTensor;

/// Loop order of the modulator. First order is the reference configuration;
/// second order trades idle-tone behavior for more state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModulatorOrder {
    #[default]
    First,
    Second,
}

impl ModulatorOrder {
    pub fn from_u32(n: u32) -> Result<Self, Error> {
        match n {
            1 => Ok(ModulatorOrder::First),
            2 => Ok(ModulatorOrder::Second),
            other => Err(Error::BadParam(format!(
                "modulator order {other} not supported (1 or 2)"
            ))),
        }
    }
}

/// Encoder-side bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    /// Samples clamped into [-1, 1] before modulation.
    pub clipped: u64,
}

/// Encodes a `[channel][pixel]` sample grid into an `osr`-timestep spike
/// tensor. All channels must have the same width.
pub fn sigma_delta_encode(
    samples: &[Vec<f64>],
    osr: usize,
    order: ModulatorOrder,
) -> Result<(SpikeTensor, EncodeStats), Error> {
    if samples.is_empty() {
        return Err(Error::BadParam("no channels to encode".into()));
    }
    if osr == 0 {
        return Err(Error::BadParam("oversampling ratio must be positive".into()));
    }
    let width = samples[0].len();
    if width == 0 {
        return Err(Error::BadParam("channel width must be positive".into()));
    }
    for (c, row) in samples.iter().enumerate() {
        if row.len() != width {
            return Err(Error::DimMismatch {
                what: "encoder channel width",
                expected: width,
                actual: row.len(),
            });
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::BadParam(format!(
                "channel {c} holds non-finite sample {v}"
            )));
        }
    }

    let mut stats = EncodeStats::default();
    let mut out = SpikeTensor::zeros(osr, samples.len(), width);
    for (c, row) in samples.iter().enumerate() {
        for (x, &raw) in row.iter().enumerate() {
            let v = raw.clamp(-1.0, 1.0);
            if v != raw {
                stats.clipped += 1;
            }
            match order {
                ModulatorOrder::First => {
                    let mut acc = 0.0f64;
                    for t in 0..osr {
                        let sum = acc + v;
                        let y = if sum >= 0.0 { 1.0 } else { -1.0 };
                        acc = sum - y;
                        out.set(t, c, x, y > 0.0);
                    }
                }
                ModulatorOrder::Second => {
                    // Two cascaded integrators with error feedback; state is
                    // clamped as a stability guard at the rails.
                    let (mut i1, mut i2) = (0.0f64, 0.0f64);
                    let mut y = 0.0f64;
                    for t in 0..osr {
                        i1 = (i1 + v - y).clamp(-8.0, 8.0);
                        i2 = (i2 + i1 - y).clamp(-8.0, 8.0);
                        y = if i2 >= 0.0 { 1.0 } else { -1.0 };
                        out.set(t, c, x, y > 0.0);
                    }
                }
            }
        }
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_of(tensor: &SpikeTensor, c: usize, x: usize) -> Vec<u8> {
        (0..tensor.timesteps())
            .map(|t| tensor.get(t, c, x) as u8)
            .collect()
    }

    #[test]
    fn rail_inputs_saturate_the_bitstream() {
        let (t, stats) =
            sigma_delta_encode(&[vec![1.0, -1.0]], 16, ModulatorOrder::First).unwrap();
        assert_eq!(bits_of(&t, 0, 0), vec![1; 16]);
        assert_eq!(bits_of(&t, 0, 1), vec![0; 16]);
        assert_eq!(stats.clipped, 0);
    }

    #[test]
    fn zero_input_alternates() {
        let (t, _) = sigma_delta_encode(&[vec![0.0]], 8, ModulatorOrder::First).unwrap();
        // sum starts at 0 which quantizes positive, then the error feedback
        // flips it every step.
        assert_eq!(bits_of(&t, 0, 0), vec![1, 0, 1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn clipping_is_counted() {
        let (t, stats) =
            sigma_delta_encode(&[vec![2.5, -3.0, 0.5]], 4, ModulatorOrder::First).unwrap();
        assert_eq!(stats.clipped, 2);
        assert_eq!(bits_of(&t, 0, 0), vec![1; 4]);
        assert_eq!(bits_of(&t, 0, 1), vec![0; 4]);
    }

    #[test]
    fn first_order_density_tracks_input() {
        // |bit mean - (x+1)/2| <= 1/osr for every constant input.
        let osr = 64;
        for i in 0..=40 {
            let x = -1.0 + i as f64 * 0.05;
            let (t, _) = sigma_delta_encode(&[vec![x]], osr, ModulatorOrder::First).unwrap();
            let mean = bits_of(&t, 0, 0).iter().map(|&b| b as f64).sum::<f64>() / osr as f64;
            let target = (x + 1.0) / 2.0;
            assert!(
                (mean - target).abs() <= 1.0 / osr as f64 + 1e-12,
                "x={x}: mean {mean} vs target {target}"
            );
        }
    }

    #[test]
    fn second_order_density_tracks_input_loosely() {
        let osr = 256;
        for &x in &[-0.75, -0.2, 0.0, 0.3, 0.8] {
            let (t, _) = sigma_delta_encode(&[vec![x]], osr, ModulatorOrder::Second).unwrap();
            let mean = bits_of(&t, 0, 0).iter().map(|&b| b as f64).sum::<f64>() / osr as f64;
            let target = (x + 1.0) / 2.0;
            assert!(
                (mean - target).abs() < 0.05,
                "x={x}: mean {mean} vs target {target}"
            );
        }
    }

    #[test]
    fn shape_errors() {
        assert!(sigma_delta_encode(&[], 8, ModulatorOrder::First).is_err());
        assert!(sigma_delta_encode(&[vec![0.0]], 0, ModulatorOrder::First).is_err());
        assert!(
            sigma_delta_encode(&[vec![0.0, 0.1], vec![0.2]], 8, ModulatorOrder::First).is_err()
        );
        assert!(sigma_delta_encode(&[vec![f64::NAN]], 8, ModulatorOrder::First).is_err());
        assert!(ModulatorOrder::from_u32(3).is_err());
    }
}
