//! Seeded random spike sources for experiments and tests.

use crate::error::Error;
use crate::spike::SpikeTensor;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Uniform value in `[0, 1)` from the top 53 bits of the next word, so the
/// mapping is pinned to this crate rather than to an RNG library's float
/// sampling internals.
pub(crate) fn next_unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Generates an i.i.d. Bernoulli spike tensor: each bit fires with
/// probability `rate`. The same `(shape, rate, seed)` always produces the
/// same tensor.
pub fn gen_bernoulli_input(
    timesteps: usize,
    channels: usize,
    width: usize,
    rate: f64,
    seed: u64,
) -> Result<SpikeTensor, Error> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::BadParam(format!("fire rate {rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpikeTensor::zeros(timesteps, channels, width);
    for t in 0..timesteps {
        for c in 0..channels {
            for x in 0..width {
                out.set(t, c, x, next_unit(&mut rng) < rate);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = gen_bernoulli_input(4, 2, 16, 0.5, 42).unwrap();
        let b = gen_bernoulli_input(4, 2, 16, 0.5, 42).unwrap();
        let c = gen_bernoulli_input(4, 2, 16, 0.5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn extreme_rates() {
        let zeros = gen_bernoulli_input(3, 2, 8, 0.0, 7).unwrap();
        assert_eq!(zeros.count_ones(), 0);
        let ones = gen_bernoulli_input(3, 2, 8, 1.0, 7).unwrap();
        assert_eq!(ones.count_ones(), 3 * 2 * 8);
        assert!(gen_bernoulli_input(1, 1, 1, 1.5, 0).is_err());
        assert!(gen_bernoulli_input(1, 1, 1, -0.1, 0).is_err());
    }

    #[test]
    fn empirical_rate_within_three_sigma() {
        // n = 20_000 bits at p = 0.3: sigma = sqrt(p(1-p)/n) ~ 0.0032.
        let n = 20_000usize;
        let p = 0.3;
        let t = gen_bernoulli_input(10, 2, 1000, p, 1234).unwrap();
        let rate = t.fire_rate();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (rate - p).abs() < 3.0 * sigma,
            "rate {rate} vs p {p} (3 sigma = {})",
            3.0 * sigma
        );
    }
}
