//! Binary symmetric channel simulation and capacity accounting.

use rand::distr::{Bernoulli, Distribution};

use crate::error::{Error, Result};
use crate::types::{BitSequence, Seed};

/// Memoryless channel flipping each bit independently with probability `p_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BscChannel {
    p_e: f64,
}

impl BscChannel {
    /// `p_e` must lie in `[0, 0.5]`.
    pub fn new(p_e: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p_e) {
            return Err(Error::OutOfRange(p_e));
        }
        Ok(BscChannel { p_e })
    }

    pub fn noiseless() -> Self {
        BscChannel { p_e: 0.0 }
    }

    pub fn error_probability(&self) -> f64 {
        self.p_e
    }

    pub fn capacity(&self) -> f64 {
        1.0 - entropy_unchecked(self.p_e)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::OutOfRange(p))
    }
}

fn entropy_unchecked(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(entropy_unchecked(p))
}

/// `C(p) = 1 - H(p)` bits per channel use.
pub fn bsc_capacity(p: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(p)?)
}

/// Channel symbols needed to deliver `bits` error-free with an ideal
/// capacity-achieving code. `bits` may be fractional (an average).
pub fn errorfree_symbol_cost(bits: f64, p: f64) -> Result<f64> {
    let capacity = bsc_capacity(p)?;
    if capacity <= 0.0 {
        return Err(Error::ZeroCapacity);
    }
    Ok(bits / capacity)
}

/// Passes `payload` through the channel. Deterministic given `seed`.
pub fn transmit(payload: &BitSequence, channel: &BscChannel, seed: Seed) -> BitSequence {
    if channel.p_e == 0.0 {
        return payload.clone();
    }
    // p_e was range-checked at construction.
    let flips = Bernoulli::new(channel.p_e).expect("valid probability");
    let mut rng = seed.rng();
    let bits = payload
        .bits()
        .iter()
        .map(|&bit| bit ^ flips.sample(&mut rng))
        .collect();
    BitSequence::from_bits(bits)
}
