//! Signed fixed-point encoding into the ring.

use crate::error::{Error, Result};
use crate::ring::Ring;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedPoint {
    ring: Ring,
    frac_bits: u32,
}

impl FixedPoint {
    pub fn new(ring: Ring, frac_bits: u32) -> Result<Self> {
        if frac_bits == 0 || frac_bits + 1 >= ring.bits() {
            return Err(Error::Argument(format!(
                "fractional bits {frac_bits} do not fit a {}-bit ring",
                ring.bits()
            )));
        }
        Ok(FixedPoint { ring, frac_bits })
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Encoding of 1.0.
    pub fn one(&self) -> u64 {
        1u64 << self.frac_bits
    }

    /// Largest magnitude accepted by `encode`, exclusive.
    pub fn bound(&self) -> f64 {
        2f64.powi((self.ring.bits() - 1 - self.frac_bits) as i32)
    }

    /// Rounds to the nearest multiple of 2^-f, ties away from zero.
    pub fn encode(&self, q: f64) -> Result<u64> {
        if !q.is_finite() || q.abs() >= self.bound() {
            return Err(Error::Range(q));
        }
        let scaled = (q * 2f64.powi(self.frac_bits as i32)).round();
        Ok(self.ring.from_i64(scaled as i64))
    }

    pub fn decode(&self, x: u64) -> f64 {
        self.ring.to_signed(x) as f64 / 2f64.powi(self.frac_bits as i32)
    }

    /// Floor truncation by `f` bits on the signed reading.
    pub fn truncate(&self, x: u64) -> u64 {
        self.ring.shift_signed(x, self.frac_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codec() -> FixedPoint {
        FixedPoint::new(Ring::new(64).unwrap(), 20).unwrap()
    }

    #[test]
    fn encode_examples() {
        let c = codec();
        assert_eq!(c.encode(1.0).unwrap(), 1 << 20);
        assert_eq!(c.encode(-1.5).unwrap(), 0u64.wrapping_sub(3 << 19));
        assert_eq!(c.decode(c.encode(-1.5).unwrap()), -1.5);
        assert!(matches!(c.encode(2f64.powi(43)), Err(Error::Range(_))));
    }

    #[test]
    fn ties_round_away_from_zero() {
        let c = codec();
        let half_ulp = 2f64.powi(-21);
        assert_eq!(c.encode(half_ulp).unwrap(), 1);
        assert_eq!(c.encode(-half_ulp).unwrap(), c.ring().from_i64(-1));
    }
}
