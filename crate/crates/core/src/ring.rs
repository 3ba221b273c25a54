//! Arithmetic in Z_{2^l} for 1 <= l <= 64.
//!
//! Elements are stored in the low `l` bits of a `u64`. All operations wrap and
//! then mask, so a value handed out by this module is always reduced.

use rand::Rng;

use crate::error::{Error, Result};

pub type RingElement = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ring {
    bits: u32,
    mask: u64,
}

impl Ring {
    pub fn new(bits: u32) -> Result<Self> {
        if !(2..=64).contains(&bits) {
            return Err(Error::Argument(format!("ring width {bits} not in 2..=64")));
        }
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        Ok(Ring { bits, mask })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn mask(self) -> u64 {
        self.mask
    }

    #[inline(always)]
    pub fn reduce(self, x: u64) -> u64 {
        x & self.mask
    }

    #[inline(always)]
    pub fn add(self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask
    }

    #[inline(always)]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask
    }

    #[inline(always)]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask
    }

    #[inline(always)]
    pub fn neg(self, a: u64) -> u64 {
        a.wrapping_neg() & self.mask
    }

    pub fn from_i64(self, v: i64) -> u64 {
        (v as u64) & self.mask
    }

    /// Two's complement reading of `x`.
    #[inline]
    pub fn to_signed(self, x: u64) -> i64 {
        let shift = 64 - self.bits;
        ((x << shift) as i64) >> shift
    }

    #[inline]
    pub fn msb(self, x: u64) -> bool {
        (x >> (self.bits - 1)) & 1 == 1
    }

    /// Floor division of the signed reading of `x` by `2^f`.
    pub fn shift_signed(self, x: u64, f: u32) -> u64 {
        debug_assert!(f < self.bits);
        self.from_i64(self.to_signed(x) >> f)
    }

    /// Multiplicative inverse of an odd element.
    pub fn odd_inverse(self, x: u64) -> Result<u64> {
        let x = self.reduce(x);
        if x & 1 == 0 {
            return Err(Error::NoInverse(x));
        }
        // x*x = 1 mod 8, and every Newton step doubles the valid bits.
        let mut y = x;
        for _ in 0..5 {
            y = y.wrapping_mul(2u64.wrapping_sub(x.wrapping_mul(y)));
        }
        Ok(self.reduce(y))
    }

    /// 2-adic valuation, with `bits` standing in for the valuation of zero.
    pub fn valuation(self, x: u64) -> u32 {
        let x = self.reduce(x);
        if x == 0 {
            self.bits
        } else {
            x.trailing_zeros()
        }
    }

    pub fn random<R: Rng + ?Sized>(self, rng: &mut R) -> u64 {
        rng.gen::<u64>() & self.mask
    }

    /// Sum of `coeffs[i] * xs[i]`.
    pub fn dot(self, coeffs: &[u64], xs: &[u64]) -> u64 {
        let mut acc = 0u64;
        for (c, x) in coeffs.iter().zip(xs) {
            acc = acc.wrapping_add(c.wrapping_mul(*x));
        }
        acc & self.mask
    }
}
