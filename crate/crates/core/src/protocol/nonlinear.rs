//! ReLU and the piecewise-linear sigmoid.

use crate::bits::BitVec;
use crate::error::Result;
use crate::share::{BShare, LocalShare};

use super::Party;

impl Party {
    /// Shares of the 0/1 matrix `[x >= 0]`, unscaled.
    pub fn nonneg_bits(&mut self, x: &LocalShare) -> Result<LocalShare> {
        let (rows, cols) = x.shape();
        let a = self.v2a(x)?;
        let b = self.msb(&a)?;
        let nb = self.not_bits(&b);
        let ba = self.bit2a(&nb)?;
        self.a2v(&ba)?.reshape(rows, cols)
    }

    /// Returns `(relu(x), [x >= 0])`. The bit matrix is unscaled, so the
    /// product needs no truncation and the bits can be reused as the derivative.
    pub fn relu(&mut self, x: &LocalShare) -> Result<(LocalShare, LocalShare)> {
        let bits = self.nonneg_bits(x)?;
        let y = self.mul(&bits, x)?;
        Ok((y, bits))
    }

    /// 0 below -1/2, x + 1/2 in between, 1 from 1/2 up.
    pub fn sigmoid(&mut self, x: &LocalShare) -> Result<LocalShare> {
        let ring = self.ring();
        let (rows, cols) = x.shape();
        let k = rows * cols;
        let half = 1u64 << (self.params.frac_bits() - 1);
        let one = self.params.codec.one();
        let up = self.add_public(x, half);
        let down = self.add_public(x, ring.neg(half));
        let both = LocalShare::vstack(&[&up.clone().reshape(1, k)?, &down.reshape(1, k)?])?
            .reshape(1, 2 * k)?;
        let a = self.v2a(&both)?;
        let b = self.msb(&a)?;
        // b1 = [x < -1/2], b2 = [x < 1/2]; the middle segment is (1 ^ b1) & b2.
        let b1 = BShare { bits: b.bits.slice(0, k) };
        let b2 = BShare { bits: b.bits.slice(k, k) };
        let nb1 = self.not_bits(&b1);
        let g = self.and_bits(&nb1.bits, &b2.bits)?;
        let nb2 = self.not_bits(&b2);
        let gates = BShare { bits: BitVec::concat(&[g, nb2.bits]) };
        let ga = self.bit2a(&gates)?;
        let gv = self.a2v(&ga)?;
        let (mid, high) = gv.reshape(2, k)?.split_rows(1);
        let mid = mid.reshape(rows, cols)?;
        let high = high.reshape(rows, cols)?;
        let middle = self.mul(&mid, &up)?;
        middle.add(&high.scale(one, ring), ring)
    }
}
