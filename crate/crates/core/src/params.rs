//! Public parameters every party agrees on before a session starts.

use crate::error::{Error, Result};
use crate::fixed::FixedPoint;
use crate::ring::Ring;
use crate::vsss::{PublicMatrix, Vsss};

pub const DEFAULT_ELL: u32 = 64;
pub const DEFAULT_FRAC_BITS: u32 = 20;
pub const DEFAULT_SIGMA: u32 = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    pub vsss: Vsss,
    pub codec: FixedPoint,
    /// Truncation masks are drawn below 2^(l - sigma).
    pub sigma: u32,
}

impl Params {
    pub fn new(ell: u32, frac_bits: u32, sigma: u32) -> Result<Self> {
        let ring = Ring::new(ell)?;
        Params::with_matrix(PublicMatrix::standard(ring), frac_bits, sigma)
    }

    pub fn with_matrix(pm: PublicMatrix, frac_bits: u32, sigma: u32) -> Result<Self> {
        let ring = pm.ring();
        let codec = FixedPoint::new(ring, frac_bits)?;
        if sigma == 0 || sigma + frac_bits >= ring.bits() {
            return Err(Error::Argument(format!(
                "sigma {sigma} leaves no room for masks in a {}-bit ring with {frac_bits} fractional bits",
                ring.bits()
            )));
        }
        Ok(Params { vsss: Vsss::new(pm)?, codec, sigma })
    }

    pub fn default_params() -> Self {
        Params::new(DEFAULT_ELL, DEFAULT_FRAC_BITS, DEFAULT_SIGMA).expect("defaults are valid")
    }

    pub fn ring(&self) -> Ring {
        self.vsss.ring()
    }

    pub fn ell(&self) -> u32 {
        self.ring().bits()
    }

    pub fn frac_bits(&self) -> u32 {
        self.codec.frac_bits()
    }

    /// Exclusive upper bound of truncation masks.
    pub fn mask_bound(&self) -> u64 {
        1u64 << (self.ell() - self.sigma)
    }
}
