//! Conversions between vector-space shares and additive shares.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::share::{AShare, LocalShare, Mode, PartyId};
use crate::transport::{MsgKind, Payload};

use super::Party;

impl Party {
    /// Weights this party applies to its held shares to get an additive share.
    fn additive_weights(&self) -> (u64, Option<u64>) {
        let co = self.params.vsss.coeffs();
        match (self.mode, self.id) {
            (Mode::ThreeParty, p) => (co.c[p.index()], None),
            (Mode::TwoPartyAfterDrop, PartyId::P0) => (co.c_prime[0], Some(co.c_prime[2])),
            (Mode::TwoPartyAfterDrop, _) => (co.c_prime[1], None),
        }
    }

    /// Local conversion to additive shares.
    pub fn v2a(&self, x: &LocalShare) -> Result<AShare> {
        self.ensure_live()?;
        let ring = self.ring();
        let (w, w_alt) = self.additive_weights();
        let mut value = x.main.scale(w, ring);
        if let Some(wa) = w_alt {
            let alt = x.alt.as_ref().ok_or_else(|| Error::Argument("P0 share without index 3".into()))?;
            value = value.add(&alt.scale(wa, ring), ring)?;
        }
        Ok(AShare { value })
    }

    /// Whether every coefficient an additive share would be divided by is odd.
    pub fn division_path_available(&self) -> bool {
        let co = self.params.vsss.coeffs();
        match self.mode {
            Mode::ThreeParty => co.c.iter().all(|c| c & 1 == 1),
            Mode::TwoPartyAfterDrop => co.c_prime.iter().all(|c| c & 1 == 1),
        }
    }

    /// Converts additive shares back to vector-space shares. One round at
    /// most.
    ///
    /// When all active coefficients are odd each party divides its additive
    /// share by its coefficient. Otherwise every live party shares its
    /// additive share as a fresh input and all parties add up the sharings.
    pub fn a2v(&mut self, a: &AShare) -> Result<LocalShare> {
        self.ensure_live()?;
        if self.division_path_available() {
            self.a2v_divide(a)
        } else {
            self.a2v_reshare(a)
        }
    }

    pub fn a2v_reshare(&mut self, a: &AShare) -> Result<LocalShare> {
        let ring = self.ring();
        let owners: Vec<PartyId> = self.mode.live().to_vec();
        let parts = self.share_inputs(&owners, Some(&a.value), a.value.shape(), MsgKind::Reshare)?;
        let mut acc = parts[0].clone();
        for p in &parts[1..] {
            acc = acc.add(p, ring)?;
        }
        Ok(acc)
    }

    /// Coefficient division. In three-party mode the alternate share is
    /// rebuilt from masked index-1 and index-2 shares sent to P0.
    pub fn a2v_divide(&mut self, a: &AShare) -> Result<LocalShare> {
        let ring = self.ring();
        let co = *self.params.vsss.coeffs();
        let (w, _) = self.additive_weights();
        let inv = ring.odd_inverse(w)?;
        let main = a.value.scale(inv, ring);
        let (rows, cols) = main.shape();
        match self.mode {
            Mode::TwoPartyAfterDrop => {
                let alt = (self.id == PartyId::P0).then(|| Matrix::zeros(rows, cols));
                Ok(LocalShare::new(main, alt))
            }
            Mode::ThreeParty => {
                let n = rows * cols;
                let k = self.pre.k_shares(n)?.reshape(rows, cols)?;
                if self.id != PartyId::P0 {
                    let masked = main.add(&k.main, ring)?;
                    self.net.exchange(
                        MsgKind::Masked,
                        vec![(PartyId::P0, Payload::Ring(masked.into_data()))],
                        &[],
                    )?;
                    return Ok(LocalShare::new(main, None));
                }
                let got = self.net.exchange(MsgKind::Masked, vec![], &[PartyId::P1, PartyId::P2])?;
                let m1 = got[0].ring(n)?;
                let m2 = got[1].ring(n)?;
                let k3 = k.alt.as_ref().expect("P0 holds index 3").data();
                let alt: Vec<u64> = (0..n)
                    .map(|i| ring.sub(ring.dot(&[co.a1, co.a2], &[m1[i], m2[i]]), k3[i]))
                    .collect();
                Ok(LocalShare::new(main, Some(Matrix::from_vec(rows, cols, alt)?)))
            }
        }
    }
}
