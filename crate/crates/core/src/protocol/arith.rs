//! Multiplication and truncation.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::share::{LocalShare, Mode, PartyId};
use crate::transport::{MsgKind, Payload};

use super::Party;

impl Party {
    /// Matrix product of two shared matrices, untruncated. One round.
    pub fn matmul(&mut self, x: &LocalShare, y: &LocalShare) -> Result<LocalShare> {
        let (n, d) = x.shape();
        let (d2, m) = y.shape();
        if d != d2 {
            return Err(Error::Argument(format!("matmul of {:?} and {:?}", x.shape(), y.shape())));
        }
        let ring = self.ring();
        let t = self.pre.matrix_triple(n, d, m)?;
        let e = x.add(&t.u, ring)?;
        let f = y.add(&t.v, ring)?;
        let opened = self.open_many(&[&e, &f])?;
        let (e, f) = (&opened[0], &opened[1]);
        // Z = X F - E V + H at every held index.
        x.try_zip(&t.v, |xi, vi| {
            let xf = xi.matmul(f, ring)?;
            let ev = e.matmul(vi, ring)?;
            xf.sub(&ev, ring)
        })?
        .add(&t.h, ring)
    }

    /// Entrywise product of two shared matrices, untruncated. One round.
    pub fn mul(&mut self, x: &LocalShare, y: &LocalShare) -> Result<LocalShare> {
        if x.shape() != y.shape() {
            return Err(Error::Argument(format!("mul of {:?} and {:?}", x.shape(), y.shape())));
        }
        let ring = self.ring();
        let (r, c) = x.shape();
        let t = self.pre.vmt(r * c)?;
        let u = t.u.reshape(r, c)?;
        let v = t.v.reshape(r, c)?;
        let h = t.h.reshape(r, c)?;
        let e = x.add(&u, ring)?;
        let f = y.add(&v, ring)?;
        let opened = self.open_many(&[&e, &f])?;
        let (e, f) = (&opened[0], &opened[1]);
        x.try_zip(&v, |xi, vi| xi.hadamard(f, ring)?.sub(&vi.hadamard(e, ring)?, ring))?
            .add(&h, ring)
    }

    /// Shared value times a public ring constant. Local.
    pub fn scale(&self, x: &LocalShare, k: u64) -> LocalShare {
        x.scale(k, self.ring())
    }

    /// Adds a public ring constant to every entry. Local.
    pub fn add_public(&self, x: &LocalShare, k: u64) -> LocalShare {
        x.add_public(self.id, k, &self.params.vsss)
    }

    /// Divides by 2^l_f. The result is floor(z / 2^l_f) up to one unit,
    /// provided |z| < 2^(l - sigma - 2). One round, only P0 receives.
    pub fn trunc(&mut self, z: &LocalShare) -> Result<LocalShare> {
        self.ensure_live()?;
        let ring = self.ring();
        let (rows, cols) = z.shape();
        let n = rows * cols;
        let pair = self.pre.trunc_pairs(n)?;
        let r = pair.r.reshape(rows, cols)?;
        let r_prime = pair.r_prime.reshape(rows, cols)?;
        let d = z.sub(&r, ring)?;
        let coeffs = *self.params.vsss.coeffs();
        let f = self.params.frac_bits();

        if self.id != PartyId::P0 {
            self.net.exchange(
                MsgKind::Trunc,
                vec![(PartyId::P0, Payload::Ring(d.main.data().to_vec()))],
                &[],
            )?;
            return Ok(r_prime);
        }

        let peers = self.peers();
        let got = self.net.exchange(MsgKind::Trunc, vec![], &peers)?;
        let d0 = d.main.data();
        let opened: Vec<u64> = match self.mode {
            Mode::ThreeParty => {
                let d1 = got[0].ring(n)?;
                let d2 = got[1].ring(n)?;
                (0..n).map(|i| ring.dot(&coeffs.c, &[d0[i], d1[i], d2[i]])).collect()
            }
            Mode::TwoPartyAfterDrop => {
                let d1 = got[0].ring(n)?;
                let d3 = d.alt.as_ref().expect("P0 holds index 3").data();
                (0..n).map(|i| ring.dot(&coeffs.c_prime, &[d0[i], d1[i], d3[i]])).collect()
            }
        };
        let w0 = match self.mode {
            Mode::ThreeParty => coeffs.c[0],
            Mode::TwoPartyAfterDrop => coeffs.c_prime[0],
        };
        let inv = ring.odd_inverse(w0)?;
        let shifted: Vec<u64> =
            opened.iter().map(|v| ring.mul(ring.shift_signed(*v, f), inv)).collect();
        let main = Matrix::from_vec(rows, cols, shifted)?.add(&r_prime.main, ring)?;
        Ok(LocalShare::new(main, r_prime.alt))
    }
}
