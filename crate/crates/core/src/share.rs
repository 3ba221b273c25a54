//! Party identities and the share types a single party holds.

use std::fmt;

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ring::Ring;
use crate::vsss::Vsss;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyId {
    P0,
    P1,
    P2,
}

impl PartyId {
    pub const ALL: [PartyId; 3] = [PartyId::P0, PartyId::P1, PartyId::P2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(PartyId::P0),
            1 => Ok(PartyId::P1),
            2 => Ok(PartyId::P2),
            _ => Err(Error::Argument(format!("no party {i}"))),
        }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    ThreeParty,
    TwoPartyAfterDrop,
}

impl Mode {
    pub fn live(self) -> &'static [PartyId] {
        match self {
            Mode::ThreeParty => &PartyId::ALL,
            Mode::TwoPartyAfterDrop => &[PartyId::P0, PartyId::P1],
        }
    }

    pub fn is_live(self, p: PartyId) -> bool {
        self.live().contains(&p)
    }
}

/// What one party holds of a vector-space shared matrix.
///
/// P1 and P2 hold the share at their own index. P0 holds index 0 in `main`
/// and the alternate index-3 share in `alt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalShare {
    pub main: Matrix,
    pub alt: Option<Matrix>,
}

impl LocalShare {
    pub fn new(main: Matrix, alt: Option<Matrix>) -> Self {
        LocalShare { main, alt }
    }

    /// Picks this party's holdings out of a full four-index sharing.
    pub fn from_full(party: PartyId, mut full: [Matrix; 4]) -> Self {
        match party {
            PartyId::P0 => {
                let alt = std::mem::take(&mut full[3]);
                LocalShare { main: std::mem::take(&mut full[0]), alt: Some(alt) }
            }
            p => LocalShare { main: std::mem::take(&mut full[p.index()]), alt: None },
        }
    }

    pub fn zeros(party: PartyId, rows: usize, cols: usize) -> Self {
        let alt = (party == PartyId::P0).then(|| Matrix::zeros(rows, cols));
        LocalShare { main: Matrix::zeros(rows, cols), alt }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.main.shape()
    }

    pub fn len(&self) -> usize {
        self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.main.is_empty()
    }

    fn alt_pair<'a>(&'a self, other: &'a LocalShare) -> Result<Option<(&'a Matrix, &'a Matrix)>> {
        match (&self.alt, &other.alt) {
            (Some(a), Some(b)) => Ok(Some((a, b))),
            (None, None) => Ok(None),
            _ => Err(Error::Argument("mixing shares of different holders".into())),
        }
    }

    pub fn try_zip(
        &self,
        other: &LocalShare,
        f: impl Fn(&Matrix, &Matrix) -> Result<Matrix>,
    ) -> Result<LocalShare> {
        let main = f(&self.main, &other.main)?;
        let alt = match self.alt_pair(other)? {
            Some((a, b)) => Some(f(a, b)?),
            None => None,
        };
        Ok(LocalShare { main, alt })
    }

    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> LocalShare {
        LocalShare { main: f(&self.main), alt: self.alt.as_ref().map(f) }
    }

    pub fn add(&self, other: &LocalShare, ring: Ring) -> Result<LocalShare> {
        self.try_zip(other, |a, b| a.add(b, ring))
    }

    pub fn sub(&self, other: &LocalShare, ring: Ring) -> Result<LocalShare> {
        self.try_zip(other, |a, b| a.sub(b, ring))
    }

    pub fn scale(&self, k: u64, ring: Ring) -> LocalShare {
        self.map(|m| m.scale(k, ring))
    }

    /// Adds a public constant `c` to every shared entry. The constant is
    /// treated as the sharing with zero randomness.
    pub fn add_public(&self, party: PartyId, c: u64, vsss: &Vsss) -> LocalShare {
        let ring = vsss.ring();
        let rows = vsss.matrix().rows();
        let main_k = ring.mul(rows[party.index()][0], c);
        let alt_k = ring.mul(rows[3][0], c);
        LocalShare {
            main: self.main.add_scalar(main_k, ring),
            alt: self.alt.as_ref().map(|a| a.add_scalar(alt_k, ring)),
        }
    }

    pub fn transpose(&self) -> LocalShare {
        self.map(Matrix::transpose)
    }

    pub fn select_rows(&self, idx: &[usize]) -> LocalShare {
        self.map(|m| m.select_rows(idx))
    }

    pub fn reshape(self, rows: usize, cols: usize) -> Result<LocalShare> {
        Ok(LocalShare {
            main: self.main.reshape(rows, cols)?,
            alt: self.alt.map(|a| a.reshape(rows, cols)).transpose()?,
        })
    }

    /// Splits a share of a vertical concatenation back into row blocks.
    pub fn split_rows(&self, at: usize) -> (LocalShare, LocalShare) {
        let (rows, _) = self.shape();
        let top: Vec<usize> = (0..at).collect();
        let bottom: Vec<usize> = (at..rows).collect();
        (self.select_rows(&top), self.select_rows(&bottom))
    }

    pub fn vstack(parts: &[&LocalShare]) -> Result<LocalShare> {
        let main = Matrix::vstack(&parts.iter().map(|p| p.main.clone()).collect::<Vec<_>>())?;
        let alt = if parts.iter().all(|p| p.alt.is_some()) {
            Some(Matrix::vstack(
                &parts.iter().map(|p| p.alt.clone().unwrap()).collect::<Vec<_>>(),
            )?)
        } else {
            None
        };
        Ok(LocalShare { main, alt })
    }
}

/// One party's additive share. In two-party mode P0 folds its index-0 and
/// index-3 additive shares into one value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AShare {
    pub value: Matrix,
}

/// One party's XOR share of a vector of bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BShare {
    pub bits: BitVec,
}
