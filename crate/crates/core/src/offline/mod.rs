//! Correlated randomness for the online phase.

pub mod dealer;
pub mod pool;
pub mod vmtgen;

use crate::bits::BitVec;
use crate::error::Result;
use crate::share::LocalShare;

pub use dealer::{dealer_generate, Generator, LiveDealer};
pub use pool::{PartyPool, PoolHeader};
pub use vmtgen::{interactive_vmt, CrossTermOracle, DealerCrossTerm};

/// Which parties a boolean item is shared among.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// XOR shares for P0, P1 and P2.
    Three,
    /// XOR shares for P0 and P1 only, for use after P2 drops.
    Two,
}

impl Flavor {
    pub fn index(self) -> usize {
        match self {
            Flavor::Three => 0,
            Flavor::Two => 1,
        }
    }
}

/// Beaver-style triple `(u, v, h)`. For element-wise triples the matrices
/// are 1 x k and `h = u * v` entrywise, otherwise `H = U V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleShare {
    pub u: LocalShare,
    pub v: LocalShare,
    pub h: LocalShare,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncShare {
    pub r: LocalShare,
    pub r_prime: LocalShare,
    /// This party's XOR share of the bits of each `r`.
    pub bits: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaBitShare {
    pub bits: BitVec,
    pub arith: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolTripleShare {
    pub a: BitVec,
    pub b: BitVec,
    pub c: BitVec,
}

/// Supplier of one party's preprocessing material, consumed in order.
pub trait PreprocSource: Send {
    fn vmt(&mut self, k: usize) -> Result<TripleShare>;
    fn matrix_triple(&mut self, n: usize, d: usize, m: usize) -> Result<TripleShare>;
    fn trunc_pairs(&mut self, k: usize) -> Result<TruncShare>;
    fn k_shares(&mut self, k: usize) -> Result<LocalShare>;
    fn dabits(&mut self, k: usize, flavor: Flavor) -> Result<DaBitShare>;
    fn bool_triples(&mut self, k: usize, flavor: Flavor) -> Result<BoolTripleShare>;
    /// Called once P2 has dropped so no more material is kept for it.
    fn release_p2(&mut self) {}
}

/// Total material needed by a run. Matrix triples are listed in consumption order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Plan {
    pub matrix_triples: Vec<(usize, usize, usize)>,
    pub vmt: usize,
    pub trunc: usize,
    pub k_shares: usize,
    /// Indexed by [`Flavor::index`].
    pub dabits: [usize; 2],
    pub bool_triples: [usize; 2],
}

impl Plan {
    /// Entrywise maximum, with the longer matrix-triple list. Both plans must
    /// agree on their common matrix-triple prefix.
    pub fn union(&self, other: &Plan) -> Plan {
        let mt = if self.matrix_triples.len() >= other.matrix_triples.len() {
            self.matrix_triples.clone()
        } else {
            other.matrix_triples.clone()
        };
        Plan {
            matrix_triples: mt,
            vmt: self.vmt.max(other.vmt),
            trunc: self.trunc.max(other.trunc),
            k_shares: self.k_shares.max(other.k_shares),
            dabits: [self.dabits[0].max(other.dabits[0]), self.dabits[1].max(other.dabits[1])],
            bool_triples: [
                self.bool_triples[0].max(other.bool_triples[0]),
                self.bool_triples[1].max(other.bool_triples[1]),
            ],
        }
    }
}
