//! Boolean sharing, AND gates and the sign-bit circuit.
//!
//! Values are bitsliced: one `BitVec` per bit position, one lane per element.
//! Additive shares are decomposed locally and enter the circuit as trivial
//! XOR sharings (the owner holds the bits, everyone else holds zeros).

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ring::Ring;
use crate::share::{AShare, BShare, Mode, PartyId};
use crate::transport::{MsgKind, Payload};

use super::Party;

/// Gate evaluation backend for the sign-bit circuit.
pub trait BitOps {
    type B: Clone;
    fn xor(&mut self, a: &Self::B, b: &Self::B) -> Self::B;
    fn zero_like(&mut self, a: &Self::B) -> Self::B;
    /// Evaluates all given AND gates together, in one round.
    fn and_layer(&mut self, pairs: &[(Self::B, Self::B)]) -> Result<Vec<Self::B>>;
}

/// Sign bit of the sum of two or three bitsliced operands.
///
/// Three operands first go through a carry-save layer that turns them into
/// two. The carry into the top bit is then found with a prefix tree over
/// (generate, propagate) pairs.
pub fn msb_circuit<O: BitOps>(ops: &mut O, operands: &[Vec<O::B>]) -> Result<O::B> {
    let l = operands[0].len();
    if l < 2 || operands.iter().any(|o| o.len() != l) {
        return Err(Error::Argument("operands must have the same width of at least 2".into()));
    }
    let (x, y): (Vec<O::B>, Vec<Option<O::B>>) = match operands.len() {
        2 => (operands[0].clone(), operands[1].iter().cloned().map(Some).collect()),
        3 => {
            let (a, b, c) = (&operands[0], &operands[1], &operands[2]);
            let mut sum = Vec::with_capacity(l);
            for j in 0..l {
                let t = ops.xor(&a[j], &b[j]);
                sum.push(ops.xor(&t, &c[j]));
            }
            // majority(a, b, c) = ((a ^ c) & (b ^ c)) ^ c
            let pairs: Vec<_> =
                (0..l - 1).map(|j| (ops.xor(&a[j], &c[j]), ops.xor(&b[j], &c[j]))).collect();
            let prods = ops.and_layer(&pairs)?;
            let mut carry = vec![None];
            for (j, p) in prods.iter().enumerate() {
                carry.push(Some(ops.xor(p, &c[j])));
            }
            (sum, carry)
        }
        n => return Err(Error::Argument(format!("{n} operands"))),
    };

    // Leaves for positions 0..l-1, whose carry-out feeds the top bit.
    let mut pairs = Vec::new();
    let mut slots = Vec::new();
    for j in 0..l - 1 {
        if let Some(yj) = &y[j] {
            pairs.push((x[j].clone(), yj.clone()));
            slots.push(j);
        }
    }
    let gs = ops.and_layer(&pairs)?;
    let mut nodes: Vec<(O::B, O::B)> = Vec::with_capacity(l - 1);
    let mut gi = gs.into_iter();
    let mut si = slots.into_iter().peekable();
    for j in 0..l - 1 {
        match &y[j] {
            Some(yj) => {
                debug_assert_eq!(si.next(), Some(j));
                let g = gi.next().expect("one product per pair");
                nodes.push((g, ops.xor(&x[j], yj)));
            }
            None => {
                let z = ops.zero_like(&x[j]);
                nodes.push((z, x[j].clone()));
            }
        }
    }

    // Combine (hi o lo): G = G_hi ^ (P_hi & G_lo), P = P_hi & P_lo. The
    // propagate bit of the lowest node is never used, so it is not computed.
    while nodes.len() > 1 {
        let mut gates = Vec::new();
        for (i, pair) in nodes.chunks(2).enumerate() {
            if let [lo, hi] = pair {
                gates.push((hi.1.clone(), lo.0.clone()));
                if i > 0 {
                    gates.push((hi.1.clone(), lo.1.clone()));
                }
            }
        }
        let mut out = ops.and_layer(&gates)?.into_iter();
        let mut next = Vec::with_capacity(nodes.len().div_ceil(2));
        for (i, pair) in nodes.chunks(2).enumerate() {
            match pair {
                [lo, hi] => {
                    let pg = out.next().expect("gate output");
                    let g = ops.xor(&hi.0, &pg);
                    let p = if i > 0 { out.next().expect("gate output") } else { lo.1.clone() };
                    next.push((g, p));
                }
                [single] => next.push(single.clone()),
                _ => unreachable!(),
            }
        }
        nodes = next;
    }
    let carry = nodes.pop().expect("at least one leaf").0;
    let top = match &y[l - 1] {
        Some(yt) => ops.xor(&x[l - 1], yt),
        None => x[l - 1].clone(),
    };
    Ok(ops.xor(&top, &carry))
}

/// Cleartext evaluation, used to check the circuit itself.
pub struct PlainBits;

impl BitOps for PlainBits {
    type B = BitVec;
    fn xor(&mut self, a: &BitVec, b: &BitVec) -> BitVec {
        a.xor(b)
    }
    fn zero_like(&mut self, a: &BitVec) -> BitVec {
        BitVec::zeros(a.len())
    }
    fn and_layer(&mut self, pairs: &[(BitVec, BitVec)]) -> Result<Vec<BitVec>> {
        Ok(pairs.iter().map(|(a, b)| a.and(b)).collect())
    }
}

/// Counts AND gates and rounds per lane without evaluating anything.
#[derive(Default)]
pub struct CountingBits {
    pub ands: usize,
    pub rounds: usize,
}

impl BitOps for CountingBits {
    type B = ();
    fn xor(&mut self, _: &(), _: &()) {}
    fn zero_like(&mut self, _: &()) {}
    fn and_layer(&mut self, pairs: &[((), ())]) -> Result<Vec<()>> {
        self.ands += pairs.len();
        self.rounds += 1;
        Ok(vec![(); pairs.len()])
    }
}

impl CountingBits {
    /// AND gates per element and rounds for one sign-bit extraction.
    pub fn msb_cost(ell: u32, parties: usize) -> (usize, usize) {
        let mut c = CountingBits::default();
        let ops = vec![vec![(); ell as usize]; parties];
        msb_circuit(&mut c, &ops).expect("well-formed");
        (c.ands, c.rounds)
    }
}

/// Bit `j` of every entry, one lane per entry.
pub fn bit_slices(ring: Ring, values: &[u64]) -> Vec<BitVec> {
    let l = ring.bits() as usize;
    let k = values.len();
    let mut out = Vec::with_capacity(l);
    for j in 0..l {
        let words: Vec<u64> = values
            .chunks(64)
            .map(|chunk| {
                chunk.iter().enumerate().fold(0u64, |w, (i, v)| w | (((v >> j) & 1) << i))
            })
            .collect();
        out.push(BitVec::from_words(k, words));
    }
    out
}

struct SharedBits<'a> {
    party: &'a mut Party,
}

impl BitOps for SharedBits<'_> {
    type B = BitVec;
    fn xor(&mut self, a: &BitVec, b: &BitVec) -> BitVec {
        a.xor(b)
    }
    fn zero_like(&mut self, a: &BitVec) -> BitVec {
        BitVec::zeros(a.len())
    }
    fn and_layer(&mut self, pairs: &[(BitVec, BitVec)]) -> Result<Vec<BitVec>> {
        let xs: Vec<BitVec> = pairs.iter().map(|p| p.0.clone()).collect();
        let ys: Vec<BitVec> = pairs.iter().map(|p| p.1.clone()).collect();
        let z = self.party.and_bits(&BitVec::concat(&xs), &BitVec::concat(&ys))?;
        let mut out = Vec::with_capacity(pairs.len());
        let mut at = 0;
        for x in &xs {
            out.push(z.slice(at, x.len()));
            at += x.len();
        }
        Ok(out)
    }
}

impl Party {
    /// Entrywise AND of two XOR-shared bit vectors. One round.
    pub fn and_bits(&mut self, x: &BitVec, y: &BitVec) -> Result<BitVec> {
        self.ensure_live()?;
        let k = x.len();
        if y.len() != k {
            return Err(Error::Argument("AND of vectors of different lengths".into()));
        }
        if k == 0 {
            return Ok(BitVec::zeros(0));
        }
        let flavor = self.flavor();
        let t = self.pre.bool_triples(k, flavor)?;
        let d = x.xor(&t.a);
        let e = y.xor(&t.b);
        let payload = BitVec::concat(&[d.clone(), e.clone()]);
        let peers = self.peers();
        let out = peers.iter().map(|p| (*p, Payload::Bits(payload.clone()))).collect();
        let got = self.net.exchange(MsgKind::And, out, &peers)?;
        let (mut dd, mut ee) = (d, e);
        for g in got {
            let v = g.bits(2 * k)?;
            dd = dd.xor(&v.slice(0, k));
            ee = ee.xor(&v.slice(k, k));
        }
        let mut z = t.c.xor(&dd.and(&t.b)).xor(&ee.and(&t.a));
        if self.id == PartyId::P0 {
            z = z.xor(&dd.and(&ee));
        }
        Ok(z)
    }

    /// Complement of a shared bit vector. Local: P0 flips its share.
    pub fn not_bits(&self, b: &BShare) -> BShare {
        if self.id == PartyId::P0 {
            BShare { bits: b.bits.not() }
        } else {
            b.clone()
        }
    }

    /// XOR share of the sign bit of every entry of an additive sharing.
    pub fn msb(&mut self, a: &AShare) -> Result<BShare> {
        self.ensure_live()?;
        let ring = self.ring();
        let mine = bit_slices(ring, a.value.data());
        let zeros: Vec<BitVec> = mine.iter().map(|b| BitVec::zeros(b.len())).collect();
        let holders = self.mode.live().len();
        let operands: Vec<Vec<BitVec>> = (0..holders)
            .map(|p| if p == self.id.index() { mine.clone() } else { zeros.clone() })
            .collect();
        let bits = msb_circuit(&mut SharedBits { party: self }, &operands)?;
        Ok(BShare { bits })
    }

    /// Converts XOR-shared bits into additive 0/1 values using daBits. One round.
    pub fn bit2a(&mut self, b: &BShare) -> Result<AShare> {
        self.ensure_live()?;
        let ring = self.ring();
        let k = b.bits.len();
        let d = self.pre.dabits(k, self.flavor())?;
        let masked = b.bits.xor(&d.bits);
        let peers = self.peers();
        let out = peers.iter().map(|p| (*p, Payload::Bits(masked.clone()))).collect();
        let got = self.net.exchange(MsgKind::Bit2A, out, &peers)?;
        let mut m = masked;
        for g in got {
            m = m.xor(&g.bits(k)?);
        }
        // b = m ^ r = m + r - 2mr
        let values: Vec<u64> = (0..k)
            .map(|i| {
                let r = d.arith[i];
                if m.get(i) {
                    let own = if self.id == PartyId::P0 { 1 } else { 0 };
                    ring.sub(own, r)
                } else {
                    r
                }
            })
            .collect();
        Ok(AShare { value: Matrix::from_vec(1, k, values)? })
    }

    /// Rounds and AND gates per element used by one sign-bit extraction in the current mode.
    pub fn msb_cost(&self) -> (usize, usize) {
        let parties = match self.mode {
            Mode::ThreeParty => 3,
            Mode::TwoPartyAfterDrop => 2,
        };
        CountingBits::msb_cost(self.params.ell(), parties)
    }
}
