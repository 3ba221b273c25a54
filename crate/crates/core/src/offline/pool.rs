//! One party's preprocessing store and its on-disk form.
//!
//! File layout, little-endian: magic `PMPLPOOL`, version u16, then
//! l, l_f, sigma, party as u8, the public matrix as 12 u64, the 11
//! coefficients as u64, a 32-byte seed fingerprint, then one section per
//! material kind: kind u8, count u64, packed u64 words. Matrix triples carry
//! their shape (n, d, m) as three words ahead of each item.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::Params;
use crate::share::{LocalShare, PartyId};

use super::{BoolTripleShare, DaBitShare, Flavor, PreprocSource, TripleShare, TruncShare};

pub const MAGIC: &[u8; 8] = b"PMPLPOOL";
pub const VERSION: u16 = 1;

#[repr(u8)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Vmt = 1,
    MatrixTriple = 2,
    TruncPair = 3,
    KShare = 4,
    DaBit3 = 5,
    DaBit2 = 6,
    BoolTriple3 = 7,
    BoolTriple2 = 8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolHeader {
    pub ell: u8,
    pub frac_bits: u8,
    pub sigma: u8,
    pub party: u8,
    pub phi: [[u64; 3]; 4],
    pub coeffs: [u64; 11],
    pub fingerprint: [u8; 32],
}

impl PoolHeader {
    pub fn new(params: &Params, party: PartyId, fingerprint: [u8; 32]) -> Self {
        PoolHeader {
            ell: params.ell() as u8,
            frac_bits: params.frac_bits() as u8,
            sigma: params.sigma as u8,
            party: party as u8,
            phi: *params.vsss.matrix().rows(),
            coeffs: params.vsss.coeffs().to_array(),
            fingerprint,
        }
    }

    /// Fails unless the pool was generated for these parameters.
    pub fn check(&self, params: &Params, party: PartyId) -> Result<()> {
        let expect = PoolHeader::new(params, party, self.fingerprint);
        if *self != expect {
            return Err(Error::PreprocMismatch(format!(
                "pool header (l={}, l_f={}, sigma={}, party={}) does not match the session \
                 (l={}, l_f={}, sigma={}, party={}) or its public matrix",
                self.ell,
                self.frac_bits,
                self.sigma,
                self.party,
                expect.ell,
                expect.frac_bits,
                expect.sigma,
                expect.party
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
struct BitQueue {
    buf: BitVec,
    cursor: usize,
}

impl BitQueue {
    fn available(&self) -> usize {
        self.buf.len() - self.cursor
    }

    fn push(&mut self, bits: &BitVec) {
        if self.cursor >= 1 << 16 {
            let start = self.cursor / 64 * 64;
            self.buf = self.buf.slice(start, self.buf.len() - start);
            self.cursor -= start;
        }
        self.buf.extend(bits);
    }

    fn take(&mut self, k: usize) -> BitVec {
        let out = self.buf.slice(self.cursor, k);
        self.cursor += k;
        out
    }

    fn remaining(&self) -> BitVec {
        self.buf.slice(self.cursor, self.available())
    }
}

/// Ordered per-kind streams of one party's material.
#[derive(Clone, Debug)]
pub struct PartyPool {
    pub header: PoolHeader,
    party: PartyId,
    vmt: VecDeque<u64>,
    mat: VecDeque<TripleShare>,
    trunc: VecDeque<u64>,
    kshares: VecDeque<u64>,
    dabit_bits: [BitQueue; 2],
    dabit_arith: [VecDeque<u64>; 2],
    bt: [[BitQueue; 3]; 2],
}

fn underflow(party: PartyId, what: &str, want: usize, have: usize) -> Error {
    Error::PreprocUnderflow(format!("{party} {what}: need {want}, {have} left"))
}

impl PartyPool {
    pub fn new(header: PoolHeader) -> Result<Self> {
        let party = PartyId::from_index(header.party as usize)?;
        Ok(PartyPool {
            header,
            party,
            vmt: VecDeque::new(),
            mat: VecDeque::new(),
            trunc: VecDeque::new(),
            kshares: VecDeque::new(),
            dabit_bits: Default::default(),
            dabit_arith: Default::default(),
            bt: Default::default(),
        })
    }

    pub fn party(&self) -> PartyId {
        self.party
    }

    /// Words used for one shared value: P0 keeps index 0 and index 3.
    fn width(&self) -> usize {
        if self.party == PartyId::P0 {
            2
        } else {
            1
        }
    }

    fn vmt_record(&self) -> usize {
        3 * self.width()
    }

    fn trunc_record(&self) -> usize {
        2 * self.width() + 1
    }

    pub(crate) fn push_vmt(&mut self, words: &[u64]) {
        self.vmt.extend(words);
    }

    pub(crate) fn push_matrix_triple(&mut self, t: TripleShare) {
        self.mat.push_back(t);
    }

    pub(crate) fn push_trunc(&mut self, words: &[u64]) {
        self.trunc.extend(words);
    }

    pub(crate) fn push_kshares(&mut self, words: &[u64]) {
        self.kshares.extend(words);
    }

    pub(crate) fn push_dabits(&mut self, flavor: Flavor, bits: &BitVec, arith: &[u64]) {
        self.dabit_bits[flavor.index()].push(bits);
        self.dabit_arith[flavor.index()].extend(arith);
    }

    pub(crate) fn push_bool_triples(&mut self, flavor: Flavor, a: &BitVec, b: &BitVec, c: &BitVec) {
        let q = &mut self.bt[flavor.index()];
        q[0].push(a);
        q[1].push(b);
        q[2].push(c);
    }

    pub fn vmt_available(&self) -> usize {
        self.vmt.len() / self.vmt_record()
    }

    pub fn matrix_triples_available(&self) -> usize {
        self.mat.len()
    }

    pub fn trunc_available(&self) -> usize {
        self.trunc.len() / self.trunc_record()
    }

    pub fn kshares_available(&self) -> usize {
        self.kshares.len() / self.width()
    }

    pub fn dabits_available(&self, flavor: Flavor) -> usize {
        self.dabit_bits[flavor.index()].available()
    }

    pub fn bool_triples_available(&self, flavor: Flavor) -> usize {
        self.bt[flavor.index()][0].available()
    }

    /// True when every ring-valued stream has been consumed. Boolean streams
    /// are dealt in whole words and may keep up to 63 spare items.
    pub fn ring_streams_exhausted(&self) -> bool {
        self.vmt.is_empty() && self.mat.is_empty() && self.trunc.is_empty() && self.kshares.is_empty()
    }

    /// Pops `k` records of `rec` words and splits them into columns.
    fn take_columns(q: &mut VecDeque<u64>, k: usize, rec: usize) -> Vec<Vec<u64>> {
        let mut cols = vec![Vec::with_capacity(k); rec];
        for (i, w) in q.drain(..k * rec).enumerate() {
            cols[i % rec].push(w);
        }
        cols
    }

    fn share_from(&self, cols: &mut [Vec<u64>], field: usize, rows: usize, cols_n: usize) -> LocalShare {
        let w = self.width();
        let main = Matrix::from_vec(rows, cols_n, std::mem::take(&mut cols[field * w]))
            .expect("record width");
        let alt = (w == 2).then(|| {
            Matrix::from_vec(rows, cols_n, std::mem::take(&mut cols[field * w + 1]))
                .expect("record width")
        });
        LocalShare::new(main, alt)
    }

    /// Remaining truncation masks of this party, as (r, r') share pairs per
    /// index. Used by test harnesses to rebuild the cleartext mask trace.
    pub fn peek_trunc(&self) -> Vec<Vec<u64>> {
        let rec = self.trunc_record();
        let mut cols = vec![Vec::new(); rec];
        for (i, w) in self.trunc.iter().enumerate() {
            cols[i % rec].push(*w);
        }
        cols
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let h = &self.header;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[h.ell, h.frac_bits, h.sigma, h.party])?;
        for row in &h.phi {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for v in &h.coeffs {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&h.fingerprint)?;

        let put = |w: &mut W, v: u64| w.write_all(&v.to_le_bytes());
        let put_all = |w: &mut W, vs: &mut dyn Iterator<Item = u64>| -> std::io::Result<()> {
            for v in vs {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };

        w.write_all(&[Kind::Vmt as u8])?;
        put(w, self.vmt_available() as u64)?;
        put_all(w, &mut self.vmt.iter().copied())?;

        w.write_all(&[Kind::MatrixTriple as u8])?;
        put(w, self.mat.len() as u64)?;
        for t in &self.mat {
            let (n, d) = t.u.shape();
            let m = t.v.shape().1;
            put_all(w, &mut [n as u64, d as u64, m as u64].into_iter())?;
            for s in [&t.u, &t.v, &t.h] {
                put_all(w, &mut s.main.data().iter().copied())?;
                if let Some(a) = &s.alt {
                    put_all(w, &mut a.data().iter().copied())?;
                }
            }
        }

        w.write_all(&[Kind::TruncPair as u8])?;
        put(w, self.trunc_available() as u64)?;
        put_all(w, &mut self.trunc.iter().copied())?;

        w.write_all(&[Kind::KShare as u8])?;
        put(w, self.kshares_available() as u64)?;
        put_all(w, &mut self.kshares.iter().copied())?;

        for (kind, f) in [(Kind::DaBit3, Flavor::Three), (Kind::DaBit2, Flavor::Two)] {
            let bits = self.dabit_bits[f.index()].remaining();
            w.write_all(&[kind as u8])?;
            put(w, bits.len() as u64)?;
            put_all(w, &mut bits.words().iter().copied())?;
            put_all(w, &mut self.dabit_arith[f.index()].iter().copied())?;
        }
        for (kind, f) in [(Kind::BoolTriple3, Flavor::Three), (Kind::BoolTriple2, Flavor::Two)] {
            let q = &self.bt[f.index()];
            w.write_all(&[kind as u8])?;
            put(w, q[0].available() as u64)?;
            for part in q {
                put_all(w, &mut part.remaining().words().iter().copied())?;
            }
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        PartyPool::read(&mut r)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        fn bad(m: impl Into<String>) -> Error {
            Error::Parse(m.into())
        }
        fn word<R: Read>(r: &mut R) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|e| bad(format!("truncated pool: {e}")))?;
            Ok(u64::from_le_bytes(b))
        }
        fn words<R: Read>(r: &mut R, n: usize) -> Result<Vec<u64>> {
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes).map_err(|e| bad(format!("truncated pool: {e}")))?;
            Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
        }
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("pool shorter than its magic"))?;
        if &magic != MAGIC {
            return Err(bad("not a pool file (bad magic)"));
        }
        let mut v = [0u8; 2];
        r.read_exact(&mut v)?;
        if u16::from_le_bytes(v) != VERSION {
            return Err(bad(format!("unsupported pool version {}", u16::from_le_bytes(v))));
        }
        let mut small = [0u8; 4];
        r.read_exact(&mut small)?;
        let mut phi = [[0u64; 3]; 4];
        for row in phi.iter_mut() {
            for v in row.iter_mut() {
                *v = word(r)?;
            }
        }
        let mut coeffs = [0u64; 11];
        for c in coeffs.iter_mut() {
            *c = word(r)?;
        }
        let mut fingerprint = [0u8; 32];
        r.read_exact(&mut fingerprint)?;
        let header = PoolHeader {
            ell: small[0],
            frac_bits: small[1],
            sigma: small[2],
            party: small[3],
            phi,
            coeffs,
            fingerprint,
        };
        let mut pool = PartyPool::new(header)?;
        let wdt = pool.width();

        loop {
            let mut kind = [0u8; 1];
            match r.read(&mut kind)? {
                0 => break,
                _ => {}
            }
            let count = word(r)? as usize;
            match kind[0] {
                1 => pool.vmt.extend(words(r, count * pool.vmt_record())?),
                2 => {
                    for _ in 0..count {
                        let shape = words(r, 3)?;
                        let (n, d, m) = (shape[0] as usize, shape[1] as usize, shape[2] as usize);
                        let mut read_share = |rows: usize, cols: usize| -> Result<LocalShare> {
                            let main = Matrix::from_vec(rows, cols, words(r, rows * cols)?)?;
                            let alt = if wdt == 2 {
                                Some(Matrix::from_vec(rows, cols, words(r, rows * cols)?)?)
                            } else {
                                None
                            };
                            Ok(LocalShare::new(main, alt))
                        };
                        let u = read_share(n, d)?;
                        let v = read_share(d, m)?;
                        let h = read_share(n, m)?;
                        pool.mat.push_back(TripleShare { u, v, h });
                    }
                }
                3 => pool.trunc.extend(words(r, count * pool.trunc_record())?),
                4 => pool.kshares.extend(words(r, count * wdt)?),
                5 | 6 => {
                    let f = if kind[0] == 5 { Flavor::Three } else { Flavor::Two };
                    let bits = BitVec::from_words(count, words(r, count.div_ceil(64))?);
                    let arith = words(r, count)?;
                    pool.push_dabits(f, &bits, &arith);
                }
                7 | 8 => {
                    let f = if kind[0] == 7 { Flavor::Three } else { Flavor::Two };
                    let nw = count.div_ceil(64);
                    let a = BitVec::from_words(count, words(r, nw)?);
                    let b = BitVec::from_words(count, words(r, nw)?);
                    let c = BitVec::from_words(count, words(r, nw)?);
                    pool.push_bool_triples(f, &a, &b, &c);
                }
                k => return Err(bad(format!("unknown section kind {k}"))),
            }
        }
        Ok(pool)
    }
}

impl PreprocSource for PartyPool {
    fn vmt(&mut self, k: usize) -> Result<TripleShare> {
        if self.vmt_available() < k {
            return Err(underflow(self.party, "element-wise triples", k, self.vmt_available()));
        }
        let rec = self.vmt_record();
        let mut cols = PartyPool::take_columns(&mut self.vmt, k, rec);
        Ok(TripleShare {
            u: self.share_from(&mut cols, 0, 1, k),
            v: self.share_from(&mut cols, 1, 1, k),
            h: self.share_from(&mut cols, 2, 1, k),
        })
    }

    fn matrix_triple(&mut self, n: usize, d: usize, m: usize) -> Result<TripleShare> {
        let t = self.mat.pop_front().ok_or_else(|| underflow(self.party, "matrix triples", 1, 0))?;
        let got = (t.u.shape().0, t.u.shape().1, t.v.shape().1);
        if got != (n, d, m) {
            return Err(Error::PreprocMismatch(format!(
                "next matrix triple is {got:?}, protocol needs {:?}",
                (n, d, m)
            )));
        }
        Ok(t)
    }

    fn trunc_pairs(&mut self, k: usize) -> Result<TruncShare> {
        if self.trunc_available() < k {
            return Err(underflow(self.party, "truncation pairs", k, self.trunc_available()));
        }
        let rec = self.trunc_record();
        let mut cols = PartyPool::take_columns(&mut self.trunc, k, rec);
        let bits = std::mem::take(&mut cols[rec - 1]);
        Ok(TruncShare {
            r: self.share_from(&mut cols, 0, 1, k),
            r_prime: self.share_from(&mut cols, 1, 1, k),
            bits,
        })
    }

    fn k_shares(&mut self, k: usize) -> Result<LocalShare> {
        if self.kshares_available() < k {
            return Err(underflow(self.party, "masking shares", k, self.kshares_available()));
        }
        let w = self.width();
        let mut cols = PartyPool::take_columns(&mut self.kshares, k, w);
        Ok(self.share_from(&mut cols, 0, 1, k))
    }

    fn dabits(&mut self, k: usize, flavor: Flavor) -> Result<DaBitShare> {
        let have = self.dabits_available(flavor);
        if have < k {
            return Err(underflow(self.party, &format!("{flavor:?}-party daBits"), k, have));
        }
        let bits = self.dabit_bits[flavor.index()].take(k);
        let arith = self.dabit_arith[flavor.index()].drain(..k).collect();
        Ok(DaBitShare { bits, arith })
    }

    fn bool_triples(&mut self, k: usize, flavor: Flavor) -> Result<BoolTripleShare> {
        let have = self.bool_triples_available(flavor);
        if have < k {
            return Err(underflow(self.party, &format!("{flavor:?}-party AND triples"), k, have));
        }
        let q = &mut self.bt[flavor.index()];
        Ok(BoolTripleShare { a: q[0].take(k), b: q[1].take(k), c: q[2].take(k) })
    }
}
