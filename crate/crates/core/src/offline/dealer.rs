//! Trusted dealer. Each material kind has its own seeded stream, and items
//! are drawn strictly one after another, so requesting material in one batch
//! or in many smaller batches yields the same items. Boolean material is
//! drawn in blocks of 64.

use std::sync::{Arc, Mutex};

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::bits::BitVec;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::params::Params;
use crate::rng::{self, StreamRng};
use crate::share::{LocalShare, PartyId};

use super::pool::{PartyPool, PoolHeader};
use super::{
    BoolTripleShare, DaBitShare, Flavor, Plan, PreprocSource, TripleShare, TruncShare,
};

const VMT: usize = 0;
const MAT: usize = 1;
const TRUNC: usize = 2;
const KSHARE: usize = 3;
const DABIT: usize = 4;
const AND: usize = 5;
const STREAMS: [&str; 6] = ["vmt", "matrix", "trunc", "kshare", "dabit", "andtriple"];

pub fn fingerprint(params: &Params, seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"pmpl-dealer");
    h.update(seed.to_le_bytes());
    h.update([params.ell() as u8, params.frac_bits() as u8, params.sigma as u8]);
    for row in params.vsss.matrix().rows() {
        for v in row {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

type Pools<'a> = [Option<&'a mut PartyPool>; 3];

fn deal(params: &Params, x: u64, rng: &mut StreamRng) -> [u64; 4] {
    let ring = params.ring();
    let s1 = ring.random(rng);
    let s2 = ring.random(rng);
    params.vsss.share_values(x, s1, s2)
}

/// Appends each holder's words of one shared value.
fn push_share(out: &mut [Vec<u64>; 3], sh: &[u64; 4]) {
    out[0].push(sh[0]);
    out[0].push(sh[3]);
    out[1].push(sh[1]);
    out[2].push(sh[2]);
}

fn deliver(pools: &mut Pools<'_>, mut f: impl FnMut(&mut PartyPool, usize)) {
    for (i, p) in pools.iter_mut().enumerate() {
        if let Some(p) = p {
            f(p, i);
        }
    }
}

fn holders(flavor: Flavor) -> usize {
    match flavor {
        Flavor::Three => 3,
        Flavor::Two => 2,
    }
}

/// Deterministic material generator writing into party pools.
pub struct Generator {
    params: Params,
    streams: Vec<StreamRng>,
    /// Cleartext truncation masks in generation order, when recording.
    mask_log: Option<Vec<u64>>,
}

impl Generator {
    pub fn new(params: Params, seed: u64) -> Self {
        let streams = STREAMS.iter().map(|s| rng::stream(seed, 255, b"dealer", s)).collect();
        Generator { params, streams, mask_log: None }
    }

    pub fn record_masks(&mut self) {
        self.mask_log.get_or_insert_with(Vec::new);
    }

    pub fn mask_log(&self) -> Option<&[u64]> {
        self.mask_log.as_deref()
    }

    pub fn vmt(&mut self, k: usize, pools: &mut Pools<'_>) {
        let ring = self.params.ring();
        let rng = &mut self.streams[VMT];
        let mut out: [Vec<u64>; 3] = Default::default();
        for _ in 0..k {
            let u = ring.random(rng);
            let v = ring.random(rng);
            for x in [u, v, ring.mul(u, v)] {
                push_share(&mut out, &deal(&self.params, x, rng));
            }
        }
        deliver(pools, |p, i| p.push_vmt(&out[i]));
    }

    pub fn matrix_triple(&mut self, n: usize, d: usize, m: usize, pools: &mut Pools<'_>) {
        let ring = self.params.ring();
        let rng = &mut self.streams[MAT];
        let u = Matrix::random(ring, n, d, rng);
        let v = Matrix::random(ring, d, m, rng);
        let h = u.matmul(&v, ring).expect("shapes agree");
        let us = self.params.vsss.share_matrix(&u, rng);
        let vs = self.params.vsss.share_matrix(&v, rng);
        let hs = self.params.vsss.share_matrix(&h, rng);
        deliver(pools, |p, i| {
            let party = PartyId::from_index(i).expect("three parties");
            p.push_matrix_triple(TripleShare {
                u: LocalShare::from_full(party, us.clone()),
                v: LocalShare::from_full(party, vs.clone()),
                h: LocalShare::from_full(party, hs.clone()),
            })
        });
    }

    pub fn trunc(&mut self, k: usize, pools: &mut Pools<'_>) {
        let ring = self.params.ring();
        let below = self.params.mask_bound() - 1;
        let f = self.params.frac_bits();
        let rng = &mut self.streams[TRUNC];
        let mut out: [Vec<u64>; 3] = Default::default();
        for _ in 0..k {
            let r = rng.gen::<u64>() & below;
            let b1 = ring.random(rng);
            let b2 = ring.random(rng);
            let bits = [r ^ b1 ^ b2, b1, b2];
            let sr = deal(&self.params, r, rng);
            let srp = deal(&self.params, r >> f, rng);
            out[0].extend([sr[0], sr[3], srp[0], srp[3], bits[0]]);
            for i in 1..3 {
                out[i].extend([sr[i], srp[i], bits[i]]);
            }
            if let Some(log) = self.mask_log.as_mut() {
                log.push(r);
            }
        }
        deliver(pools, |p, i| p.push_trunc(&out[i]));
    }

    pub fn k_shares(&mut self, k: usize, pools: &mut Pools<'_>) {
        let ring = self.params.ring();
        let rng = &mut self.streams[KSHARE];
        let mut out: [Vec<u64>; 3] = Default::default();
        for _ in 0..k {
            let x = ring.random(rng);
            push_share(&mut out, &deal(&self.params, x, rng));
        }
        deliver(pools, |p, i| p.push_kshares(&out[i]));
    }

    /// Deals `blocks` * 64 daBits.
    pub fn dabits(&mut self, blocks: usize, flavor: Flavor, pools: &mut Pools<'_>) {
        let ring = self.params.ring();
        let rng = &mut self.streams[DABIT];
        let parties = holders(flavor);
        let mut words: [Vec<u64>; 3] = Default::default();
        let mut arith: [Vec<u64>; 3] = Default::default();
        for _ in 0..blocks {
            let b: u64 = rng.gen();
            let mut acc = b;
            for w in words.iter_mut().take(parties).skip(1) {
                let s: u64 = rng.gen();
                acc ^= s;
                w.push(s);
            }
            words[0].push(acc);
            for j in 0..64 {
                let mut rest = (b >> j) & 1;
                for a in arith.iter_mut().take(parties).skip(1) {
                    let s = ring.random(rng);
                    rest = ring.sub(rest, s);
                    a.push(s);
                }
                arith[0].push(rest);
            }
        }
        let n = blocks * 64;
        deliver(pools, |p, i| {
            if i < parties {
                p.push_dabits(flavor, &BitVec::from_words(n, words[i].clone()), &arith[i]);
            }
        });
    }

    /// Deals `blocks` * 64 AND triples.
    pub fn bool_triples(&mut self, blocks: usize, flavor: Flavor, pools: &mut Pools<'_>) {
        let rng = &mut self.streams[AND];
        let parties = holders(flavor);
        let mut sh: [[Vec<u64>; 3]; 3] = Default::default();
        for _ in 0..blocks {
            let a: u64 = rng.gen();
            let b: u64 = rng.gen();
            for (t, x) in [a, b, a & b].into_iter().enumerate() {
                let mut acc = x;
                for held in sh.iter_mut().take(parties).skip(1) {
                    let s: u64 = rng.gen();
                    acc ^= s;
                    held[t].push(s);
                }
                sh[0][t].push(acc);
            }
        }
        let n = blocks * 64;
        deliver(pools, |p, i| {
            if i < parties {
                let [a, b, c] = sh[i].clone().map(|w| BitVec::from_words(n, w));
                p.push_bool_triples(flavor, &a, &b, &c);
            }
        });
    }

    /// Generates everything `plan` asks for.
    pub fn fill(&mut self, plan: &Plan, pools: &mut Pools<'_>) {
        self.vmt(plan.vmt, pools);
        for &(n, d, m) in &plan.matrix_triples {
            self.matrix_triple(n, d, m, pools);
        }
        self.trunc(plan.trunc, pools);
        self.k_shares(plan.k_shares, pools);
        for f in [Flavor::Three, Flavor::Two] {
            self.dabits(plan.dabits[f.index()].div_ceil(64), f, pools);
            self.bool_triples(plan.bool_triples[f.index()].div_ceil(64), f, pools);
        }
    }
}

/// Builds the three pools for `plan`. Identical inputs give identical pools.
pub fn dealer_generate(params: &Params, plan: &Plan, seed: u64) -> Result<[PartyPool; 3]> {
    let fp = fingerprint(params, seed);
    let [mut a, mut b, mut c] = [
        PartyPool::new(PoolHeader::new(params, PartyId::P0, fp))?,
        PartyPool::new(PoolHeader::new(params, PartyId::P1, fp))?,
        PartyPool::new(PoolHeader::new(params, PartyId::P2, fp))?,
    ];
    let mut g = Generator::new(params.clone(), seed);
    g.fill(plan, &mut [Some(&mut a), Some(&mut b), Some(&mut c)]);
    Ok([a, b, c])
}

struct LiveState {
    gen: Generator,
    pools: [PartyPool; 3],
    p2_gone: bool,
}

/// A dealer shared by the three parties of one process. Material is produced
/// the first time any party asks for it and queued for the others.
#[derive(Clone)]
pub struct LiveDealer {
    party: PartyId,
    state: Arc<Mutex<LiveState>>,
}

impl LiveDealer {
    /// Returns the three party handles of a fresh dealer.
    pub fn new(params: &Params, seed: u64, record_masks: bool) -> [LiveDealer; 3] {
        let fp = fingerprint(params, seed);
        let mut gen = Generator::new(params.clone(), seed);
        if record_masks {
            gen.record_masks();
        }
        let pools = PartyId::ALL
            .map(|p| PartyPool::new(PoolHeader::new(params, p, fp)).expect("valid party"));
        let state = Arc::new(Mutex::new(LiveState { gen, pools, p2_gone: false }));
        PartyId::ALL.map(|party| LiveDealer { party, state: state.clone() })
    }

    /// Cleartext truncation masks dealt so far, if recording was requested.
    pub fn mask_log(&self) -> Option<Vec<u64>> {
        self.state.lock().unwrap().gen.mask_log().map(|m| m.to_vec())
    }

    /// `short` reports how many items this party lacks; `make` deals that many.
    fn serve<T>(
        &mut self,
        short: impl Fn(&PartyPool) -> usize,
        make: impl FnOnce(&mut Generator, usize, &mut Pools<'_>),
        take: impl FnOnce(&mut PartyPool) -> Result<T>,
    ) -> Result<T> {
        let mut guard = self.state.lock().unwrap();
        let st = &mut *guard;
        let i = self.party.index();
        let missing = short(&st.pools[i]);
        if missing > 0 {
            let [a, b, c] = &mut st.pools;
            let mut refs = [Some(a), Some(b), if st.p2_gone { None } else { Some(c) }];
            make(&mut st.gen, missing, &mut refs);
        }
        take(&mut st.pools[i])
    }
}

impl PreprocSource for LiveDealer {
    fn vmt(&mut self, k: usize) -> Result<TripleShare> {
        self.serve(
            |p| k.saturating_sub(p.vmt_available()),
            |g, n, pools| g.vmt(n, pools),
            |p| p.vmt(k),
        )
    }

    fn matrix_triple(&mut self, n: usize, d: usize, m: usize) -> Result<TripleShare> {
        self.serve(
            |p| usize::from(p.matrix_triples_available() == 0),
            |g, _, pools| g.matrix_triple(n, d, m, pools),
            |p| p.matrix_triple(n, d, m),
        )
    }

    fn trunc_pairs(&mut self, k: usize) -> Result<TruncShare> {
        self.serve(
            |p| k.saturating_sub(p.trunc_available()),
            |g, n, pools| g.trunc(n, pools),
            |p| p.trunc_pairs(k),
        )
    }

    fn k_shares(&mut self, k: usize) -> Result<LocalShare> {
        self.serve(
            |p| k.saturating_sub(p.kshares_available()),
            |g, n, pools| g.k_shares(n, pools),
            |p| p.k_shares(k),
        )
    }

    fn dabits(&mut self, k: usize, flavor: Flavor) -> Result<DaBitShare> {
        self.serve(
            |p| k.saturating_sub(p.dabits_available(flavor)),
            |g, n, pools| g.dabits(n.div_ceil(64), flavor, pools),
            |p| p.dabits(k, flavor),
        )
    }

    fn bool_triples(&mut self, k: usize, flavor: Flavor) -> Result<BoolTripleShare> {
        self.serve(
            |p| k.saturating_sub(p.bool_triples_available(flavor)),
            |g, n, pools| g.bool_triples(n.div_ceil(64), flavor, pools),
            |p| p.bool_triples(k, flavor),
        )
    }

    /// Stops dealing to P2. P2 may still be finishing the previous
    /// iteration, so its queue is only cleared when P2 itself leaves.
    fn release_p2(&mut self) {
        let mut st = self.state.lock().unwrap();
        st.p2_gone = true;
        if self.party == PartyId::P2 {
            let header = st.pools[2].header.clone();
            st.pools[2] = PartyPool::new(header).expect("valid party");
        }
    }
}
