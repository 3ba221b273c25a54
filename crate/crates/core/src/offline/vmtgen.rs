//! Interactive element-wise triple generation.
//!
//! Each party picks its own u_i, v_i and shares them. The products u_i v_i
//! are local, and every mixed pair u_i v_j + u_j v_i comes from a
//! [`CrossTermOracle`] as additive shares between P_i and P_j. Each party then
//! shares h_i = u_i v_i + its cross-term shares, and the sums give h = u v.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::protocol::Party;
use crate::ring::Ring;
use crate::rng::StreamRng;
use crate::share::{LocalShare, Mode, PartyId};
use crate::transport::MsgKind;

use super::TripleShare;

/// Produces additive shares of `u_i * v_j + u_j * v_i` for the two parties of a pair.
pub trait CrossTermOracle: Send + Sync {
    /// Called by both members of `pair` with their own vectors. Returns the
    /// caller's additive share. Calls for one pair are matched in order.
    fn cross_term(
        &self,
        pair: (PartyId, PartyId),
        me: PartyId,
        u: &[u64],
        v: &[u64],
        ring: Ring,
    ) -> Result<Vec<u64>>;
}

#[derive(Default)]
struct Slot {
    first: Option<(PartyId, Vec<u64>, Vec<u64>)>,
    result_for_first: Option<Vec<u64>>,
}

/// In-process dealer answering cross-term queries.
pub struct DealerCrossTerm {
    state: Mutex<(HashMap<(u8, u8, u64), Slot>, HashMap<(u8, u8, u8), u64>, StreamRng)>,
    ready: Condvar,
}

impl DealerCrossTerm {
    pub fn new(seed: u64) -> Self {
        let rng = crate::rng::stream(seed, 254, b"crossterm", "oracle");
        DealerCrossTerm { state: Mutex::new((HashMap::new(), HashMap::new(), rng)), ready: Condvar::new() }
    }
}

impl CrossTermOracle for DealerCrossTerm {
    fn cross_term(
        &self,
        pair: (PartyId, PartyId),
        me: PartyId,
        u: &[u64],
        v: &[u64],
        ring: Ring,
    ) -> Result<Vec<u64>> {
        if me != pair.0 && me != pair.1 {
            return Err(Error::Argument(format!("{me} is not in pair {pair:?}")));
        }
        let (a, b) = (pair.0 as u8, pair.1 as u8);
        let mut guard = self.state.lock().unwrap();
        let seq = {
            let c = guard.1.entry((a, b, me as u8)).or_insert(0);
            *c += 1;
            *c - 1
        };
        let key = (a, b, seq);
        let (slots, _, rng) = &mut *guard;
        let slot = slots.entry(key).or_default();
        match slot.first.take() {
            None => {
                slot.first = Some((me, u.to_vec(), v.to_vec()));
                loop {
                    guard = self.ready.wait(guard).unwrap();
                    if let Some(slot) = guard.0.get_mut(&key) {
                        if let Some(r) = slot.result_for_first.take() {
                            guard.0.remove(&key);
                            return Ok(r);
                        }
                    }
                }
            }
            Some((_, u0, v0)) => {
                if u0.len() != u.len() || v0.len() != v.len() || u.len() != v.len() {
                    return Err(Error::Argument("cross-term inputs differ in length".into()));
                }
                let mut mine = Vec::with_capacity(u.len());
                let mut theirs = Vec::with_capacity(u.len());
                for i in 0..u.len() {
                    let s = ring.add(ring.mul(u0[i], v[i]), ring.mul(u[i], v0[i]));
                    let r = ring.random(rng);
                    theirs.push(r);
                    mine.push(ring.sub(s, r));
                }
                slot.result_for_first = Some(theirs);
                self.ready.notify_all();
                Ok(mine)
            }
        }
    }
}

const PAIRS: [(PartyId, PartyId); 3] =
    [(PartyId::P0, PartyId::P1), (PartyId::P1, PartyId::P2), (PartyId::P0, PartyId::P2)];

/// Runs interactive triple generation for `k` element-wise triples.
/// `forced` fixes this party's (u_i, v_i), for tests.
pub fn interactive_vmt(
    party: &mut Party,
    oracle: &dyn CrossTermOracle,
    k: usize,
    forced: Option<(Vec<u64>, Vec<u64>)>,
) -> Result<TripleShare> {
    if party.mode() != Mode::ThreeParty {
        return Err(Error::Unsupported("triple generation needs all three parties".into()));
    }
    let ring = party.params().ring();
    let me = party.id();
    let (u, v) = match forced {
        Some((u, v)) if u.len() == k && v.len() == k => (u, v),
        Some(_) => return Err(Error::Argument("forced inputs have the wrong length".into())),
        None => {
            let rng = party.local_rng();
            let u: Vec<u64> = (0..k).map(|_| ring.random(rng)).collect();
            let v: Vec<u64> = (0..k).map(|_| ring.random(rng)).collect();
            (u, v)
        }
    };
    let mut uv = u.clone();
    uv.extend_from_slice(&v);
    let uv = Matrix::from_vec(1, 2 * k, uv)?;
    let all = PartyId::ALL;
    let parts = party.share_inputs(&all, Some(&uv), (1, 2 * k), MsgKind::Offline)?;
    let sum = sum_shares(&parts, ring)?;
    let (su, sv) = split_cols(&sum, k)?;

    let mut h: Vec<u64> = (0..k).map(|i| ring.mul(u[i], v[i])).collect();
    for pair in PAIRS {
        if pair.0 == me || pair.1 == me {
            let c = oracle.cross_term(pair, me, &u, &v, ring)?;
            for (hi, ci) in h.iter_mut().zip(c) {
                *hi = ring.add(*hi, ci);
            }
        }
    }
    let hm = Matrix::from_vec(1, k, h)?;
    let parts = party.share_inputs(&all, Some(&hm), (1, k), MsgKind::Offline)?;
    let sh = sum_shares(&parts, ring)?;
    Ok(TripleShare { u: su, v: sv, h: sh })
}

fn sum_shares(parts: &[LocalShare], ring: Ring) -> Result<LocalShare> {
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        acc = acc.add(p, ring)?;
    }
    Ok(acc)
}

fn split_cols(s: &LocalShare, k: usize) -> Result<(LocalShare, LocalShare)> {
    let (a, b) = s.clone().reshape(2, k)?.split_rows(1);
    Ok((a, b))
}
