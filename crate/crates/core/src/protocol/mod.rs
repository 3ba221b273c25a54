//! Online protocols, run by one `Party` per participant.
//!
//! Every operation is written once and branches on the current [`Mode`].
//! In three-party mode openings use the (c0, c1, c2) weights; after P2 drops,
//! P0 contributes its index-0 and index-3 shares and openings use
//! (c'0, c'1, c'3).

mod arith;
pub mod boolean;
mod convert;
mod nonlinear;

use log::info;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::offline::{Flavor, PreprocSource};
use crate::params::Params;
use crate::rng::{self, StreamRng};
use crate::share::{LocalShare, Mode, PartyId};
use crate::transport::{ChannelStats, MsgKind, Network, Payload};

pub use boolean::{msb_circuit, BitOps, CountingBits, PlainBits};

pub struct Party {
    id: PartyId,
    params: Params,
    mode: Mode,
    net: Network,
    pre: Box<dyn PreprocSource>,
    rng: StreamRng,
}

fn flatten(parts: &[&Matrix]) -> Vec<u64> {
    let mut out = Vec::with_capacity(parts.iter().map(|m| m.len()).sum());
    for p in parts {
        out.extend_from_slice(p.data());
    }
    out
}

fn unflatten(data: &[u64], like: &[(usize, usize)]) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(like.len());
    let mut at = 0;
    for &(r, c) in like {
        out.push(Matrix::from_vec(r, c, data[at..at + r * c].to_vec()).expect("sized by shape"));
        at += r * c;
    }
    out
}

impl Party {
    pub fn new(
        params: Params,
        net: Network,
        pre: Box<dyn PreprocSource>,
        seed: u64,
    ) -> Self {
        let id = net.me();
        let rng = rng::stream(seed, id as u8, b"party", "local");
        Party { id, params, mode: Mode::ThreeParty, net, pre, rng }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn stats(&self) -> &ChannelStats {
        self.net.stats()
    }

    pub(crate) fn local_rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub(crate) fn flavor(&self) -> Flavor {
        match self.mode {
            Mode::ThreeParty => Flavor::Three,
            Mode::TwoPartyAfterDrop => Flavor::Two,
        }
    }

    fn ring(&self) -> crate::ring::Ring {
        self.params.ring()
    }

    /// Other parties still taking part.
    fn peers(&self) -> Vec<PartyId> {
        self.mode.live().iter().copied().filter(|p| *p != self.id).collect()
    }

    fn ensure_live(&self) -> Result<()> {
        if !self.mode.is_live(self.id) {
            return Err(Error::Unsupported(format!("{} has dropped out", self.id)));
        }
        Ok(())
    }

    /// Switches to two-party mode. P2 stops participating.
    pub fn raise_drop(&mut self) -> Result<()> {
        if self.mode == Mode::TwoPartyAfterDrop {
            return Err(Error::Unsupported("only one assistant party may drop".into()));
        }
        self.mode = Mode::TwoPartyAfterDrop;
        self.net.mark_p2_dropped()?;
        self.pre.release_p2();
        info!("{}: switched to two-party mode", self.id);
        Ok(())
    }

    /// Opens several shared matrices to every live party in one round.
    pub fn open_many(&mut self, xs: &[&LocalShare]) -> Result<Vec<Matrix>> {
        self.open_kind(xs, MsgKind::Open)
    }

    fn open_kind(&mut self, xs: &[&LocalShare], kind: MsgKind) -> Result<Vec<Matrix>> {
        self.ensure_live()?;
        let ring = self.ring();
        let shapes: Vec<(usize, usize)> = xs.iter().map(|x| x.shape()).collect();
        let total: usize = xs.iter().map(|x| x.len()).sum();
        let mains: Vec<&Matrix> = xs.iter().map(|x| &x.main).collect();
        let main = flatten(&mains);
        let coeffs = *self.params.vsss.coeffs();
        let opened = match self.mode {
            Mode::ThreeParty => {
                let peers = self.peers();
                let out = peers.iter().map(|p| (*p, Payload::Ring(main.clone()))).collect();
                let got = self.net.exchange(kind, out, &peers)?;
                let mut acc: Vec<u64> =
                    main.iter().map(|v| ring.mul(coeffs.c[self.id.index()], *v)).collect();
                for g in got {
                    let w = coeffs.c[g.from.index()];
                    for (a, v) in acc.iter_mut().zip(g.ring(total)?) {
                        *a = ring.add(*a, ring.mul(w, v));
                    }
                }
                acc
            }
            Mode::TwoPartyAfterDrop => {
                let cp = coeffs.c_prime;
                if self.id == PartyId::P0 {
                    let alts: Vec<&Matrix> = xs
                        .iter()
                        .map(|x| x.alt.as_ref().ok_or_else(|| Error::Argument("P0 share without index 3".into())))
                        .collect::<Result<_>>()?;
                    let alt = flatten(&alts);
                    let mut payload = main.clone();
                    payload.extend_from_slice(&alt);
                    let got = self.net.exchange(
                        kind,
                        vec![(PartyId::P1, Payload::Ring(payload))],
                        &[PartyId::P1],
                    )?;
                    let s1 = got[0].ring(total)?;
                    (0..total)
                        .map(|i| ring.dot(&cp, &[main[i], s1[i], alt[i]]))
                        .collect()
                } else {
                    let got = self.net.exchange(
                        kind,
                        vec![(PartyId::P0, Payload::Ring(main.clone()))],
                        &[PartyId::P0],
                    )?;
                    let s = got[0].ring(2 * total)?;
                    (0..total)
                        .map(|i| ring.dot(&cp, &[s[i], main[i], s[total + i]]))
                        .collect()
                }
            }
        };
        Ok(unflatten(&opened, &shapes))
    }

    /// Shares private inputs. Every party in `owners` shares a matrix of
    /// shape `shape`; `mine` is this party's input when it is an owner. All
    /// sharings travel in one round. Results follow the order of `owners`.
    pub fn share_inputs(
        &mut self,
        owners: &[PartyId],
        mine: Option<&Matrix>,
        shape: (usize, usize),
        kind: MsgKind,
    ) -> Result<Vec<LocalShare>> {
        self.ensure_live()?;
        let me = self.id;
        let n = shape.0 * shape.1;
        let mut own = None;
        let mut out = Vec::new();
        if owners.contains(&me) {
            let x = mine.ok_or_else(|| Error::Argument(format!("{me} owns an input but passed none")))?;
            if x.shape() != shape {
                return Err(Error::Shape(format!("input {:?} announced as {shape:?}", x.shape())));
            }
            let full = self.params.vsss.share_matrix(x, &mut self.rng);
            for p in self.peers() {
                let payload = if p == PartyId::P0 {
                    let mut v = full[0].data().to_vec();
                    v.extend_from_slice(full[3].data());
                    v
                } else {
                    full[p.index()].data().to_vec()
                };
                out.push((p, Payload::Ring(payload)));
            }
            own = Some(LocalShare::from_full(me, full));
        }
        let expect: Vec<PartyId> = owners.iter().copied().filter(|o| *o != me).collect();
        let got = self.net.exchange(kind, out, &expect)?;
        let mut got = got.into_iter();
        let mut res = Vec::with_capacity(owners.len());
        for o in owners {
            if *o == me {
                res.push(own.take().expect("own sharing"));
                continue;
            }
            let g = got.next().expect("one frame per owner");
            let s = if me == PartyId::P0 {
                let v = g.ring(2 * n)?;
                LocalShare::new(
                    Matrix::from_vec(shape.0, shape.1, v[..n].to_vec())?,
                    Some(Matrix::from_vec(shape.0, shape.1, v[n..].to_vec())?),
                )
            } else {
                LocalShare::new(Matrix::from_vec(shape.0, shape.1, g.ring(n)?)?, None)
            };
            res.push(s);
        }
        Ok(res)
    }

    /// Shares one party's private matrix with everyone.
    pub fn share_input(
        &mut self,
        owner: PartyId,
        value: Option<&Matrix>,
        shape: (usize, usize),
    ) -> Result<LocalShare> {
        Ok(self.share_inputs(&[owner], value, shape, MsgKind::Input)?.remove(0))
    }

    /// Sends every other live share to P0, which alone learns the value.
    pub fn reveal_to_p0(&mut self, x: &LocalShare) -> Result<Option<Matrix>> {
        self.ensure_live()?;
        let ring = self.ring();
        let coeffs = *self.params.vsss.coeffs();
        if self.id != PartyId::P0 {
            self.net.exchange(
                MsgKind::Reveal,
                vec![(PartyId::P0, Payload::Ring(x.main.data().to_vec()))],
                &[],
            )?;
            return Ok(None);
        }
        let peers = self.peers();
        let got = self.net.exchange(MsgKind::Reveal, vec![], &peers)?;
        let n = x.len();
        let (rows, cols) = x.shape();
        let data = match self.mode {
            Mode::ThreeParty => {
                let s1 = got[0].ring(n)?;
                let s2 = got[1].ring(n)?;
                (0..n).map(|i| ring.dot(&coeffs.c, &[x.main.data()[i], s1[i], s2[i]])).collect()
            }
            Mode::TwoPartyAfterDrop => {
                let s1 = got[0].ring(n)?;
                let alt = x.alt.as_ref().ok_or_else(|| Error::Argument("P0 share without index 3".into()))?;
                (0..n)
                    .map(|i| ring.dot(&coeffs.c_prime, &[x.main.data()[i], s1[i], alt.data()[i]]))
                    .collect()
            }
        };
        Ok(Some(Matrix::from_vec(rows, cols, data)?))
    }

    /// Decides at an iteration boundary whether P2 is still there. P2 sends
    /// a keep-alive frame to P0 and P1, who block until it or end-of-stream
    /// arrives, then swap what they saw so both switch modes together. Only
    /// meaningful on transports that can observe a closed socket.
    pub fn agree_on_p2_loss(&mut self) -> Result<bool> {
        if self.mode != Mode::ThreeParty {
            return Ok(false);
        }
        let flag = |b: bool| Payload::Bits(crate::bits::BitVec::from_bools([b]));
        if self.id == PartyId::P2 {
            self.net.exchange(
                MsgKind::Control,
                vec![(PartyId::P0, flag(false)), (PartyId::P1, flag(false))],
                &[],
            )?;
            self.net.exchange(MsgKind::Control, vec![], &[])?;
            return Ok(false);
        }
        let seen = match self.net.exchange(MsgKind::Control, vec![], &[PartyId::P2]) {
            Ok(_) => false,
            Err(Error::PeerDropped(2)) | Err(Error::Connection(_)) => {
                self.net.skip_round();
                true
            }
            Err(e) => return Err(e),
        };
        let other = if self.id == PartyId::P0 { PartyId::P1 } else { PartyId::P0 };
        let got = self.net.exchange(MsgKind::Control, vec![(other, flag(seen))], &[other])?;
        Ok(seen || got[0].bits(1)?.get(0))
    }
}
