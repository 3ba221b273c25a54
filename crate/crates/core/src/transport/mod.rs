//! Party mesh with synchronous rendezvous rounds and payload metering.

pub mod frame;
pub mod inproc;
pub mod tcp;

use std::net::SocketAddr;
use std::thread;
use std::time::Duration;

use log::{debug, info};
use sha2::{Digest, Sha256};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::share::PartyId;
use frame::{bytes_to_ring, ring_to_bytes, Frame};

pub trait Link: Send {
    fn send(&mut self, frame: Vec<u8>) -> Result<()>;
    /// `Ok(None)` once the peer has closed its side.
    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>>;
    /// Non-blocking check for a closed peer. Frames seen while checking are kept.
    fn peer_closed(&mut self) -> bool;
    fn close(&mut self);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgKind {
    Input = 1,
    Open = 2,
    Trunc = 3,
    And = 4,
    Bit2A = 5,
    Reshare = 6,
    Masked = 7,
    Reveal = 8,
    Offline = 9,
    Control = 10,
    Test = 11,
}

impl MsgKind {
    pub fn from_u8(v: u8) -> Option<MsgKind> {
        use MsgKind::*;
        Some(match v {
            1 => Input,
            2 => Open,
            3 => Trunc,
            4 => And,
            5 => Bit2A,
            6 => Reshare,
            7 => Masked,
            8 => Reveal,
            9 => Offline,
            10 => Control,
            11 => Test,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Ring(Vec<u64>),
    Bits(BitVec),
}

impl Payload {
    fn logical_bits(&self, ell: u32) -> u64 {
        match self {
            Payload::Ring(v) => v.len() as u64 * ell as u64,
            Payload::Bits(b) => b.len() as u64,
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            Payload::Ring(v) => ring_to_bytes(v),
            Payload::Bits(b) => b.to_bytes(),
        }
    }
}

/// A received payload, still in wire form.
#[derive(Clone, Debug)]
pub struct Incoming {
    pub from: PartyId,
    bytes: Vec<u8>,
}

impl Incoming {
    pub fn ring(&self, expected: usize) -> Result<Vec<u64>> {
        let v = bytes_to_ring(&self.bytes)?;
        if v.len() != expected {
            return Err(Error::Desync(format!(
                "{} sent {} ring elements, expected {expected}",
                self.from,
                v.len()
            )));
        }
        Ok(v)
    }

    pub fn bits(&self, expected: usize) -> Result<BitVec> {
        BitVec::from_bytes(expected, &self.bytes).ok_or_else(|| {
            Error::Desync(format!(
                "{} sent {} bytes, expected {expected} bits",
                self.from,
                self.bytes.len()
            ))
        })
    }
}

/// Payload counters for one party. Only logical payload bits are counted:
/// l bits per ring element and 1 bit per boolean value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub bits_sent: [u64; 3],
    pub bits_received: [u64; 3],
    pub frames_sent: [u64; 3],
    pub rounds: u64,
}

impl ChannelStats {
    pub fn total_sent(&self) -> u64 {
        self.bits_sent.iter().sum()
    }

    pub fn since(&self, earlier: &ChannelStats) -> ChannelStats {
        let d = |a: [u64; 3], b: [u64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        ChannelStats {
            bits_sent: d(self.bits_sent, earlier.bits_sent),
            bits_received: d(self.bits_received, earlier.bits_received),
            frames_sent: d(self.frames_sent, earlier.frames_sent),
            rounds: self.rounds - earlier.rounds,
        }
    }
}

/// Record of one received frame, kept for reveal-policy audits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuditEntry {
    pub round: u32,
    pub kind: MsgKind,
    pub from: PartyId,
}

pub struct Network {
    me: PartyId,
    session: [u8; 16],
    ell: u32,
    links: [Option<Box<dyn Link>>; 3],
    round: u32,
    stats: ChannelStats,
    schedule: Sha256,
    audit: Vec<AuditEntry>,
    p2_dropped: bool,
    timeout: Duration,
    delay: Option<Duration>,
    watch_drop: bool,
}

impl Network {
    pub fn new(
        me: PartyId,
        session: [u8; 16],
        ell: u32,
        links: [Option<Box<dyn Link>>; 3],
    ) -> Self {
        Network {
            me,
            session,
            ell,
            links,
            round: 0,
            stats: ChannelStats::default(),
            schedule: Sha256::new(),
            audit: Vec::new(),
            p2_dropped: false,
            timeout: Duration::from_secs(600),
            delay: None,
            watch_drop: false,
        }
    }

    /// Builds the three in-process endpoints of a fresh mesh.
    pub fn inproc_mesh(session: [u8; 16], ell: u32) -> [Network; 3] {
        let mut raw = inproc::mesh();
        PartyId::ALL.map(|p| {
            let row = std::mem::take(&mut raw[p.index()]);
            let links = row.map(|l| l.map(|l| Box::new(l) as Box<dyn Link>));
            Network::new(p, session, ell, links)
        })
    }

    pub fn connect_tcp(
        me: PartyId,
        addrs: &[SocketAddr; 3],
        session: [u8; 16],
        ell: u32,
        timeout: Duration,
    ) -> Result<Network> {
        let links = tcp::connect(me.index(), addrs, session, timeout)?;
        let links = links.map(|l| l.map(|l| Box::new(l) as Box<dyn Link>));
        let mut net = Network::new(me, session, ell, links);
        net.watch_drop = true;
        Ok(net)
    }

    pub fn me(&self) -> PartyId {
        self.me
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    /// Digest of the (round, kind) sequence this party has executed.
    pub fn schedule_hash(&self) -> [u8; 32] {
        self.schedule.clone().finalize().into()
    }

    pub fn set_timeout(&mut self, t: Duration) {
        self.timeout = t;
    }

    /// Fixed delay added to every exchange, for latency emulation in tests.
    pub fn set_delay(&mut self, d: Option<Duration>) {
        self.delay = d;
    }

    /// Whether a closed P2 socket should be read as a drop at iteration boundaries.
    pub fn watches_drop(&self) -> bool {
        self.watch_drop
    }

    pub fn p2_dropped(&self) -> bool {
        self.p2_dropped
    }

    /// Non-blocking check whether P2's link has gone away.
    pub fn p2_link_closed(&mut self) -> bool {
        match self.links[2].as_mut() {
            Some(l) if self.me != PartyId::P2 => l.peer_closed(),
            _ => false,
        }
    }

    /// Stops all traffic with P2. On P2 itself this closes every link.
    pub fn mark_p2_dropped(&mut self) -> Result<()> {
        if self.p2_dropped {
            return Err(Error::Unsupported("P2 already dropped; only one assistant may drop".into()));
        }
        self.p2_dropped = true;
        if self.me == PartyId::P2 {
            for l in self.links.iter_mut().flatten() {
                l.close();
            }
        } else if let Some(l) = self.links[2].as_mut() {
            l.close();
        }
        info!("{}: continuing without P2 from round {}", self.me, self.round);
        Ok(())
    }

    /// Closes a round that ended early because its only sender went away.
    pub(crate) fn skip_round(&mut self) {
        self.round += 1;
        self.stats.rounds += 1;
    }

    fn live(&self, p: PartyId) -> bool {
        !(self.p2_dropped && p == PartyId::P2)
    }

    /// One synchronous round: send `outgoing`, then block until a frame of
    /// this round and kind arrives from every party in `expect`.
    pub fn exchange(
        &mut self,
        kind: MsgKind,
        outgoing: Vec<(PartyId, Payload)>,
        expect: &[PartyId],
    ) -> Result<Vec<Incoming>> {
        if self.p2_dropped && self.me == PartyId::P2 {
            return Err(Error::Unsupported("P2 has dropped out".into()));
        }
        let tag = self.round;
        self.schedule.update(tag.to_le_bytes());
        self.schedule.update([kind as u8]);
        if let Some(d) = self.delay {
            thread::sleep(d);
        }
        for (to, payload) in outgoing {
            if to == self.me || !self.live(to) {
                return Err(Error::Desync(format!("{} cannot send to {to}", self.me)));
            }
            let bits = payload.logical_bits(self.ell);
            let frame = Frame {
                session: self.session,
                sender: self.me as u8,
                round: tag,
                kind: kind as u8,
                payload: payload.to_bytes(),
            };
            let link = self.links[to.index()]
                .as_mut()
                .ok_or_else(|| Error::Connection(format!("no link to {to}")))?;
            link.send(frame.encode())?;
            self.stats.bits_sent[to.index()] += bits;
            self.stats.frames_sent[to.index()] += 1;
        }
        let mut incoming = Vec::with_capacity(expect.len());
        for &from in expect {
            if from == self.me || !self.live(from) {
                return Err(Error::Desync(format!("{} cannot expect {from}", self.me)));
            }
            let link = self.links[from.index()]
                .as_mut()
                .ok_or_else(|| Error::Connection(format!("no link to {from}")))?;
            let raw = match link.recv(self.timeout) {
                Ok(Some(raw)) => raw,
                Ok(None) => return Err(Error::PeerDropped(from as u8)),
                Err(Error::Desync(m)) => {
                    return Err(Error::Desync(format!("round {tag}: waiting on {from}: {m}")))
                }
                Err(e) => return Err(e),
            };
            let f = Frame::decode(&raw)?;
            if f.session != self.session {
                return Err(Error::Desync(format!("frame from {from} carries another session id")));
            }
            if f.sender != from as u8 || f.round != tag || f.kind != kind as u8 {
                return Err(Error::Desync(format!(
                    "expected round {tag} kind {kind:?} from {from}, got round {} kind {} from P{}",
                    f.round, f.kind, f.sender
                )));
            }
            self.stats.bits_received[from.index()] += match kind {
                MsgKind::And | MsgKind::Bit2A | MsgKind::Control => {
                    // Receivers cannot know the exact bit count of a padded
                    // boolean payload, so receive-side counts are in bytes * 8.
                    f.payload.len() as u64 * 8
                }
                _ => (f.payload.len() / 8) as u64 * self.ell as u64,
            };
            self.audit.push(AuditEntry { round: tag, kind, from });
            incoming.push(Incoming { from, bytes: f.payload });
        }
        self.round += 1;
        self.stats.rounds += 1;
        debug!("{} round {tag} {kind:?} done", self.me);
        Ok(incoming)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn echo_round_meters_payload_only() {
        let nets = Network::inproc_mesh([1; 16], 64);
        let handles: Vec<_> = nets
            .into_iter()
            .map(|mut n| {
                thread::spawn(move || {
                    let me = n.me();
                    let peers: Vec<PartyId> =
                        PartyId::ALL.iter().copied().filter(|p| *p != me).collect();
                    let out =
                        peers.iter().map(|p| (*p, Payload::Ring(vec![me as u64]))).collect();
                    let got = n.exchange(MsgKind::Test, out, &peers).unwrap();
                    for g in &got {
                        assert_eq!(g.ring(1).unwrap(), vec![g.from as u64]);
                    }
                    (n.stats().clone(), n.schedule_hash())
                })
            })
            .collect();
        let res: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for (i, (s, h)) in res.iter().enumerate() {
            assert_eq!(s.total_sent(), 128);
            assert_eq!(s.bits_sent[i], 0);
            assert_eq!(s.rounds, 1);
            assert_eq!(*h, res[0].1);
        }
    }

    #[test]
    fn mismatched_kind_is_desync() {
        let [mut a, mut b, _c] = Network::inproc_mesh([2; 16], 64);
        let t = thread::spawn(move || {
            b.exchange(MsgKind::Open, vec![(PartyId::P0, Payload::Ring(vec![1]))], &[])
        });
        t.join().unwrap().unwrap();
        let err = a.exchange(MsgKind::Trunc, vec![], &[PartyId::P1]).unwrap_err();
        assert!(matches!(err, Error::Desync(_)), "{err}");
    }

    #[test]
    fn exchange_after_drop_excludes_p2() {
        let [mut a, _b, _c] = Network::inproc_mesh([3; 16], 64);
        a.mark_p2_dropped().unwrap();
        assert!(a.exchange(MsgKind::Test, vec![], &[PartyId::P2]).is_err());
        assert!(matches!(a.mark_p2_dropped(), Err(Error::Unsupported(_))));
    }
}
