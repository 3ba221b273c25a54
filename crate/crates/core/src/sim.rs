//! Runs all three parties in one process, one thread each, over in-process
//! channels.

use std::thread;

use crate::error::{Error, Result};
use crate::ml::{train, DataMeta, Dataset, Outcome, TrainConfig};
use crate::offline::{LiveDealer, PartyPool, PreprocSource};
use crate::params::Params;
use crate::protocol::Party;
use crate::rng;
use crate::transport::{AuditEntry, ChannelStats, Network};

/// Where the parties get their preprocessing.
pub enum Preproc {
    /// A dealer in the same process that deals on demand.
    Live { seed: u64, record_masks: bool },
    /// Pools prepared ahead of time, indexed by party.
    Pools(Box<[PartyPool; 3]>),
}

/// Per-party results of a local run.
pub struct SimRun<T> {
    pub outputs: [T; 3],
    pub stats: [ChannelStats; 3],
    pub audits: [Vec<AuditEntry>; 3],
    pub schedules: [[u8; 32]; 3],
    /// Cleartext truncation masks, when a live dealer recorded them.
    pub mask_log: Option<Vec<u64>>,
}

struct PartyResult<T> {
    out: T,
    stats: ChannelStats,
    audit: Vec<AuditEntry>,
    schedule: [u8; 32],
}

/// Session id derived from a seed, shared by the three parties.
pub fn session_id(seed: u64) -> [u8; 16] {
    let full = rng::derive_seed(seed, 0, b"session", "id");
    full[..16].try_into().expect("16 bytes")
}

/// Runs `f` once per party, concurrently. Returns the error of the party
/// that failed first in protocol terms; peers that merely saw it leave are
/// not reported.
pub fn run_local<T, F>(params: &Params, pre: Preproc, seed: u64, f: F) -> Result<SimRun<T>>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let nets = Network::inproc_mesh(session_id(seed), params.ell());
    let (sources, dealer): ([Box<dyn PreprocSource>; 3], Option<LiveDealer>) = match pre {
        Preproc::Live { seed: dseed, record_masks } => {
            let ds = LiveDealer::new(params, dseed, record_masks);
            let keep = ds[0].clone();
            let [a, b, c] = ds;
            ([Box::new(a), Box::new(b), Box::new(c)], Some(keep))
        }
        Preproc::Pools(pools) => {
            for (i, p) in pools.iter().enumerate() {
                if p.party().index() != i {
                    return Err(Error::PreprocMismatch(format!("pool {i} belongs to {}", p.party())));
                }
            }
            let [a, b, c] = *pools;
            ([Box::new(a), Box::new(b), Box::new(c)], None)
        }
    };

    let f = &f;
    let results: Vec<Result<PartyResult<T>>> = thread::scope(|s| {
        let handles: Vec<_> = nets
            .into_iter()
            .zip(sources)
            .map(|(net, src)| {
                let params = params.clone();
                s.spawn(move || {
                    let mut party = Party::new(params, net, src, seed);
                    let out = f(&mut party)?;
                    Ok(PartyResult {
                        out,
                        stats: party.stats().clone(),
                        audit: party.network().audit().to_vec(),
                        schedule: party.network().schedule_hash(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("party thread panicked")).collect()
    });

    if results.iter().any(|r| r.is_err()) {
        let errs: Vec<Error> = results.into_iter().filter_map(|r| r.err()).collect();
        let root = errs
            .iter()
            .position(|e| !matches!(e, Error::PeerDropped(_) | Error::Connection(_)))
            .unwrap_or(0);
        return Err(errs.into_iter().nth(root).expect("at least one error"));
    }
    let mut ok: Vec<PartyResult<T>> = results.into_iter().map(|r| r.ok().expect("checked")).collect();
    let r2 = ok.pop().expect("three");
    let r1 = ok.pop().expect("three");
    let r0 = ok.pop().expect("three");
    Ok(SimRun {
        stats: [r0.stats, r1.stats, r2.stats],
        audits: [r0.audit, r1.audit, r2.audit],
        schedules: [r0.schedule, r1.schedule, r2.schedule],
        outputs: [r0.out, r1.out, r2.out],
        mask_log: dealer.and_then(|d| d.mask_log()),
    })
}

/// Trains with every party in this process. Each party only sees its own rows.
pub fn train_local(params: &Params, ds: &Dataset, cfg: &TrainConfig, pre: Preproc, seed: u64) -> Result<SimRun<Outcome>> {
    let meta: DataMeta = ds.meta(cfg.labels);
    let parts = ds.parts(&params.codec, cfg.labels)?;
    run_local(params, pre, seed, |party| {
        let i = party.id().index();
        let mut mine: [Option<crate::ml::OwnerPart>; 3] = Default::default();
        mine[i] = parts[i].clone();
        train(party, &meta, &mine, cfg)
    })
}

/// Bits sent by all parties, and rounds at P0, while `op` runs. Work done
/// in `setup` is not counted. With `drop` set, P2 leaves first.
pub fn meter<S, G, F>(params: &Params, drop: bool, seed: u64, setup: G, op: F) -> Result<(u64, u64)>
where
    G: Fn(&mut Party) -> Result<S> + Sync,
    F: Fn(&mut Party, S) -> Result<()> + Sync,
{
    let run = run_local(params, Preproc::Live { seed, record_masks: false }, seed, |p| {
        if drop {
            p.raise_drop()?;
            if p.id() == crate::share::PartyId::P2 {
                return Ok(ChannelStats::default());
            }
        }
        let s = setup(p)?;
        let before = p.stats().clone();
        op(p, s)?;
        Ok(p.stats().since(&before))
    })?;
    Ok((run.outputs.iter().map(|s| s.total_sent()).sum(), run.outputs[0].rounds))
}
