//! `matrix-check`, `dealer-gen`, `train` and `bench`.

use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use pmpl_core::ml::dataset::{load_csv, load_idx_dir, synthetic_binary, Split};
use pmpl_core::ml::eval::export_model;
use pmpl_core::ml::{train as run_training, training_plan, DataMeta, Dataset, LabelEncoding, Model, ModelKind, Outcome, OwnerPart, TrainConfig};
use pmpl_core::offline::{dealer_generate, PartyPool};
use pmpl_core::protocol::CountingBits;
use pmpl_core::sim::{self, session_id, Preproc};
use pmpl_core::vsss::validate_matrix;
use pmpl_core::{Error, LocalShare, Matrix, Network, Params, Party, PartyId, PublicMatrix, Result, Ring};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Settings, SEED_ENV};
use crate::{BenchArgs, RunArgs};

const RUN_KEYS: &[&str] = &[
    "role", "transport", "peers", "pool", "model", "batch", "lr", "epochs", "drop-at", "ell", "ellf",
    "sigma", "seed", "data", "format", "out", "samples", "features", "positive", "hidden",
];

const CONNECT_TIMEOUT: Duration = Duration::from_secs(60);

// ------------------------------------------------------------ matrix-check

fn parse_matrix(text: &str, ring: Ring) -> Result<Vec<Vec<u64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: i128 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("matrix line {}: {tok:?} is not an integer", i + 1)))?;
            let entry = if v < 0 {
                let v = i64::try_from(v).map_err(|_| Error::Parse(format!("matrix entry {v} is too small")))?;
                ring.from_i64(v)
            } else {
                // Entries at or above 2^l are kept as is so validation names them.
                u64::try_from(v).map_err(|_| Error::Parse(format!("matrix entry {v} does not fit 64 bits")))?
            };
            row.push(entry);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn matrix_check(path: Option<&Path>, ell: u32) -> Result<()> {
    let ring = Ring::new(ell)?;
    let pm = match path {
        Some(p) => PublicMatrix::from_rows(ring, &parse_matrix(&fs::read_to_string(p)?, ring)?)?,
        None => PublicMatrix::standard(ring),
    };
    for row in pm.rows() {
        let r: Vec<String> = row
            .iter()
            .map(|v| if *v > ring.mask() { v.to_string() } else { ring.to_signed(*v).to_string() })
            .collect();
        println!("row  {}", r.join(" "));
    }
    let co = validate_matrix(&pm)?;
    let s = |v: &[u64]| v.iter().map(|x| ring.to_signed(*x).to_string()).collect::<Vec<_>>().join(", ");
    println!("c    ({})", s(&co.c));
    println!("c'   ({})", s(&co.c_prime));
    println!("c''  ({})", s(&co.c_dprime));
    println!("a1 a2 ({})", s(&[co.a1, co.a2]));
    println!("ok: all restrictions hold for l = {ell}");
    Ok(())
}

// ------------------------------------------------------------ shared setup

fn settings(a: &RunArgs) -> Result<Settings> {
    let flags = vec![
        ("role", a.role.clone()),
        ("transport", a.transport.clone()),
        ("peers", a.peers.clone()),
        ("pool", a.pool.clone()),
        ("model", a.model.clone()),
        ("batch", a.batch.clone()),
        ("lr", a.lr.clone()),
        ("epochs", a.epochs.clone()),
        ("drop-at", a.drop_at.clone()),
        ("ell", a.ell.clone()),
        ("ellf", a.ellf.clone()),
        ("sigma", a.sigma.clone()),
        ("seed", a.seed.clone()),
        ("data", a.data.clone()),
        ("format", a.format.clone()),
        ("out", a.out.clone()),
        ("samples", a.samples.clone()),
        ("features", a.features.clone()),
        ("positive", a.positive.clone()),
        ("hidden", a.hidden.clone()),
    ];
    Settings::build(a.config.as_deref(), RUN_KEYS, std::env::var(SEED_ENV).ok(), flags)
}

fn params_of(s: &Settings) -> Result<Params> {
    Params::new(
        s.parse_or("ell", pmpl_core::params::DEFAULT_ELL)?,
        s.parse_or("ellf", pmpl_core::params::DEFAULT_FRAC_BITS)?,
        s.parse_or("sigma", pmpl_core::params::DEFAULT_SIGMA)?,
    )
}

fn config_of(s: &Settings) -> Result<TrainConfig> {
    let kind: ModelKind = s.parse_or("model", ModelKind::Logistic)?;
    let mut cfg = TrainConfig::new(kind);
    cfg.batch = s.parse_or("batch", cfg.batch)?;
    cfg.lr = s.parse_or("lr", cfg.lr)?;
    cfg.epochs = s.parse_or("epochs", cfg.epochs)?;
    cfg.drop_at = s.parse("drop-at")?;
    cfg.seed = s.parse_or("seed", cfg.seed)?;
    if let Some(h) = s.get("hidden") {
        cfg.hidden = h
            .split(',')
            .map(|w| w.trim().parse().map_err(|_| Error::Argument(format!("--hidden {h:?}"))))
            .collect::<Result<_>>()?;
    }
    if let Some(p) = s.parse::<u32>("positive")? {
        match cfg.labels {
            LabelEncoding::Binary { .. } => cfg.labels = LabelEncoding::Binary { positive: p },
            _ => return Err(Error::Argument(format!("--positive does not apply to {kind}"))),
        }
    }
    Ok(cfg)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Idx,
    Csv,
}

fn format_of(s: &Settings, data: &Path) -> Result<Format> {
    match s.get("format") {
        Some("idx") => Ok(Format::Idx),
        Some("csv") => Ok(Format::Csv),
        Some(f) => Err(Error::Argument(format!("unknown format {f:?}, expected idx or csv"))),
        None if data.is_dir() => Ok(Format::Idx),
        None => Ok(Format::Csv),
    }
}

/// The training samples split into three owner blocks.
fn load_training(s: &Settings) -> Result<Option<(Dataset, Format)>> {
    let Some(data) = s.get("data") else { return Ok(None) };
    let path = PathBuf::from(data);
    let fmt = format_of(s, &path)?;
    let ds = match fmt {
        Format::Idx => load_idx_dir(&path, Split::Train)?,
        Format::Csv => load_csv(&path)?,
    };
    let ds = match s.parse::<usize>("samples")? {
        Some(k) => ds.head(k),
        None => ds,
    };
    info!("loaded {} samples with {} features from {data}", ds.n, ds.d);
    Ok(Some((ds.with_block_owners(), fmt)))
}

fn pool_paths(spec: &str) -> Vec<PathBuf> {
    let p = Path::new(spec);
    if p.is_dir() {
        return (0..3).map(|i| p.join(format!("p{i}.pool"))).collect();
    }
    spec.split(',').map(|x| PathBuf::from(x.trim())).collect()
}

fn read_pool(path: &Path, params: &Params, party: PartyId) -> Result<PartyPool> {
    let pool = PartyPool::read_from(path)
        .map_err(|e| match e {
            Error::Io(io) => Error::Argument(format!("pool {}: {io}", path.display())),
            e => e,
        })?;
    pool.header.check(params, party)?;
    Ok(pool)
}

// ------------------------------------------------------------ dealer-gen

pub fn dealer_gen(a: &RunArgs) -> Result<()> {
    let s = settings(a)?;
    let params = params_of(&s)?;
    let cfg = config_of(&s)?;
    let out = PathBuf::from(s.get("out").ok_or_else(|| Error::Argument("dealer-gen needs --out DIR".into()))?);
    let meta = match load_training(&s)? {
        Some((ds, _)) => ds.meta(cfg.labels),
        None => {
            let n = s.parse_or("samples", 0usize)?;
            let d = s.parse_or("features", 784usize)?;
            synthetic_binary(n, d, 0).with_block_owners().meta(cfg.labels)
        }
    };
    let plan = if meta.n == 0 || cfg.total_iterations(meta.n) == 0 {
        warn!("no iterations to prepare for, writing header-only pools");
        Default::default()
    } else {
        training_plan(&params, &meta, &cfg)?
    };
    info!(
        "plan: {} matrix triples, {} element triples, {} truncation pairs, {} masking shares",
        plan.matrix_triples.len(),
        plan.vmt,
        plan.trunc,
        plan.k_shares
    );
    let pools = dealer_generate(&params, &plan, cfg.seed)?;
    fs::create_dir_all(&out)?;
    for (i, pool) in pools.iter().enumerate() {
        let path = out.join(format!("p{i}.pool"));
        pool.write_to(&path)?;
        let back = read_pool(&path, &params, PartyId::ALL[i])?;
        if back.trunc_available() != pool.trunc_available()
            || back.matrix_triples_available() != pool.matrix_triples_available()
        {
            return Err(Error::PreprocMismatch(format!("{} did not read back intact", path.display())));
        }
        println!("wrote {} ({} bytes)", path.display(), fs::metadata(&path)?.len());
    }
    Ok(())
}

// ------------------------------------------------------------ train

fn peers_of(s: &Settings) -> Result<[SocketAddr; 3]> {
    let spec = s.get("peers").ok_or_else(|| Error::Argument("tcp transport needs --peers A,B,C".into()))?;
    let addrs: Vec<SocketAddr> = spec
        .split(',')
        .map(|a| {
            a.trim()
                .to_socket_addrs()
                .ok()
                .and_then(|mut it| it.next())
                .ok_or_else(|| Error::Argument(format!("cannot resolve peer {a:?}")))
        })
        .collect::<Result<_>>()?;
    addrs
        .try_into()
        .map_err(|v: Vec<SocketAddr>| Error::Argument(format!("--peers lists {} addresses, expected 3", v.len())))
}

fn evaluate(kind: ModelKind, ws: &[Matrix], params: &Params, cfg: &TrainConfig, s: &Settings, train_ds: &Dataset, fmt: Format) -> Result<()> {
    let model = Model::from_revealed(kind, ws, &params.codec);
    let test = match fmt {
        Format::Idx => {
            let dir = PathBuf::from(s.get("data").expect("data was loaded"));
            match load_idx_dir(&dir, Split::Test) {
                Ok(t) => Some(t),
                Err(e) => {
                    warn!("no test split ({e}), scoring the training samples");
                    None
                }
            }
        }
        Format::Csv => None,
    };
    let (name, ds) = match &test {
        Some(t) => ("test", t),
        None => ("training", train_ds),
    };
    let acc = model.accuracy(ds, cfg.labels);
    println!("accuracy on {} {name} samples: {:.2}%", ds.n, 100.0 * acc);
    Ok(())
}

fn report(outcome: &Outcome, me: PartyId) {
    if outcome.left_early {
        println!("{me} left after {} iterations", outcome.iterations);
    } else {
        println!("{me} finished {} iterations", outcome.iterations);
    }
}

pub fn train(a: &RunArgs) -> Result<()> {
    let s = settings(a)?;
    let params = params_of(&s)?;
    let cfg = config_of(&s)?;
    let role = s.get("role").unwrap_or("local-sim").to_string();
    let me = match role.as_str() {
        "local-sim" => None,
        "p0" => Some(PartyId::P0),
        "p1" => Some(PartyId::P1),
        "p2" => Some(PartyId::P2),
        "dealer" => return Err(Error::Argument("the dealer role runs as `pmpl dealer-gen`".into())),
        r => return Err(Error::Argument(format!("unknown role {r:?}"))),
    };
    let transport = s.get("transport").unwrap_or(if me.is_some() { "tcp" } else { "inproc" });
    match (me, transport) {
        (None, "inproc") | (Some(_), "tcp") => {}
        (_, "inproc" | "tcp") => {
            return Err(Error::Argument(format!("role {role} cannot use the {transport} transport")))
        }
        (_, t) => return Err(Error::Argument(format!("unknown transport {t:?}"))),
    }
    let (ds, fmt) = load_training(&s)?.ok_or_else(|| Error::Argument("train needs --data".into()))?;
    let meta: DataMeta = ds.meta(cfg.labels);
    cfg.validate(&meta)?;
    let started = Instant::now();

    let outcome = match me {
        None => {
            let pre = match s.get("pool") {
                Some(spec) => {
                    let paths = pool_paths(spec);
                    if paths.len() != 3 {
                        return Err(Error::Argument("local-sim needs a pool directory or three pool files".into()));
                    }
                    let pools: Vec<PartyPool> = PartyId::ALL
                        .iter()
                        .zip(&paths)
                        .map(|(p, path)| read_pool(path, &params, *p))
                        .collect::<Result<_>>()?;
                    let pools: [PartyPool; 3] = pools.try_into().map_err(|_| Error::Argument("three pools".into()))?;
                    Preproc::Pools(Box::new(pools))
                }
                None => Preproc::Live { seed: cfg.seed, record_masks: false },
            };
            let run = sim::train_local(&params, &ds, &cfg, pre, cfg.seed)?;
            for (p, o) in PartyId::ALL.iter().zip(&run.outputs) {
                report(o, *p);
            }
            let [o0, _, _] = run.outputs;
            o0
        }
        Some(me) => {
            let spec = s.get("pool").ok_or_else(|| Error::Argument(format!("{role} needs --pool")))?;
            let paths = pool_paths(spec);
            let path = if paths.len() == 3 { &paths[me.index()] } else { &paths[0] };
            let pool = read_pool(path, &params, me)?;
            let addrs = peers_of(&s)?;
            info!("{me}: connecting to {addrs:?}");
            let net = Network::connect_tcp(me, &addrs, session_id(cfg.seed), params.ell(), CONNECT_TIMEOUT)?;
            let mut party = Party::new(params.clone(), net, Box::new(pool), rand::random());
            let mut mine: [Option<OwnerPart>; 3] = Default::default();
            mine[me.index()] = ds.part(me, &params.codec, cfg.labels)?;
            let o = run_training(&mut party, &meta, &mine, &cfg)?;
            report(&o, me);
            info!("{me}: {} bytes sent in {} rounds", party.stats().total_sent() / 8, party.stats().rounds);
            o
        }
    };
    info!("training took {:.1?}", started.elapsed());

    match outcome.weights {
        Some(ws) => {
            let out = PathBuf::from(s.get("out").unwrap_or("model.bin"));
            let (bin, txt) = export_model(&out, &ws, &params.codec)?;
            println!("model written to {} and {}", bin.display(), txt.display());
            evaluate(cfg.kind, &ws, &params, &cfg, &s, &ds, fmt)
        }
        None => {
            println!("no model at this party");
            Ok(())
        }
    }
}

// ------------------------------------------------------------ bench

fn random_input(p: &mut Party, rows: usize, cols: usize, seed: u64) -> Result<LocalShare> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::random(p.params().ring(), rows, cols, &mut rng);
    p.share_input(PartyId::P0, Some(&m), (rows, cols))
}

/// Prints the table and returns whether every asserted row matched.
pub fn bench(a: &BenchArgs) -> Result<bool> {
    let params = Params::new(a.ell, a.ellf, a.sigma)?;
    let l = params.ell() as u64;
    let (n, d, m) = (a.n, a.d, a.m);
    let mut failed = 0;
    println!("{:<28} {:>6} {:>12} {:>7} {:>12} {:>7}  verdict", "operation", "mode", "bits", "rounds", "expected", "rounds");
    for drop in [false, true] {
        let mode = if drop { "2PC" } else { "3PC" };
        let (mm_k, tr_k) = if drop { (3, 1) } else { (6, 2) };
        let rows: Vec<(String, (u64, u64), (u64, u64))> = vec![
            (
                format!("matmul {n}x{d} * {d}x{m}"),
                sim::meter(
                    &params,
                    drop,
                    1,
                    |p| Ok((random_input(p, n, d, 1)?, random_input(p, d, m, 2)?)),
                    |p, (x, y)| p.matmul(&x, &y).map(|_| ()),
                )?,
                (mm_k * l * (n * d + d * m) as u64, 1),
            ),
            (
                format!("mul {n}x{m}"),
                sim::meter(
                    &params,
                    drop,
                    1,
                    |p| Ok((random_input(p, n, m, 1)?, random_input(p, n, m, 2)?)),
                    |p, (x, y)| p.mul(&x, &y).map(|_| ()),
                )?,
                (mm_k * l * (2 * n * m) as u64, 1),
            ),
            (
                format!("trunc {n}x{m}"),
                sim::meter(&params, drop, 1, |p| random_input(p, n, m, 3), |p, z| p.trunc(&z).map(|_| ()))?,
                (tr_k * l * (n * m) as u64, 1),
            ),
            (
                format!("add {n}x{m}"),
                sim::meter(
                    &params,
                    drop,
                    1,
                    |p| Ok((random_input(p, n, m, 1)?, random_input(p, n, m, 2)?)),
                    |p, (x, y)| x.add(&y, p.params().ring()).map(|_| ()),
                )?,
                (0, 0),
            ),
        ];
        for (name, got, want) in rows {
            let ok = got == want;
            failed += usize::from(!ok);
            println!(
                "{name:<28} {mode:>6} {:>12} {:>7} {:>12} {:>7}  {}",
                got.0,
                got.1,
                want.0,
                want.1,
                if ok { "PASS" } else { "FAIL" }
            );
        }
        let k = n * m;
        let relu = sim::meter(&params, drop, 1, |p| random_input(p, n, m, 4), |p, x| p.relu(&x).map(|_| ()))?;
        let sig = sim::meter(&params, drop, 1, |p| random_input(p, n, m, 5), |p, x| p.sigmoid(&x).map(|_| ()))?;
        let (ands, depth) = CountingBits::msb_cost(params.ell(), if drop { 2 } else { 3 });
        for (name, got) in [(format!("relu {n}x{m}"), relu), (format!("sigmoid {n}x{m}"), sig)] {
            println!("{name:<28} {mode:>6} {:>12} {:>7} {:>12} {:>7}  reported (not asserted)", got.0, got.1, "-", "-");
        }
        println!("sign-bit circuit ({mode}): {ands} AND gates per entry, {depth} rounds, {k} entries (reported, not asserted)");
    }
    if failed > 0 {
        warn!("{failed} communication rows differ from the closed forms");
    }
    Ok(failed == 0)
}
