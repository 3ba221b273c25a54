//! Random trials of single protocols checked against cleartext rules, in
//! three-party mode and after P2 leaves.

use log::info;
use pmpl_core::sim::{run_local, Preproc};
use pmpl_core::{Error, LocalShare, Matrix, Params, Party, PartyId, Result, Ring};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::VerifyArgs;

const OPS: [&str; 6] = ["mul", "trunc", "msb", "bit2a", "relu", "sigmoid"];

/// Runs `f` at every party, P2 leaving first when `drop` is set, and
/// returns what P0 revealed.
fn at_p0<F>(params: &Params, seed: u64, drop: bool, f: F) -> Result<Matrix>
where
    F: Fn(&mut Party) -> Result<Option<Matrix>> + Sync,
{
    let run = run_local(params, Preproc::Live { seed, record_masks: false }, seed, |p| {
        if drop {
            p.raise_drop()?;
            if p.id() == PartyId::P2 {
                return Ok(None);
            }
        }
        f(p)
    })?;
    let [out, _, _] = run.outputs;
    out.ok_or_else(|| Error::Desync("P0 revealed nothing".into()))
}

fn row(ring: Ring, v: &[u64]) -> Matrix {
    Matrix::from_vec(1, v.len(), v.iter().map(|x| ring.reduce(*x)).collect()).expect("one row")
}

fn input(p: &mut Party, m: &Matrix, owner: PartyId) -> Result<LocalShare> {
    p.share_input(owner, Some(m), m.shape())
}

/// Mismatching entries for one operation in one mode.
fn trial(op: &str, trials: usize, seed: u64, drop: bool) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match op {
        "mul" => {
            let params = Params::default_params();
            let ring = params.ring();
            let a: Vec<u64> = (0..trials).map(|_| ring.random(&mut rng)).collect();
            let b: Vec<u64> = (0..trials).map(|_| ring.random(&mut rng)).collect();
            let (ma, mb) = (row(ring, &a), row(ring, &b));
            let got = at_p0(&params, seed, drop, |p| {
                let x = input(p, &ma, PartyId::P0)?;
                let y = input(p, &mb, PartyId::P1)?;
                let z = p.mul(&x, &y)?;
                p.reveal_to_p0(&z)
            })?;
            let bad = (0..trials).filter(|&i| got.get(0, i) != ring.mul(a[i], b[i])).count();
            Ok((bad, trials))
        }
        "trunc" => {
            let params = Params::default_params();
            let ring = params.ring();
            let f = params.frac_bits();
            let bound = 1i64 << (params.ell() - params.sigma - 2).min(62);
            let v: Vec<i64> = (0..trials).map(|_| rng.gen_range(-bound..bound)).collect();
            let m = row(ring, &v.iter().map(|x| ring.from_i64(*x)).collect::<Vec<_>>());
            let got = at_p0(&params, seed, drop, |p| {
                let x = input(p, &m, PartyId::P1)?;
                let t = p.trunc(&x)?;
                p.reveal_to_p0(&t)
            })?;
            let bad = (0..trials)
                .filter(|&i| {
                    let diff = ring.to_signed(got.get(0, i)) - v[i].div_euclid(1 << f);
                    !(-1..=1).contains(&diff)
                })
                .count();
            Ok((bad, trials))
        }
        "msb" | "bit2a" => {
            // Every element of Z_{2^8}, `trials` independent sharings each.
            let params = Params::new(8, 2, 1)?;
            let ring = params.ring();
            let reps = trials.div_ceil(256).max(1);
            let v: Vec<u64> = (0..reps).flat_map(|_| 0..256u64).collect();
            let m = row(ring, &v);
            let want_sign = op == "msb";
            let got = at_p0(&params, seed, drop, |p| {
                let x = input(p, &m, PartyId::P0)?;
                let a = p.v2a(&x)?;
                let b = p.msb(&a)?;
                let b = if want_sign { b } else { p.not_bits(&b) };
                let back = p.bit2a(&b)?;
                let s = p.a2v(&back)?;
                p.reveal_to_p0(&s)
            })?;
            let bad = v
                .iter()
                .enumerate()
                .filter(|(i, x)| got.get(0, *i) != u64::from(ring.msb(**x) == want_sign))
                .count();
            Ok((bad, v.len()))
        }
        "relu" | "sigmoid" => {
            let params = Params::default_params();
            let ring = params.ring();
            let codec = params.codec;
            let v: Vec<u64> = (0..trials)
                .map(|_| codec.encode(rng.gen_range(-4.0..4.0)).expect("in range"))
                .collect();
            let m = row(ring, &v);
            let relu = op == "relu";
            let got = at_p0(&params, seed, drop, |p| {
                let x = input(p, &m, PartyId::P1)?;
                let y = if relu { p.relu(&x)?.0 } else { p.sigmoid(&x)? };
                p.reveal_to_p0(&y)
            })?;
            let half = ring.from_i64(1 << (params.frac_bits() - 1));
            let one = codec.one();
            let bad = (0..trials)
                .filter(|&i| {
                    let x = v[i];
                    let s = ring.to_signed(x);
                    let want = if relu {
                        if s >= 0 { x } else { 0 }
                    } else if s < -ring.to_signed(half) {
                        0
                    } else if s < ring.to_signed(half) {
                        ring.add(x, half)
                    } else {
                        one
                    };
                    got.get(0, i) != want
                })
                .count();
            Ok((bad, trials))
        }
        _ => Err(Error::Argument(format!("unknown op {op:?}, expected one of {} or all", OPS.join(", ")))),
    }
}

/// Prints one line per operation and mode. True when nothing mismatched.
pub fn run(a: &VerifyArgs) -> Result<bool> {
    let ops: Vec<&str> = if a.op == "all" { OPS.to_vec() } else { vec![a.op.as_str()] };
    let trials = a.trials.unwrap_or(1000);
    if trials == 0 {
        return Err(Error::Argument("--trials must be positive".into()));
    }
    let mut total_bad = 0;
    for op in ops {
        for drop in [false, true] {
            let mode = if drop { "2PC" } else { "3PC" };
            let (bad, n) = trial(op, trials, a.seed, drop)?;
            total_bad += bad;
            println!("{op:<8} {mode}  {n:>6} checked  {bad} mismatches  {}", if bad == 0 { "PASS" } else { "FAIL" });
        }
    }
    info!("{total_bad} mismatches in total");
    Ok(total_bad == 0)
}
