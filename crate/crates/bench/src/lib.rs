//! Helpers shared by the criterion benchmarks: inputs shared by P0 and
//! single operations timed across all three parties of one process.

use pmpl_core::sim::{run_local, Preproc};
use pmpl_core::{LocalShare, Matrix, Params, Party, PartyId, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shares a seeded random `rows x cols` matrix held by P0.
pub fn shared_input(p: &mut Party, rows: usize, cols: usize, seed: u64) -> Result<LocalShare> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::random(p.params().ring(), rows, cols, &mut rng);
    p.share_input(PartyId::P0, Some(&m), (rows, cols))
}

/// Fixed-point inputs in [-4, 4), for the non-linear operations.
pub fn shared_fixed(p: &mut Party, rows: usize, cols: usize, seed: u64) -> Result<LocalShare> {
    let codec = p.params().codec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..rows * cols)
        .map(|_| codec.encode(rand::Rng::gen_range(&mut rng, -4.0..4.0)))
        .collect::<Result<Vec<u64>>>()?;
    let m = Matrix::from_vec(rows, cols, vals)?;
    p.share_input(PartyId::P0, Some(&m), (rows, cols))
}

/// Runs `setup` then `op` once at every party with a live dealer. With
/// `drop` set, P2 leaves before `setup`.
pub fn run_op<S, G, F>(params: &Params, drop: bool, setup: G, op: F) -> Result<()>
where
    G: Fn(&mut Party) -> Result<S> + Sync,
    F: Fn(&mut Party, S) -> Result<()> + Sync,
{
    run_local(params, Preproc::Live { seed: 1, record_masks: false }, 1, |p| {
        if drop {
            p.raise_drop()?;
            if p.id() == PartyId::P2 {
                return Ok(());
            }
        }
        let s = setup(p)?;
        op(p, s)
    })?;
    Ok(())
}

pub fn mode_name(drop: bool) -> &'static str {
    if drop {
        "2pc"
    } else {
        "3pc"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ops_run_in_both_modes() {
        let params = Params::default_params();
        for drop in [false, true] {
            run_op(&params, drop, |p| shared_fixed(p, 2, 3, 1), |p, x| p.relu(&x).map(|_| ())).unwrap();
        }
    }
}
