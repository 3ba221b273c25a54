use std::io::Cursor;

use pmpl_core::offline::{dealer_generate, interactive_vmt, DealerCrossTerm, PartyPool};
use pmpl_core::sim::{run_local, Preproc};
use pmpl_core::{Error, Flavor, LocalShare, Matrix, Params, Plan, PreprocSource, Vsss};

fn plan() -> Plan {
    Plan {
        matrix_triples: vec![(2, 3, 4), (1, 5, 1)],
        vmt: 7,
        trunc: 9,
        k_shares: 4,
        dabits: [70, 10],
        bool_triples: [65, 3],
    }
}

/// Opens a dealt sharing three ways: with shares {0,1,2}, {0,1,3} and {0,2,3}.
fn open_all_ways(v: &Vsss, s: [&LocalShare; 3]) -> Matrix {
    let co = v.coeffs();
    let alt = s[0].alt.as_ref().expect("P0 holds index 3");
    let a = v.combine(&co.c, [&s[0].main, &s[1].main, &s[2].main]).unwrap();
    let b = v.combine(&co.c_prime, [&s[0].main, &s[1].main, alt]).unwrap();
    let c = v.combine(&co.c_dprime, [&s[0].main, &s[2].main, alt]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    a
}

#[test]
fn dealt_ring_material_satisfies_its_relations() {
    for params in [Params::default_params(), Params::new(32, 12, 6).unwrap()] {
        let ring = params.ring();
        let f = params.frac_bits();
        let v = &params.vsss;
        let mut pools = dealer_generate(&params, &plan(), 42).unwrap();

        for &(n, d, m) in &plan().matrix_triples {
            let t: Vec<_> = pools.iter_mut().map(|p| p.matrix_triple(n, d, m).unwrap()).collect();
            let u = open_all_ways(v, [&t[0].u, &t[1].u, &t[2].u]);
            let w = open_all_ways(v, [&t[0].v, &t[1].v, &t[2].v]);
            let h = open_all_ways(v, [&t[0].h, &t[1].h, &t[2].h]);
            assert_eq!(h, u.matmul(&w, ring).unwrap());
        }

        let t: Vec<_> = pools.iter_mut().map(|p| p.vmt(7).unwrap()).collect();
        let u = open_all_ways(v, [&t[0].u, &t[1].u, &t[2].u]);
        let w = open_all_ways(v, [&t[0].v, &t[1].v, &t[2].v]);
        let h = open_all_ways(v, [&t[0].h, &t[1].h, &t[2].h]);
        for i in 0..7 {
            assert_eq!(h.get(0, i), ring.mul(u.get(0, i), w.get(0, i)));
        }

        let t: Vec<_> = pools.iter_mut().map(|p| p.trunc_pairs(9).unwrap()).collect();
        let r = open_all_ways(v, [&t[0].r, &t[1].r, &t[2].r]);
        let rp = open_all_ways(v, [&t[0].r_prime, &t[1].r_prime, &t[2].r_prime]);
        for i in 0..9 {
            let ri = r.get(0, i);
            assert!(ri < params.mask_bound());
            assert_eq!(rp.get(0, i), ri >> f);
            assert_eq!(t[0].bits[i] ^ t[1].bits[i] ^ t[2].bits[i], ri);
        }

        let k: Vec<_> = pools.iter_mut().map(|p| p.k_shares(4).unwrap()).collect();
        open_all_ways(v, [&k[0], &k[1], &k[2]]);

        for (flavor, holders, k) in [(Flavor::Three, 3, 70), (Flavor::Two, 2, 10)] {
            let d: Vec<_> = pools[..holders].iter_mut().map(|p| p.dabits(k, flavor).unwrap()).collect();
            for i in 0..k {
                let bit = d.iter().fold(false, |acc, s| acc ^ s.bits.get(i));
                let sum = d.iter().fold(0u64, |acc, s| ring.add(acc, s.arith[i]));
                assert_eq!(sum, u64::from(bit), "{flavor:?} daBit {i}");
            }
            let bt: Vec<_> = pools[..holders].iter_mut().map(|p| p.bool_triples(3, flavor).unwrap()).collect();
            for i in 0..3 {
                let x = |f: &dyn Fn(&pmpl_core::offline::BoolTripleShare) -> bool| bt.iter().fold(false, |a, s| a ^ f(s));
                let (a, b, c) = (x(&|s| s.a.get(i)), x(&|s| s.b.get(i)), x(&|s| s.c.get(i)));
                assert_eq!(c, a & b);
            }
        }
        assert!(pools.iter().all(|p| p.ring_streams_exhausted()));
    }
}

#[test]
fn pools_survive_a_write_read_cycle() {
    let params = Params::default_params();
    let pools = dealer_generate(&params, &plan(), 5).unwrap();
    for (i, pool) in pools.iter().enumerate() {
        let mut buf = Vec::new();
        pool.write(&mut buf).unwrap();
        let mut back = PartyPool::read(&mut Cursor::new(&buf)).unwrap();
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(buf, again, "pool {i}");
        assert_eq!(back.header, pool.header);
        let mut orig = pool.clone();
        assert_eq!(back.trunc_pairs(9).unwrap(), orig.trunc_pairs(9).unwrap());
        assert_eq!(back.matrix_triple(2, 3, 4).unwrap(), orig.matrix_triple(2, 3, 4).unwrap());
    }
}

#[test]
fn damaged_or_foreign_pools_are_rejected() {
    let params = Params::default_params();
    let pools = dealer_generate(&params, &plan(), 5).unwrap();
    let mut buf = Vec::new();
    pools[1].write(&mut buf).unwrap();

    let cut = &buf[..buf.len() - 5];
    assert!(matches!(PartyPool::read(&mut Cursor::new(cut)), Err(Error::Parse(_))));
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(PartyPool::read(&mut Cursor::new(&bad)), Err(Error::Parse(_))));

    let p = PartyPool::read(&mut Cursor::new(&buf)).unwrap();
    assert!(matches!(p.header.check(&params, pmpl_core::PartyId::P0), Err(Error::PreprocMismatch(_))));
    let other = Params::new(64, 16, 8).unwrap();
    assert!(matches!(p.header.check(&other, pmpl_core::PartyId::P1), Err(Error::PreprocMismatch(_))));
    p.header.check(&params, pmpl_core::PartyId::P1).unwrap();

    let mut p = p;
    assert!(matches!(p.trunc_pairs(10), Err(Error::PreprocUnderflow(_))));
    assert!(matches!(p.matrix_triple(3, 3, 4), Err(Error::PreprocMismatch(_))));
}

#[test]
fn interactive_triples_multiply() {
    let params = Params::default_params();
    let ring = params.ring();
    let k = 12;
    for forced in [false, true] {
        let oracle = DealerCrossTerm::new(9);
        let run = run_local(&params, Preproc::Live { seed: 1, record_masks: false }, 3, |p| {
            let mine = forced.then(|| {
                let i = p.id() as u64 + 1;
                ((0..k as u64).map(|j| i * 1000 + j).collect(), (0..k as u64).map(|j| ring.from_i64(-(j as i64) * i as i64)).collect())
            });
            let t = interactive_vmt(p, &oracle, k, mine)?;
            let all = LocalShare::vstack(&[&t.u, &t.v, &t.h])?;
            let three = p.reveal_to_p0(&all)?;
            // The triple stays usable after P2 leaves.
            p.raise_drop()?;
            if p.id() == pmpl_core::PartyId::P2 {
                return Ok((three, None));
            }
            let two = p.reveal_to_p0(&all)?;
            Ok((three, two))
        })
        .unwrap();
        let [(three, two), _, _] = run.outputs;
        let (three, two) = (three.unwrap(), two.unwrap());
        assert_eq!(three, two);
        for j in 0..k {
            let (u, v, h) = (three.get(0, j), three.get(1, j), three.get(2, j));
            assert_eq!(h, ring.mul(u, v), "entry {j}");
            if forced {
                let jj = j as u64;
                assert_eq!(u, 1000 * 6 + 3 * jj);
                assert_eq!(v, ring.from_i64(-(6 * j as i64)));
            }
        }
    }
}

#[test]
fn interactive_triples_need_three_parties() {
    let params = Params::default_params();
    let oracle = DealerCrossTerm::new(1);
    let res = run_local(&params, Preproc::Live { seed: 1, record_masks: false }, 3, |p| {
        p.raise_drop()?;
        if p.id() == pmpl_core::PartyId::P2 {
            return Ok(());
        }
        interactive_vmt(p, &oracle, 4, None).map(|_| ())
    });
    assert!(matches!(res, Err(Error::Unsupported(_))));
}

#[test]
fn masking_shares_are_uniform_at_eight_bits() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let params = Params::new(8, 2, 1).unwrap();
    let draws = 100_000;
    let plan = Plan { k_shares: draws, ..Plan::default() };
    let mut pools = dealer_generate(&params, &plan, 11).unwrap();
    let k: Vec<_> = pools.iter_mut().map(|p| p.k_shares(draws).unwrap()).collect();
    let opened = open_all_ways(&params.vsss, [&k[0], &k[1], &k[2]]);
    let mut counts = [0usize; 256];
    for x in opened.data() {
        counts[*x as usize] += 1;
    }
    let e = draws as f64 / 256.0;
    let stat: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(255.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi2 {stat:.1}, p = {p:.3}");
}
