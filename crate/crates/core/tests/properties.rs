use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hdflow::bundle::{end_complex, Variant};
use hdflow::cech::{Cochain, Hyper};
use hdflow::deform::{les_maps, Deform, Group};
use hdflow::flow::{artin_schreier_solve, FlowError};
use hdflow::geometry::Cover;
use hdflow::poly::Poly;
use hdflow::samples::{f9, random_filtered};
use hdflow::smat::SMat;
use hdflow::witt::{Ring, WittElem, WittRing};

fn rings() -> Vec<Ring> {
    vec![f9(2), WittRing::new(5, 3, 1, &[0, 1]).unwrap(), WittRing::new(3, 2, 3, &[1, 2, 0, 1]).unwrap()]
}

fn elem(r: &Ring, cs: &[i64]) -> WittElem {
    r.from_coeffs(&cs[..r.m])
}

fn coeffs() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-200i64..200, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn witt_ring_laws(k in 0usize..3, a in coeffs(), b in coeffs(), c in coeffs()) {
        let r = &rings()[k];
        let (a, b, c) = (elem(r, &a), elem(r, &b), elem(r, &c));
        prop_assert_eq!(r.mul(a, r.add(b, c)), r.add(r.mul(a, b), r.mul(a, c)));
        prop_assert_eq!(r.mul(r.mul(a, b), c), r.mul(a, r.mul(b, c)));
        prop_assert_eq!(r.sub(r.add(a, b), b), a);
        // σ is a ring automorphism of order m, lifting x ↦ x^p
        prop_assert_eq!(r.frobenius(r.mul(a, b)), r.mul(r.frobenius(a), r.frobenius(b)));
        prop_assert_eq!(r.frobenius(r.add(a, b)), r.add(r.frobenius(a), r.frobenius(b)));
        prop_assert_eq!(r.frobenius_inv(r.frobenius(a)), a);
        prop_assert_eq!(r.frobenius_pow(a, r.m), a);
        let r1 = r.at_level(1).unwrap();
        prop_assert_eq!(r.reduce_level(r.frobenius(a), 1).unwrap(), r1.pow(r.reduce_level(a, 1).unwrap(), r.p));
        if let Some(ai) = r.inv(a) {
            prop_assert_eq!(r.mul(a, ai), r.one());
        } else {
            prop_assert!(r.val(a) > 0);
        }
    }

    #[test]
    fn teichmuller_is_multiplicative(k in 0usize..3, a in coeffs(), b in coeffs()) {
        let r = &rings()[k];
        let (ta, tb) = (r.teichmuller(elem(r, &a)), r.teichmuller(elem(r, &b)));
        prop_assert_eq!(r.teichmuller(r.mul(ta, tb)), r.mul(ta, tb));
        prop_assert_eq!(r.pow(ta, r.q()), ta);
        prop_assert_eq!(r.reduce_level(ta, 1).unwrap(), r.reduce_level(elem(r, &a), 1).unwrap());
    }

    #[test]
    fn artin_schreier_solutions_solve(a in prop::collection::vec(0usize..9, 4), d in prop::collection::vec(0usize..9, 2)) {
        let r = f9(1);
        let els = r.elements();
        let a = vec![vec![els[a[0]], els[a[1]]], vec![els[a[2]], els[a[3]]]];
        let d = vec![els[d[0]], els[d[1]]];
        let eq = |v: &[WittElem]| (0..2).all(|i| {
            let mut acc = r.sub(d[i], v[i]);
            for j in 0..2 {
                acc = r.add(acc, r.mul(a[i][j], r.frobenius(v[j])));
            }
            acc.is_zero()
        });
        let rational = els.iter().any(|&x| els.iter().any(|&y| eq(&[x, y])));
        match artin_schreier_solve(&r, &a, &d) {
            Ok(sol) if sol.degree == 1 => prop_assert!(eq(&sol.epsilon)),
            Ok(_) => prop_assert!(!rational),
            Err(FlowError::NoSolutionWithinBound { .. }) => prop_assert!(!rational),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}

fn p1(r: &Ring, three: bool) -> Arc<Cover> {
    Arc::new(if three { Cover::p1_three(r).unwrap() } else { Cover::p1(r, &[r.zero()], true).unwrap() })
}

fn random_zero_cochain(h: &Hyper, cov: &Cover, coeffs: &[i64]) -> Cochain {
    let r = &cov.ring;
    let (rows, cols) = (h.cx.rows(), h.cx.cols());
    let mut c = Cochain::zero(0);
    let mut it = coeffs.chunks(3).cycle();
    for i in 0..cov.num_charts() {
        let lr = cov.loc(&[i]).unwrap();
        let m = SMat::from_fn(rows, cols, |a, b| {
            let cs = it.next().unwrap();
            if h.cx.allowed(0, a, b) { lr.poly(Poly::from_ints(r, cs)) } else { lr.zero() }
        });
        c.insert(vec![i], m);
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cech_differential_squares_to_zero_and_classes_round_trip(
        seed in any::<u64>(),
        three in any::<bool>(),
        rank in 1usize..=2,
        cs in prop::collection::vec(-4i64..5, 12),
        x in prop::collection::vec(0u64..3, 8),
    ) {
        let r = WittRing::new(3, 1, 1, &[0, 1]).unwrap();
        let cov = p1(&r, three);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Arc::new(random_filtered(cov.clone(), rank, &mut rng).unwrap());
        for v in [Variant::Full, Variant::Fil(0)] {
            let h = Hyper::new(end_complex(b.clone(), v).unwrap()).unwrap();
            let c0 = random_zero_cochain(&h, &cov, &cs);
            let dc = h.total_differential(&c0);
            prop_assert!(h.total_differential(&dc).is_zero());
            let dim = h.dim(1).unwrap();
            let xs: Vec<WittElem> = x.iter().take(dim).map(|&v| r.from_u64(v)).collect();
            prop_assume!(xs.len() == dim);
            let z = h.combination(1, &xs).unwrap();
            prop_assert_eq!(h.coords(&z).unwrap(), xs.clone());
            // adding a coboundary does not move the class
            prop_assert_eq!(h.coords(&z.add(&cov, &dc)).unwrap(), xs);
        }
    }

    #[test]
    fn torsor_action_is_free_and_additive(seed in any::<u64>(), x in prop::collection::vec(0u64..3, 16), y in prop::collection::vec(0u64..3, 16)) {
        let r = WittRing::new(3, 1, 1, &[0, 1]).unwrap();
        let cov = p1(&r, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Arc::new(random_filtered(cov, 2, &mut rng).unwrap());
        let d = Deform::canonical(b).unwrap();
        for g in [Group::Filtered, Group::Bare] {
            let l = d.local_lifts(g);
            let ob = d.obstruction_of(&l).unwrap();
            let lift = d.lift_from_obstruction(&l, &ob).unwrap().unwrap();
            let dim = d.hyper(g).unwrap().dim(1).unwrap();
            prop_assume!(dim <= 16);
            let e1: Vec<WittElem> = x[..dim].iter().map(|&v| r.from_u64(v)).collect();
            let e2: Vec<WittElem> = y[..dim].iter().map(|&v| r.from_u64(v)).collect();
            let l1 = d.act(&lift, &e1).unwrap();
            let l2 = d.act(&l1, &e2).unwrap();
            prop_assert_eq!(d.torsor_diff(&lift, &l1).unwrap(), e1.clone());
            let sum: Vec<WittElem> = e1.iter().zip(&e2).map(|(&a, &b)| r.add(a, b)).collect();
            prop_assert_eq!(d.torsor_diff(&lift, &l2).unwrap(), sum);
            prop_assert!(d.torsor_diff(&l2, &l2).unwrap().iter().all(|v| v.is_zero()));
        }
    }

    #[test]
    fn long_exact_sequence_is_exact(seed in any::<u64>(), three in any::<bool>(), rank in 1usize..=2) {
        let r = WittRing::new(5, 1, 1, &[0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Arc::new(random_filtered(p1(&r, three), rank, &mut rng).unwrap());
        let rep = les_maps(b).unwrap();
        prop_assert!(rep.exact);
        prop_assert!(rep.e1.inequality_holds);
    }
}
