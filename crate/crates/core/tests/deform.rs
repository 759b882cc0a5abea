use std::collections::BTreeMap;
use std::sync::Arc;

use hdflow::deform::{Deform, Group};
use hdflow::geometry::Cover;
use hdflow::samples::{graded_higgs_p1, random_filtered};
use hdflow::witt::{Ring, WittRing};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn f(p: u64, n: u32) -> Ring {
    WittRing::new(p, n, 1, &[0, 1]).unwrap()
}

fn covers(r: &Ring) -> Vec<Arc<Cover>> {
    vec![
        Arc::new(Cover::p1(r, &[r.zero()], true).unwrap()),
        Arc::new(Cover::p1_three(r).unwrap()),
    ]
}

#[test]
fn random_filtered_obstructions_vanish_and_glue() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [1, 2] {
        let r = f(3, n);
        for cov in covers(&r) {
            for rank in 1..=2 {
                let b = Arc::new(random_filtered(cov.clone(), rank, &mut rng).unwrap());
                assert!(b.check().ok, "{:?}", b.check().failures);
                let d = Deform::canonical(b).unwrap();
                let l = d.local_lifts(Group::Filtered);
                let ob = d.obstruction_of(&l).unwrap();
                assert!(ob.checks.iter().all(|c| c.ok));
                assert!(ob.vanishes());
                let lift = d.lift_from_obstruction(&l, &ob).unwrap().unwrap();
                d.verify_lift(&lift).unwrap();
            }
        }
    }
}

#[test]
fn torsor_laws_filtered_and_bare() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = f(3, 1);
    let cov = Arc::new(Cover::p1(&r, &[r.zero()], true).unwrap());
    let b = Arc::new(random_filtered(cov, 2, &mut rng).unwrap());
    let d = Deform::canonical(b).unwrap();
    for g in [Group::Filtered, Group::Bare] {
        let l = d.local_lifts(g);
        let ob = d.obstruction_of(&l).unwrap();
        let lift = d.lift_from_obstruction(&l, &ob).unwrap().unwrap();
        let dim = d.hyper(g).unwrap().dim(1).unwrap();
        eprintln!("{g:?} dim {dim}");
        let zero = vec![r.zero(); dim];
        assert_eq!(d.torsor_diff(&lift, &lift).unwrap(), zero);
        let eps: Vec<_> = (0..dim).map(|i| r.from_u64(i as u64 + 1)).collect();
        let l2 = d.act(&lift, &eps).unwrap();
        d.verify_lift(&l2).unwrap();
        assert_eq!(d.torsor_diff(&lift, &l2).unwrap(), eps);
    }
}

#[test]
fn graded_torsor_and_hodge() {
    let r = f(3, 1);
    let cov = Arc::new(Cover::p1(&r, &[r.zero()], true).unwrap());
    let mut th = BTreeMap::new();
    th.insert((1, 0), vec![0, 1, 0]);
    let e = Arc::new(graded_higgs_p1(cov.clone(), &[0, 2], &[1, 0], &th).unwrap());
    assert!(e.check().ok, "{:?}", e.check().failures);
    let d = Deform::canonical(e).unwrap();
    let l = d.local_lifts(Group::Graded);
    let ob = d.obstruction_of(&l).unwrap();
    let lift = d.lift_from_obstruction(&l, &ob).unwrap().unwrap();
    let dim = d.hyper(Group::Graded).unwrap().dim(1).unwrap();
    assert_eq!(dim, 2);
    let eps = vec![r.from_u64(1), r.from_u64(2)];
    let l2 = d.act(&lift, &eps).unwrap();
    d.verify_lift(&l2).unwrap();
    assert_eq!(d.torsor_diff(&lift, &l2).unwrap(), eps);
}

fn hodge_base(r: &Ring) -> Arc<hdflow::bundle::Bundle> {
    use hdflow::samples::{direct_sum, line_bundle_log};
    let cov = Arc::new(Cover::p1(r, &[r.zero()], true).unwrap());
    let a = line_bundle_log(cov.clone(), -1, r.from_u64(1)).unwrap();
    let b = line_bundle_log(cov, 1, r.zero()).unwrap();
    Arc::new(direct_sum(&[a, b]).unwrap().with_weights(vec![1, 0], false))
}

#[test]
fn hodge_torsor_obstruction_and_uniqueness() {
    let r = f(3, 1);
    let base = hodge_base(&r);
    assert!(base.check().ok);
    let d = Deform::canonical(base.clone()).unwrap();
    let dim = d.hyper(Group::Hodge).unwrap().dim(0).unwrap();
    assert_eq!(dim, 3);
    let l = d.local_lifts(Group::Filtered);
    let ob = d.obstruction_of(&l).unwrap();
    let lift = d.lift_from_obstruction(&l, &ob).unwrap().unwrap();
    d.verify_lift(&lift).unwrap();
    let h = d.hodge_of(&lift);
    let eps = vec![r.from_u64(1), r.from_u64(0), r.from_u64(2)];
    let h2 = d.hodge_act(&h, &eps).unwrap();
    d.verify_hodge(&h2).unwrap();
    assert_eq!(d.hodge_diff(&h, &h2).unwrap(), eps);
    // obstruction for a filtration on a lift built from a filtered lift vanishes
    let (ob, fil) = d.obstruction_hodge(lift.bundle.clone()).unwrap();
    assert!(ob.vanishes());
    d.verify_hodge(&fil.unwrap()).unwrap();
    let les = hdflow::deform::les_maps(base).unwrap();
    eprintln!("{les:?}");
    assert!(les.exact);
    assert!(les.e1.inequality_holds);
    match d.hodge_uniqueness_iso(&h, &h2) {
        Ok(g) => assert_eq!(g.len(), 2),
        Err(e) => assert!(!les.e1.degenerate, "{e}"),
    }
}

/// `(O(p), d) ⊕ (O, d)` on `P¹` without log points: a connection only mod `p`.
pub fn frobenius_twist_bundle(p: u64) -> Arc<hdflow::bundle::Bundle> {
    use hdflow::bundle::{line_bundle_p1, Bundle};
    use hdflow::samples::direct_sum;
    use hdflow::smat::SMat;
    let r = f(p, 1);
    let cov = Arc::new(Cover::p1(&r, &[], false).unwrap());
    let mk = |k: i64| {
        let b = line_bundle_p1(cov.clone(), k).unwrap();
        Bundle::new(cov.clone(), 1, b.trans.clone(), Some(vec![SMat::zeros(1, 1); 2]), None, vec![0], false).unwrap()
    };
    Arc::new(direct_sum(&[mk(p as i64), mk(0)]).unwrap().with_weights(vec![1, 0], false))
}

#[test]
fn obstructed_bundle_and_compatibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in [3, 5] {
        let b = frobenius_twist_bundle(p);
        assert!(b.check().ok);
        let d = Deform::canonical(b).unwrap();
        let of = d.obstruction(Group::Filtered).unwrap();
        assert!(!of.vanishes());
        let hb = d.hyper(Group::Bare).unwrap();
        let image = hb.coords(&of.cochain).unwrap();
        for _ in 0..3 {
            let lb = d.perturbed_lifts(Group::Bare, &mut rng);
            let ob = d.obstruction_of(&lb).unwrap();
            assert_eq!(hb.coords(&ob.cochain).unwrap(), image);
            let lf = d.perturbed_lifts(Group::Filtered, &mut rng);
            let of2 = d.obstruction_of(&lf).unwrap();
            assert_eq!(d.hyper(Group::Filtered).unwrap().coords(&of2.cochain).unwrap(), d.hyper(Group::Filtered).unwrap().coords(&of.cochain).unwrap());
        }
        let r = f(p, 1);
        let mut want = vec![r.zero(); image.len()];
        want[0] = r.from_i64(-1);
        assert_eq!(image, want);
    }
}

#[test]
fn torsor_difference_of_independent_lifts() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let r = f(3, 1);
    let cov = Arc::new(Cover::p1(&r, &[r.zero()], true).unwrap());
    let mut th = BTreeMap::new();
    th.insert((1, 0), vec![1, 1, 2]);
    let e = Arc::new(graded_higgs_p1(cov.clone(), &[0, 2], &[1, 0], &th).unwrap());
    let v = Arc::new(random_filtered(cov, 2, &mut rng).unwrap());
    for (b, groups) in [(e, vec![Group::Graded]), (v, vec![Group::Filtered, Group::Bare])] {
        let d = Deform::canonical(b).unwrap();
        for g in groups {
            let lifts: Vec<_> = (0..3)
                .map(|_| {
                    let l = d.perturbed_lifts(g, &mut rng);
                    let ob = d.obstruction_of(&l).unwrap();
                    d.lift_from_obstruction(&l, &ob).unwrap().unwrap()
                })
                .collect();
            let d01 = d.torsor_diff(&lifts[0], &lifts[1]).unwrap();
            let d12 = d.torsor_diff(&lifts[1], &lifts[2]).unwrap();
            let d02 = d.torsor_diff(&lifts[0], &lifts[2]).unwrap();
            let sum: Vec<_> = d01.iter().zip(&d12).map(|(&a, &b)| r.add(a, b)).collect();
            assert_eq!(sum, d02, "{g:?}");
            let moved = d.act(&lifts[0], &d01).unwrap();
            assert!(d.torsor_diff(&moved, &lifts[1]).unwrap().iter().all(|x| x.is_zero()), "{g:?}");
        }
    }
}
