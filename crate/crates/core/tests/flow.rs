use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hdflow::bundle::Bundle;
use hdflow::cartier::standard_frobenius;
use hdflow::deform::Group;
use hdflow::flow::*;
use hdflow::geometry::Cover;
use hdflow::poly::Poly;
use hdflow::samples::{f9, legendre_cover};
use hdflow::smat::SMat;
use hdflow::witt::{Ring, WittElem, WittRing};

mod common;

fn zp(p: u64, n: u32) -> Ring {
    WittRing::new(p, n, 1, &[0, 1]).unwrap()
}

#[test]
fn artin_schreier_needs_cubic_extension() {
    // x³ − x = 1 has no root in F_3
    let r = zp(3, 1);
    let sol = artin_schreier_solve(&r, &[vec![r.one()]], &[r.neg(r.one())]).unwrap();
    assert_eq!(sol.degree, 3);
    let f = &sol.field;
    let x = sol.epsilon[0];
    assert_eq!(f.sub(f.pow(x, 3), x), f.one());
}

#[test]
fn artin_schreier_degenerate_cases() {
    let r = f9(1);
    let g = r.gen();
    // A = 0: ε = Δ
    let sol = artin_schreier_solve(&r, &[vec![r.zero()]], &[g]).unwrap();
    assert_eq!((sol.degree, sol.epsilon[0]), (1, g));
    // Δ = 0 always has a rational solution
    let sol = artin_schreier_solve(&r, &[vec![g, r.one()], vec![r.zero(), g]], &[r.zero(), r.zero()]).unwrap();
    assert_eq!(sol.degree, 1);
}

fn brute_force(r: &Ring, a: &[Vec<WittElem>], d: &[WittElem]) -> bool {
    let els = r.elements();
    els.iter().any(|&x| {
        els.iter().any(|&y| {
            let v = [x, y];
            (0..2).all(|i| {
                let mut acc = r.add(r.neg(v[i]), d[i]);
                for j in 0..2 {
                    acc = r.add(acc, r.mul(a[i][j], r.frobenius(v[j])));
                }
                acc.is_zero()
            })
        })
    })
}

#[test]
fn artin_schreier_agrees_with_brute_force_over_f9() {
    let r = f9(1);
    let els = r.elements();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pick = || els[rng.gen_range(0..els.len())];
    for _ in 0..25 {
        let a = vec![vec![pick(), pick()], vec![pick(), pick()]];
        let d = vec![pick(), pick()];
        let bf = brute_force(&r, &a, &d);
        match artin_schreier_solve(&r, &a, &d) {
            Ok(sol) => assert_eq!(sol.degree == 1, bf),
            Err(FlowError::NoSolutionWithinBound { .. }) => assert!(!bf),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn deuring_polynomial_values() {
    let r = zp(3, 1);
    assert!(deuring(&r, r.from_u64(2)).is_zero());
    assert_eq!(deuring(&r, r.one()), r.from_u64(2));
    let r5 = zp(5, 1);
    // 1 + 4λ + λ² vanishes at λ = 2 ± √3, i.e. nowhere in F_5
    for l in 2..5 {
        assert!(!deuring(&r5, r5.from_u64(l)).is_zero());
    }
    let r9 = f9(1);
    assert!(!deuring(&r9, r9.gen()).is_zero());
}

#[test]
fn trivial_flow_verifies() {
    let r2 = zp(3, 2);
    let x2 = Arc::new(Cover::p1(&r2, &[r2.zero()], true).unwrap());
    let frob = standard_frobenius(x2.clone()).unwrap();
    let x1 = Arc::new(x2.reduce_to(1).unwrap());
    let t = Bundle::trivial(x1.clone(), 2);
    let zero = (0..x1.num_charts()).map(|_| SMat::zeros(2, 2)).collect();
    let e = Bundle::new(x1, 2, t.trans.clone(), None, Some(zero), vec![0, 0], true).unwrap();
    let f = find_hodge_filtration(&e, &frob).unwrap();
    let rep = verify_flow(&f);
    assert!(rep.ok, "{:?}", rep.failures);
}

#[test]
fn legendre_flow_at_level_one() {
    let r2 = f9(2);
    // C⁻¹(E) contains O(1) only where the Deuring polynomial vanishes
    let f = legendre_flow(&r2, r2.from_u64(2)).unwrap();
    let rep = verify_flow(&f);
    assert!(rep.ok, "{:?}", rep.failures);
    assert_eq!(f.derham.weights, vec![1, 0]);
    assert!(matches!(legendre_flow(&r2, r2.gen()), Err(FlowError::NotPeriodic(_))));
}

/// `(O ⊕ O, 0)` with weights `[1, 0]` on `P¹` with `D = {0, ∞}` over `F_9`.
fn theta_zero_flow() -> Arc<HDFlow> {
    let r2 = f9(2);
    let x2 = Arc::new(Cover::p1(&r2, &[r2.zero()], true).unwrap());
    let frob = standard_frobenius(x2.clone()).unwrap();
    let x1 = Arc::new(x2.reduce_to(1).unwrap());
    let t = Bundle::trivial(x1.clone(), 2);
    let zero = (0..2).map(|_| SMat::zeros(2, 2)).collect();
    let e = Bundle::new(x1, 2, t.trans.clone(), None, Some(zero), vec![1, 0], true).unwrap();
    Arc::new(find_hodge_filtration(&e, &frob).unwrap())
}

fn flagship() -> Arc<HDFlow> {
    let r2 = f9(2);
    Arc::new(legendre_flow(&r2, r2.neg(r2.one())).unwrap())
}

#[test]
fn periodicity_map_must_be_invertible() {
    let f = theta_zero_flow();
    assert!(verify_flow(&f).ok);
    let mut bad = (*f).clone();
    let cov = f.higgs.cover.clone();
    // p kills everything at level 1
    bad.phi = bad.phi.iter().enumerate().map(|(i, m)| m.scale_elem(cov.loc(&[i]).unwrap(), cov.ring.from_u64(3))).collect();
    assert!(!verify_flow(&bad).ok);
}

#[test]
fn legendre_flow_exists_exactly_at_supersingular_parameters() {
    let r2 = f9(2);
    let r1 = f9(1);
    for l1 in r1.elements() {
        if l1.is_zero() || l1 == r1.one() {
            continue;
        }
        let cs: Vec<i64> = r1.coeffs(l1).iter().map(|&c| c as i64).collect();
        let lam = r2.from_coeffs(&cs);
        let periodic = legendre_flow(&r2, lam).is_ok();
        assert_eq!(periodic, deuring(&r1, l1).is_zero(), "λ = {cs:?}");
    }
}

#[test]
fn theta_zero_defect_and_covariance() {
    let f = theta_zero_flow();
    let eng = Engine::new(f.clone(), None, None).unwrap();
    assert_eq!(eng.dims().unwrap(), (1, 0, 0));
    let r = eng.ring1().clone();
    let d0 = periodicity_defect(f.clone(), &eng.seed.bundle, &eng.x_hat).unwrap();
    assert_eq!(d0, vec![r.zero()]);
    // Δ(ε) = Δ₀ − ε + σ(ε) here, since Gr∘α is Frobenius pullback on H¹(Gr⁰)
    for c in r.elements() {
        let st = eng.eval(&[c], &[]).unwrap();
        assert_eq!(st.defect.unwrap(), vec![r.sub(r.frobenius(c), c)]);
    }
    let od = ordinarity_check(&eng).unwrap();
    assert!(od.surjective && od.k_nonempty());
    assert_eq!(od.h_basis.len(), 1);
}

#[test]
fn lift_recovers_from_perturbed_seed() {
    let f = theta_zero_flow();
    let base = Engine::new(f.clone(), None, None).unwrap();
    let r = base.ring1().clone();
    let eps0 = r.gen();
    let seed = base.de.act(&base.seed, &[eps0]).unwrap();
    let eng = Engine::new(f.clone(), Some((*seed.bundle).clone()), None).unwrap();
    let d = eng.eval(&[r.zero()], &[]).unwrap().defect.unwrap();
    assert_eq!(d, vec![r.sub(r.frobenius(eps0), eps0)]);
    let out = lift_flow(&eng).unwrap();
    assert_eq!(out.defect, vec![r.zero()]);
    assert_eq!(out.extension_degree, 1);
    // the seed moves back by −ε₀ + F_3
    assert!(r.frobenius(r.add(out.epsilon[0], eps0)) == r.add(out.epsilon[0], eps0));
    assert!(out.checks.iter().all(|c| c.ok), "{:?}", out.checks);
    let rep = verify_flow(&out.flow);
    assert!(rep.ok, "{:?}", rep.failures);
    assert_eq!(out.flow.level(), 2);
}

#[test]
fn unique_lift_between_hodge_choices() {
    let f = theta_zero_flow();
    let eng = Engine::new(f.clone(), None, None).unwrap();
    let r = eng.ring1().clone();
    let out = lift_flow(&eng).unwrap();
    let a = &out.flow;
    let id = unique_lift_check(a, a).unwrap();
    for (i, g) in id.automorphism.iter().enumerate() {
        assert_eq!(*g, SMat::identity(a.higgs.cover.loc(&[i]).unwrap(), 2));
    }
    let st = eng.eval(&out.epsilon, &out.eta).unwrap();
    let hl = st.hodge.clone().unwrap();
    assert_eq!(eng.dv.hyper(Group::Hodge).unwrap().dim(0).unwrap(), 1);
    for c in [r.one(), r.gen()] {
        let hl2 = eng.dv.hodge_act(&hl, &[c]).unwrap();
        let b = eng.flow_from(&st, &hl2).unwrap();
        assert!(verify_flow(&b).ok);
        assert_ne!(b.frames, a.frames);
        let u = unique_lift_check(a, &b).unwrap();
        let moved = a.derham.with_frames(&u.iso).unwrap();
        assert!(moved.same_data(&b.derham));
        let w = &a.derham.weights;
        assert!(u.iso.iter().all(|m| m.supported_in(|x, y| w[x] >= w[y])));
    }
    // a different initial term is rejected
    let st = eng.eval(&[r.one()], &[]).unwrap();
    assert_eq!(st.defect.clone().unwrap(), vec![r.zero()]);
    let c = eng.flow_from(&st, st.hodge.as_ref().unwrap()).unwrap();
    assert!(matches!(unique_lift_check(a, &c), Err(FlowError::InvalidInput(_))));
}

#[test]
fn ordinarity_verdict_from_matrices() {
    let r = f9(1);
    let one = r.one();
    // β = 0 and π∘α of full rank: nothing in H projects onto ε
    let od = ordinarity_from_matrices(&r, 1, 1, 1, vec![r.zero()], vec![vec![one]], vec![vec![r.zero()]]).unwrap();
    assert!(!od.surjective && !od.beta_criterion);
    assert!(od.tau.is_none());
    // π∘β onto: τ(e) = −σ⁻¹(π∘α(e) / π∘β)
    let g = r.gen();
    let od = ordinarity_from_matrices(&r, 1, 1, 1, vec![one], vec![vec![one]], vec![vec![g]]).unwrap();
    assert!(od.surjective && od.beta_criterion && od.k_nonempty());
    let tau = od.tau_of(&r, &[one])[0];
    assert!(r.add(one, r.mul(g, r.frobenius(tau))).is_zero());
    let (e0, h0) = od.k_point.unwrap();
    assert!(r.add(one, r.add(r.frobenius(e0.first().copied().unwrap_or(r.zero())), r.mul(g, r.frobenius(h0[0])))).is_zero());
    // obstruction outside the image: K = ∅
    let od = ordinarity_from_matrices(&r, 1, 1, 1, vec![one], vec![vec![r.zero()]], vec![vec![r.zero()]]).unwrap();
    assert!(!od.k_nonempty());
}

#[test]
fn flagship_lifts_to_level_two() {
    let f = flagship();
    assert!(verify_flow(&f).ok);
    let eng = Engine::new(f.clone(), None, None).unwrap();
    assert_eq!(eng.dims().unwrap(), (0, 1, 1));
    let od = ordinarity_check(&eng).unwrap();
    assert!(od.beta_criterion && od.surjective && od.k_nonempty());
    assert!(!od.pi_beta[0][0].is_zero());
    let out = lift_flow(&eng).unwrap();
    assert!(out.defect.is_empty());
    assert!(out.checks.iter().all(|c| c.ok), "{:?}", out.checks);
    let rep = verify_flow(&out.flow);
    assert!(rep.ok, "{:?}", rep.failures);
    assert_eq!(out.flow.level(), 2);
    // the Hodge obstruction of a general X̂ + η is π∘β(η) + ob₀
    let r = eng.ring1().clone();
    for c in r.elements() {
        let st = eng.eval(&[], &[c]).unwrap();
        let pred = r.add(od.ob0[0], r.mul(od.pi_beta[0][0], r.frobenius(c)));
        assert_eq!(st.obstruction, vec![pred]);
        assert_eq!(st.hodge.is_some(), pred.is_zero());
    }
}

#[test]
fn flagship_torsor_pair_identity() {
    let f = flagship();
    let r3 = f9(3);
    let x3 = Arc::new(legendre_cover(&r3, r3.neg(r3.one())).unwrap());
    let fr = standard_frobenius(x3).unwrap();
    let r1 = f.higgs.cover.ring.clone();
    let lr = f.higgs.cover.loc(&[0, 1]).unwrap();
    let els = r1.elements();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut nonzero = 0;
    for _ in 0..10 {
        let cs: Vec<WittElem> = (0..3).map(|_| els[rng.gen_range(0..els.len())]).collect();
        let mut eta = BTreeMap::new();
        eta.insert((0, 1), lr.frac(Poly(cs).trimmed(&r1), 1));
        let (lhs, rhs) = common::dual_route(&f.derham, &fr, &[], &eta);
        assert_eq!(lhs, rhs);
        nonzero += lhs.iter().any(|x| !x.is_zero()) as usize;
    }
    assert!(nonzero > 0);
}
