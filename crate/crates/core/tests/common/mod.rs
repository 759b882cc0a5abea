use std::collections::BTreeMap;
use std::sync::Arc;

use hdflow::bundle::{gr_higgs, Bundle};
use hdflow::cartier::{alpha_cochain, beta_cochain, inverse_cartier, FrobeniusLifting};
use hdflow::cech::Cochain;
use hdflow::deform::{Deform, Group, Lift};
use hdflow::geometry::Thickening;
use hdflow::poly::Sec;
use hdflow::smat::SMat;
use hdflow::witt::WittElem;

/// Returns the class of `IC(Ẽ + ε, X₃ + η) − IC(Ẽ, X₃)` and the class of
/// `α(ε) + β(η)`, both in `H¹(DR End(C⁻¹ E₁))`.
pub fn dual_route(v1: &Bundle, frob: &FrobeniusLifting, eps: &[WittElem], eta: &BTreeMap<(usize, usize), Sec>) -> (Vec<WittElem>, Vec<WittElem>) {
    let x3 = frob.cover.clone();
    let x2 = x3.reduce_to(2).unwrap();
    let x1 = v1.cover.clone();
    let thick = Thickening::new(&x1, x2).unwrap();
    let e1 = Arc::new(gr_higgs(v1).unwrap());
    let de = Deform::new(e1.clone(), &thick).unwrap();
    let l = de.local_lifts(Group::Graded);
    let ob = de.obstruction_of(&l).unwrap();
    let le = de.lift_from_obstruction(&l, &ob).unwrap().expect("graded lift exists");
    let dim = de.hyper(Group::Graded).unwrap().dim(1).unwrap();
    let eps: Vec<WittElem> = if eps.is_empty() { vec![x1.ring.zero(); dim] } else { eps.to_vec() };
    let le2 = de.act(&le, &eps).unwrap();
    let ic = inverse_cartier(&le.bundle, Some(v1), frob).unwrap();
    let frob_eta = frob.on_cover(Arc::new(x3.perturbed(eta).unwrap())).unwrap();
    let ic2 = inverse_cartier(&le2.bundle, Some(v1), &frob_eta).unwrap();
    let base = Arc::new(ic.bundle.reduce_to(1).unwrap());
    let dv = Deform::new(base, &thick).unwrap();
    let lhs = dv
        .torsor_diff(
            &Lift { group: Group::Bare, bundle: Arc::new(ic.bundle.clone()) },
            &Lift { group: Group::Bare, bundle: Arc::new(ic2.bundle.clone()) },
        )
        .unwrap();
    let z = de.hyper(Group::Graded).unwrap().combination(1, &eps).unwrap();
    let mut etac = Cochain::zero(1);
    for (&(i, j), e) in eta {
        etac.insert(vec![i, j], SMat { rows: 1, cols: 1, d: vec![e.clone()] });
    }
    let a = alpha_cochain(&e1, frob, &z).unwrap();
    let b = beta_cochain(&e1, frob, &etac).unwrap();
    let h = dv.hyper(Group::Bare).unwrap();
    let rhs = h.classify(&a.add(&x1, &b)).unwrap().coords(h.dim(1).unwrap(), x1.ring.zero()).expect("α(ε) + β(η) is a cocycle");
    (lhs, rhs)
}

