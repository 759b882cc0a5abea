//! Obstructions, torsor differences and torsor actions for lifting filtered
//! de Rham bundles, bare de Rham bundles, Hodge filtrations and graded Higgs
//! bundles across `W_{n+1} → W_n`, with all classes computed over the
//! residue field via `ι: F|_{X₁} ≅ p^n F`.
//!
//! Lifts are always written in frames that reduce to the adapted frames of
//! the level-`n` object, so the identity is an admissible local isomorphism
//! between any two lifts.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{end_complex, gr_higgs, Bundle, BundleError, Pattern, SheafComplex, Variant};
use crate::cech::{CechError, Classification, Cochain, Hyper};
use crate::field::{Echelon, F};
use crate::geometry::{Cover, GeoError, Simplex, Thickening};
use crate::poly::Poly;
use crate::smat::SMat;
use crate::witt::WittElem;

#[derive(Debug, Error)]
pub enum DeformError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Cech(#[from] CechError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("internal cocycle failure: {0}")]
    InternalCocycleFailure(String),
    #[error("lifts do not reduce to the same object")]
    BaseMismatch,
    #[error("class belongs to a different torsor group")]
    ClassGroupMismatch,
    #[error("cochain is not a cocycle")]
    NotCocycle,
    #[error("no isomorphism: {0}")]
    NoIso(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// The four lifting problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Group {
    /// `(V, ∇, Fil)`: torsor under `H¹(Fil⁰ DR End)`.
    Filtered,
    /// `(V, ∇)`: torsor under `H¹(DR End)`.
    Bare,
    /// Hodge filtrations on a fixed lift of `(V, ∇)`: torsor under `H⁰(𝒞)`.
    Hodge,
    /// `(E, θ, Gr)`: torsor under `H¹(Gr⁰ Higgs End)`.
    Graded,
}

impl Group {
    pub fn torsor_degree(self) -> usize {
        if self == Group::Hodge {
            0
        } else {
            1
        }
    }

    /// Patterns that local isomorphisms and the operator must respect.
    fn patterns(self) -> (Pattern, Pattern) {
        match self {
            Group::Filtered => (Pattern::Fil(0), Pattern::Fil(-1)),
            Group::Bare => (Pattern::All, Pattern::All),
            Group::Hodge => (Pattern::Quot(0), Pattern::Quot(-1)),
            Group::Graded => (Pattern::Gr(0), Pattern::Gr(-1)),
        }
    }
}

/// A lift of the base bundle to level `n+1`.
#[derive(Clone, Debug)]
pub struct Lift {
    pub group: Group,
    pub bundle: Arc<Bundle>,
}

/// A Hodge filtration on a fixed lift of `(V, ∇)`, given by adapted frames
/// `P_i` (columns in the frame of `bare`, weights of the base).
#[derive(Clone, Debug)]
pub struct HodgeLift {
    pub bare: Arc<Bundle>,
    pub frames: Vec<SMat>,
}

impl HodgeLift {
    /// The filtered bundle in the adapted frames.
    pub fn filtered(&self) -> Result<Bundle, BundleError> {
        self.bare.with_frames(&self.frames)
    }
}

/// Chartwise lifts of the transitions and of the operator (connection or Higgs field).
#[derive(Clone, Debug)]
pub struct LocalLifts {
    pub group: Group,
    /// `f_ij` for `i < j`, on `U_ij`.
    pub f: BTreeMap<(usize, usize), SMat>,
    pub ops: Vec<SMat>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct Obstruction {
    pub cochain: Cochain,
    pub checks: Vec<Check>,
    pub class: Classification,
}

impl Obstruction {
    pub fn vanishes(&self) -> bool {
        matches!(self.class, Classification::Coboundary { .. })
    }
}

/// Deformation engine for one base object and one thickening.
pub struct Deform {
    pub base: Arc<Bundle>,
    pub high: Arc<Cover>,
    pub one: Arc<Cover>,
    pub base1: Arc<Bundle>,
    pub n: u32,
    hypers: RefCell<BTreeMap<Group, Rc<Hyper>>>,
}

fn restrict(cov: &Cover, sigma: &[usize], tau: &[usize], m: &SMat) -> SMat {
    if sigma == tau {
        return m.clone();
    }
    m.map(|s| cov.restrict(sigma, tau, s).expect("restriction"))
}

fn pair(i: usize, j: usize) -> Simplex {
    vec![i.min(j), i.max(j)]
}

impl Deform {
    pub fn new(base: Arc<Bundle>, thick: &Thickening) -> Result<Deform, DeformError> {
        if !base.cover.same_as(&thick.low) {
            return Err(DeformError::InvalidInput("thickening does not match the bundle's cover".into()));
        }
        let n = base.cover.level();
        let high = Arc::new(thick.high.clone());
        let one = Arc::new(base.cover.reduce_to(1)?);
        let base1 = Arc::new(base.transport(one.clone())?);
        Ok(Deform { base, high, one, base1, n, hypers: RefCell::default() })
    }

    /// The canonical (minimal coefficient) thickening.
    pub fn canonical(base: Arc<Bundle>) -> Result<Deform, DeformError> {
        let t = Thickening::canonical(&base.cover)?;
        Deform::new(base, &t)
    }

    fn check_group(&self, g: Group) -> Result<(), DeformError> {
        let higgs = self.base.higgs.is_some() && self.base.conn.is_none();
        if (g == Group::Graded) != higgs {
            return Err(DeformError::ClassGroupMismatch);
        }
        Ok(())
    }

    pub fn complex(&self, g: Group) -> Result<SheafComplex, DeformError> {
        self.check_group(g)?;
        let v = match g {
            Group::Filtered => Variant::Fil(0),
            Group::Bare => Variant::Full,
            Group::Hodge => Variant::QuotientC,
            Group::Graded => Variant::Gr(0),
        };
        Ok(end_complex(self.base1.clone(), v)?)
    }

    pub fn hyper(&self, g: Group) -> Result<Rc<Hyper>, DeformError> {
        if let Some(h) = self.hypers.borrow().get(&g) {
            return Ok(h.clone());
        }
        let h = Rc::new(Hyper::new(self.complex(g)?)?);
        self.hypers.borrow_mut().insert(g, h.clone());
        Ok(h)
    }

    fn pn(&self) -> WittElem {
        self.high.ring.p_pow(self.n)
    }

    /// `ι⁻¹`: divide by `p^n` and reduce to level 1.
    pub fn iota_inv(&self, sigma: &[usize], m: &SMat) -> Result<SMat, DeformError> {
        let hi = self.high.loc(sigma)?;
        let lo = self.one.loc(sigma)?;
        let mut d = Vec::with_capacity(m.d.len());
        for s in &m.d {
            let q = hi.div_p_pow(s, self.n).ok_or_else(|| {
                DeformError::InternalCocycleFailure(format!("defect on {sigma:?} is not divisible by p^{}", self.n))
            })?;
            d.push(hi.reduce_to(lo, &q));
        }
        Ok(SMat { rows: m.rows, cols: m.cols, d })
    }

    /// `ι`: lift a level-1 matrix and multiply by `p^n`.
    pub fn iota(&self, sigma: &[usize], m: &SMat) -> SMat {
        let hi = self.high.loc(sigma).unwrap();
        let pn = self.pn();
        m.map(|s| hi.scale(&hi.lift_from(s), pn))
    }

    fn lift_mat(&self, sigma: &[usize], m: &SMat) -> SMat {
        let hi = self.high.loc(sigma).unwrap();
        m.map(|s| hi.lift_from(s))
    }

    fn ops_of(b: &Bundle) -> &Vec<SMat> {
        b.conn.as_ref().or(b.higgs.as_ref()).expect("bundle carries an operator")
    }

    fn is_higgs(&self) -> bool {
        self.base.conn.is_none()
    }

    /// Minimal coefficient lifts of the transitions and operators.
    pub fn local_lifts(&self, group: Group) -> LocalLifts {
        let b = &self.base;
        let f = b.trans.iter().map(|(&(i, j), m)| ((i, j), self.lift_mat(&[i, j], m))).collect();
        let ops = Self::ops_of(b).iter().enumerate().map(|(i, m)| self.lift_mat(&[i], m)).collect();
        LocalLifts { group, f, ops }
    }

    /// A random level-1 matrix on `U_σ` supported in a pattern.
    pub fn random_mat(&self, rng: &mut impl Rng, sigma: &[usize], pat: Pattern, deg: usize) -> SMat {
        let r = &self.one.ring;
        let lr = self.one.loc(sigma).unwrap();
        let w = &self.base.weights;
        let elems = r.elements();
        SMat::from_fn(self.base.rank, self.base.rank, |a, b| {
            if !pat.allows(w[a] - w[b]) {
                return lr.zero();
            }
            let cs: Vec<WittElem> = (0..=deg).map(|_| elems[rng.gen_range(0..elems.len())]).collect();
            lr.poly(Poly(cs).trimmed(r))
        })
    }

    /// Local lifts changed by random `p^n`-multiples in the group's patterns:
    /// another admissible system of local data.
    pub fn perturbed_lifts(&self, group: Group, rng: &mut impl Rng) -> LocalLifts {
        let mut l = self.local_lifts(group);
        let (p0, p1) = group.patterns();
        let p0 = if group == Group::Hodge { Pattern::Fil(0) } else { p0 };
        let p1 = if group == Group::Hodge { Pattern::Fil(-1) } else { p1 };
        let keys: Vec<_> = l.f.keys().cloned().collect();
        for (i, j) in keys {
            let s = [i, j];
            let lr = self.high.loc(&s).unwrap();
            let e = self.iota(&s, &self.random_mat(rng, &s, p0, 1));
            let m = l.f[&(i, j)].add(lr, &e);
            l.f.insert((i, j), m);
        }
        for i in 0..l.ops.len() {
            let lr = self.high.loc(&[i]).unwrap();
            let e = self.iota(&[i], &self.random_mat(rng, &[i], p1, 1));
            l.ops[i] = l.ops[i].add(lr, &e);
        }
        l
    }

    fn f_on(&self, l: &LocalLifts, tau: &[usize], i: usize, j: usize) -> SMat {
        let cov = &self.high;
        let lr = cov.loc(&pair(i, j)).unwrap();
        let m = if i < j { l.f[&(i, j)].clone() } else { l.f[&(j, i)].inv(lr).expect("transition invertible") };
        restrict(cov, &pair(i, j), tau, &m)
    }

    /// `f_ij⁻¹(δ f_ij + κ A_j f_ij) − A_i` (or its Higgs analogue) on `U_ij`, frame `i`.
    fn op_defect(&self, l: &LocalLifts, i: usize, j: usize, ops: &[SMat]) -> SMat {
        let cov = &self.high;
        let s = [i, j];
        let lr = cov.loc(&s).unwrap();
        let g = self.f_on(l, &s, i, j);
        let gi = g.inv(lr).expect("invertible");
        let kap = cov.kappa(&s, j).expect("κ");
        let aj = restrict(cov, &[j], &s, &ops[j]).scale(lr, &kap);
        let ai = restrict(cov, &[i], &s, &ops[i]);
        let mut inner = aj.mul(lr, &g);
        if !self.is_higgs() {
            inner = inner.add(lr, &g.derivation(lr, &cov.charts[i].g(&cov.ring)));
        }
        gi.mul(lr, &inner).sub(lr, &ai)
    }

    /// The 2-cochain `(−(f_ik⁻¹f_jk f_ij − 1), f_ij⁻¹∇_j f_ij − ∇_i, ∇_i²)` divided by `p^n`.
    pub fn obstruction_cochain(&self, l: &LocalLifts) -> Result<Cochain, DeformError> {
        let cov = &self.high;
        let k = cov.num_charts();
        let mut c = Cochain::zero(2);
        for tau in cov.simplices(3.min(k)) {
            if tau.len() == 3 {
                let (i, j, kk) = (tau[0], tau[1], tau[2]);
                let lr = cov.loc(&tau)?;
                let m = self.f_on(l, &tau, kk, i).mul(lr, &self.f_on(l, &tau, j, kk)).mul(lr, &self.f_on(l, &tau, i, j));
                let a = m.sub(lr, &SMat::identity(lr, self.base.rank));
                let a1 = self.iota_inv(&tau, &a)?;
                c.insert(tau.clone(), a1.neg(self.one.loc(&tau)?));
            } else if tau.len() == 2 {
                let b = self.op_defect(l, tau[0], tau[1], &l.ops);
                c.insert(tau.clone(), self.iota_inv(&tau, &b)?);
            }
        }
        Ok(c)
    }

    /// Splits `d^Tot c` by bidegree into the named cocycle conditions.
    fn cocycle_checks(&self, h: &Hyper, c: &Cochain, names: &[&str]) -> Vec<Check> {
        let dc = h.total_differential(c);
        let deg = c.deg;
        let mut out = Vec::new();
        // component on simplices of length p+1 has form degree deg+1-p
        for (q, name) in names.iter().enumerate() {
            let len = deg + 2 - q;
            let ok = dc.comps.iter().filter(|(s, _)| s.len() == len).all(|(_, m)| m.is_zero());
            out.push(Check { name: name.to_string(), ok });
        }
        out
    }

    /// Obstruction class of a system of local data, with cocycle conditions checked.
    pub fn obstruction_of(&self, l: &LocalLifts) -> Result<Obstruction, DeformError> {
        let h = self.hyper(l.group)?;
        let c = self.obstruction_cochain(l)?;
        let checks = self.cocycle_checks(
            &h,
            &c,
            &["δa = 0", "∇a = δb", "∇b = δc (Ω² = 0)", "∇c = 0 (Ω² = 0)"],
        );
        if let Some(bad) = checks.iter().find(|k| !k.ok) {
            return Err(DeformError::InternalCocycleFailure(bad.name.clone()));
        }
        let class = h.classify(&c)?;
        Ok(Obstruction { cochain: c, checks, class })
    }

    pub fn obstruction(&self, group: Group) -> Result<Obstruction, DeformError> {
        if group == Group::Hodge {
            return Err(DeformError::ClassGroupMismatch);
        }
        self.check_group(group)?;
        self.obstruction_of(&self.local_lifts(group))
    }

    /// Glues local data corrected by a primitive `w` with `d w = c`.
    pub fn glue(&self, l: &LocalLifts, w: &Cochain) -> Result<Lift, DeformError> {
        let cov = &self.high;
        let k = cov.num_charts();
        let mut trans = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s)?;
                let f = &l.f[&(i, j)];
                let m = match w.get(&s) {
                    Some(x) => f.add(lr, &f.mul(lr, &self.iota(&s, x))),
                    None => f.clone(),
                };
                trans.insert((i, j), m);
            }
        }
        let ops: Vec<SMat> = (0..k)
            .map(|i| {
                let lr = cov.loc(&[i]).unwrap();
                match w.get(&[i]) {
                    Some(y) => l.ops[i].sub(lr, &self.iota(&[i], y)),
                    None => l.ops[i].clone(),
                }
            })
            .collect();
        self.make_lift(l.group, trans, ops)
    }

    fn make_lift(&self, group: Group, trans: BTreeMap<(usize, usize), SMat>, ops: Vec<SMat>) -> Result<Lift, DeformError> {
        let (conn, higgs) = if self.is_higgs() { (None, Some(ops)) } else { (Some(ops), None) };
        let b = Bundle::new(self.high.clone(), self.base.rank, trans, conn, higgs, self.base.weights.clone(), self.base.graded)?;
        Ok(Lift { group, bundle: Arc::new(b) })
    }

    /// Lift obtained from a vanishing obstruction, if any.
    pub fn lift_from_obstruction(&self, l: &LocalLifts, ob: &Obstruction) -> Result<Option<Lift>, DeformError> {
        match &ob.class {
            Classification::Coboundary { witness } => Ok(Some(self.glue(l, witness)?)),
            _ => Ok(None),
        }
    }

    /// True when the lift is valid and reduces exactly to the base.
    pub fn verify_lift(&self, l: &Lift) -> Result<(), DeformError> {
        // bare lifts need not preserve the filtration
        let rep = if l.group == Group::Bare {
            l.bundle.with_weights(vec![0; l.bundle.rank], false).check()
        } else {
            l.bundle.check()
        };
        if !rep.ok {
            return Err(DeformError::InvalidInput(rep.failures.join("; ")));
        }
        let red = l.bundle.transport(self.base.cover.clone())?;
        let same = if l.group == Group::Bare {
            red.trans == self.base.trans && red.conn == self.base.conn
        } else {
            red.same_data(&self.base)
        };
        if !same {
            return Err(DeformError::BaseMismatch);
        }
        Ok(())
    }

    /// The lift given by a global system of local data (the minimal lift
    /// when it is already a bundle).
    pub fn lift_of_local(&self, l: &LocalLifts) -> Result<Lift, DeformError> {
        self.make_lift(l.group, l.f.clone(), l.ops.clone())
    }

    // ---------------- torsor ----------------

    /// `b(L, L′) = (ι⁻¹(g′_ji g_ij − 1), ι⁻¹(∇′_i − ∇_i))`, inverse to [`Deform::act`].
    pub fn torsor_cochain(&self, l: &Lift, l2: &Lift) -> Result<Cochain, DeformError> {
        if l.group != l2.group {
            return Err(DeformError::ClassGroupMismatch);
        }
        let cov = &self.high;
        let k = cov.num_charts();
        let mut c = Cochain::zero(1);
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s)?;
                let g2i = l2.bundle.g(j, i);
                // g′_ij = g_ij (1 − ι x) gives g′_ji g_ij = 1 + ι x
                let m = g2i.mul(lr, &l.bundle.g(i, j)).sub(lr, &SMat::identity(lr, self.base.rank));
                c.insert(s.to_vec(), self.iota_inv(&s, &m).map_err(|_| DeformError::BaseMismatch)?);
            }
        }
        let (o1, o2) = (Self::ops_of(&l.bundle), Self::ops_of(&l2.bundle));
        for i in 0..k {
            let lr = cov.loc(&[i])?;
            let m = o2[i].sub(lr, &o1[i]);
            c.insert(vec![i], self.iota_inv(&[i], &m).map_err(|_| DeformError::BaseMismatch)?);
        }
        Ok(c)
    }

    pub fn torsor_diff(&self, l: &Lift, l2: &Lift) -> Result<Vec<WittElem>, DeformError> {
        let h = self.hyper(l.group)?;
        let c = self.torsor_cochain(l, l2)?;
        match h.classify(&c)? {
            Classification::NotCocycle => Err(DeformError::InternalCocycleFailure("torsor difference is not a cocycle".into())),
            cl => Ok(cl.coords(h.dim(1)?, self.one.ring.zero()).unwrap()),
        }
    }

    /// `L + ε` for class coordinates `ε`.
    pub fn act(&self, l: &Lift, eps: &[WittElem]) -> Result<Lift, DeformError> {
        let h = self.hyper(l.group)?;
        if eps.len() != h.dim(1)? {
            return Err(DeformError::ClassGroupMismatch);
        }
        let z = h.combination(1, eps)?;
        self.act_cochain(l, &z)
    }

    /// `g′ = g(1 − ι x)`, `∇′ = ∇ + ι y` for a 1-cocycle `(x, y)`.
    pub fn act_cochain(&self, l: &Lift, z: &Cochain) -> Result<Lift, DeformError> {
        let h = self.hyper(l.group)?;
        if !h.is_cocycle(z) {
            return Err(DeformError::NotCocycle);
        }
        let cov = &self.high;
        let k = cov.num_charts();
        let mut trans = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s)?;
                let g = l.bundle.g(i, j);
                let m = match z.get(&s) {
                    Some(x) => g.sub(lr, &g.mul(lr, &self.iota(&s, x))),
                    None => g,
                };
                trans.insert((i, j), m);
            }
        }
        let ops = Self::ops_of(&l.bundle)
            .iter()
            .enumerate()
            .map(|(i, a)| match z.get(&[i]) {
                Some(y) => a.add(cov.loc(&[i]).unwrap(), &self.iota(&[i], y)),
                None => a.clone(),
            })
            .collect();
        self.make_lift(l.group, trans, ops)
    }

    /// `H⁰` of the group's complex as automorphisms `id + ι(ε)` of a lift;
    /// each is checked to be parallel and to preserve the structure.
    pub fn automorphism_space(&self, l: &Lift) -> Result<Vec<Vec<SMat>>, DeformError> {
        let h = self.hyper(l.group)?;
        let basis = h.cohomology(0)?;
        let cov = &self.high;
        let k = cov.num_charts();
        let mut out = Vec::new();
        for z in &basis.reps {
            let phis: Vec<SMat> = (0..k)
                .map(|i| {
                    let lr = cov.loc(&[i]).unwrap();
                    let e = z.get(&[i]).cloned().unwrap_or_else(|| SMat::zeros(self.base.rank, self.base.rank));
                    SMat::identity(lr, self.base.rank).add(lr, &self.iota(&[i], &e))
                })
                .collect();
            self.check_endomorphism(&l.bundle, &phis)?;
            out.push(phis);
        }
        Ok(out)
    }

    /// `φ_j g_ij = g_ij φ_i` and `φ` commutes with the operator, exactly.
    pub fn check_endomorphism(&self, b: &Bundle, phis: &[SMat]) -> Result<(), DeformError> {
        let cov = &b.cover;
        let k = cov.num_charts();
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s)?;
                let g = b.g(i, j);
                let pi = restrict(cov, &[i], &s, &phis[i]);
                let pj = restrict(cov, &[j], &s, &phis[j]);
                if pj.mul(lr, &g) != g.mul(lr, &pi) {
                    return Err(DeformError::InternalCocycleFailure(format!("endomorphism does not glue on {s:?}")));
                }
            }
        }
        let ops = Self::ops_of(b);
        for i in 0..k {
            let lr = cov.loc(&[i])?;
            let mut d = ops[i].mul(lr, &phis[i]).sub(lr, &phis[i].mul(lr, &ops[i]));
            if b.conn.is_some() {
                d = d.add(lr, &phis[i].derivation(lr, &cov.charts[i].g(&cov.ring)));
            }
            if !d.is_zero() {
                return Err(DeformError::InternalCocycleFailure(format!("endomorphism is not parallel on chart {i}")));
            }
        }
        Ok(())
    }

    // ---------------- Hodge filtrations ----------------

    /// The Hodge filtration carried by a filtered lift.
    pub fn hodge_of(&self, l: &Lift) -> HodgeLift {
        let cov = &self.high;
        let frames = (0..cov.num_charts()).map(|i| SMat::identity(cov.loc(&[i]).unwrap(), self.base.rank)).collect();
        HodgeLift { bare: l.bundle.clone(), frames }
    }

    /// `(ι⁻¹(1 − P_i⁻¹P′_i))_i` projected to `𝒞⁰`.
    pub fn hodge_cochain(&self, a: &HodgeLift, b: &HodgeLift) -> Result<Cochain, DeformError> {
        if !a.bare.same_data(&b.bare) {
            return Err(DeformError::BaseMismatch);
        }
        let cov = &self.high;
        let mut c = Cochain::zero(0);
        for i in 0..cov.num_charts() {
            let lr = cov.loc(&[i])?;
            let pinv = a.frames[i].inv(lr).ok_or(DeformError::BaseMismatch)?;
            let m = SMat::identity(lr, self.base.rank).sub(lr, &pinv.mul(lr, &b.frames[i]));
            let m1 = self.iota_inv(&[i], &m).map_err(|_| DeformError::BaseMismatch)?;
            let w = &self.base.weights;
            c.insert(vec![i], m1.project(|x, y| Pattern::Quot(0).allows(w[x] - w[y])));
        }
        Ok(c)
    }

    pub fn hodge_diff(&self, a: &HodgeLift, b: &HodgeLift) -> Result<Vec<WittElem>, DeformError> {
        let h = self.hyper(Group::Hodge)?;
        let c = self.hodge_cochain(a, b)?;
        match h.classify(&c)? {
            Classification::NotCocycle => Err(DeformError::InternalCocycleFailure("Hodge difference is not a cocycle".into())),
            cl => Ok(cl.coords(h.dim(0)?, self.one.ring.zero()).unwrap()),
        }
    }

    /// `P′_i = P_i (1 − ι x_i)`.
    pub fn hodge_act(&self, a: &HodgeLift, eps: &[WittElem]) -> Result<HodgeLift, DeformError> {
        let h = self.hyper(Group::Hodge)?;
        if eps.len() != h.dim(0)? {
            return Err(DeformError::ClassGroupMismatch);
        }
        let z = h.combination(0, eps)?;
        let cov = &self.high;
        let frames = (0..cov.num_charts())
            .map(|i| {
                let lr = cov.loc(&[i]).unwrap();
                match z.get(&[i]) {
                    Some(x) => a.frames[i].sub(lr, &a.frames[i].mul(lr, &self.iota(&[i], x))),
                    None => a.frames[i].clone(),
                }
            })
            .collect();
        Ok(HodgeLift { bare: a.bare.clone(), frames })
    }

    /// `c(Fil) = (ι⁻¹(1 − f_ij), ι⁻¹(∇_i − ∇))` for a lift `bare` of `(V, ∇)`,
    /// with `f_ij` and `∇_i` the filtration-compatible truncations.
    pub fn obstruction_hodge(&self, bare: Arc<Bundle>) -> Result<(Obstruction, Option<HodgeLift>), DeformError> {
        if bare.cover.level() != self.high.level() || !bare.cover.same_as(&self.high) {
            return Err(DeformError::InvalidInput("bare lift must live on the thickening".into()));
        }
        let red = bare.transport(self.base.cover.clone())?;
        if red.trans != self.base.trans || red.conn != self.base.conn {
            return Err(DeformError::BaseMismatch);
        }
        let h = self.hyper(Group::Hodge)?;
        let cov = &self.high;
        let k = cov.num_charts();
        let w = &self.base.weights;
        let mut c = Cochain::zero(1);
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s)?;
                let g = bare.g(i, j);
                let f = g.project(|x, y| Pattern::Fil(0).allows(w[x] - w[y]));
                let m = SMat::identity(lr, self.base.rank).sub(lr, &g.inv(lr).unwrap().mul(lr, &f));
                c.insert(s.to_vec(), self.iota_inv(&s, &m)?);
            }
        }
        let conn = bare.conn.as_ref().ok_or_else(|| DeformError::InvalidInput("bare lift needs a connection".into()))?;
        for (i, a) in conn.iter().enumerate() {
            let lr = cov.loc(&[i])?;
            let t = a.project(|x, y| Pattern::Fil(-1).allows(w[x] - w[y]));
            c.insert(vec![i], self.iota_inv(&[i], &t.sub(lr, a))?);
        }
        let checks = self.cocycle_checks(&h, &c, &["δx = 0 in 𝒞", "∇x = δy in 𝒞", "∇y = 0 (Ω² = 0)"]);
        if let Some(bad) = checks.iter().find(|k| !k.ok) {
            return Err(DeformError::InternalCocycleFailure(bad.name.clone()));
        }
        let class = h.classify(&c)?;
        let lifted = match &class {
            Classification::Coboundary { witness } => {
                let frames = (0..k)
                    .map(|i| {
                        let lr = cov.loc(&[i]).unwrap();
                        let id = SMat::identity(lr, self.base.rank);
                        match witness.get(&[i]) {
                            Some(z) => id.add(lr, &self.iota(&[i], z)),
                            None => id,
                        }
                    })
                    .collect();
                Some(HodgeLift { bare: bare.clone(), frames })
            }
            _ => None,
        };
        Ok((Obstruction { cochain: c, checks, class }, lifted))
    }

    /// True when the frames define a Hodge filtration: adapted transitions
    /// preserve `Fil`, the connection is Griffiths transverse, and the
    /// filtration reduces to the base filtration.
    pub fn verify_hodge(&self, hl: &HodgeLift) -> Result<(), DeformError> {
        let f = hl.filtered()?;
        let rep = f.check();
        if !rep.ok {
            return Err(DeformError::InvalidInput(rep.failures.join("; ")));
        }
        for (i, p) in hl.frames.iter().enumerate() {
            let lr = self.high.loc(&[i])?;
            let d = p.sub(lr, &SMat::identity(lr, self.base.rank));
            if self.iota_inv(&[i], &d).is_err() {
                return Err(DeformError::BaseMismatch);
            }
        }
        Ok(())
    }

    /// An automorphism `g = 1 − ι γ` of the bare lift with `g Fil = Fil′`;
    /// `γ ∈ H⁰(DR End)` maps to the Hodge difference under `π`.
    pub fn hodge_uniqueness_iso(&self, a: &HodgeLift, b: &HodgeLift) -> Result<Vec<SMat>, DeformError> {
        let eps = self.hodge_diff(a, b)?;
        let hb = self.hyper(Group::Bare)?;
        let hc = self.hyper(Group::Hodge)?;
        let fq = &hc.fq;
        let r1 = &self.one.ring;
        let basis = hb.cohomology(0)?;
        let dimc = hc.dim(0)?;
        let mut ech = Echelon::with_tracking(dimc.max(1), basis.reps.len());
        for z in &basis.reps {
            let cl = hc.coords(z)?;
            let v: Vec<F> = cl.iter().map(|&e| fq.from_elem(r1, e)).collect();
            ech.insert(fq, &pad(v, dimc.max(1)));
        }
        let target: Vec<F> = eps.iter().map(|&e| fq.from_elem(r1, e)).collect();
        let gamma = ech
            .solve(fq, &pad(target, dimc.max(1)))
            .ok_or_else(|| DeformError::NoIso("Hodge difference is not in the image of H⁰(DR End)".into()))?;
        let coeffs: Vec<WittElem> = gamma.iter().map(|&x| fq.to_elem(r1, x)).collect();
        let z = if coeffs.is_empty() { Cochain::zero(0) } else { hb.combination(0, &coeffs)? };
        let cov = &self.high;
        let w = &self.base.weights;
        let mut gs = Vec::new();
        for i in 0..cov.num_charts() {
            let lr = cov.loc(&[i])?;
            let id = SMat::identity(lr, self.base.rank);
            let g = match z.get(&[i]) {
                Some(x) => id.sub(lr, &self.iota(&[i], x)),
                None => id,
            };
            let pinv = b.frames[i].inv(lr).ok_or(DeformError::BaseMismatch)?;
            let m = pinv.mul(lr, &g).mul(lr, &a.frames[i]);
            if !m.supported_in(|x, y| Pattern::Fil(0).allows(w[x] - w[y])) {
                return Err(DeformError::NoIso(format!("g does not carry Fil to Fil′ on chart {i}")));
            }
            gs.push(g);
        }
        self.check_endomorphism(&a.bare, &gs)?;
        Ok(gs)
    }
}

fn pad(mut v: Vec<F>, n: usize) -> Vec<F> {
    v.resize(n, 0);
    v
}

// ---------------- long exact sequence ----------------

#[derive(Clone, Debug, Serialize)]
pub struct E1Report {
    pub hodge_dims: Vec<usize>,
    pub dr_dims: Vec<usize>,
    pub degenerate: bool,
    pub inequality_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LesReport {
    pub fil_dims: Vec<usize>,
    pub dr_dims: Vec<usize>,
    pub c_dims: Vec<usize>,
    /// `ι: H^n(Fil⁰) → H^n(DR)`, `π: H^n(DR) → H^n(𝒞)`, `δ: H^n(𝒞) → H^{n+1}(Fil⁰)`,
    /// as row-per-source coordinate matrices over the residue field.
    pub iota: Vec<Vec<Vec<F>>>,
    pub pi: Vec<Vec<Vec<F>>>,
    pub delta: Vec<Vec<Vec<F>>>,
    pub exact: bool,
    pub e1: E1Report,
}

fn rank(h: &Hyper, m: &[Vec<F>]) -> usize {
    let n = m.first().map(|r| r.len()).unwrap_or(0);
    let mut e = Echelon::new(n.max(1));
    for r in m {
        e.insert(&h.fq, &pad(r.clone(), n.max(1)));
    }
    e.rank()
}

fn class_row(h: &Hyper, c: &Cochain) -> Result<Vec<F>, DeformError> {
    let r = h.ring().clone();
    Ok(h.coords(c)?.iter().map(|&e| h.fq.from_elem(&r, e)).collect())
}

/// The long exact sequence of `0 → Fil⁰DR End → DR End → 𝒞 → 0` in degrees
/// 0..=2 and the E₁ comparison with the graded Higgs side, for a level-1
/// filtered de Rham bundle.
pub fn les_maps(b: Arc<Bundle>) -> Result<LesReport, DeformError> {
    if b.cover.level() != 1 {
        return Err(DeformError::InvalidInput("les_maps works over the residue field".into()));
    }
    let hf = Hyper::new(end_complex(b.clone(), Variant::Fil(0))?)?;
    let hd = Hyper::new(end_complex(b.clone(), Variant::Full)?)?;
    let hc = Hyper::new(end_complex(b.clone(), Variant::QuotientC)?)?;
    let degs = 0..=2usize;
    let dims = |h: &Hyper| -> Result<Vec<usize>, DeformError> { degs.clone().map(|n| Ok(h.dim(n)?)).collect() };
    let (fil_dims, dr_dims, c_dims) = (dims(&hf)?, dims(&hd)?, dims(&hc)?);
    let mut iota = Vec::new();
    let mut pi = Vec::new();
    let mut delta = Vec::new();
    for n in degs.clone() {
        let mut mi = Vec::new();
        for z in &hf.cohomology(n)?.reps {
            mi.push(class_row(&hd, z)?);
        }
        let mut mp = Vec::new();
        for z in &hd.cohomology(n)?.reps {
            mp.push(class_row(&hc, z)?);
        }
        let mut md = Vec::new();
        for z in &hc.cohomology(n)?.reps {
            // H³ vanishes on a curve
            if n < 2 {
                md.push(class_row(&hf, &hd.total_differential(z))?);
            }
        }
        iota.push(mi);
        pi.push(mp);
        delta.push(md);
    }
    // exactness by rank arithmetic at every node
    let mut exact = true;
    for n in degs.clone() {
        let (ri, rp, rd) = (rank(&hf, &iota[n]), rank(&hd, &pi[n]), rank(&hf, &delta[n]));
        let rd_prev = if n == 0 { 0 } else { rank(&hf, &delta[n - 1]) };
        // at H^n(Fil⁰): ker ι = im δ_{n-1}
        exact &= fil_dims[n] - ri == rd_prev;
        // at H^n(DR): ker π = im ι
        exact &= dr_dims[n] - rp == ri;
        // at H^n(𝒞): ker δ = im π
        exact &= c_dims[n] - rd == rp;
    }
    let e1 = e1_report(b, &dr_dims)?;
    Ok(LesReport { fil_dims, dr_dims, c_dims, iota, pi, delta, exact, e1 })
}

/// `Σ_ℓ dim H^n(Gr^ℓ Higgs End(gr V))` against `dim H^n(DR End V)`.
pub fn e1_report(b: Arc<Bundle>, dr_dims: &[usize]) -> Result<E1Report, DeformError> {
    let e = Arc::new(gr_higgs(&b)?);
    let w = &b.weights;
    let diffs: Vec<i32> = w.iter().flat_map(|x| w.iter().map(move |y| x - y)).collect();
    let (lo, hi) = (*diffs.iter().min().unwrap(), *diffs.iter().max().unwrap() + 1);
    let mut hodge = vec![0; dr_dims.len()];
    for l in lo..=hi {
        let h = Hyper::new(end_complex(e.clone(), Variant::Gr(l))?)?;
        for (n, v) in hodge.iter_mut().enumerate() {
            *v += h.dim(n)?;
        }
    }
    let degenerate = hodge.as_slice() == dr_dims;
    let inequality_holds = hodge.iter().zip(dr_dims).all(|(a, b)| a >= b);
    Ok(E1Report { hodge_dims: hodge, dr_dims: dr_dims.to_vec(), degenerate, inequality_holds })
}
