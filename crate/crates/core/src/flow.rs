//! One-periodic Higgs–de Rham flows on curves: construction of the level-1
//! flow, verification, the periodicity defect, the ordinarity data, the
//! semilinear (Artin–Schreier type) fixed-point equation and the lifting step.
//!
//! All linear maps between class spaces (`π∘α`, `π∘β`, `Gr∘α + Gr∘β∘τ`) are
//! measured by running the actual pipeline `Ẽ ↦ Gr∘Fil∘C⁻¹(Ẽ)` on basis
//! perturbations, so every coordinate lives in the canonical bases of the
//! deformation engines.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::bundle::{coherent, coherent_hom, gr_higgs, Bundle, BundleError, Pattern};
use crate::cartier::{inverse_cartier, standard_frobenius, CartierError, FrobeniusLifting};
use crate::cech::{CechError, Classification, Hyper};
use crate::deform::{Check, Deform, DeformError, Group, HodgeLift, Lift};
use crate::field::{left_kernel, Echelon, Fq};
use crate::geometry::{Cover, GeoError, Report, Thickening};
use crate::poly::{Poly, Sec};
use crate::samples::{legendre_cover, legendre_higgs};
use crate::smat::SMat;
use crate::witt::{Ring, WittElem, WittError, WittRing, MAX_M};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Cartier(#[from] CartierError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Cech(#[from] CechError),
    #[error(transparent)]
    Witt(#[from] WittError),
    #[error("not in K: the Hodge filtration does not lift (obstruction {0:?})")]
    NotInK(Vec<WittElem>),
    #[error("not periodic: {0}")]
    NotPeriodic(String),
    #[error("no solution over extensions of degree <= {bound}")]
    NoSolutionWithinBound { bound: usize },
    #[error("the fixed point needs the base field extended by degree {degree}")]
    ExtensionRequired { degree: usize },
    #[error("hypothesis failure: {0}")]
    HypothesisFailure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("internal: {0}")]
    Internal(String),
}

type Res<T> = Result<T, FlowError>;

/// A one-periodic flow truncated at level `n`.
#[derive(Clone, Debug)]
pub struct HDFlow {
    /// `(E_n, θ_n)`, graded.
    pub higgs: Arc<Bundle>,
    /// `(V_n, ∇_n, Fil_n)` in adapted frames.
    pub derham: Arc<Bundle>,
    /// `V_n = C⁻¹(E_n).with_frames(frames)`.
    pub frames: Vec<SMat>,
    /// `Gr(V_n).with_frames(phi) = E_n`; block diagonal by weight.
    pub phi: Vec<SMat>,
    /// Chart Frobenius liftings on `X_{n+1}`.
    pub frob: FrobeniusLifting,
    /// The flow one level down.
    pub prev: Option<Arc<HDFlow>>,
}

impl HDFlow {
    pub fn level(&self) -> u32 {
        self.higgs.cover.level()
    }

    fn recompute_ic(&self) -> Res<Bundle> {
        let prev = self.prev.as_ref().map(|f| f.derham.as_ref());
        Ok(inverse_cartier(&self.higgs, prev, &self.frob)?.bundle)
    }
}

fn identity_frames(cov: &Cover, rank: usize) -> Vec<SMat> {
    (0..cov.num_charts()).map(|i| SMat::identity(cov.loc(&[i]).unwrap(), rank)).collect()
}

fn lift_frames(high: &Cover, frames: &[SMat]) -> Vec<SMat> {
    frames.iter().enumerate().map(|(i, m)| m.lift_from(high.loc(&[i]).unwrap())).collect()
}

fn mul_frames(cov: &Cover, a: &[SMat], b: &[SMat]) -> Vec<SMat> {
    a.iter().zip(b).enumerate().map(|(i, (x, y))| x.mul(cov.loc(&[i]).unwrap(), y)).collect()
}

// ---------------- level-1 flows ----------------

/// `(g, s, t)` with `g = s a + t b` monic, over a field.
fn xgcd(r: &Ring, a: &Poly, b: &Poly) -> (Poly, Poly, Poly) {
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (Poly::one(r), Poly::zero());
    let (mut t0, mut t1) = (Poly::zero(), Poly::one(r));
    while !r1.is_zero() {
        let (q, rem) = r0.divrem(r, &r1);
        let s2 = s0.sub(r, &q.mul(r, &s1));
        let t2 = t0.sub(r, &q.mul(r, &t1));
        r0 = r1;
        r1 = rem;
        s0 = s1;
        s1 = s2;
        t0 = t1;
        t1 = t2;
    }
    if r0.is_zero() {
        return (r0, s0, t0);
    }
    let c = r.inv(r0.lead()).unwrap();
    (r0.scale(r, c), s0.scale(r, c), t0.scale(r, c))
}

/// Adapted frames `[v | c w]` for a saturated line subbundle spanned by `v`.
fn frames_from_column(cov: &Cover, v: &[SMat], c: WittElem) -> Option<Vec<SMat>> {
    let r = &cov.ring;
    let mut out = Vec::new();
    for (i, col) in v.iter().enumerate() {
        let lr = cov.loc(&[i]).unwrap();
        let (a, b) = (&col.get(0, 0).num, &col.get(1, 0).num);
        let (g, s, t) = xgcd(r, a, b);
        if g.deg() != Some(0) {
            return None;
        }
        let w0 = lr.poly(t.neg(r).scale(r, c));
        let w1 = lr.poly(s.scale(r, c));
        out.push(SMat { rows: 2, cols: 2, d: vec![col.get(0, 0).clone(), w0, col.get(1, 0).clone(), w1] });
    }
    Some(out)
}

/// The level-1 flow through a graded Higgs bundle: computes `C⁻¹(E)` and a Hodge
/// filtration on it whose graded pieces are `E` exactly (after constant rescaling).
/// Supports equal weights (trivial filtration) and rank 2 with weights `[w+1, w]`
/// on charts without localization.
pub fn find_hodge_filtration(e: &Bundle, frob: &FrobeniusLifting) -> Res<HDFlow> {
    let cov = e.cover.clone();
    if cov.level() != 1 {
        return Err(FlowError::InvalidInput("expected a graded Higgs bundle at level 1".into()));
    }
    let ic = inverse_cartier(e, None, frob)?;
    let v = ic.bundle.with_weights(e.weights.clone(), false);
    let w = &e.weights;
    let flow = |derham: Bundle, frames: Vec<SMat>| HDFlow {
        higgs: Arc::new(e.clone()),
        derham: Arc::new(derham),
        phi: identity_frames(&cov, e.rank),
        frames,
        frob: frob.clone(),
        prev: None,
    };
    if w.iter().all(|&x| x == w[0]) {
        let gr = gr_higgs(&v)?;
        if !gr.same_data(e) {
            return Err(FlowError::NotPeriodic("the trivial filtration does not reproduce the Higgs field".into()));
        }
        let frames = identity_frames(&cov, e.rank);
        return Ok(flow(v, frames));
    }
    if e.rank != 2 || w[0] != w[1] + 1 {
        return Err(FlowError::Unsupported("Hodge filtration search handles rank 2 with weights [w+1, w]".into()));
    }
    if cov.charts.iter().any(|c| c.h.deg() != Some(0)) {
        return Err(FlowError::Unsupported("Hodge filtration search needs unlocalized charts".into()));
    }
    let r = cov.ring.clone();
    let top_trans: BTreeMap<(usize, usize), SMat> = e
        .trans
        .iter()
        .map(|(&k, m)| (k, SMat { rows: 1, cols: 1, d: vec![m.get(0, 0).clone()] }))
        .collect();
    let top = Arc::new(Bundle::new(cov.clone(), 1, top_trans, None, None, vec![0], false)?);
    let h = Hyper::new(coherent_hom(top, Arc::new(ic.bundle.clone()), 0, Pattern::All))?;
    let reps = h.cohomology(0)?.reps.clone();
    if reps.is_empty() {
        return Err(FlowError::NotPeriodic("no map from the top graded piece".into()));
    }
    let q = r.q();
    let total = q.pow(reps.len() as u32).min(4096);
    for idx in 1..total {
        let mut k = idx;
        let mut col: Vec<SMat> = vec![SMat::zeros(2, 1); cov.num_charts()];
        for z in &reps {
            let c = r.from_u64(k % q);
            k /= q;
            for (i, m) in col.iter_mut().enumerate() {
                let lr = cov.loc(&[i]).unwrap();
                if let Some(zi) = z.get(&[i]) {
                    *m = m.add(lr, &zi.scale_elem(lr, c));
                }
            }
        }
        let Some(frames) = frames_from_column(&cov, &col, r.one()) else { continue };
        let Ok(cand) = v.with_frames(&frames) else { continue };
        if !cand.check().ok {
            continue;
        }
        let gr = gr_higgs(&cand)?;
        if gr.trans != e.trans {
            continue;
        }
        let (eth, gth) = (e.higgs.as_ref().unwrap(), gr.higgs.as_ref().unwrap());
        let scale = match (eth[0].get(1, 0).num.is_zero(), gth[0].get(1, 0).num.is_zero()) {
            (true, true) => r.one(),
            (false, false) => r.mul(gth[0].get(1, 0).num.lead(), r.inv(eth[0].get(1, 0).num.lead()).unwrap()),
            _ => continue,
        };
        let Some(frames) = frames_from_column(&cov, &col, scale) else { continue };
        let Ok(cand) = v.with_frames(&frames) else { continue };
        if gr_higgs(&cand)?.same_data(e) && cand.check().ok {
            return Ok(flow(cand, frames));
        }
    }
    Err(FlowError::NotPeriodic("no Hodge filtration on C⁻¹(E) has graded pieces isomorphic to E".into()))
}

/// The Legendre flow over `P¹ \ {0, 1, λ, ∞}`: the uniformizing Higgs bundle,
/// its inverse Cartier transform (standard Frobenius liftings on the canonical
/// level-2 cover) and the Hodge filtration.
pub fn legendre_flow(ring2: &Ring, lambda: WittElem) -> Res<HDFlow> {
    if ring2.n != 2 {
        return Err(FlowError::InvalidInput("the Legendre flow is built from a level-2 ring".into()));
    }
    let x2 = Arc::new(legendre_cover(ring2, lambda)?);
    let frob = standard_frobenius(x2.clone())?;
    let x1 = Arc::new(x2.reduce_to(1)?);
    let l1 = ring2.reduce_level(lambda, 1)?;
    let e = legendre_higgs(x1, l1)?;
    find_hodge_filtration(&e, &frob)
}

/// `Σ_i binom((p−1)/2, i)² λ^i` in the residue field; zero exactly at the
/// supersingular parameters.
pub fn deuring(r: &Ring, lambda: WittElem) -> WittElem {
    let r1 = r.at_level(1).expect("level 1");
    let l = r.reduce_level(lambda, 1).unwrap_or(lambda);
    let k = (r.p - 1) / 2;
    let mut acc = r1.zero();
    let mut binom = 1u64;
    for i in 0..=k {
        let c = r1.from_u64(binom * binom % r.p);
        acc = r1.add(acc, r1.mul(c, r1.pow(l, i)));
        binom = binom * (k - i) / (i + 1);
    }
    acc
}

fn is_graded_iso(b: &Bundle, phi: &[SMat]) -> bool {
    let w = &b.weights;
    phi.iter().enumerate().all(|(i, m)| {
        let lr = b.cover.loc(&[i]).unwrap();
        m.supported_in(|a, c| w[a] == w[c]) && m.inv(lr).is_some()
    })
}

/// Recomputes `C⁻¹(E_n)` and checks the frames, the periodicity map and, at
/// higher levels, the compatibility with the flow mod `p^{n-1}`.
pub fn verify_flow(f: &HDFlow) -> Report {
    let mut rep = Report::new();
    if let Some(prev) = &f.prev {
        let sub = verify_flow(prev);
        for s in sub.failures {
            rep.fail(format!("level {}: {s}", prev.level()));
        }
        match f.derham.reduce_to(prev.level()) {
            Ok(red) if red.same_data(&prev.derham) => {}
            _ => rep.fail("de Rham term does not reduce to the previous level"),
        }
    }
    let c = f.derham.check();
    if !c.ok {
        rep.fail(format!("filtered de Rham bundle: {}", c.failures.join("; ")));
    }
    match f.recompute_ic() {
        Ok(ic) => match ic.with_weights(f.derham.weights.clone(), false).with_frames(&f.frames) {
            Ok(b) if b.same_data(&f.derham) => {}
            Ok(_) => rep.fail("C⁻¹(E) in the given frames differs from the de Rham term"),
            Err(e) => rep.fail(format!("frames are not invertible: {e}")),
        },
        Err(e) => rep.fail(format!("inverse Cartier transform failed: {e}")),
    }
    if !is_graded_iso(&f.derham, &f.phi) {
        rep.fail("periodicity map is not a graded isomorphism");
    } else {
        match gr_higgs(&f.derham).and_then(|g| g.with_frames(&f.phi)) {
            Ok(g) if g.same_data(&f.higgs) => {}
            Ok(_) => rep.fail("Gr(V) is not identified with E by the periodicity map"),
            Err(e) => rep.fail(format!("graded pieces: {e}")),
        }
    }
    rep
}

// ---------------- the lifting step ----------------

/// Result of running `C⁻¹`, Hodge lifting and `Gr` on one candidate `(Ẽ, X̂)`.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub higgs: Lift,
    pub frob: FrobeniusLifting,
    /// `C⁻¹(Ẽ)` in frames lifting those of `V_n`.
    pub bare: Arc<Bundle>,
    /// Hodge obstruction coordinates in `H¹(𝒞)`.
    pub obstruction: Vec<WittElem>,
    pub hodge: Option<HodgeLift>,
    /// `Δ = b(Ẽ, Gr∘C⁻¹(Ẽ))` when the obstruction vanishes.
    pub defect: Option<Vec<WittElem>>,
}

/// Deformation engines and the seed for lifting a flow from level `n` to `n+1`.
pub struct Engine {
    pub flow: Arc<HDFlow>,
    /// Graded Higgs lifts of `E_n` over `X_{n+1}`.
    pub de: Deform,
    /// Lifts of `(V_n, ∇_n, Fil_n)` over `X_{n+1}`.
    pub dv: Deform,
    pub seed: Lift,
    /// `X_{n+2}` before perturbation.
    pub x_hat: Arc<Cover>,
    /// `H¹(X₁, T(−log D))`.
    pub tvf: Hyper,
    frames_hi: Vec<SMat>,
}

fn zero_vec(r: &Ring, d: usize) -> Vec<WittElem> {
    vec![r.zero(); d]
}

fn unit_vec(r: &Ring, d: usize, k: usize) -> Vec<WittElem> {
    let mut v = zero_vec(r, d);
    v[k] = r.one();
    v
}

fn vadd(r: &Ring, a: &[WittElem], b: &[WittElem]) -> Vec<WittElem> {
    a.iter().zip(b).map(|(&x, &y)| r.add(x, y)).collect()
}

fn vsub(r: &Ring, a: &[WittElem], b: &[WittElem]) -> Vec<WittElem> {
    a.iter().zip(b).map(|(&x, &y)| r.sub(x, y)).collect()
}

fn vsigma(r: &Ring, a: &[WittElem]) -> Vec<WittElem> {
    a.iter().map(|&x| r.frobenius(x)).collect()
}

fn vsigma_inv(r: &Ring, a: &[WittElem]) -> Vec<WittElem> {
    a.iter().map(|&x| r.frobenius_inv(x)).collect()
}

/// `M x` for `M` given by columns.
fn apply_cols(r: &Ring, cols: &[Vec<WittElem>], rows: usize, x: &[WittElem]) -> Vec<WittElem> {
    let mut out = zero_vec(r, rows);
    for (c, &xc) in cols.iter().zip(x) {
        for (o, &m) in out.iter_mut().zip(c) {
            *o = r.add(*o, r.mul(m, xc));
        }
    }
    out
}

/// Some `y` with `M y = b` (`M` by columns), or `None`.
fn solve_cols(r: &Ring, cols: &[Vec<WittElem>], rows: usize, b: &[WittElem]) -> Option<Vec<WittElem>> {
    if rows == 0 {
        return Some(zero_vec(r, cols.len()));
    }
    let fq = Fq::from_ring(r);
    let mut ech = Echelon::with_tracking(rows, cols.len().max(1));
    for c in cols {
        ech.insert(&fq, &c.iter().map(|&x| fq.from_elem(r, x)).collect::<Vec<_>>());
    }
    let y = ech.solve(&fq, &b.iter().map(|&x| fq.from_elem(r, x)).collect::<Vec<_>>())?;
    Some(y.iter().take(cols.len()).map(|&v| fq.to_elem(r, v)).chain(std::iter::repeat(r.zero())).take(cols.len()).collect())
}

fn rank_of(r: &Ring, vecs: &[Vec<WittElem>], len: usize) -> usize {
    if len == 0 {
        return 0;
    }
    let fq = Fq::from_ring(r);
    let mut ech = Echelon::new(len);
    for v in vecs {
        ech.insert(&fq, &v.iter().map(|&x| fq.from_elem(r, x)).collect::<Vec<_>>());
    }
    ech.rank()
}

impl Engine {
    /// `seed` defaults to the graded lift glued from the obstruction witness and
    /// `x_hat` to the minimal coefficient lift of `X_{n+1}`.
    pub fn new(flow: Arc<HDFlow>, seed: Option<Bundle>, x_hat: Option<Cover>) -> Res<Engine> {
        if !flow.phi.iter().enumerate().all(|(i, m)| *m == SMat::identity(flow.higgs.cover.loc(&[i]).unwrap(), m.rows)) {
            return Err(FlowError::Unsupported("lifting expects the periodicity map folded into the frames".into()));
        }
        let n = flow.level();
        let xn = flow.higgs.cover.clone();
        let xn1 = flow.frob.cover.clone();
        let thick = Thickening::new(&xn, (*xn1).clone())?;
        let de = Deform::new(flow.higgs.clone(), &thick)?;
        let dv = Deform::new(flow.derham.clone(), &thick)?;
        let seed = match seed {
            Some(b) => {
                let l = Lift { group: Group::Graded, bundle: Arc::new(b) };
                de.verify_lift(&l)?;
                l
            }
            None => {
                let l = de.local_lifts(Group::Graded);
                let ob = de.obstruction_of(&l)?;
                de.lift_from_obstruction(&l, &ob)?
                    .ok_or_else(|| FlowError::HypothesisFailure("the graded Higgs bundle does not lift".into()))?
            }
        };
        let x_hat = match x_hat {
            Some(c) => {
                if !c.reduction_matches(&xn1) {
                    return Err(FlowError::InvalidInput("X̂ does not reduce to the flow's thickening".into()));
                }
                Arc::new(c)
            }
            None => Arc::new(xn1.lift_to(n + 2)?),
        };
        let tvf = Hyper::new(coherent(Arc::new(Bundle::trivial(de.one.clone(), 1)), -1))?;
        let frames_hi = lift_frames(&xn1, &flow.frames);
        Ok(Engine { flow, de, dv, seed, x_hat, tvf, frames_hi })
    }

    pub fn ring1(&self) -> &Ring {
        &self.de.one.ring
    }

    /// `(dim H¹(Gr⁰ End E), dim H¹(T(−log D)), dim H¹(𝒞))`.
    pub fn dims(&self) -> Res<(usize, usize, usize)> {
        Ok((self.de.hyper(Group::Graded)?.dim(1)?, self.tvf.dim(1)?, self.dv.hyper(Group::Hodge)?.dim(1)?))
    }

    /// `X̂ + η` with the chart Frobenius liftings that reduce to the flow's.
    pub fn frobenius_on(&self, eta: &[WittElem]) -> Res<FrobeniusLifting> {
        let z = self.tvf.combination(1, eta)?;
        let mut map = BTreeMap::new();
        for (s, m) in &z.comps {
            if s.len() == 2 {
                map.insert((s[0], s[1]), m.get(0, 0).clone());
            }
        }
        let cov = if map.is_empty() { (*self.x_hat).clone() } else { self.x_hat.perturbed(&map)? };
        let cov = Arc::new(cov);
        let std = standard_frobenius(cov.clone())?;
        let n1 = self.flow.frob.level();
        if std.reduce_to(n1)?.images == self.flow.frob.images {
            return Ok(std);
        }
        let images = self.flow.frob.images.iter().enumerate().map(|(i, s)| cov.loc(&[i]).unwrap().lift_from(s)).collect();
        let f = FrobeniusLifting::new(cov, images)?;
        let rep = f.validate();
        if !rep.ok {
            return Err(FlowError::InvalidInput(format!("cannot lift the flow's Frobenius liftings: {}", rep.failures.join("; "))));
        }
        Ok(f)
    }

    /// Runs the pipeline on `(seed + ε, X̂ + η)`.
    pub fn eval(&self, eps: &[WittElem], eta: &[WittElem]) -> Res<StepResult> {
        let higgs = self.de.act(&self.seed, eps)?;
        let frob = self.frobenius_on(eta)?;
        let ic = inverse_cartier(&higgs.bundle, Some(&self.flow.derham), &frob)?;
        let bare = ic.bundle.with_weights(self.flow.derham.weights.clone(), false).with_frames(&self.frames_hi)?;
        let bare = Arc::new(bare);
        let (ob, hodge) = self.dv.obstruction_hodge(bare.clone())?;
        let dc = self.dv.hyper(Group::Hodge)?.dim(1)?;
        let obstruction = ob
            .class
            .coords(dc, self.ring1().zero())
            .ok_or_else(|| FlowError::Internal("Hodge obstruction is not a cocycle".into()))?;
        let defect = match &hodge {
            Some(hl) => {
                let gr = Lift { group: Group::Graded, bundle: Arc::new(gr_higgs(&hl.filtered()?)?) };
                Some(self.de.torsor_diff(&higgs, &gr)?)
            }
            None => None,
        };
        Ok(StepResult { higgs, frob, bare, obstruction, hodge, defect })
    }

    /// The level-`n+1` flow through a step whose defect vanishes, with the
    /// periodicity isomorphism folded into the frames.
    pub fn flow_from(&self, step: &StepResult, hl: &HodgeLift) -> Res<HDFlow> {
        let filtered = hl.filtered()?;
        let gr = Lift { group: Group::Graded, bundle: Arc::new(gr_higgs(&filtered)?) };
        let tc = self.de.torsor_cochain(&step.higgs, &gr)?;
        let witness = match self.de.hyper(Group::Graded)?.classify(&tc)? {
            Classification::Coboundary { witness } => witness,
            _ => return Err(FlowError::NotPeriodic("Gr∘C⁻¹(Ẽ) is not isomorphic to Ẽ".into())),
        };
        let cov = &self.de.high;
        let r = &cov.ring;
        for sign in [r.one(), r.neg(r.one())] {
            let phi: Vec<SMat> = (0..cov.num_charts())
                .map(|i| {
                    let lr = cov.loc(&[i]).unwrap();
                    let id = SMat::identity(lr, self.flow.derham.rank);
                    match witness.get(&[i]) {
                        Some(w) => id.add(lr, &self.de.iota(&[i], w).scale_elem(lr, sign)),
                        None => id,
                    }
                })
                .collect();
            let derham = filtered.with_frames(&phi)?;
            if gr_higgs(&derham)?.same_data(&step.higgs.bundle) {
                let frames = mul_frames(cov, &mul_frames(cov, &self.frames_hi, &hl.frames), &phi);
                return Ok(HDFlow {
                    higgs: step.higgs.bundle.clone(),
                    derham: Arc::new(derham),
                    frames,
                    phi: identity_frames(cov, self.flow.derham.rank),
                    frob: step.frob.clone(),
                    prev: Some(self.flow.clone()),
                });
            }
        }
        Err(FlowError::Internal("the graded isomorphism from the witness does not match".into()))
    }
}

/// Periodicity defect `Δ` of a candidate `(Ẽ, X̂)` for a flow.
pub fn periodicity_defect(f: Arc<HDFlow>, e_tilde: &Bundle, x_hat: &Cover) -> Res<Vec<WittElem>> {
    let eng = Engine::new(f, Some(e_tilde.clone()), Some(x_hat.clone()))?;
    let (de, dt, _) = eng.dims()?;
    let st = eng.eval(&zero_vec(eng.ring1(), de), &zero_vec(eng.ring1(), dt))?;
    st.defect.ok_or(FlowError::NotInK(st.obstruction))
}

// ---------------- ordinarity ----------------

/// Linear data of the lifting problem; `π∘α(ε) = pi_alpha · σ(ε)` and likewise
/// for `β`. Matrices are stored by columns.
#[derive(Clone, Debug)]
pub struct OrdinarityData {
    pub dim_gr: usize,
    pub dim_t: usize,
    pub dim_c: usize,
    pub ob0: Vec<WittElem>,
    pub pi_alpha: Vec<Vec<WittElem>>,
    pub pi_beta: Vec<Vec<WittElem>>,
    /// Basis of `H = ker π∘(α, β)`, vectors `(ε, η)`.
    pub h_basis: Vec<Vec<WittElem>>,
    /// A point `(ε₀, η₀)` of `K` relative to the seed, if any.
    pub k_point: Option<(Vec<WittElem>, Vec<WittElem>)>,
    pub surjective: bool,
    /// `π∘β` surjective, the sufficient condition for surjectivity.
    pub beta_criterion: bool,
    /// `τ(e_k)` for the standard basis of `H¹(Gr⁰ End E)`.
    pub tau: Option<Vec<Vec<WittElem>>>,
    pub checks: Vec<Check>,
}

impl OrdinarityData {
    pub fn k_nonempty(&self) -> bool {
        self.k_point.is_some()
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.k_nonempty() && self.surjective
    }

    pub fn tau_of(&self, r: &Ring, eps: &[WittElem]) -> Vec<WittElem> {
        apply_cols(r, self.tau.as_ref().expect("τ exists"), self.dim_t, eps)
    }
}

pub fn ordinarity_check(eng: &Engine) -> Res<OrdinarityData> {
    let r = eng.ring1().clone();
    let (de, dt, dc) = eng.dims()?;
    let base = eng.eval(&zero_vec(&r, de), &zero_vec(&r, dt))?;
    let ob0 = base.obstruction.clone();
    let mut checks = Vec::new();
    let mut pi_alpha = Vec::new();
    for k in 0..de {
        let st = eng.eval(&unit_vec(&r, de, k), &zero_vec(&r, dt))?;
        pi_alpha.push(vsub(&r, &st.obstruction, &ob0));
    }
    let mut pi_beta = Vec::new();
    for k in 0..dt {
        let st = eng.eval(&zero_vec(&r, de), &unit_vec(&r, dt, k))?;
        pi_beta.push(vsub(&r, &st.obstruction, &ob0));
    }
    if r.m > 1 {
        let c = r.gen();
        let sc = |d: usize, k: usize| {
            let mut v = zero_vec(&r, d);
            v[k] = c;
            v
        };
        if de > 0 {
            let st = eng.eval(&sc(de, 0), &zero_vec(&r, dt))?;
            let pred = vadd(&r, &ob0, &apply_cols(&r, &pi_alpha, dc, &vsigma(&r, &sc(de, 0))));
            checks.push(Check { name: "π∘α is σ-semilinear".into(), ok: st.obstruction == pred });
        }
        if dt > 0 {
            let st = eng.eval(&zero_vec(&r, de), &sc(dt, 0))?;
            let pred = vadd(&r, &ob0, &apply_cols(&r, &pi_beta, dc, &vsigma(&r, &sc(dt, 0))));
            checks.push(Check { name: "π∘β is σ-semilinear".into(), ok: st.obstruction == pred });
        }
    }
    let mut od = ordinarity_from_matrices(&r, de, dt, dc, ob0, pi_alpha, pi_beta)?;
    checks.append(&mut od.checks);
    od.checks = checks;
    Ok(od)
}

/// The kernel `H`, a point of `K`, the surjectivity verdicts and `τ` from the
/// measured matrices of `π∘α` and `π∘β` (by columns).
pub fn ordinarity_from_matrices(
    r: &Ring,
    de: usize,
    dt: usize,
    dc: usize,
    ob0: Vec<WittElem>,
    pi_alpha: Vec<Vec<WittElem>>,
    pi_beta: Vec<Vec<WittElem>>,
) -> Res<OrdinarityData> {
    let r = r.clone();
    let mut checks = Vec::new();
    // H: σ(ε, η) in the kernel of [π∘α | π∘β]
    let all: Vec<Vec<WittElem>> = pi_alpha.iter().chain(&pi_beta).cloned().collect();
    let h_basis: Vec<Vec<WittElem>> = if dc == 0 {
        (0..de + dt).map(|k| unit_vec(&r, de + dt, k)).collect()
    } else {
        let fq = Fq::from_ring(&r);
        let rows: Vec<Vec<_>> = all.iter().map(|c| c.iter().map(|&x| fq.from_elem(&r, x)).collect()).collect();
        left_kernel(&fq, &rows, dc)
            .iter()
            .map(|k| vsigma_inv(&r, &k.iter().map(|&x| fq.to_elem(&r, x)).collect::<Vec<_>>()))
            .collect()
    };
    let neg_ob0: Vec<WittElem> = ob0.iter().map(|&x| r.neg(x)).collect();
    let k_point = match solve_cols(&r, &pi_beta, dc, &neg_ob0) {
        Some(y) => Some((zero_vec(&r, de), vsigma_inv(&r, &y))),
        None => solve_cols(&r, &all, dc, &neg_ob0).map(|y| {
            let x = vsigma_inv(&r, &y);
            (x[..de].to_vec(), x[de..].to_vec())
        }),
    };
    let proj: Vec<Vec<WittElem>> = h_basis.iter().map(|v| v[..de].to_vec()).collect();
    let surjective = rank_of(&r, &proj, de) == de;
    let beta_criterion = rank_of(&r, &pi_beta, dc) == dc;
    let tau = if surjective {
        let mut cols = Vec::new();
        for k in 0..de {
            let target: Vec<WittElem> = pi_alpha[k].iter().map(|&x| r.neg(x)).collect();
            let y = solve_cols(&r, &pi_beta, dc, &target)
                .ok_or_else(|| FlowError::Internal("τ: π∘α(e_k) is not in the image of π∘β".into()))?;
            cols.push(vsigma_inv(&r, &y));
        }
        Some(cols)
    } else {
        None
    };
    if let Some(t) = &tau {
        for k in 0..de {
            let z = vadd(&r, &pi_alpha[k], &apply_cols(&r, &pi_beta, dc, &vsigma(&r, &t[k])));
            checks.push(Check { name: format!("(e_{k}, τ(e_{k})) ∈ H"), ok: z.iter().all(|x| x.is_zero()) });
        }
    }
    Ok(OrdinarityData { dim_gr: de, dim_t: dt, dim_c: dc, ob0, pi_alpha, pi_beta, h_basis, k_point, surjective, beta_criterion, tau, checks })
}

// ---------------- Artin–Schreier ----------------

/// A solution of `−ε + A(ε) + Δ = 0` over `F_{q^e}`.
#[derive(Clone, Debug)]
pub struct AsSolution {
    pub degree: usize,
    /// `F_{q^e}` at level 1.
    pub field: Ring,
    /// Image of the generator of `F_q`.
    pub embedding: WittElem,
    pub epsilon: Vec<WittElem>,
}

fn embed(r: &Ring, ext: &Ring, g: WittElem, a: WittElem) -> WittElem {
    let mut acc = ext.zero();
    let mut pw = ext.one();
    for c in r.coeffs(a) {
        acc = ext.add(acc, ext.mul(ext.from_u64(c), pw));
        pw = ext.mul(pw, g);
    }
    acc
}

/// `F_{q^e}` with the image of the generator of `F_q`.
pub fn extension(r: &Ring, e: usize) -> Res<(Ring, WittElem)> {
    if e == 1 {
        return Ok((r.clone(), r.gen()));
    }
    let m = r.m * e;
    if m > MAX_M {
        return Err(FlowError::Unsupported(format!("residue degree {m} exceeds {MAX_M}")));
    }
    let p = r.p;
    let mut ext = None;
    for idx in 0..p.pow(m as u32) {
        let mut f: Vec<u64> = (0..m).map(|i| idx / p.pow(i as u32) % p).collect();
        f.push(1);
        if let Ok(x) = WittRing::new(p, 1, m, &f) {
            ext = Some(x);
            break;
        }
    }
    let ext = ext.ok_or_else(|| FlowError::Internal("no irreducible polynomial found".into()))?;
    let f = r.descriptor().f_res;
    let root = ext
        .elements()
        .into_iter()
        .find(|&x| {
            let mut acc = ext.zero();
            for &c in f.iter().rev() {
                acc = ext.add(ext.mul(acc, x), ext.from_u64(c));
            }
            acc.is_zero()
        })
        .ok_or_else(|| FlowError::Internal("residue polynomial has no root in the extension".into()))?;
    Ok((ext, root))
}

/// Solves `−ε + A σ(ε) + Δ = 0` (`A` by rows over `F_q`) by restriction of
/// scalars to `F_p`, trying `F_{q^e}` for `e = 1, 2, …` while `e·[F_q:F_p] <= 4`.
pub fn artin_schreier_solve(r: &Ring, a_rows: &[Vec<WittElem>], delta: &[WittElem]) -> Res<AsSolution> {
    if r.n != 1 {
        return Err(FlowError::InvalidInput("the equation lives over the residue field".into()));
    }
    let d = delta.len();
    let bound = MAX_M / r.m;
    let fp = WittRing::new(r.p, 1, 1, &[0, 1])?;
    let fpq = Fq::from_ring(&fp);
    for e in 1..=bound {
        let (ext, g) = extension(r, e)?;
        let am: Vec<Vec<WittElem>> = a_rows.iter().map(|row| row.iter().map(|&x| embed(r, &ext, g, x)).collect()).collect();
        let dl: Vec<WittElem> = delta.iter().map(|&x| embed(r, &ext, g, x)).collect();
        let op = |x: &[WittElem]| -> Vec<WittElem> {
            let sx = vsigma(&ext, x);
            (0..d)
                .map(|i| {
                    let mut acc = ext.neg(x[i]);
                    for j in 0..d {
                        acc = ext.add(acc, ext.mul(am[i][j], sx[j]));
                    }
                    acc
                })
                .collect()
        };
        let flat = |v: &[WittElem]| -> Vec<u16> { v.iter().flat_map(|&x| ext.coeffs(x)).map(|c| c as u16).collect() };
        let mm = ext.m;
        let n = d * mm;
        let mut basis = Vec::new();
        let mut ech = Echelon::with_tracking(n.max(1), n.max(1));
        for k in 0..d {
            for j in 0..mm {
                let mut v = zero_vec(&ext, d);
                let mut c = vec![0i64; mm];
                c[j] = 1;
                v[k] = ext.from_coeffs(&c);
                ech.insert(&fpq, &flat(&op(&v)));
                basis.push(v);
            }
        }
        let rhs: Vec<WittElem> = dl.iter().map(|&x| ext.neg(x)).collect();
        if let Some(y) = ech.solve(&fpq, &flat(&rhs)) {
            let mut eps = zero_vec(&ext, d);
            for (b, &c) in basis.iter().zip(&y) {
                if c != 0 {
                    eps = vadd(&ext, &eps, &b.iter().map(|&x| ext.mul(x, ext.from_u64(c as u64))).collect::<Vec<_>>());
                }
            }
            let check = vadd(&ext, &op(&eps), &dl);
            if !check.iter().all(|x| x.is_zero()) {
                return Err(FlowError::Internal("Artin–Schreier solution fails substitution".into()));
            }
            return Ok(AsSolution { degree: e, field: ext.clone(), embedding: g, epsilon: eps });
        }
    }
    Err(FlowError::NoSolutionWithinBound { bound })
}

// ---------------- lifting ----------------

#[derive(Clone, Debug)]
pub struct LiftOutcome {
    pub flow: HDFlow,
    pub epsilon: Vec<WittElem>,
    pub eta: Vec<WittElem>,
    pub extension_degree: usize,
    pub defect: Vec<WittElem>,
    pub ordinarity: OrdinarityData,
    /// `A` with `Δ(ε) = Δ₀ − ε + A σ(ε)` along `H`, by columns.
    pub a_matrix: Vec<Vec<WittElem>>,
    pub checks: Vec<Check>,
}

/// Lifts a flow from level `n` to `n+1`: finds a point of `K`, solves the
/// fixed-point equation and verifies that the recomputed defect is zero.
pub fn lift_flow(eng: &Engine) -> Res<LiftOutcome> {
    let r = eng.ring1().clone();
    let od = ordinarity_check(eng)?;
    let Some((e0, h0)) = od.k_point.clone() else {
        return Err(FlowError::HypothesisFailure(
            "K is empty: no lift of the thickening and Higgs bundle makes the Hodge filtration liftable".into(),
        ));
    };
    if !od.surjective {
        return Err(FlowError::HypothesisFailure("the projection from H to H¹(Gr⁰ End E) is not surjective".into()));
    }
    let de = od.dim_gr;
    let st0 = eng.eval(&e0, &h0)?;
    let d0 = st0.defect.clone().ok_or_else(|| FlowError::Internal("the K point has a nonzero obstruction".into()))?;
    let mut checks = vec![Check { name: "K point has vanishing Hodge obstruction".into(), ok: true }];
    let mut a_cols = Vec::new();
    for k in 0..de {
        let ek = unit_vec(&r, de, k);
        let st = eng.eval(&vadd(&r, &e0, &ek), &vadd(&r, &h0, &od.tau_of(&r, &ek)))?;
        let dk = st.defect.ok_or_else(|| FlowError::Internal("H direction left K".into()))?;
        a_cols.push(vadd(&r, &vsub(&r, &dk, &d0), &ek));
    }
    if r.m > 1 && de > 0 {
        let mut x = zero_vec(&r, de);
        x[0] = r.gen();
        let st = eng.eval(&vadd(&r, &e0, &x), &vadd(&r, &h0, &od.tau_of(&r, &x)))?;
        let pred = vadd(&r, &vsub(&r, &d0, &x), &apply_cols(&r, &a_cols, de, &vsigma(&r, &x)));
        checks.push(Check { name: "defect is affine σ-semilinear along H".into(), ok: st.defect.as_ref() == Some(&pred) });
    }
    let a_rows: Vec<Vec<WittElem>> = (0..de).map(|i| (0..de).map(|j| a_cols[j][i]).collect()).collect();
    let sol = artin_schreier_solve(&r, &a_rows, &d0)?;
    if sol.degree > 1 {
        return Err(FlowError::ExtensionRequired { degree: sol.degree });
    }
    let eps = vadd(&r, &e0, &sol.epsilon);
    let eta = vadd(&r, &h0, &od.tau_of(&r, &sol.epsilon));
    let st = eng.eval(&eps, &eta)?;
    let defect = st.defect.clone().ok_or_else(|| FlowError::Internal("solution left K".into()))?;
    let zero = defect.iter().all(|x| x.is_zero());
    checks.push(Check { name: "recomputed periodicity defect is zero".into(), ok: zero });
    if !zero {
        return Err(FlowError::Internal(format!("defect after solving is {defect:?}")));
    }
    let hl = st.hodge.as_ref().unwrap();
    let flow = eng.flow_from(&st, hl)?;
    let rep = verify_flow(&flow);
    checks.push(Check { name: "lifted flow verifies".into(), ok: rep.ok });
    if !rep.ok {
        return Err(FlowError::Internal(rep.failures.join("; ")));
    }
    Ok(LiftOutcome {
        flow,
        epsilon: eps,
        eta,
        extension_degree: sol.degree,
        defect,
        ordinarity: od,
        a_matrix: a_cols,
        checks,
    })
}

/// Isomorphism between two flow lifts with the same initial Higgs term.
#[derive(Clone, Debug)]
pub struct UniqueIso {
    /// `g_i = 1 − ι γ_i`, `γ ∈ H⁰(DR End)`: an automorphism of `C⁻¹(Ẽ)` with `g Fil_a = Fil_b`.
    pub automorphism: Vec<SMat>,
    /// Filtered frames `h` with `a.derham.with_frames(h) = b.derham`.
    pub iso: Vec<SMat>,
}

/// Connects two flow lifts sharing their initial term through the Hodge
/// uniqueness isomorphism and checks that both graded pieces are that term.
pub fn unique_lift_check(a: &HDFlow, b: &HDFlow) -> Res<UniqueIso> {
    let (pa, pb) = match (&a.prev, &b.prev) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(FlowError::InvalidInput("both flows must be lifts of a lower level".into())),
    };
    if !pa.derham.same_data(&pb.derham) || !pa.higgs.same_data(&pb.higgs) {
        return Err(FlowError::InvalidInput("the lifts start from different flows".into()));
    }
    if !a.higgs.same_data(&b.higgs) {
        return Err(FlowError::InvalidInput("the lifts have different initial Higgs terms".into()));
    }
    if !a.frob.cover.same_as(&b.frob.cover) || a.frob.images != b.frob.images {
        return Err(FlowError::InvalidInput("the lifts use different Frobenius liftings".into()));
    }
    let xn1 = a.higgs.cover.clone();
    let thick = Thickening::new(&pa.higgs.cover, (*xn1).clone())?;
    let dv = Deform::new(pa.derham.clone(), &thick)?;
    let ic = inverse_cartier(&a.higgs, Some(&pa.derham), &a.frob)?;
    let fh = lift_frames(&xn1, &pa.frames);
    let bare = Arc::new(ic.bundle.with_weights(pa.derham.weights.clone(), false).with_frames(&fh)?);
    let inv = |i: usize, m: &SMat| -> Res<SMat> {
        m.inv(xn1.loc(&[i]).unwrap()).ok_or_else(|| FlowError::Internal("frames not invertible".into()))
    };
    let rel = |f: &HDFlow| -> Res<Vec<SMat>> {
        fh.iter().zip(&f.frames).enumerate().map(|(i, (p, q))| Ok(inv(i, p)?.mul(xn1.loc(&[i]).unwrap(), q))).collect()
    };
    let (ra, rb) = (rel(a)?, rel(b)?);
    let ha = HodgeLift { bare: bare.clone(), frames: ra.clone() };
    let hb = HodgeLift { bare, frames: rb.clone() };
    let gs = dv.hodge_uniqueness_iso(&ha, &hb)?;
    let mut iso = Vec::new();
    for i in 0..xn1.num_charts() {
        let lr = xn1.loc(&[i]).unwrap();
        iso.push(inv(i, &ra[i])?.mul(lr, &inv(i, &gs[i])?).mul(lr, &rb[i]));
    }
    for f in [a, b] {
        if !gr_higgs(&f.derham)?.with_frames(&f.phi)?.same_data(&a.higgs) {
            return Err(FlowError::NotPeriodic("graded pieces differ from the initial term".into()));
        }
    }
    Ok(UniqueIso { automorphism: gs, iso })
}

/// `ζ ↦ Σ c_k` helper for callers that build `η` cochains by hand.
pub fn eta_sections(eng: &Engine, eta: &[WittElem]) -> Res<BTreeMap<(usize, usize), Sec>> {
    let z = eng.tvf.combination(1, eta)?;
    Ok(z.comps.iter().filter(|(s, _)| s.len() == 2).map(|(s, m)| ((s[0], s[1]), m.get(0, 0).clone())).collect())
}
