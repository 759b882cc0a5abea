//! Vector bundles with log connections, Higgs fields, filtrations and
//! gradings on a chart cover, together with the twisted `End` complexes.
//!
//! Conventions: column vectors, `v_j = g_ij v_i` on `U_ij`; a connection is
//! `∇ = d + A_i ω_i` on chart `i`, so that on `U_ij`
//! `κ A_j = g A_i g⁻¹ − δ_i(g) g⁻¹` with `ω_j = κ ω_i` and `δ_i(f) = f' G_i`.
//! Filtrations and gradings live in adapted frames: column `a` has weight
//! `w(a)`, and `Fil^ℓ` is spanned by the columns of weight `≥ ℓ`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::parse_rational;
use crate::geometry::{Cover, GeoError, Report, Simplex};
use crate::poly::{LocRing, Sec};
use crate::smat::SMat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("cover mismatch")]
    CoverMismatch,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("variant mismatch: {0}")]
    VariantMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug)]
pub struct Bundle {
    pub cover: Arc<Cover>,
    pub rank: usize,
    /// `g_ij` on `U_ij` for `i < j`.
    pub trans: BTreeMap<(usize, usize), SMat>,
    trans_inv: BTreeMap<(usize, usize), SMat>,
    /// Connection matrices, coefficients of `ω_i`.
    pub conn: Option<Vec<SMat>>,
    /// Higgs fields, coefficients of `ω_i`.
    pub higgs: Option<Vec<SMat>>,
    /// Adapted weights of the filtration (or grading degrees when `graded`).
    pub weights: Vec<i32>,
    pub graded: bool,
}

/// Allowed positions of a `Hom(V1, V2)` matrix in adapted frames, in terms of
/// `d = w2(a) − w1(b)` for entry `(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    All,
    /// `d ≥ ℓ`
    Fil(i32),
    /// `d = ℓ`
    Gr(i32),
    /// `d < ℓ`: the quotient by `Fil^ℓ`, represented by the complementary entries.
    Quot(i32),
}

impl Pattern {
    pub fn allows(&self, d: i32) -> bool {
        match *self {
            Pattern::All => true,
            Pattern::Fil(l) => d >= l,
            Pattern::Gr(l) => d == l,
            Pattern::Quot(l) => d < l,
        }
    }
}

impl Bundle {
    pub fn new(
        cover: Arc<Cover>,
        rank: usize,
        trans: BTreeMap<(usize, usize), SMat>,
        conn: Option<Vec<SMat>>,
        higgs: Option<Vec<SMat>>,
        weights: Vec<i32>,
        graded: bool,
    ) -> Result<Bundle, BundleError> {
        let k = cover.num_charts();
        let mut trans_inv = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                let g = trans
                    .get(&(i, j))
                    .ok_or_else(|| BundleError::InvalidInput(format!("missing transition ({i}, {j})")))?;
                if g.rows != rank || g.cols != rank {
                    return Err(BundleError::InvalidInput(format!("transition ({i}, {j}) has wrong shape")));
                }
                let lr = cover.loc(&[i, j])?;
                let gi = g
                    .inv(lr)
                    .ok_or_else(|| BundleError::InvalidInput(format!("transition ({i}, {j}) is not invertible")))?;
                trans_inv.insert((i, j), gi);
            }
        }
        for (name, fld) in [("connection", &conn), ("higgs field", &higgs)] {
            if let Some(v) = fld {
                if v.len() != k || v.iter().any(|m| m.rows != rank || m.cols != rank) {
                    return Err(BundleError::InvalidInput(format!("{name} has wrong shape")));
                }
            }
        }
        if weights.len() != rank {
            return Err(BundleError::InvalidInput("weights must have one entry per column".into()));
        }
        Ok(Bundle { cover, rank, trans, trans_inv, conn, higgs, weights, graded })
    }

    /// Rank `r` trivial bundle with `∇ = d`, zero weights.
    pub fn trivial(cover: Arc<Cover>, rank: usize) -> Bundle {
        let k = cover.num_charts();
        let mut trans = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                trans.insert((i, j), SMat::identity(cover.loc(&[i, j]).unwrap(), rank));
            }
        }
        let conn = Some((0..k).map(|_| SMat::zeros(rank, rank)).collect());
        Bundle::new(cover, rank, trans, conn, None, vec![0; rank], false).unwrap()
    }

    pub fn ring_level(&self) -> u32 {
        self.cover.level()
    }

    /// Transition from the frame of chart `a` to the frame of chart `b` on `U_{ab}`.
    pub fn g(&self, a: usize, b: usize) -> SMat {
        let lr = self.cover.loc(&[a.min(b)]).unwrap();
        if a == b {
            SMat::identity(lr, self.rank)
        } else if a < b {
            self.trans[&(a, b)].clone()
        } else {
            self.trans_inv[&(b, a)].clone()
        }
    }

    /// Transition `a → b` restricted to `U_τ`.
    pub fn g_on(&self, tau: &[usize], a: usize, b: usize) -> SMat {
        let lr = self.cover.loc(tau).unwrap();
        if a == b {
            return SMat::identity(lr, self.rank);
        }
        let src = [a.min(b), a.max(b)];
        self.restrict_mat(&src, tau, &self.g(a, b))
    }

    pub fn restrict_mat(&self, sigma: &[usize], tau: &[usize], m: &SMat) -> SMat {
        if sigma == tau {
            return m.clone();
        }
        m.map(|s| self.cover.restrict(sigma, tau, s).expect("restriction"))
    }

    /// `A_a` restricted to `U_τ`, where `a = τ_0`.
    pub fn conn_on(&self, tau: &[usize]) -> Option<SMat> {
        let a = tau[0];
        self.conn.as_ref().map(|c| self.restrict_mat(&[a], tau, &c[a]))
    }

    pub fn higgs_on(&self, tau: &[usize]) -> Option<SMat> {
        let a = tau[0];
        self.higgs.as_ref().map(|c| self.restrict_mat(&[a], tau, &c[a]))
    }

    pub fn has_filtration(&self) -> bool {
        self.weights.iter().any(|&w| w != self.weights[0])
    }

    /// Applies new adapted frames `P_i` (columns are the new basis in old coordinates).
    pub fn with_frames(&self, frames: &[SMat]) -> Result<Bundle, BundleError> {
        let cov = &self.cover;
        let k = cov.num_charts();
        let mut inv = Vec::new();
        for (i, p) in frames.iter().enumerate() {
            inv.push(p.inv(cov.loc(&[i])?).ok_or_else(|| BundleError::InvalidInput(format!("frame {i} is not invertible")))?);
        }
        let mut trans = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s)?;
                let pi = self.restrict_mat(&[i], &s, &frames[i]);
                let pj_inv = self.restrict_mat(&[j], &s, &inv[j]);
                trans.insert((i, j), pj_inv.mul(lr, &self.trans[&(i, j)]).mul(lr, &pi));
            }
        }
        let conj = |ms: &Vec<SMat>, with_d: bool| -> Vec<SMat> {
            (0..k)
                .map(|i| {
                    let lr = cov.loc(&[i]).unwrap();
                    let mut a = inv[i].mul(lr, &ms[i]).mul(lr, &frames[i]);
                    if with_d {
                        let dp = frames[i].derivation(lr, &cov.charts[i].g(&cov.ring));
                        a = a.add(lr, &inv[i].mul(lr, &dp));
                    }
                    a
                })
                .collect()
        };
        let conn = self.conn.as_ref().map(|c| conj(c, true));
        let higgs = self.higgs.as_ref().map(|c| conj(c, false));
        Bundle::new(cov.clone(), self.rank, trans, conn, higgs, self.weights.clone(), self.graded)
    }

    pub fn with_weights(&self, weights: Vec<i32>, graded: bool) -> Bundle {
        let mut b = self.clone();
        b.weights = weights;
        b.graded = graded;
        b
    }

    pub fn mask(&self, p: Pattern) -> impl Fn(usize, usize) -> bool + '_ {
        move |a, b| p.allows(self.weights[a] - self.weights[b])
    }

    pub fn check(&self) -> Report {
        check_bundle(self)
    }

    /// Re-expresses all data over another cover with the same charts
    /// (reduction or lift of the base).
    pub fn transport(&self, cover: Arc<Cover>) -> Result<Bundle, BundleError> {
        let k = cover.num_charts();
        if k != self.cover.num_charts() {
            return Err(BundleError::CoverMismatch);
        }
        let conv = |s: &[usize], m: &SMat| -> SMat {
            let hi = self.cover.loc(s).unwrap();
            let lo = cover.loc(s).unwrap();
            if lo.ring.n <= hi.ring.n {
                m.reduce_to(hi, lo)
            } else {
                m.lift_from(lo)
            }
        };
        let trans = self.trans.iter().map(|(&(i, j), m)| ((i, j), conv(&[i, j], m))).collect();
        let conn = self.conn.as_ref().map(|c| c.iter().enumerate().map(|(i, m)| conv(&[i], m)).collect());
        let higgs = self.higgs.as_ref().map(|c| c.iter().enumerate().map(|(i, m)| conv(&[i], m)).collect());
        Bundle::new(cover, self.rank, trans, conn, higgs, self.weights.clone(), self.graded)
    }

    /// Reduction to level `n` (cover reduced coefficientwise).
    pub fn reduce_to(&self, n: u32) -> Result<Bundle, BundleError> {
        let c = Arc::new(self.cover.reduce_to(n)?);
        self.transport(c)
    }

    /// Exact equality of all data.
    pub fn same_data(&self, o: &Bundle) -> bool {
        self.rank == o.rank
            && self.trans == o.trans
            && self.conn == o.conn
            && self.higgs == o.higgs
            && self.weights == o.weights
    }
}

/// Verifies cocycle, compatibility, Griffiths and grading conditions.
pub fn check_bundle(b: &Bundle) -> Report {
    let mut rep = Report::new();
    let cov = &b.cover;
    let k = cov.num_charts();
    let r = b.rank;
    let id = |s: &[usize]| SMat::identity(cov.loc(s).unwrap(), r);
    for s in cov.simplices(3) {
        if s.len() != 3 {
            continue;
        }
        let lr = cov.loc(&s).unwrap();
        let (i, j, kk) = (s[0], s[1], s[2]);
        let lhs = b.g_on(&s, i, kk);
        let rhs = b.g_on(&s, j, kk).mul(lr, &b.g_on(&s, i, j));
        if lhs != rhs {
            rep.fail(format!("transition cocycle fails on {:?}", ids(cov, &s)));
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            let s = [i, j];
            let lr = cov.loc(&s).unwrap();
            if b.g(i, j).mul(lr, &b.g(j, i)) != id(&s) {
                rep.fail(format!("transition inverse mismatch on {:?}", ids(cov, &s)));
            }
        }
    }
    let fil_mask = b.mask(Pattern::Fil(0));
    let gr_mask = b.mask(Pattern::Gr(0));
    for (&(i, j), g) in &b.trans {
        if b.graded {
            if !g.supported_in(&gr_mask) {
                rep.fail(format!("transition on {:?} does not preserve the grading", ids(cov, &[i, j])));
            }
        } else if !g.supported_in(&fil_mask) {
            rep.fail(format!("transition on {:?} does not preserve the filtration", ids(cov, &[i, j])));
        }
    }
    if let Some(conn) = &b.conn {
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s).unwrap();
                let g = b.g(i, j);
                let gi = b.g(j, i);
                let ai = b.restrict_mat(&[i], &s, &conn[i]);
                let aj = b.restrict_mat(&[j], &s, &conn[j]);
                let kap = match cov.kappa(&s, j) {
                    Ok(x) => x,
                    Err(e) => {
                        rep.fail(format!("{e}"));
                        continue;
                    }
                };
                let lhs = aj.scale(lr, &kap);
                let dg = g.derivation(lr, &cov.charts[i].g(&cov.ring));
                let rhs = g.mul(lr, &ai).mul(lr, &gi).sub(lr, &dg.mul(lr, &gi));
                if lhs != rhs {
                    rep.fail(format!("connection is not compatible with the transition on {:?}", ids(cov, &s)));
                }
            }
        }
        let gm = b.mask(Pattern::Fil(-1));
        for (i, a) in conn.iter().enumerate() {
            if !a.supported_in(&gm) {
                rep.fail(format!("Griffiths transversality fails on chart {}", cov.charts[i].id));
            }
        }
    }
    if let Some(th) = &b.higgs {
        for i in 0..k {
            for j in i + 1..k {
                let s = [i, j];
                let lr = cov.loc(&s).unwrap();
                let ti = b.restrict_mat(&[i], &s, &th[i]);
                let tj = b.restrict_mat(&[j], &s, &th[j]);
                let kap = cov.kappa(&s, j).unwrap();
                let lhs = tj.scale(lr, &kap);
                let rhs = b.g(i, j).mul(lr, &ti).mul(lr, &b.g(j, i));
                if lhs != rhs {
                    rep.fail(format!("Higgs field is not compatible with the transition on {:?}", ids(cov, &s)));
                }
            }
        }
        if b.graded {
            let gm = b.mask(Pattern::Gr(-1));
            for (i, t) in th.iter().enumerate() {
                if !t.supported_in(&gm) {
                    rep.fail(format!("Higgs field does not lower the grading by one on chart {}", cov.charts[i].id));
                }
            }
        }
    }
    rep
}

fn ids(c: &Cover, s: &[usize]) -> Vec<String> {
    s.iter().map(|&i| c.charts[i].id.clone()).collect()
}

/// `Hom(B1, B2)` with the induced filtration and connection; the frame of
/// `Hom` is `E_{ab}` in row-major order, weight `w2(a) − w1(b)`.
pub fn hom_bundle(b1: &Bundle, b2: &Bundle) -> Result<Bundle, BundleError> {
    if !Arc::ptr_eq(&b1.cover, &b2.cover) && !b1.cover.same_as(&b2.cover) {
        return Err(BundleError::CoverMismatch);
    }
    let cov = b1.cover.clone();
    let (r1, r2) = (b1.rank, b2.rank);
    let n = r1 * r2;
    let idx = |a: usize, b: usize| a * r1 + b;
    // f ↦ L f R as an n×n matrix on vec(f)
    let kron = |lr: &LocRing, l: &SMat, rm: &SMat| -> SMat {
        let mut m = SMat::zeros(n, n);
        for a in 0..r2 {
            for b in 0..r1 {
                for c in 0..r2 {
                    for d in 0..r1 {
                        // (L E_cd R)_{ab} = L_ac R_db
                        let v = lr.mul(l.get(a, c), rm.get(d, b));
                        if !v.num.is_zero() {
                            m.set(idx(a, b), idx(c, d), v);
                        }
                    }
                }
            }
        }
        m
    };
    let k = cov.num_charts();
    let mut trans = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            let lr = cov.loc(&[i, j])?;
            trans.insert((i, j), kron(lr, &b2.g(i, j), &b1.g(j, i)));
        }
    }
    let lin = |x2: &Option<Vec<SMat>>, x1: &Option<Vec<SMat>>| -> Option<Vec<SMat>> {
        match (x2, x1) {
            (Some(m2), Some(m1)) => Some(
                (0..k)
                    .map(|i| {
                        let lr = cov.loc(&[i]).unwrap();
                        let i2 = SMat::identity(lr, r2);
                        let i1 = SMat::identity(lr, r1);
                        kron(lr, &m2[i], &i1).sub(lr, &kron(lr, &i2, &m1[i]))
                    })
                    .collect(),
            ),
            _ => None,
        }
    };
    let conn = lin(&b2.conn, &b1.conn);
    let higgs = lin(&b2.higgs, &b1.higgs);
    let mut weights = vec![0; n];
    for a in 0..r2 {
        for b in 0..r1 {
            weights[idx(a, b)] = b2.weights[a] - b1.weights[b];
        }
    }
    Bundle::new(cov, n, trans, conn, higgs, weights, b1.graded && b2.graded)
}

pub fn dual(b: &Bundle) -> Result<Bundle, BundleError> {
    let mut one = Bundle::trivial(b.cover.clone(), 1);
    if b.higgs.is_some() {
        one.higgs = Some((0..b.cover.num_charts()).map(|_| SMat::zeros(1, 1)).collect());
    }
    one.graded = b.graded;
    hom_bundle(b, &one)
}

/// Associated graded Higgs bundle in the same adapted frames.
pub fn gr_higgs(b: &Bundle) -> Result<Bundle, BundleError> {
    let rep = check_bundle(b);
    if !rep.ok {
        return Err(BundleError::InvalidInput(rep.failures.join("; ")));
    }
    let conn = b.conn.as_ref().ok_or_else(|| BundleError::InvalidInput("no connection".into()))?;
    let gr0 = b.mask(Pattern::Gr(0));
    let grm = b.mask(Pattern::Gr(-1));
    let trans = b.trans.iter().map(|(k, g)| (*k, g.project(&gr0))).collect();
    let higgs = Some(conn.iter().map(|a| a.project(&grm)).collect());
    Bundle::new(b.cover.clone(), b.rank, trans, None, higgs, b.weights.clone(), true)
}

// ---------------- complexes ----------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    /// `f ↦ δf + A₂ f − f A₁`
    DeRham,
    /// `f ↦ θ₂ f − f θ₁`
    Higgs,
    /// A single sheaf `Hom(V1, V2) ⊗ Ω^{twist}` in degree 0.
    Coherent { twist: i32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Full,
    Fil(i32),
    Gr(i32),
    QuotientC,
}

/// A two-term (or one-term) complex of `Hom(V1, V2)`-valued log forms on a curve.
#[derive(Clone, Debug)]
pub struct SheafComplex {
    pub tag: String,
    pub kind: Kind,
    pub src: Arc<Bundle>,
    pub dst: Arc<Bundle>,
    pub patterns: Vec<Pattern>,
}

impl SheafComplex {
    pub fn cover(&self) -> &Arc<Cover> {
        &self.src.cover
    }

    pub fn nterms(&self) -> usize {
        self.patterns.len()
    }

    pub fn rows(&self) -> usize {
        self.dst.rank
    }

    pub fn cols(&self) -> usize {
        self.src.rank
    }

    pub fn allowed(&self, q: usize, a: usize, b: usize) -> bool {
        self.patterns[q].allows(self.dst.weights[a] - self.src.weights[b])
    }

    pub fn positions(&self, q: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.rows() {
            for b in 0..self.cols() {
                if self.allowed(q, a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn twist(&self, q: usize) -> i32 {
        match self.kind {
            Kind::Coherent { twist } => twist,
            _ => q as i32,
        }
    }

    pub fn project(&self, q: usize, f: &SMat) -> SMat {
        f.project(|a, b| self.allowed(q, a, b))
    }

    /// Matrices `(L, R, κ^t)` with `f_τ = κ^t · L ρ(f_σ) R`.
    pub fn conj_data(&self, q: usize, sigma: &[usize], tau: &[usize]) -> (SMat, SMat, Sec) {
        let cov = self.cover();
        let lr = cov.loc(tau).unwrap();
        let (a, b) = (sigma[0], tau[0]);
        let l = self.dst.g_on(tau, a, b);
        let r = self.src.g_on(tau, b, a);
        let t = self.twist(q);
        let kap = if a == b || t == 0 {
            lr.one()
        } else {
            let k = cov.kappa(tau, a).unwrap();
            lr.pow(&k, t as i64).expect("κ is a unit")
        };
        (l, r, kap)
    }

    /// Restriction of a degree-`q` section from `U_σ` (frame `σ_0`) to `U_τ` (frame `τ_0`).
    pub fn restrict(&self, q: usize, sigma: &[usize], tau: &[usize], f: &SMat) -> SMat {
        let cov = self.cover();
        let lr = cov.loc(tau).unwrap();
        let rf = f.map(|s| cov.restrict(sigma, tau, s).expect("restriction"));
        if sigma[0] == tau[0] {
            return self.project(q, &rf);
        }
        let (l, r, k) = self.conj_data(q, sigma, tau);
        self.project(q, &l.mul(lr, &rf).mul(lr, &r).scale(lr, &k))
    }

    /// The differential from degree 0 to degree 1 on `U_σ`.
    pub fn diff(&self, sigma: &Simplex, f: &SMat) -> SMat {
        let cov = self.cover();
        let lr = cov.loc(sigma).unwrap();
        let out = match self.kind {
            Kind::Coherent { .. } => return SMat::zeros(self.rows(), self.cols()),
            Kind::DeRham => {
                let a2 = self.dst.conn_on(sigma).expect("connection");
                let a1 = self.src.conn_on(sigma).expect("connection");
                let d = f.derivation(lr, &cov.charts[sigma[0]].g(&cov.ring));
                d.add(lr, &a2.mul(lr, f)).sub(lr, &f.mul(lr, &a1))
            }
            Kind::Higgs => {
                let t2 = self.dst.higgs_on(sigma).expect("higgs field");
                let t1 = self.src.higgs_on(sigma).expect("higgs field");
                t2.mul(lr, f).sub(lr, &f.mul(lr, &t1))
            }
        };
        if self.nterms() < 2 {
            return SMat::zeros(self.rows(), self.cols());
        }
        self.project(1, &out)
    }
}

/// `Hom(B1, B2)` twisted complex with the given variant.
pub fn hom_complex(b1: Arc<Bundle>, b2: Arc<Bundle>, variant: Variant, higgs: bool) -> Result<SheafComplex, BundleError> {
    if !Arc::ptr_eq(&b1.cover, &b2.cover) && !b1.cover.same_as(&b2.cover) {
        return Err(BundleError::CoverMismatch);
    }
    let kind = if higgs { Kind::Higgs } else { Kind::DeRham };
    match (kind, variant) {
        (Kind::Higgs, Variant::Fil(_)) | (Kind::Higgs, Variant::QuotientC) => {
            return Err(BundleError::VariantMismatch("graded Higgs complexes take full or gr variants".into()))
        }
        (Kind::DeRham, Variant::Gr(_)) => {
            return Err(BundleError::VariantMismatch("gr variant needs a graded Higgs bundle".into()))
        }
        _ => {}
    }
    if higgs && (b1.higgs.is_none() || b2.higgs.is_none()) {
        return Err(BundleError::VariantMismatch("missing Higgs field".into()));
    }
    if !higgs && (b1.conn.is_none() || b2.conn.is_none()) {
        return Err(BundleError::VariantMismatch("missing connection".into()));
    }
    let patterns = match variant {
        Variant::Full => vec![Pattern::All, Pattern::All],
        Variant::Fil(l) => vec![Pattern::Fil(l), Pattern::Fil(l - 1)],
        Variant::Gr(l) => vec![Pattern::Gr(l), Pattern::Gr(l - 1)],
        Variant::QuotientC => vec![Pattern::Quot(0), Pattern::Quot(-1)],
    };
    let tag = format!(
        "{}(Hom){}",
        if higgs { "Higgs" } else { "DR" },
        match variant {
            Variant::Full => String::new(),
            Variant::Fil(l) => format!(".Fil{l}"),
            Variant::Gr(l) => format!(".Gr{l}"),
            Variant::QuotientC => ".C".into(),
        }
    );
    Ok(SheafComplex { tag, kind, src: b1, dst: b2, patterns })
}

pub fn end_complex(b: Arc<Bundle>, variant: Variant) -> Result<SheafComplex, BundleError> {
    let higgs = matches!(variant, Variant::Gr(_));
    let mut c = hom_complex(b.clone(), b, variant, higgs)?;
    c.tag = c.tag.replace("(Hom)", "(End)");
    Ok(c)
}

/// The single sheaf `B ⊗ Ω^{twist}` (as `Hom(O, B)`), no differential.
pub fn coherent(b: Arc<Bundle>, twist: i32) -> SheafComplex {
    let one = Arc::new(Bundle::trivial(b.cover.clone(), 1));
    SheafComplex {
        tag: format!("O-module(twist {twist})"),
        kind: Kind::Coherent { twist },
        src: one,
        dst: b,
        patterns: vec![Pattern::All],
    }
}

/// Same as [`coherent`] but for `Hom(B1, B2) ⊗ Ω^{twist}`, restricted to a pattern.
pub fn coherent_hom(b1: Arc<Bundle>, b2: Arc<Bundle>, twist: i32, pattern: Pattern) -> SheafComplex {
    SheafComplex {
        tag: format!("Hom-module(twist {twist})"),
        kind: Kind::Coherent { twist },
        src: b1,
        dst: b2,
        patterns: vec![pattern],
    }
}

// ---------------- line bundles on P¹ ----------------

/// `O(k)` on a standard cover of `P¹` whose charts use coordinates named `s` and `t = 1/s`.
pub fn line_bundle_p1(cover: Arc<Cover>, k: i64) -> Result<Bundle, BundleError> {
    let n = cover.num_charts();
    let is_t: Vec<bool> = cover.charts.iter().map(|c| c.coord == "t").collect();
    let mut trans = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let s = [i, j];
            let lr = cover.loc(&s)?;
            let u = lr.poly(crate::poly::Poly::x(&cover.ring));
            let s_val = if is_t[i] { lr.inv(&u).ok_or(BundleError::InvalidInput("coordinate not invertible".into()))? } else { u };
            let e = -k * (is_t[j] as i64 - is_t[i] as i64);
            let g = lr.pow(&s_val, e).ok_or_else(|| BundleError::InvalidInput("s is not a unit on the overlap".into()))?;
            trans.insert((i, j), SMat { rows: 1, cols: 1, d: vec![g] });
        }
    }
    Bundle::new(cover, 1, trans, None, None, vec![0], false)
}

// ---------------- JSON ----------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransitionJson {
    pub i: String,
    pub j: String,
    /// Rows of rational expressions in the coordinate of chart `i`.
    pub matrix: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FiltrationJson {
    pub weights: Vec<i32>,
    /// Optional adapted frames per chart id.
    #[serde(default)]
    pub frames: BTreeMap<String, Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BundleJson {
    #[serde(default)]
    pub schema: Option<String>,
    pub rank: usize,
    pub transitions: Vec<TransitionJson>,
    #[serde(default)]
    pub connection: Option<BTreeMap<String, Vec<Vec<String>>>>,
    #[serde(default)]
    pub higgs: Option<BTreeMap<String, Vec<Vec<String>>>>,
    #[serde(default)]
    pub filtration: Option<FiltrationJson>,
    #[serde(default)]
    pub grading: Option<Vec<i32>>,
}

pub const BUNDLE_SCHEMA: &str = "hdflow.bundle/1";

fn parse_mat(cov: &Cover, s: &[usize], var: &str, rows: &[Vec<String>], rank: usize) -> Result<SMat, BundleError> {
    let lr = cov.loc(s)?;
    if rows.len() != rank || rows.iter().any(|r| r.len() != rank) {
        return Err(BundleError::Parse(format!("matrix on {s:?} must be {rank}x{rank}")));
    }
    let mut out = SMat::zeros(rank, rank);
    for (a, row) in rows.iter().enumerate() {
        for (b, e) in row.iter().enumerate() {
            let q = parse_rational(&cov.ring, var, e).map_err(BundleError::Parse)?;
            let den = lr
                .inv(&lr.poly(q.den))
                .ok_or_else(|| BundleError::Parse(format!("denominator of '{e}' is not a unit on {s:?}")))?;
            out.set(a, b, lr.mul(&lr.poly(q.num), &den));
        }
    }
    Ok(out)
}

impl Bundle {
    pub fn from_json(cover: Arc<Cover>, j: &BundleJson) -> Result<Bundle, BundleError> {
        let idx = |id: &str| {
            cover
                .charts
                .iter()
                .position(|c| c.id == id)
                .ok_or_else(|| BundleError::Parse(format!("unknown chart id '{id}'")))
        };
        let r = j.rank;
        let mut trans = BTreeMap::new();
        for t in &j.transitions {
            let (i, jj) = (idx(&t.i)?, idx(&t.j)?);
            let (lo, hi) = (i.min(jj), i.max(jj));
            let m = parse_mat(&cover, &[lo, hi], &cover.charts[lo].coord, &t.matrix, r)?;
            let m = if i < jj {
                m
            } else {
                m.inv(cover.loc(&[lo, hi])?).ok_or_else(|| BundleError::Parse("transition not invertible".into()))?
            };
            trans.insert((lo, hi), m);
        }
        let per_chart = |m: &BTreeMap<String, Vec<Vec<String>>>| -> Result<Vec<SMat>, BundleError> {
            let mut out = vec![SMat::zeros(r, r); cover.num_charts()];
            for (id, rows) in m {
                let i = idx(id)?;
                out[i] = parse_mat(&cover, &[i], &cover.charts[i].coord, rows, r)?;
            }
            Ok(out)
        };
        let conn = j.connection.as_ref().map(per_chart).transpose()?;
        let higgs = j.higgs.as_ref().map(per_chart).transpose()?;
        let (weights, graded) = match (&j.filtration, &j.grading) {
            (Some(_), Some(_)) => return Err(BundleError::Parse("both filtration and grading given".into())),
            (Some(f), None) => (f.weights.clone(), false),
            (None, Some(g)) => (g.clone(), true),
            (None, None) => (vec![0; r], higgs.is_some() && conn.is_none()),
        };
        let b = Bundle::new(cover.clone(), r, trans, conn, higgs, weights, graded)?;
        if let Some(f) = &j.filtration {
            if !f.frames.is_empty() {
                let mut frames = Vec::new();
                for (i, c) in cover.charts.iter().enumerate() {
                    frames.push(match f.frames.get(&c.id) {
                        Some(rows) => parse_mat(&cover, &[i], &c.coord, rows, r)?,
                        None => SMat::identity(cover.loc(&[i])?, r),
                    });
                }
                return b.with_frames(&frames);
            }
        }
        Ok(b)
    }

    pub fn to_json(&self) -> BundleJson {
        let cov = &self.cover;
        let fmt = |s: &[usize], m: &SMat| -> Vec<Vec<String>> {
            let lr = cov.loc(s).unwrap();
            let var = &cov.charts[s[0]].coord;
            (0..m.rows).map(|a| (0..m.cols).map(|b| format_sec(lr, m.get(a, b), var)).collect()).collect()
        };
        let per_chart = |v: &Vec<SMat>| -> BTreeMap<String, Vec<Vec<String>>> {
            v.iter().enumerate().map(|(i, m)| (cov.charts[i].id.clone(), fmt(&[i], m))).collect()
        };
        BundleJson {
            schema: Some(BUNDLE_SCHEMA.into()),
            rank: self.rank,
            transitions: self
                .trans
                .iter()
                .map(|(&(i, j), m)| TransitionJson {
                    i: cov.charts[i].id.clone(),
                    j: cov.charts[j].id.clone(),
                    matrix: fmt(&[i, j], m),
                })
                .collect(),
            connection: self.conn.as_ref().map(per_chart),
            higgs: self.higgs.as_ref().map(per_chart),
            filtration: if self.graded { None } else { Some(FiltrationJson { weights: self.weights.clone(), frames: BTreeMap::new() }) },
            grading: if self.graded { Some(self.weights.clone()) } else { None },
        }
    }
}

/// Integer-coefficient rendering `num/(h)^e`; only meaningful for prime fields
/// or integer-valued coefficients.
pub fn format_sec(lr: &LocRing, s: &Sec, var: &str) -> String {
    let r = &lr.ring;
    let num = s.num.format(r, var);
    if s.e == 0 {
        num
    } else {
        format!("({num})/({})^{}", lr.h.format(r, var), s.e)
    }
}
