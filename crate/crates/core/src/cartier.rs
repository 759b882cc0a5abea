//! Frobenius liftings, the tilde functor (Rees construction at `p`), Taylor
//! gluing and the truncated inverse Cartier transform on curves, plus the
//! σ-semilinear maps `α` and `β` at the cochain level.
//!
//! Levels: the graded Higgs input lives at level `n+1`, the flow data at
//! level `n`, the Frobenius liftings at level `n+2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::bundle::{check_bundle, gr_higgs, Bundle, BundleError};
use crate::cech::Cochain;
use crate::deform::Check;
use crate::geometry::{Cover, GeoError, Report};
use crate::poly::{LocRing, Poly, Sec};
use crate::smat::SMat;
use crate::witt::{Ring, WittElem};

#[derive(Debug, Error)]
pub enum CartierError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("divisor component {0} is not `u - a` with `a` a Teichmüller lift")]
    NonTeichmullerDivisor(String),
    #[error("invalid Frobenius lifting: {0}")]
    InvalidLift(String),
    #[error("Taylor term of degree {k} on overlap {pair:?} is not integral: {reason}")]
    NonIntegralTerm { pair: (usize, usize), k: usize, reason: String },
    #[error("graded pieces of the flow data do not match the Higgs bundle: {0}")]
    PsiMismatch(String),
    #[error("cover mismatch: {0}")]
    CoverMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("internal: {0}")]
    Internal(String),
}

type Res<T> = Result<T, CartierError>;

fn sigma_poly(r: &Ring, p: &Poly) -> Poly {
    p.map(r, |c| r.frobenius(c))
}

fn horner(dst: &LocRing, p: &Poly, x: &Sec) -> Sec {
    let mut acc = dst.zero();
    for &c in p.0.iter().rev() {
        acc = dst.add(&dst.mul(&acc, x), &dst.constant(c));
    }
    acc
}

/// `f^σ(x)`: twist the coefficients of `f` (a section of `src`) by `σ`, then
/// substitute `u = x`, a section of `dst`. Both rings must share a level.
pub fn frob_pull(src: &LocRing, f: &Sec, x: &Sec, dst: &LocRing) -> Option<Sec> {
    let r = &dst.ring;
    let n = horner(dst, &sigma_poly(r, &f.num), x);
    if f.e == 0 {
        return Some(n);
    }
    let hx = horner(dst, &sigma_poly(r, &src.h), x);
    let hinv = dst.inv(&hx)?;
    Some(dst.mul(&n, &dst.pow(&hinv, f.e as i64)?))
}

/// Absolute Frobenius pullback at level 1: `f ↦ f^σ(u^p)`.
pub fn abs_frobenius(lr: &LocRing, f: &Sec) -> Sec {
    let r = &lr.ring;
    let up = lr.poly(Poly::monomial(r, r.one(), r.p as usize));
    frob_pull(lr, f, &up, lr).expect("h^σ(u^p) = h^p is a unit")
}

fn pull_mat(src: &LocRing, m: &SMat, x: &Sec, dst: &LocRing) -> Option<SMat> {
    let mut d = Vec::with_capacity(m.d.len());
    for s in &m.d {
        d.push(frob_pull(src, s, x, dst)?);
    }
    Some(SMat { rows: m.rows, cols: m.cols, d })
}

// ---------------- Frobenius liftings ----------------

/// Chartwise Frobenius liftings on a level-`n+2` cover: `images[i] = Φ_i*(u_i)`,
/// σ-semilinear on constants.
#[derive(Clone, Debug)]
pub struct FrobeniusLifting {
    pub cover: Arc<Cover>,
    pub images: Vec<Sec>,
}

/// `P(v + a)` as a polynomial in `v`.
fn shift(r: &Ring, p: &Poly, a: WittElem) -> Poly {
    let lin = Poly(vec![a, r.one()]);
    let mut acc = Poly::zero();
    for &c in p.0.iter().rev() {
        acc = acc.mul(r, &lin).add(r, &Poly::constant(r, c));
    }
    acc.trimmed(r)
}

/// `num / den mod v^prec` for `den(0)` a unit.
fn series_div(r: &Ring, num: &Poly, den: &Poly, prec: usize) -> Poly {
    let d0 = r.inv(den.coeff(0)).expect("constant term is a unit");
    let mut q: Vec<WittElem> = Vec::with_capacity(prec);
    for k in 0..prec {
        let mut acc = num.coeff(k);
        for j in 1..=k {
            acc = r.sub(acc, r.mul(den.coeff(j), q[k - j]));
        }
        q.push(r.mul(acc, d0));
    }
    Poly(q).trimmed(r)
}

/// Correction `f` with `u^p + p f - a^p ∈ (u - a)^p · (1 + p(...))` for every root `a`.
fn crt_correction(r: &Ring, roots: &[WittElem]) -> Poly {
    let p = r.p as usize;
    let up = Poly::monomial(r, r.one(), p);
    let lin = |a: WittElem| Poly(vec![r.neg(a), r.one()]);
    let mut f = Poly::zero();
    for (idx, &a) in roots.iter().enumerate() {
        // u^p - a^p - (u - a)^p has coefficients divisible by p
        let diff = up.sub(r, &Poly::constant(r, r.pow(a, p as u64))).sub(r, &lin(a).pow(r, p as u32));
        let c = diff.map(r, |x| r.div_p_pow(x, 1).expect("binomial coefficients")).trimmed(r);
        let m = roots
            .iter()
            .enumerate()
            .filter(|&(o, _)| o != idx)
            .fold(Poly::one(r), |acc, (_, &b)| acc.mul(r, &lin(b).pow(r, p as u32)));
        let t = series_div(r, &shift(r, &c, a).neg(r), &shift(r, &m, a), p);
        f = f.add(r, &m.mul(r, &shift(r, &t, r.neg(a))));
    }
    f.trimmed(r)
}

/// Frobenius liftings that fix every divisor component up to a unit:
/// `Φ*(u) = u^p + p f` with `f` chosen so that `Φ*(u - a) = (u - a)^p · unit`.
/// With no finite divisor points on a chart this is `u ↦ u^p`.
pub fn standard_frobenius(cover: Arc<Cover>) -> Res<FrobeniusLifting> {
    let r = cover.ring.clone();
    let mut images = Vec::new();
    for (i, ch) in cover.charts.iter().enumerate() {
        let mut roots = Vec::new();
        for g in &ch.divisor {
            if g.deg() != Some(1) || !g.is_monic(&r) {
                return Err(CartierError::NonTeichmullerDivisor(g.format(&r, &ch.coord)));
            }
            let a = r.neg(g.coeff(0));
            if r.teichmuller(a) != a {
                return Err(CartierError::NonTeichmullerDivisor(g.format(&r, &ch.coord)));
            }
            roots.push(a);
        }
        let f = crt_correction(&r, &roots);
        let img = Poly::monomial(&r, r.one(), r.p as usize).add(&r, &f.scale(&r, r.p_pow(1)));
        images.push(cover.loc(&[i])?.poly(img.trimmed(&r)));
    }
    Ok(FrobeniusLifting { cover, images })
}

impl FrobeniusLifting {
    pub fn new(cover: Arc<Cover>, images: Vec<Sec>) -> Res<FrobeniusLifting> {
        if images.len() != cover.num_charts() {
            return Err(CartierError::InvalidInput("one image per chart is required".into()));
        }
        Ok(FrobeniusLifting { cover, images })
    }

    pub fn level(&self) -> u32 {
        self.cover.level()
    }

    /// Checks `Φ*(u) ≡ u^p mod p`, that `Φ*` preserves the chart's localization
    /// and the divisor ideal, and log compatibility `Φ*(g) ∈ g^p · units`.
    pub fn validate(&self) -> Report {
        let mut rep = Report::new();
        let cov = &self.cover;
        let r = &cov.ring;
        for (i, ch) in cov.charts.iter().enumerate() {
            let lr = cov.loc(&[i]).unwrap();
            let f = &self.images[i];
            let up = lr.poly(Poly::monomial(r, r.one(), r.p as usize));
            if lr.div_p_pow(&lr.sub(f, &up), 1).is_none() {
                rep.fail(format!("chart {}: image is not u^p mod p", ch.id));
                continue;
            }
            if frob_pull(lr, &lr.poly(lr.h.clone()), f, lr).and_then(|x| lr.inv(&x)).is_none() {
                rep.fail(format!("chart {}: the localization is not preserved", ch.id));
                continue;
            }
            for g in &ch.divisor {
                let gs = lr.poly(g.clone());
                let name = g.format(r, &ch.coord);
                let Some(pg) = frob_pull(lr, &gs, f, lr) else {
                    rep.fail(format!("chart {}: cannot pull back {name}", ch.id));
                    continue;
                };
                if lr.div_exact(&pg, &gs).is_none() {
                    rep.fail(format!("chart {}: pullback of {name} leaves the divisor ideal", ch.id));
                    continue;
                }
                let gp = lr.pow(&gs, r.p as i64).unwrap();
                let ok = lr.div_exact(&pg, &gp).and_then(|q| lr.inv(&q)).is_some();
                if !ok {
                    rep.fail(format!("chart {}: pullback of {name} is not ({name})^p times a unit", ch.id));
                }
            }
        }
        rep
    }

    /// `Φ*(u) + p · Π g^p · extra_i`: another valid lifting of the same kind.
    pub fn perturbed(&self, extra: &[Poly]) -> FrobeniusLifting {
        let cov = &self.cover;
        let r = &cov.ring;
        let images = (0..cov.num_charts())
            .map(|i| {
                let lr = cov.loc(&[i]).unwrap();
                let gp = cov.charts[i].g(r).pow(r, r.p as u32);
                let t = lr.poly(gp.mul(r, &extra[i]).scale(r, r.p_pow(1)));
                lr.add(&self.images[i], &t)
            })
            .collect();
        FrobeniusLifting { cover: cov.clone(), images }
    }

    /// The same chart images on another cover with the same charts (for example
    /// a perturbed thickening).
    pub fn on_cover(&self, cover: Arc<Cover>) -> Res<FrobeniusLifting> {
        if cover.charts != self.cover.charts || cover.ring != self.cover.ring {
            return Err(CartierError::CoverMismatch("charts differ".into()));
        }
        Ok(FrobeniusLifting { cover, images: self.images.clone() })
    }

    pub fn reduce_to(&self, n: u32) -> Res<FrobeniusLifting> {
        let low = Arc::new(self.cover.reduce_to(n)?);
        let images = (0..low.num_charts())
            .map(|i| self.cover.loc(&[i]).unwrap().reduce_to(low.loc(&[i]).unwrap(), &self.images[i]))
            .collect();
        Ok(FrobeniusLifting { cover: low, images })
    }

    /// `Φ_j*(u_i)` on `U_ij` (`i < j`), solving `φ^σ(X) = Φ_j*(u_j)` by Newton's
    /// method, where `u_j = φ(u_i)` is the transition.
    pub fn overlap_image(&self, i: usize, j: usize) -> Res<Sec> {
        let cov = &self.cover;
        let s = [i, j];
        let lr = cov.loc(&s)?;
        let phi = cov.pair_coord(i, j).clone();
        let dphi = lr.derivative(&phi);
        let rhs = cov.restrict(&[j], &s, &self.images[j])?;
        let mut x = cov.restrict(&[i], &s, &self.images[i])?;
        let fail = || CartierError::Internal(format!("Frobenius image on overlap {s:?} did not converge"));
        for _ in 0..64 {
            let val = lr.sub(&frob_pull(lr, &phi, &x, lr).ok_or_else(fail)?, &rhs);
            if lr.is_zero(&val) {
                return Ok(x);
            }
            let d = frob_pull(lr, &dphi, &x, lr).and_then(|d| lr.inv(&d)).ok_or_else(fail)?;
            x = lr.sub(&x, &lr.mul(&val, &d));
        }
        Err(fail())
    }

    /// `ζ_i = (Φ*/p)(ω_i) / ω_i` at level `n1 ≤ level - 1`, on the chart ring of `target`.
    pub fn zeta(&self, i: usize, target: &Cover) -> Res<Sec> {
        let cov = &self.cover;
        let r = &cov.ring;
        let lr = cov.loc(&[i])?;
        let f = &self.images[i];
        let g = lr.poly(cov.charts[i].g(r));
        let dfp = lr
            .div_p_pow(&lr.derivative(f), 1)
            .ok_or_else(|| CartierError::InvalidLift("derivative of the image is not divisible by p".into()))?;
        let lo = target.loc(&[i])?;
        let num = lr.reduce_to(lo, &lr.mul(&dfp, &g));
        let den = frob_pull(lr, &g, f, lr).ok_or_else(|| CartierError::InvalidLift("cannot pull back G".into()))?;
        lo.div_exact(&num, &lr.reduce_to(lo, &den))
            .ok_or_else(|| CartierError::InvalidLift(format!("(Φ*/p) of the log form on chart {} has poles", cov.charts[i].id)))
    }
}

// ---------------- tilde ----------------

/// A bundle with `p`-connection at level `n+1` obtained from the Rees
/// construction at `p`: in adapted frames `g̃_ab = p^{w(a)-w(b)} g_ab` and
/// `Ã_ab = p^{w(a)-w(b)+1} A_ab`, where the exponent-zero entries come from the
/// graded Higgs bundle.
#[derive(Clone, Debug)]
pub struct PConnection {
    pub cover: Arc<Cover>,
    pub weights: Vec<i32>,
    pub trans: BTreeMap<(usize, usize), SMat>,
    /// `Ã_i`, coefficients of `ω_i`.
    pub conn: Vec<SMat>,
    /// `A_i` with `Ã = p^{w(a)-w(b)+1} A` entrywise; entries of positive exponent
    /// are only meaningful modulo a lower power of `p`.
    pub model: Vec<SMat>,
}

fn p_scale(lr: &LocRing, s: &Sec, e: u32) -> Sec {
    lr.scale(s, lr.ring.p_pow(e))
}

/// The `p`-connection attached to a graded Higgs bundle at level `n+1` and
/// filtered flow data at level `n` (none when `n = 0`). The graded pieces of the
/// flow data must equal the Higgs bundle mod `p^n` in the given frames.
pub fn tilde(e: &Bundle, prev: Option<&Bundle>) -> Res<PConnection> {
    let cov = e.cover.clone();
    let r = cov.ring.clone();
    let n1 = r.n;
    let th = e
        .higgs
        .as_ref()
        .filter(|_| e.graded && e.conn.is_none())
        .ok_or_else(|| CartierError::InvalidInput("expected a graded Higgs bundle".into()))?;
    let rep = check_bundle(e);
    if !rep.ok {
        return Err(CartierError::InvalidInput(rep.failures.join("; ")));
    }
    let w = e.weights.clone();
    let k = cov.num_charts();
    if let Some(v) = prev {
        if v.cover.level() + 1 != n1 || v.cover.num_charts() != k {
            return Err(CartierError::InvalidInput("flow data must live one level below the Higgs bundle".into()));
        }
        if v.conn.is_none() || v.weights != w {
            return Err(CartierError::InvalidInput("flow data must be filtered de Rham with the same weights".into()));
        }
        let gr = gr_higgs(v)?;
        let low = e.reduce_to(n1 - 1)?;
        if gr.trans != low.trans || gr.higgs != low.higgs {
            return Err(CartierError::PsiMismatch("Gr(V_n) differs from the Higgs bundle mod p^n".into()));
        }
    } else if n1 != 1 {
        return Err(CartierError::InvalidInput("flow data is required above level 1".into()));
    }
    let mut trans = BTreeMap::new();
    for (&(i, j), g) in &e.trans {
        let lr = cov.loc(&[i, j])?;
        let old = prev.map(|v| v.trans[&(i, j)].clone());
        trans.insert(
            (i, j),
            SMat::from_fn(e.rank, e.rank, |a, b| {
                let d = w[a] - w[b];
                if d == 0 {
                    g.get(a, b).clone()
                } else if d > 0 {
                    old.as_ref().map_or(lr.zero(), |o| p_scale(lr, &lr.lift_from(o.get(a, b)), d as u32))
                } else {
                    lr.zero()
                }
            }),
        );
    }
    let mut conn = Vec::new();
    let mut model = Vec::new();
    for i in 0..k {
        let lr = cov.loc(&[i])?;
        let old = prev.map(|v| v.conn.as_ref().unwrap()[i].clone());
        let m = SMat::from_fn(e.rank, e.rank, |a, b| {
            let d = w[a] - w[b];
            if d == -1 {
                th[i].get(a, b).clone()
            } else if d >= 0 {
                old.as_ref().map_or(lr.zero(), |o| lr.lift_from(o.get(a, b)))
            } else {
                lr.zero()
            }
        });
        conn.push(m.map_indexed(|a, b, s| p_scale(lr, s, (w[a] - w[b] + 1).max(0) as u32)));
        model.push(m);
    }
    Ok(PConnection { cover: cov, weights: w, trans, conn, model })
}

impl PConnection {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    fn g(&self, a: usize, b: usize, lr: &LocRing) -> Option<SMat> {
        if a < b {
            Some(self.trans[&(a, b)].clone())
        } else {
            self.trans[&(b, a)].inv(lr)
        }
    }

    /// Cocycle condition and the gluing law `κ Ã_j = g Ã_i g⁻¹ − p δ(g) g⁻¹`.
    pub fn check(&self) -> Report {
        let mut rep = Report::new();
        let cov = &self.cover;
        let r = &cov.ring;
        let restrict = |sig: &[usize], tau: &[usize], m: &SMat| m.map(|s| cov.restrict(sig, tau, s).unwrap());
        for s in cov.simplices(3) {
            if s.len() != 3 {
                continue;
            }
            let lr = cov.loc(&s).unwrap();
            let (i, j, k) = (s[0], s[1], s[2]);
            let gij = restrict(&[i, j], &s, &self.trans[&(i, j)]);
            let gjk = restrict(&[j, k], &s, &self.trans[&(j, k)]);
            let gik = restrict(&[i, k], &s, &self.trans[&(i, k)]);
            if gjk.mul(lr, &gij) != gik {
                rep.fail(format!("cocycle fails on {s:?}"));
            }
        }
        for (&(i, j), g) in &self.trans {
            let s = [i, j];
            let lr = cov.loc(&s).unwrap();
            let Some(gi) = self.g(j, i, lr) else {
                rep.fail(format!("transition on {s:?} is not invertible"));
                continue;
            };
            let ai = restrict(&[i], &s, &self.conn[i]);
            let aj = restrict(&[j], &s, &self.conn[j]);
            let kap = cov.kappa(&s, j).unwrap();
            let dg = g.derivation(lr, &cov.charts[i].g(r)).scale_elem(lr, r.p_pow(1));
            let rhs = g.mul(lr, &ai).mul(lr, &gi).sub(lr, &dg.mul(lr, &gi));
            if aj.scale(lr, &kap) != rhs {
                rep.fail(format!("p-connection is not compatible with the transition on {s:?}"));
            }
        }
        rep
    }
}

// ---------------- Taylor gluing ----------------

/// `Σ_k Ψ*(D^k/k!) δ^k` with `D = p(∂ + A)` in Rees-rescaled frames, where `A`
/// is the model `∂`-coefficient matrix (on `hi`, at a working level high enough
/// to absorb the divisions by `k!`) and `δ = (Φ*(u) − Ψ*(u))/p` lives on `lo`.
/// Stops after three consecutive vanishing terms; errors past `cap`.
pub fn taylor_sum(
    hi: &LocRing,
    lo: &LocRing,
    weights: &[i32],
    a_dir: &SMat,
    delta: &Sec,
    pull: &dyn Fn(&Sec) -> Option<Sec>,
    cap: usize,
    pair: (usize, usize),
) -> Res<(SMat, usize)> {
    let rank = weights.len();
    let r = &hi.ring;
    let p = r.p;
    let mut b = SMat::identity(hi, rank);
    let mut sum = SMat::identity(lo, rank);
    let mut dk = lo.one();
    let mut unit = 1u64;
    let mut v = 0i64;
    let mut zeros = 0;
    for k in 1..=cap {
        // B_k = (∂ + A) B_{k-1}
        let db = b.map(|s| hi.derivative(s));
        b = db.add(hi, &a_dir.mul(hi, &b));
        let mut kk = k as u64;
        while kk % p == 0 {
            kk /= p;
            v += 1;
        }
        unit = ((unit as u128 * kk as u128) % r.pn as u128) as u64;
        let uinv = r.inv(r.from_u64(unit)).expect("unit part of k!");
        let mut d = Vec::with_capacity(rank * rank);
        for a in 0..rank {
            for c in 0..rank {
                let s = hi.scale(b.get(a, c), uinv);
                let ex = k as i64 + (weights[a] - weights[c]) as i64 - v;
                let val = if hi.is_zero(&s) {
                    s
                } else if ex >= 0 {
                    p_scale(hi, &s, ex.min(r.n as i64) as u32)
                } else {
                    hi.div_p_pow(&s, (-ex) as u32).ok_or_else(|| CartierError::NonIntegralTerm {
                        pair,
                        k,
                        reason: format!("entry ({a}, {c}) needs division by p^{}", -ex),
                    })?
                };
                d.push(hi.reduce_to(lo, &val));
            }
        }
        let nk = SMat { rows: rank, cols: rank, d };
        dk = lo.mul(&dk, delta);
        let mut pulled = Vec::with_capacity(rank * rank);
        for s in &nk.d {
            pulled.push(pull(s).ok_or_else(|| CartierError::Internal("Frobenius pullback left the ring".into()))?);
        }
        let term = SMat { rows: rank, cols: rank, d: pulled }.scale(lo, &dk);
        if term.is_zero() {
            zeros += 1;
            if zeros == 3 {
                return Ok((sum, k));
            }
        } else {
            zeros = 0;
            sum = sum.add(lo, &term);
        }
    }
    Err(CartierError::NonIntegralTerm { pair, k: cap, reason: "series did not terminate before the cap".into() })
}

/// `U_ij` with the divisor components of chart `i` inverted as well, and the
/// extra factor `G'` with `h_ext = h · G'`.
struct ExtRing {
    ext: LocRing,
    extra: Poly,
}

fn ext_ring(cov: &Cover, i: usize, j: usize) -> Res<ExtRing> {
    let r = &cov.ring;
    let lr = cov.loc(&[i, j])?;
    let r1 = r.at_level(1).map_err(GeoError::from)?;
    let h1 = lr.h.reduce_to(&r1);
    let mut extra = Poly::one(r);
    for g in &cov.charts[i].divisor {
        let g1 = g.reduce_to(&r1);
        if h1.deg().unwrap_or(0) > 0 && h1.divrem(&r1, &g1).1.is_zero() {
            continue;
        }
        extra = extra.mul(r, g);
    }
    Ok(ExtRing { ext: LocRing::new(r, lr.h.mul(r, &extra)), extra })
}

impl ExtRing {
    fn to_ext(&self, s: &Sec) -> Sec {
        let r = &self.ext.ring;
        self.ext.frac(s.num.mul(r, &self.extra.pow(r, s.e)), s.e)
    }

    fn from_ext(&self, lr: &LocRing, s: &Sec) -> Option<Sec> {
        let r = &lr.ring;
        lr.div_exact(&lr.frac(s.num.clone(), s.e), &lr.poly(self.extra.pow(r, s.e)))
    }

    fn to_ext_mat(&self, m: &SMat) -> SMat {
        m.map(|s| self.to_ext(s))
    }

    fn from_ext_mat(&self, lr: &LocRing, m: &SMat) -> Option<SMat> {
        let mut d = Vec::with_capacity(m.d.len());
        for s in &m.d {
            d.push(self.from_ext(lr, s)?);
        }
        Some(SMat { rows: m.rows, cols: m.cols, d })
    }

    fn at(&self, ring: &Ring) -> ExtRing {
        ExtRing {
            ext: LocRing::new(ring, self.ext.h.reduce_to(ring)),
            extra: self.extra.reduce_to(ring),
        }
    }
}

fn vp_factorial(p: u64, k: u64) -> u32 {
    let mut v = 0;
    let mut q = k / p;
    while q > 0 {
        v += q as u32;
        q /= p;
    }
    v
}

/// Result of the inverse Cartier transform.
#[derive(Clone, Debug)]
pub struct IcResult {
    pub bundle: Bundle,
    pub pconn: PConnection,
    /// Number of Taylor degrees examined per overlap.
    pub terms: BTreeMap<(usize, usize), usize>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

/// The gluing `G_ij` between `Φ_i*H̃` and `Φ_j*H̃` on `U_ij`, in the frames
/// `1 ⊗ e^{(i)}` and `1 ⊗ e^{(j)}`.
pub fn taylor_glue(pc: &PConnection, frob: &FrobeniusLifting, i: usize, j: usize) -> Res<(SMat, usize)> {
    let x1 = &pc.cover;
    let r1 = &x1.ring;
    let n1 = r1.n;
    let xn = &frob.cover;
    let p = r1.p;
    let cap = ((n1 + 1) as u64 * p) as usize;
    let big = n1 + vp_factorial(p, cap as u64);
    let xl = xn.lift_to(big.max(xn.level()))?;
    let rl = xl.ring.clone();
    let s = [i, j];
    let un = xn.loc(&s)?;
    let u1 = x1.loc(&s)?;
    let xov = frob.overlap_image(i, j)?;
    let fi = xn.restrict(&[i], &s, &frob.images[i])?;
    let delta_n = un
        .div_p_pow(&un.sub(&fi, &xov), 1)
        .ok_or_else(|| CartierError::InvalidLift(format!("liftings disagree mod p on {s:?}")))?;
    let ext_l = ext_ring(&xl, i, j)?;
    let ext_1 = ext_l.at(r1);
    let hi = &ext_l.ext;
    let lo = &ext_1.ext;
    let delta = ext_1.to_ext(&un.reduce_to(u1, &delta_n));
    let x_lo = ext_1.to_ext(&un.reduce_to(u1, &xov));
    // model ∂-coefficients: A_i / G_i, lifted to the working level
    let chart_l = xl.loc(&[i])?;
    let a_l = pc.model[i].map(|sec| chart_l.lift_from(sec));
    let a_l = a_l.map(|sec| xl.restrict(&[i], &s, sec).expect("restriction"));
    let ginv = hi
        .inv(&hi.poly(xl.charts[i].g(&rl)))
        .ok_or_else(|| CartierError::Internal("divisor is not invertible on the extended overlap".into()))?;
    let a_dir = ext_l.to_ext_mat(&a_l).scale(hi, &ginv);
    let pull = |f: &Sec| frob_pull(lo, f, &x_lo, lo);
    let (sum, terms) = taylor_sum(hi, lo, &pc.weights, &a_dir, &delta, &pull, cap, (i, j))?;
    let g = ext_1.to_ext_mat(&pc.trans[&(i, j)]);
    let pg = pull_mat(lo, &g, &x_lo, lo).ok_or_else(|| CartierError::Internal("cannot pull back g".into()))?;
    let t = pg.mul(lo, &sum);
    let out = ext_1
        .from_ext_mat(u1, &t)
        .ok_or_else(|| CartierError::NonIntegralTerm { pair: (i, j), k: terms, reason: "glued matrix has poles".into() })?;
    Ok((out, terms))
}

/// `(Φ_i*H̃, (Φ_i*/p)(∇̃))` on chart `i`: connection matrix `Φ_i*(Ã_i) ζ_i`.
pub fn chart_connection(pc: &PConnection, frob: &FrobeniusLifting, i: usize) -> Res<SMat> {
    let x1 = &pc.cover;
    let lr = x1.loc(&[i])?;
    let zeta = frob.zeta(i, x1)?;
    let f = frob.cover.loc(&[i])?.reduce_to(lr, &frob.images[i]);
    let pulled = pull_mat(lr, &pc.conn[i], &f, lr).ok_or_else(|| CartierError::Internal("pullback failed".into()))?;
    Ok(pulled.scale(lr, &zeta))
}

/// `C^{-1}` of a graded Higgs bundle at level `n+1` relative to flow data at level `n`
/// and chartwise Frobenius liftings at level `n+2`.
pub fn inverse_cartier(e: &Bundle, prev: Option<&Bundle>, frob: &FrobeniusLifting) -> Res<IcResult> {
    let pc = tilde(e, prev)?;
    inverse_cartier_of(pc, frob)
}

/// Frobenius pullback and Taylor gluing of a given `p`-connection.
pub fn inverse_cartier_of(pc: PConnection, frob: &FrobeniusLifting) -> Res<IcResult> {
    let x1 = pc.cover.clone();
    let n1 = x1.level();
    if frob.level() != n1 + 1 {
        return Err(CartierError::CoverMismatch(format!(
            "Frobenius liftings at level {} for data at level {n1}",
            frob.level()
        )));
    }
    if !frob.cover.reduce_to(n1)?.same_as(&x1) {
        return Err(CartierError::CoverMismatch("the lifted cover does not reduce to the bundle's cover".into()));
    }
    let rep = frob.validate();
    if !rep.ok {
        return Err(CartierError::InvalidLift(rep.failures.join("; ")));
    }
    let mut warnings = Vec::new();
    let p = x1.ring.p as u32;
    if n1 + 1 > p {
        warnings.push(format!("level {n1} is outside the validated range n+1 <= p-1"));
    }
    let spread = pc.weights.iter().max().unwrap_or(&0) - pc.weights.iter().min().unwrap_or(&0);
    if spread as u32 + 2 > p {
        warnings.push(format!("weight spread {spread} exceeds p-2"));
    }
    let mut checks = vec![Check { name: "p-connection glues".into(), ok: pc.check().ok }];
    let k = x1.num_charts();
    let conn = (0..k).map(|i| chart_connection(&pc, frob, i)).collect::<Res<Vec<_>>>()?;
    let mut trans = BTreeMap::new();
    let mut terms = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            let (t, nt) = taylor_glue(&pc, frob, i, j)?;
            trans.insert((i, j), t);
            terms.insert((i, j), nt);
        }
    }
    let bundle = Bundle::new(x1.clone(), pc.rank(), trans, Some(conn), None, vec![0; pc.rank()], false)?;
    let rep = check_bundle(&bundle);
    checks.push(Check { name: "gluing cocycle and horizontality".into(), ok: rep.ok });
    if !rep.ok {
        return Err(CartierError::Internal(format!("glued bundle fails checks: {}", rep.failures.join("; "))));
    }
    Ok(IcResult { bundle, pconn: pc, terms, checks, warnings })
}

// ---------------- α and β ----------------

/// Level-1 Taylor data on one overlap, with the divisor of chart `i` inverted.
struct Level1Pair {
    ext: ExtRing,
    /// `F*(θ_i / G_i)`
    tf: SMat,
    /// `θ_i / G_i`
    t: SMat,
    delta: Sec,
    /// `Σ_{k<p} (tf δ)^k / k!`
    s: SMat,
}

fn factorial_inv(r: &Ring, k: u64) -> WittElem {
    let f = (1..=k).fold(1u64, |acc, x| acc * x % r.p);
    r.inv(r.from_u64(f)).expect("k < p")
}

fn level1_pair(e1: &Bundle, frob: &FrobeniusLifting, i: usize, j: usize) -> Res<Level1Pair> {
    let x1 = &e1.cover;
    let r = &x1.ring;
    let p = r.p;
    let s = [i, j];
    let u1 = x1.loc(&s)?;
    let fr = frob.reduce_to(2)?;
    let un = fr.cover.loc(&s)?;
    let xov = fr.overlap_image(i, j)?;
    let fi = fr.cover.restrict(&[i], &s, &fr.images[i])?;
    let dn = un.div_p_pow(&un.sub(&fi, &xov), 1).ok_or_else(|| CartierError::InvalidLift("liftings disagree mod p".into()))?;
    let ext = ext_ring(x1, i, j)?;
    let lo = &ext.ext;
    let delta = ext.to_ext(&un.reduce_to(u1, &dn));
    let th = e1.higgs_on(&s).ok_or_else(|| CartierError::InvalidInput("expected a Higgs bundle".into()))?;
    let ginv = lo.inv(&lo.poly(x1.charts[i].g(r))).unwrap();
    let t = ext.to_ext_mat(&th).scale(lo, &ginv);
    let tf = t.map(|x| abs_frobenius(lo, x));
    let rank = e1.rank;
    let mut sum = SMat::identity(lo, rank);
    let mut pw = SMat::identity(lo, rank);
    for k in 1..p {
        pw = pw.mul(lo, &tf).scale(lo, &delta);
        sum = sum.add(lo, &pw.scale_elem(lo, factorial_inv(r, k)));
    }
    Ok(Level1Pair { ext, tf, t, delta, s: sum })
}

fn check_level1(e1: &Bundle, frob: &FrobeniusLifting) -> Res<()> {
    if e1.cover.level() != 1 || !e1.graded || e1.higgs.is_none() {
        return Err(CartierError::InvalidInput("α and β take a graded Higgs bundle at level 1".into()));
    }
    if frob.level() < 2 || !frob.cover.reduce_to(1)?.same_as(&e1.cover) {
        return Err(CartierError::CoverMismatch("Frobenius liftings do not lie over the Higgs bundle's cover".into()));
    }
    let spread = e1.weights.iter().max().unwrap() - e1.weights.iter().min().unwrap();
    if spread as u64 + 2 > e1.cover.ring.p {
        return Err(CartierError::Unsupported("weight spread must be at most p-2".into()));
    }
    Ok(())
}

/// `α` on a graded torsor cochain `(x_ij, y_i)` of `E₁`: the class
/// `(S⁻¹(F*(x) S − R), ζ F*(y))` in `DR End(C^{-1} E₁)`, in the frames `1 ⊗ e`.
pub fn alpha_cochain(e1: &Bundle, frob: &FrobeniusLifting, eps: &Cochain) -> Res<Cochain> {
    check_level1(e1, frob)?;
    let x1 = &e1.cover;
    let r = &x1.ring;
    let p = r.p;
    let k = x1.num_charts();
    let mut out = Cochain::zero(1);
    for i in 0..k {
        if let Some(y) = eps.get(&[i]) {
            let lr = x1.loc(&[i])?;
            let zeta = frob.zeta(i, x1)?;
            out.insert(vec![i], y.map(|s| abs_frobenius(lr, s)).scale(lr, &zeta));
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            let s = [i, j];
            let u1 = x1.loc(&s)?;
            let lp = level1_pair(e1, frob, i, j)?;
            let lo = &lp.ext.ext;
            let rank = e1.rank;
            let mut rsum = SMat::zeros(rank, rank);
            if let Some(y) = eps.get(&[i]) {
                let ginv = lo.inv(&lo.poly(x1.charts[i].g(r))).unwrap();
                let yr = y.map(|sec| x1.restrict(&[i], &s, sec).expect("restriction"));
                let yg = lp.ext.to_ext_mat(&yr).scale(lo, &ginv);
                // Q_k = Σ_{a+b=k-1} t^a y t^b / k!
                let mut tp = vec![SMat::identity(lo, rank)];
                for _ in 1..p {
                    let nx = tp.last().unwrap().mul(lo, &lp.t);
                    tp.push(nx);
                }
                let mut dk = lo.one();
                for kk in 1..p as usize {
                    dk = lo.mul(&dk, &lp.delta);
                    let mut q = SMat::zeros(rank, rank);
                    for a in 0..kk {
                        q = q.add(lo, &tp[a].mul(lo, &yg).mul(lo, &tp[kk - 1 - a]));
                    }
                    let qf = q.map(|x| abs_frobenius(lo, x)).scale_elem(lo, factorial_inv(r, kk as u64));
                    rsum = rsum.add(lo, &qf.scale(lo, &dk));
                }
            }
            let mut m = rsum.neg(lo);
            if let Some(x) = eps.get(&[i, j]) {
                let xf = lp.ext.to_ext_mat(x).map(|z| abs_frobenius(lo, z));
                m = m.add(lo, &xf.mul(lo, &lp.s));
            }
            let sinv = lp.s.inv(lo).ok_or_else(|| CartierError::Internal("Taylor matrix is not invertible".into()))?;
            let v = sinv.mul(lo, &m);
            let back = lp
                .ext
                .from_ext_mat(u1, &v)
                .ok_or_else(|| CartierError::Internal(format!("α component on {s:?} has poles")))?;
            out.insert(vec![i, j], back);
        }
    }
    Ok(out)
}

/// `β` on a log vector field cochain `e_ij` (coefficient of `ω_i^{-1}`):
/// the class `(−F*(e G_i) S⁻¹ S', 0)`, `S' = Σ_{k≥1} k N_k δ^{k-1}`.
pub fn beta_cochain(e1: &Bundle, frob: &FrobeniusLifting, eta: &Cochain) -> Res<Cochain> {
    check_level1(e1, frob)?;
    let x1 = &e1.cover;
    let r = &x1.ring;
    let p = r.p;
    let k = x1.num_charts();
    let mut out = Cochain::zero(1);
    for i in 0..k {
        for j in i + 1..k {
            let s = [i, j];
            let Some(e) = eta.get(&s) else { continue };
            let u1 = x1.loc(&s)?;
            let lp = level1_pair(e1, frob, i, j)?;
            let lo = &lp.ext.ext;
            let rank = e1.rank;
            let mut s1 = SMat::zeros(rank, rank);
            let mut pw = lp.tf.clone();
            for kk in 1..p {
                s1 = s1.add(lo, &pw.scale_elem(lo, factorial_inv(r, kk - 1)));
                pw = pw.mul(lo, &lp.tf).scale(lo, &lp.delta);
            }
            let eg = lo.mul(&lp.ext.to_ext(e.get(0, 0)), &lo.poly(x1.charts[i].g(r)));
            let sinv = lp.s.inv(lo).ok_or_else(|| CartierError::Internal("Taylor matrix is not invertible".into()))?;
            let v = sinv.mul(lo, &s1).scale(lo, &abs_frobenius(lo, &eg)).neg(lo);
            let back = lp
                .ext
                .from_ext_mat(u1, &v)
                .ok_or_else(|| CartierError::Internal(format!("β component on {s:?} has poles")))?;
            out.insert(vec![i, j], back);
        }
    }
    Ok(out)
}

/// Re-expresses an `End`-valued cochain in new frames `P_i`: `M ↦ P⁻¹ M P`
/// with `P` the frame of the first chart of each simplex.
pub fn conjugate_cochain(cov: &Cover, c: &Cochain, frames: &[SMat]) -> Res<Cochain> {
    let mut out = Cochain::zero(c.deg);
    for (sigma, m) in &c.comps {
        let lr = cov.loc(sigma)?;
        let a = sigma[0];
        let p = frames[a].map(|s| cov.restrict(&[a], sigma, s).expect("restriction"));
        let pi = p.inv(lr).ok_or_else(|| CartierError::InvalidInput("frame is not invertible".into()))?;
        out.insert(sigma.clone(), pi.mul(lr, m).mul(lr, &p));
    }
    Ok(out)
}
