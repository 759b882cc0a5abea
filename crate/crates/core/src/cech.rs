//! Čech hypercohomology of the two-term complexes of [`crate::bundle`] on a
//! chart cover, computed over the residue field in finite windows of the
//! partial-fraction bases.
//!
//! A component of a cochain on `U_ι` (`ι_0 < … < ι_p`) is a matrix in the
//! frame of chart `ι_0`, with forms written in units of `ω_{ι_0}`. The total
//! differential on `C^p(F^q)` is `δ + (−1)^p ∇` with
//! `(δc)_{ι_0..ι_{p+1}} = Σ_k (−1)^k c_{ι_0..ι̂_k..ι_{p+1}}`.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{format_sec, Kind, SheafComplex};
use crate::field::{left_kernel, Echelon, Fq, F};
use crate::geometry::{Cover, Simplex};
use crate::poly::{BasisKey, Sec};
use crate::smat::SMat;
use crate::witt::{Ring, WittElem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CechError {
    #[error("hypercohomology is computed over the residue field (level 1), got level {0}")]
    NotLevelOne(u32),
    #[error("window unstable: dimensions {dims:?} still moving at window {last:?}")]
    WindowUnstable { dims: Vec<(Window, usize)>, last: Window },
    #[error("cochain is not a cocycle")]
    NotCocycle,
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub w: u32,
    pub e: u32,
}

impl Window {
    pub const DEFAULT: Window = Window { w: 8, e: 4 };
    pub const MAX_W: u32 = 64;

    pub fn doubled(self) -> Window {
        Window { w: self.w * 2, e: self.e * 2 }
    }

    pub fn join(self, o: Window) -> Window {
        Window { w: self.w.max(o.w), e: self.e.max(o.e) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Cochain {
    pub deg: usize,
    pub comps: BTreeMap<Simplex, SMat>,
}

impl Cochain {
    pub fn zero(deg: usize) -> Cochain {
        Cochain { deg, comps: BTreeMap::new() }
    }

    /// Form degree of the component on `σ`.
    pub fn q_of(&self, sigma: &[usize]) -> usize {
        self.deg + 1 - sigma.len()
    }

    pub fn insert(&mut self, sigma: Simplex, m: SMat) {
        if !m.is_zero() {
            self.comps.insert(sigma, m);
        } else {
            self.comps.remove(&sigma);
        }
    }

    pub fn get(&self, sigma: &[usize]) -> Option<&SMat> {
        self.comps.get(sigma)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.values().all(|m| m.is_zero())
    }

    pub fn add(&self, cov: &Cover, o: &Cochain) -> Cochain {
        assert_eq!(self.deg, o.deg);
        let mut out = self.clone();
        for (s, m) in &o.comps {
            let lr = cov.loc(s).unwrap();
            let v = match out.comps.get(s) {
                Some(x) => x.add(lr, m),
                None => m.clone(),
            };
            out.insert(s.clone(), v);
        }
        out
    }

    pub fn neg(&self, cov: &Cover) -> Cochain {
        Cochain {
            deg: self.deg,
            comps: self.comps.iter().map(|(s, m)| (s.clone(), m.neg(cov.loc(s).unwrap()))).collect(),
        }
    }

    pub fn sub(&self, cov: &Cover, o: &Cochain) -> Cochain {
        self.add(cov, &o.neg(cov))
    }

    pub fn scale(&self, cov: &Cover, c: WittElem) -> Cochain {
        let mut out = Cochain::zero(self.deg);
        for (s, m) in &self.comps {
            out.insert(s.clone(), m.scale_elem(cov.loc(s).unwrap(), c));
        }
        out
    }

    /// Smallest window containing every coefficient.
    pub fn window(&self, cov: &Cover) -> Window {
        let mut w = Window { w: 0, e: 0 };
        for (s, m) in &self.comps {
            let lr = cov.loc(s).unwrap();
            for sec in &m.d {
                for (k, _) in lr.expand(sec) {
                    if k.j == 0 {
                        w.w = w.w.max(k.k);
                    } else {
                        w.e = w.e.max(k.j);
                    }
                }
            }
        }
        w
    }

    /// Applies a map to every component.
    pub fn map(&self, mut f: impl FnMut(&Simplex, &SMat) -> SMat) -> Cochain {
        let mut out = Cochain::zero(self.deg);
        for (s, m) in &self.comps {
            out.insert(s.clone(), f(s, m));
        }
        out
    }
}

fn mask(s: &[usize]) -> u32 {
    s.iter().fold(0, |m, &i| m | (1 << i))
}

fn unmask(m: u32) -> Simplex {
    (0..32).filter(|i| m & (1 << i) != 0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CoordKey {
    mask: u32,
    a: u16,
    b: u16,
    key: BasisKey,
}

#[derive(Default, Debug)]
struct Coords {
    map: HashMap<CoordKey, usize>,
    list: Vec<CoordKey>,
}

impl Coords {
    fn idx(&mut self, k: CoordKey) -> usize {
        if let Some(&i) = self.map.get(&k) {
            return i;
        }
        let i = self.list.len();
        self.list.push(k);
        self.map.insert(k, i);
        i
    }
}

type SparseVec = Vec<(usize, F)>;

fn densify(v: &SparseVec, n: usize) -> Vec<F> {
    let mut out = vec![0; n];
    for &(i, x) in v {
        out[i] = x;
    }
    out
}

/// A basis of `H^n` with the window it was computed in.
#[derive(Clone, Debug)]
pub struct CohomologyBasis {
    pub deg: usize,
    pub window: Window,
    pub dim: usize,
    pub reps: Vec<Cochain>,
    /// `(window, dimension)` pairs that certify stabilization.
    pub certificate: Vec<(Window, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Classification {
    NotCocycle,
    /// `c = Σ coords_i z_i + d(correction)` with `coords ≠ 0`.
    Class { coords: Vec<WittElem>, correction: Cochain },
    /// `c = d(witness)`.
    Coboundary { witness: Cochain },
}

impl Classification {
    pub fn coords(&self, dim: usize, zero: WittElem) -> Option<Vec<WittElem>> {
        match self {
            Classification::NotCocycle => None,
            Classification::Class { coords, .. } => Some(coords.clone()),
            Classification::Coboundary { .. } => Some(vec![zero; dim]),
        }
    }
}

struct BoundaryData {
    ech: Echelon,
    src: Vec<CoordKey>,
}

/// Hypercohomology engine for one complex; caches restriction data.
pub struct Hyper {
    pub cx: SheafComplex,
    pub fq: Fq,
    ring: Ring,
    maxlen: usize,
    rcache: RefCell<HashMap<(u32, u32, BasisKey), Sec>>,
    pcache: RefCell<HashMap<(usize, u32, u32, u16, u16), Rc<SMat>>>,
    dcache: RefCell<HashMap<u32, Rc<(SMat, SMat, Sec)>>>,
    coords: RefCell<Vec<Coords>>,
    bcache: RefCell<HashMap<(usize, Window, bool), Rc<BoundaryData>>>,
    basis: RefCell<HashMap<usize, Rc<CohomologyBasis>>>,
    pub start: Window,
}

impl Hyper {
    pub fn new(cx: SheafComplex) -> Result<Hyper, CechError> {
        let ring = cx.cover().ring.clone();
        if ring.n != 1 {
            return Err(CechError::NotLevelOne(ring.n));
        }
        let fq = Fq::from_ring(&ring);
        let maxlen = cx.cover().num_charts().min(4);
        Ok(Hyper {
            cx,
            fq,
            ring,
            maxlen,
            rcache: RefCell::default(),
            pcache: RefCell::default(),
            dcache: RefCell::default(),
            coords: RefCell::new((0..4).map(|_| Coords::default()).collect()),
            bcache: RefCell::default(),
            basis: RefCell::default(),
            start: Window::DEFAULT,
        })
    }

    pub fn with_start(mut self, w: Window) -> Hyper {
        self.start = w;
        self
    }

    pub fn cover(&self) -> &Cover {
        self.cx.cover()
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    fn nterms(&self) -> usize {
        self.cx.nterms()
    }

    /// Simplices carrying components of total degree `n`.
    fn simplices_for(&self, n: usize) -> Vec<Simplex> {
        self.cover()
            .simplices(self.maxlen)
            .into_iter()
            .filter(|s| s.len() <= n + 1 && n + 1 - s.len() < self.nterms())
            .collect()
    }

    fn restrict_key(&self, sigma: &[usize], tau: &[usize], key: BasisKey) -> Sec {
        let k = (mask(sigma), mask(tau), key);
        if let Some(s) = self.rcache.borrow().get(&k) {
            return s.clone();
        }
        let cov = self.cover();
        let s = cov.restrict(sigma, tau, &cov.loc(sigma).unwrap().basis_elem(key)).expect("restriction");
        self.rcache.borrow_mut().insert(k, s.clone());
        s
    }

    /// `κ^t L[:,a] R[b,:]`, projected to the degree-`q` pattern.
    fn pmat(&self, q: usize, sigma: &[usize], tau: &[usize], a: usize, b: usize) -> Rc<SMat> {
        let k = (q, mask(sigma), mask(tau), a as u16, b as u16);
        if let Some(m) = self.pcache.borrow().get(&k) {
            return m.clone();
        }
        let cov = self.cover();
        let lr = cov.loc(tau).unwrap();
        let (r2, r1) = (self.cx.rows(), self.cx.cols());
        let m = if sigma[0] == tau[0] {
            let mut m = SMat::zeros(r2, r1);
            m.set(a, b, lr.one());
            m
        } else {
            let (l, r, kap) = self.cx.conj_data(q, sigma, tau);
            SMat::from_fn(r2, r1, |x, y| lr.mul(&lr.mul(l.get(x, a), r.get(b, y)), &kap))
        };
        let m = Rc::new(self.cx.project(q, &m));
        self.pcache.borrow_mut().insert(k, m.clone());
        m
    }

    /// Connection or Higgs data on `σ`: `(M2, M1, G_{σ0})`.
    fn diff_data(&self, sigma: &[usize]) -> Rc<(SMat, SMat, Sec)> {
        let k = mask(sigma);
        if let Some(d) = self.dcache.borrow().get(&k) {
            return d.clone();
        }
        let cov = self.cover();
        let lr = cov.loc(sigma).unwrap();
        let (m2, m1) = match self.cx.kind {
            Kind::DeRham => (self.cx.dst.conn_on(sigma).unwrap(), self.cx.src.conn_on(sigma).unwrap()),
            Kind::Higgs => (self.cx.dst.higgs_on(sigma).unwrap(), self.cx.src.higgs_on(sigma).unwrap()),
            Kind::Coherent { .. } => (SMat::zeros(self.cx.rows(), self.cx.rows()), SMat::zeros(self.cx.cols(), self.cx.cols())),
        };
        let g = lr.poly(cov.charts[sigma[0]].g(&cov.ring));
        let d = Rc::new((m2, m1, g));
        self.dcache.borrow_mut().insert(k, d.clone());
        d
    }

    fn push_sec(&self, out: &mut SparseVec, coords: &mut Coords, tau: &[usize], x: usize, y: usize, s: &Sec, sign: bool) {
        if s.num.is_zero() {
            return;
        }
        let lr = self.cover().loc(tau).unwrap();
        let m = mask(tau);
        for (key, c) in lr.expand(s) {
            let mut v = self.fq.from_elem(&self.ring, c);
            if sign {
                v = self.fq.neg(v);
            }
            let i = coords.idx(CoordKey { mask: m, a: x as u16, b: y as u16, key });
            out.push((i, v));
        }
    }

    fn combine(&self, v: SparseVec) -> SparseVec {
        let mut acc: BTreeMap<usize, F> = BTreeMap::new();
        for (i, x) in v {
            let e = acc.entry(i).or_insert(0);
            *e = self.fq.add(*e, x);
        }
        acc.into_iter().filter(|&(_, x)| x != 0).collect()
    }

    /// `d^Tot` of one basis element of degree `n`, in degree-`n+1` coordinates.
    fn d_elem(&self, n: usize, ck: CoordKey) -> SparseVec {
        let sigma = unmask(ck.mask);
        let p = sigma.len() - 1;
        let q = n - p;
        let (a, b) = (ck.a as usize, ck.b as usize);
        let cov = self.cover();
        let mut out: SparseVec = Vec::new();
        let mut coords = self.coords.borrow_mut();
        let cn = &mut coords[n + 1];
        if sigma.len() < self.maxlen {
            for x in 0..cov.num_charts() {
                if sigma.contains(&x) {
                    continue;
                }
                let mut tau = sigma.clone();
                tau.push(x);
                tau.sort();
                let pos = tau.iter().position(|&y| y == x).unwrap();
                let rs = self.restrict_key(&sigma, &tau, ck.key);
                let pm = self.pmat(q, &sigma, &tau, a, b);
                let lr = cov.loc(&tau).unwrap();
                for xx in 0..pm.rows {
                    for yy in 0..pm.cols {
                        let c = pm.get(xx, yy);
                        if c.num.is_zero() {
                            continue;
                        }
                        let v = lr.mul(&rs, c);
                        self.push_sec(&mut out, cn, &tau, xx, yy, &v, pos % 2 == 1);
                    }
                }
            }
        }
        if q == 0 && self.nterms() >= 2 && !matches!(self.cx.kind, Kind::Coherent { .. }) {
            let lr = cov.loc(&sigma).unwrap();
            let s = lr.basis_elem(ck.key);
            let dd = self.diff_data(&sigma);
            let (m2, m1, g) = (&dd.0, &dd.1, &dd.2);
            let neg = p % 2 == 1;
            let mut f = SMat::zeros(self.cx.rows(), self.cx.cols());
            if matches!(self.cx.kind, Kind::DeRham) {
                f.set(a, b, lr.mul(&lr.derivative(&s), g));
            }
            for x in 0..m2.rows {
                let c = m2.get(x, a);
                if !c.num.is_zero() {
                    let v = lr.add(f.get(x, b), &lr.mul(c, &s));
                    f.set(x, b, v);
                }
            }
            for y in 0..m1.cols {
                let c = m1.get(b, y);
                if !c.num.is_zero() {
                    let v = lr.sub(f.get(a, y), &lr.mul(&s, c));
                    f.set(a, y, v);
                }
            }
            let f = self.cx.project(1, &f);
            for x in 0..f.rows {
                for y in 0..f.cols {
                    self.push_sec(&mut out, cn, &sigma, x, y, f.get(x, y), neg);
                }
            }
        }
        drop(coords);
        self.combine(out)
    }

    /// Basis elements of `C^n` in a window.
    fn basis_keys(&self, n: usize, w: Window) -> Vec<CoordKey> {
        let cov = self.cover();
        let mut out = Vec::new();
        for s in self.simplices_for(n) {
            let q = n + 1 - s.len();
            let lr = cov.loc(&s).unwrap();
            let keys = lr.window(w.w, w.e);
            for (a, b) in self.cx.positions(q) {
                for &key in &keys {
                    out.push(CoordKey { mask: mask(&s), a: a as u16, b: b as u16, key });
                }
            }
        }
        out
    }

    fn ncoords(&self, n: usize) -> usize {
        self.coords.borrow()[n].list.len()
    }

    fn coord_of(&self, n: usize, ck: CoordKey) -> usize {
        self.coords.borrow_mut()[n].idx(ck)
    }

    /// Sparse coordinates of a cochain of degree `n`.
    pub fn to_coords(&self, c: &Cochain) -> Vec<(usize, F)> {
        let n = c.deg;
        let mut out = Vec::new();
        let mut coords = self.coords.borrow_mut();
        for (s, m) in &c.comps {
            let q = c.q_of(s);
            if q >= self.nterms() {
                continue;
            }
            for x in 0..m.rows {
                for y in 0..m.cols {
                    if self.cx.allowed(q, x, y) {
                        self.push_sec(&mut out, &mut coords[n], s, x, y, m.get(x, y), false);
                    }
                }
            }
        }
        drop(coords);
        self.combine(out)
    }

    /// Cochain from dense coordinates in degree `n`.
    pub fn from_coords(&self, n: usize, v: &[F]) -> Cochain {
        let cov = self.cover();
        let coords = self.coords.borrow();
        let mut mats: BTreeMap<Simplex, SMat> = BTreeMap::new();
        for (i, &x) in v.iter().enumerate() {
            if x == 0 {
                continue;
            }
            let ck = coords[n].list[i];
            let s = unmask(ck.mask);
            let lr = cov.loc(&s).unwrap();
            let m = mats.entry(s.clone()).or_insert_with(|| SMat::zeros(self.cx.rows(), self.cx.cols()));
            let val = lr.scale(&lr.basis_elem(ck.key), self.fq.to_elem(&self.ring, x));
            let cur = lr.add(m.get(ck.a as usize, ck.b as usize), &val);
            m.set(ck.a as usize, ck.b as usize, cur);
        }
        let mut c = Cochain::zero(n);
        for (s, m) in mats {
            c.insert(s, m);
        }
        c
    }

    /// The total differential.
    pub fn total_differential(&self, c: &Cochain) -> Cochain {
        let n = c.deg;
        let cov = self.cover();
        let mut out = Cochain::zero(n + 1);
        let lr_of = |s: &[usize]| cov.loc(s).unwrap();
        for (s, m) in &c.comps {
            let p = s.len() - 1;
            let q = n - p;
            if q >= self.nterms() {
                continue;
            }
            let m = self.cx.project(q, m);
            if s.len() < self.maxlen {
                for x in 0..cov.num_charts() {
                    if s.contains(&x) {
                        continue;
                    }
                    let mut tau = s.clone();
                    tau.push(x);
                    tau.sort();
                    let pos = tau.iter().position(|&y| y == x).unwrap();
                    let mut r = self.cx.restrict(q, s, &tau, &m);
                    if pos % 2 == 1 {
                        r = r.neg(lr_of(&tau));
                    }
                    let cur = match out.comps.get(&tau) {
                        Some(v) => v.add(lr_of(&tau), &r),
                        None => r,
                    };
                    out.insert(tau, cur);
                }
            }
            if q == 0 && self.nterms() >= 2 {
                let mut dm = self.cx.diff(s, &m);
                if p % 2 == 1 {
                    dm = dm.neg(lr_of(s));
                }
                let cur = match out.comps.get(s) {
                    Some(v) => v.add(lr_of(s), &dm),
                    None => dm,
                };
                out.insert(s.clone(), cur);
            }
        }
        out
    }

    fn boundary(&self, n: usize, w: Window, track: bool) -> Rc<BoundaryData> {
        if let Some(b) = self.bcache.borrow().get(&(n, w, track)) {
            return b.clone();
        }
        let src = if n == 0 { Vec::new() } else { self.basis_keys(n - 1, w) };
        let imgs: Vec<SparseVec> = src.iter().map(|&ck| self.d_elem(n - 1, ck)).collect();
        let nc = self.ncoords(n);
        let mut ech = if track { Echelon::with_tracking(nc, src.len()) } else { Echelon::new(nc) };
        for v in &imgs {
            ech.insert(&self.fq, &densify(v, nc));
        }
        let b = Rc::new(BoundaryData { ech, src });
        self.bcache.borrow_mut().insert((n, w, track), b.clone());
        b
    }

    /// Cocycles in the window (as dense degree-`n` coordinate vectors).
    fn cocycles(&self, n: usize, w: Window) -> Vec<SparseVec> {
        let src = self.basis_keys(n, w);
        let idx: Vec<usize> = src.iter().map(|&ck| self.coord_of(n, ck)).collect();
        let imgs: Vec<SparseVec> = src.iter().map(|&ck| self.d_elem(n, ck)).collect();
        let nc = self.ncoords(n + 1);
        let rows: Vec<Vec<F>> = imgs.iter().map(|v| densify(v, nc)).collect();
        let ker = left_kernel(&self.fq, &rows, nc);
        ker.into_iter()
            .map(|x| x.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (idx[i], c)).collect())
            .collect()
    }

    /// Dimension and representatives of `H^n` at a fixed window.
    pub fn dim_at(&self, n: usize, w: Window) -> (usize, Vec<SparseVec>) {
        let zs = self.cocycles(n, w);
        let b = self.boundary(n, w.doubled(), false);
        let nc = self.ncoords(n);
        let mut bech = b.ech.clone();
        bech.grow(nc);
        let mut h = Echelon::new(nc);
        let mut reps = Vec::new();
        for z in zs {
            let (res, _) = bech.reduce(&self.fq, &densify(&z, nc));
            if h.insert(&self.fq, &res) {
                reps.push(z);
            }
        }
        (h.rank(), reps)
    }

    /// `H^n` with window stabilization: the window doubles until two
    /// consecutive windows give the same dimension.
    pub fn cohomology(&self, n: usize) -> Result<Rc<CohomologyBasis>, CechError> {
        if let Some(b) = self.basis.borrow().get(&n) {
            return Ok(b.clone());
        }
        if n + 1 > self.nterms() + self.maxlen - 1 {
            let b = Rc::new(CohomologyBasis { deg: n, window: self.start, dim: 0, reps: Vec::new(), certificate: vec![] });
            self.basis.borrow_mut().insert(n, b.clone());
            return Ok(b);
        }
        let mut w = self.start;
        let (mut d0, mut reps0) = self.dim_at(n, w);
        let mut cert = vec![(w, d0)];
        loop {
            let w1 = w.doubled();
            if w1.w > Window::MAX_W {
                return Err(CechError::WindowUnstable { dims: cert, last: w });
            }
            let (d1, reps1) = self.dim_at(n, w1);
            cert.push((w1, d1));
            if d1 == d0 {
                break;
            }
            w = w1;
            d0 = d1;
            reps0 = reps1;
        }
        let nc = self.ncoords(n);
        let reps = reps0.iter().map(|z| self.from_coords(n, &densify(z, nc))).collect();
        let b = Rc::new(CohomologyBasis { deg: n, window: w, dim: d0, reps, certificate: cert });
        self.basis.borrow_mut().insert(n, b.clone());
        Ok(b)
    }

    pub fn dim(&self, n: usize) -> Result<usize, CechError> {
        Ok(self.cohomology(n)?.dim)
    }

    pub fn is_cocycle(&self, c: &Cochain) -> bool {
        self.to_coords(&self.total_differential(c)).is_empty()
    }

    pub fn classify(&self, c: &Cochain) -> Result<Classification, CechError> {
        if !self.is_cocycle(c) {
            return Ok(Classification::NotCocycle);
        }
        let n = c.deg;
        let basis = self.cohomology(n)?;
        let w = basis.window.join(c.window(self.cover()));
        let b = self.boundary(n, w.doubled(), true);
        let cv = self.to_coords(c);
        let rep_vs: Vec<SparseVec> = basis.reps.iter().map(|z| self.to_coords(z)).collect();
        let nc = self.ncoords(n);
        let mut bech = b.ech.clone();
        bech.grow(nc);
        let (cres, _) = bech.reduce(&self.fq, &densify(&cv, nc));
        let mut hech = Echelon::with_tracking(nc, rep_vs.len());
        for z in &rep_vs {
            let (r, _) = bech.reduce(&self.fq, &densify(z, nc));
            hech.insert(&self.fq, &r);
        }
        let x = hech.solve(&self.fq, &cres).ok_or_else(|| {
            CechError::Internal("cocycle not in the span of the class basis; enlarge the window".into())
        })?;
        // c − Σ x_i z_i ∈ B
        let mut rest = densify(&cv, nc);
        for (i, z) in rep_vs.iter().enumerate() {
            let zd = densify(z, nc);
            self.fq.axpy(&mut rest, self.fq.neg(x[i]), &zd);
        }
        let y = bech
            .solve(&self.fq, &rest)
            .ok_or_else(|| CechError::Internal("boundary solve failed".into()))?;
        let mut wit = vec![0; self.ncoords(n.saturating_sub(1)).max(1)];
        if n > 0 {
            for (j, &ck) in b.src.iter().enumerate() {
                if y[j] != 0 {
                    let i = self.coord_of(n - 1, ck);
                    if i >= wit.len() {
                        wit.resize(i + 1, 0);
                    }
                    wit[i] = self.fq.add(wit[i], y[j]);
                }
            }
        }
        let witness = if n > 0 { self.from_coords(n - 1, &wit) } else { Cochain::zero(0) };
        let coords: Vec<WittElem> = x.iter().map(|&v| self.fq.to_elem(&self.ring, v)).collect();
        if x.iter().all(|&v| v == 0) {
            Ok(Classification::Coboundary { witness })
        } else {
            Ok(Classification::Class { coords, correction: witness })
        }
    }

    /// Class coordinates of a cocycle (zero vector for coboundaries).
    pub fn coords(&self, c: &Cochain) -> Result<Vec<WittElem>, CechError> {
        let dim = self.dim(c.deg)?;
        self.classify(c)?.coords(dim, self.ring.zero()).ok_or(CechError::NotCocycle)
    }

    /// `Σ x_i z_i` for the canonical representatives.
    pub fn combination(&self, n: usize, x: &[WittElem]) -> Result<Cochain, CechError> {
        let basis = self.cohomology(n)?;
        let cov = self.cover();
        let mut acc = Cochain::zero(n);
        for (i, z) in basis.reps.iter().enumerate() {
            if !x[i].is_zero() {
                acc = acc.add(cov, &z.scale(cov, x[i]));
            }
        }
        Ok(acc)
    }

    /// Export record for a class.
    pub fn export(&self, c: &Cochain) -> Result<ClassExport, CechError> {
        let basis = self.cohomology(c.deg)?;
        let coords = self.coords(c)?;
        Ok(ClassExport {
            schema: CLASS_SCHEMA.into(),
            complex: self.cx.tag.clone(),
            degree: c.deg,
            window: basis.window,
            dim: basis.dim,
            coordinates: coords.iter().map(|&e| self.ring.coeffs(e).into_iter().map(|v| v as i64).collect()).collect(),
            representative: cochain_json(self.cover(), c),
        })
    }
}

pub const CLASS_SCHEMA: &str = "hdflow.class/1";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComponentJson {
    pub simplex: Vec<String>,
    pub form_degree: usize,
    pub matrix: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassExport {
    pub schema: String,
    pub complex: String,
    pub degree: usize,
    pub window: Window,
    pub dim: usize,
    pub coordinates: Vec<Vec<i64>>,
    pub representative: Vec<ComponentJson>,
}

pub fn cochain_json(cov: &Cover, c: &Cochain) -> Vec<ComponentJson> {
    c.comps
        .iter()
        .map(|(s, m)| {
            let lr = cov.loc(s).unwrap();
            let var = &cov.charts[s[0]].coord;
            ComponentJson {
                simplex: s.iter().map(|&i| cov.charts[i].id.clone()).collect(),
                form_degree: c.q_of(s),
                matrix: (0..m.rows).map(|a| (0..m.cols).map(|b| format_sec(lr, m.get(a, b), var)).collect()).collect(),
            }
        })
        .collect()
}
