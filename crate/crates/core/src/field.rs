//! Table-driven arithmetic in the residue field `F_q` and sparse-friendly
//! row echelon forms. Used for all hypercohomology computations over `X₁`.

use crate::witt::{Ring, WittElem};

pub type F = u16;

#[derive(Clone, Debug)]
pub struct Fq {
    pub p: u64,
    pub m: usize,
    pub q: usize,
    add: Vec<F>,
    mul: Vec<F>,
    neg: Vec<F>,
    inv: Vec<F>,
}

impl Fq {
    /// Builds the tables from a level-1 ring. Panics above `q = 2048`.
    pub fn from_ring(r: &Ring) -> Fq {
        assert_eq!(r.n, 1, "residue field tables need a level-1 ring");
        let q = r.q() as usize;
        assert!(q <= 2048, "field too large for tables");
        let elems: Vec<WittElem> = (0..q).map(|i| Self::elem_of(r, i)).collect();
        let idx = |e: WittElem| Self::idx_of(r, e);
        let mut add = vec![0; q * q];
        let mut mul = vec![0; q * q];
        for a in 0..q {
            for b in 0..q {
                add[a * q + b] = idx(r.add(elems[a], elems[b]));
                mul[a * q + b] = idx(r.mul(elems[a], elems[b]));
            }
        }
        let neg = (0..q).map(|a| idx(r.neg(elems[a]))).collect();
        let inv = (0..q).map(|a| if a == 0 { 0 } else { idx(r.inv(elems[a]).unwrap()) }).collect();
        Fq { p: r.p, m: r.m, q, add, mul, neg, inv }
    }

    fn elem_of(r: &Ring, mut i: usize) -> WittElem {
        let mut e = WittElem::ZERO;
        for k in 0..r.m {
            e.c[k] = (i % r.p as usize) as u64;
            i /= r.p as usize;
        }
        e
    }

    fn idx_of(r: &Ring, e: WittElem) -> F {
        let mut i = 0usize;
        for k in (0..r.m).rev() {
            i = i * r.p as usize + e.c[k] as usize;
        }
        i as F
    }

    pub fn from_elem(&self, r: &Ring, e: WittElem) -> F {
        debug_assert_eq!(r.n, 1);
        Self::idx_of(r, e)
    }

    pub fn to_elem(&self, r: &Ring, i: F) -> WittElem {
        Self::elem_of(r, i as usize)
    }

    #[inline]
    pub fn add(&self, a: F, b: F) -> F {
        self.add[a as usize * self.q + b as usize]
    }
    #[inline]
    pub fn sub(&self, a: F, b: F) -> F {
        self.add(a, self.neg[b as usize])
    }
    #[inline]
    pub fn mul(&self, a: F, b: F) -> F {
        self.mul[a as usize * self.q + b as usize]
    }
    #[inline]
    pub fn neg(&self, a: F) -> F {
        self.neg[a as usize]
    }
    #[inline]
    pub fn inv(&self, a: F) -> F {
        assert!(a != 0, "inverse of zero");
        self.inv[a as usize]
    }

    /// `y += c x`
    pub fn axpy(&self, y: &mut [F], c: F, x: &[F]) {
        if c == 0 {
            return;
        }
        let mc = &self.mul[c as usize * self.q..(c as usize + 1) * self.q];
        for (yy, &xx) in y.iter_mut().zip(x) {
            if xx != 0 {
                *yy = self.add[*yy as usize * self.q + mc[xx as usize] as usize];
            }
        }
    }

    pub fn scale(&self, x: &mut [F], c: F) {
        let mc = &self.mul[c as usize * self.q..(c as usize + 1) * self.q];
        for v in x.iter_mut() {
            *v = mc[*v as usize];
        }
    }
}

/// Semi-reduced echelon form of a growing set of rows; optionally tracks
/// each stored row as a combination of the inserted rows.
#[derive(Clone, Debug)]
pub struct Echelon {
    pub ncols: usize,
    pub rows: Vec<Vec<F>>,
    pub pivots: Vec<usize>,
    /// Pivot column to row position.
    pivot_row: Vec<Option<usize>>,
    track: Option<(usize, Vec<Vec<F>>)>,
    inserted: usize,
}

impl Echelon {
    pub fn new(ncols: usize) -> Echelon {
        Echelon { ncols, rows: Vec::new(), pivots: Vec::new(), pivot_row: vec![None; ncols], track: None, inserted: 0 }
    }

    /// Tracks combinations of up to `n` inserted rows.
    pub fn with_tracking(ncols: usize, n: usize) -> Echelon {
        let mut e = Echelon::new(ncols);
        e.track = Some((n, Vec::new()));
        e
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Widens all rows with zeros.
    pub fn grow(&mut self, ncols: usize) {
        if ncols <= self.ncols {
            return;
        }
        for r in &mut self.rows {
            r.resize(ncols, 0);
        }
        self.pivot_row.resize(ncols, None);
        self.ncols = ncols;
    }

    /// Reduces `v` against the stored rows. Returns the residue and (when
    /// tracking) the combination `c` of inserted rows with `v = residue + Σ c_i row_i`.
    pub fn reduce(&self, f: &Fq, v: &[F]) -> (Vec<F>, Option<Vec<F>>) {
        let mut v = v.to_vec();
        v.resize(self.ncols, 0);
        let mut comb = self.track.as_ref().map(|(n, _)| vec![0; *n]);
        for (ri, row) in self.rows.iter().enumerate() {
            let c = v[self.pivots[ri]];
            if c != 0 {
                f.axpy(&mut v, f.neg(c), row);
                if let (Some(cb), Some((_, t))) = (comb.as_mut(), self.track.as_ref()) {
                    f.axpy(cb, c, &t[ri]);
                }
            }
        }
        (v, comb)
    }

    /// Inserts a row; returns true when it was independent. With tracking,
    /// the inserted row gets the next combination index.
    pub fn insert(&mut self, f: &Fq, v: &[F]) -> bool {
        let idx = self.inserted;
        self.inserted += 1;
        let (mut res, comb) = self.reduce(f, v);
        let piv = match res.iter().position(|&x| x != 0) {
            Some(p) => p,
            None => return false,
        };
        let c = f.inv(res[piv]);
        f.scale(&mut res, c);
        if let Some((n, t)) = self.track.as_mut() {
            // residue = v − Σ comb_i row_i, in terms of inserted rows
            let mut cb: Vec<F> = comb.unwrap().iter().map(|&x| f.neg(x)).collect();
            cb.resize(*n, 0);
            assert!(idx < *n, "tracking capacity exceeded");
            cb[idx] = f.add(cb[idx], 1);
            f.scale(&mut cb, c);
            t.push(cb);
        }
        self.pivot_row[piv] = Some(self.rows.len());
        self.pivots.push(piv);
        self.rows.push(res);
        true
    }

    /// Expresses `v` as a combination of inserted rows, if it lies in the span.
    pub fn solve(&self, f: &Fq, v: &[F]) -> Option<Vec<F>> {
        let (res, comb) = self.reduce(f, v);
        if res.iter().any(|&x| x != 0) {
            return None;
        }
        comb
    }

    pub fn contains(&self, f: &Fq, v: &[F]) -> bool {
        self.reduce(f, v).0.iter().all(|&x| x == 0)
    }
}

/// Left kernel of the rows: all `x` with `Σ x_i rows_i = 0`, as a basis.
pub fn left_kernel(f: &Fq, rows: &[Vec<F>], ncols: usize) -> Vec<Vec<F>> {
    let n = rows.len();
    let mut e = Echelon::with_tracking(ncols, n);
    let mut out = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let (res, comb) = e.reduce(f, r);
        if res.iter().all(|&x| x == 0) {
            let mut k: Vec<F> = comb.unwrap().iter().map(|&x| f.neg(x)).collect();
            k[i] = f.add(k[i], 1);
            out.push(k);
            e.inserted += 1;
        } else {
            e.insert(f, r);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witt::WittRing;

    #[test]
    fn f9_tables_match_ring() {
        let r = WittRing::new(3, 1, 2, &[1, 0, 1]).unwrap();
        let f = Fq::from_ring(&r);
        for a in r.elements() {
            for b in r.elements() {
                let (ia, ib) = (f.from_elem(&r, a), f.from_elem(&r, b));
                assert_eq!(f.to_elem(&r, f.mul(ia, ib)), r.mul(a, b));
                assert_eq!(f.to_elem(&r, f.add(ia, ib)), r.add(a, b));
            }
        }
    }

    #[test]
    fn kernel_and_solve() {
        let r = WittRing::new(5, 1, 1, &[0, 1]).unwrap();
        let f = Fq::from_ring(&r);
        let rows = vec![vec![1, 2, 0], vec![2, 4, 0], vec![0, 1, 1], vec![1, 3, 1]];
        let k = left_kernel(&f, &rows, 3);
        assert_eq!(k.len(), 2);
        for x in &k {
            let mut acc = vec![0; 3];
            for (i, row) in rows.iter().enumerate() {
                f.axpy(&mut acc, x[i], row);
            }
            assert_eq!(acc, vec![0, 0, 0]);
        }
        let mut e = Echelon::with_tracking(3, 4);
        for row in &rows {
            e.insert(&f, row);
        }
        let target = vec![3, 3, 2];
        let c = e.solve(&f, &target).unwrap();
        let mut acc = vec![0; 3];
        for (i, row) in rows.iter().enumerate() {
            f.axpy(&mut acc, c[i], row);
        }
        assert_eq!(acc, target);
    }
}
