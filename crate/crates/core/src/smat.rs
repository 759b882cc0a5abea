//! Small matrices of sections of a localized ring.

use crate::poly::{LocRing, Poly, Sec};
use crate::witt::WittElem;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SMat {
    pub rows: usize,
    pub cols: usize,
    pub d: Vec<Sec>,
}

impl SMat {
    pub fn zeros(rows: usize, cols: usize) -> SMat {
        SMat { rows, cols, d: vec![Sec::default(); rows * cols] }
    }

    pub fn identity(lr: &LocRing, n: usize) -> SMat {
        let mut m = SMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, lr.one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Sec) -> SMat {
        let mut d = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                d.push(f(i, j));
            }
        }
        SMat { rows, cols, d }
    }

    pub fn diag(lr: &LocRing, entries: &[Sec]) -> SMat {
        let n = entries.len();
        SMat::from_fn(n, n, |i, j| if i == j { entries[i].clone() } else { lr.zero() })
    }

    pub fn from_polys(lr: &LocRing, rows: usize, cols: usize, ps: &[Poly]) -> SMat {
        SMat::from_fn(rows, cols, |i, j| lr.poly(ps[i * cols + j].clone()))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Sec {
        &self.d[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Sec) {
        self.d[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|s| s.num.is_zero())
    }

    pub fn map(&self, mut f: impl FnMut(&Sec) -> Sec) -> SMat {
        SMat { rows: self.rows, cols: self.cols, d: self.d.iter().map(|s| f(s)).collect() }
    }

    pub fn map_indexed(&self, mut f: impl FnMut(usize, usize, &Sec) -> Sec) -> SMat {
        SMat::from_fn(self.rows, self.cols, |i, j| f(i, j, self.get(i, j)))
    }

    pub fn add(&self, lr: &LocRing, o: &SMat) -> SMat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        SMat { rows: self.rows, cols: self.cols, d: self.d.iter().zip(&o.d).map(|(a, b)| lr.add(a, b)).collect() }
    }

    pub fn sub(&self, lr: &LocRing, o: &SMat) -> SMat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        SMat { rows: self.rows, cols: self.cols, d: self.d.iter().zip(&o.d).map(|(a, b)| lr.sub(a, b)).collect() }
    }

    pub fn neg(&self, lr: &LocRing) -> SMat {
        self.map(|s| lr.neg(s))
    }

    pub fn scale(&self, lr: &LocRing, s: &Sec) -> SMat {
        self.map(|x| lr.mul(x, s))
    }

    pub fn scale_elem(&self, lr: &LocRing, c: WittElem) -> SMat {
        self.map(|x| lr.scale(x, c))
    }

    pub fn mul(&self, lr: &LocRing, o: &SMat) -> SMat {
        assert_eq!(self.cols, o.rows, "matrix shapes");
        let mut out = SMat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.num.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if b.num.is_zero() {
                        continue;
                    }
                    let v = lr.add(out.get(i, j), &lr.mul(a, b));
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> SMat {
        SMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn det(&self, lr: &LocRing) -> Sec {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        match n {
            0 => lr.one(),
            1 => self.get(0, 0).clone(),
            _ => {
                let mut acc = lr.zero();
                for j in 0..n {
                    let a = self.get(0, j);
                    if a.num.is_zero() {
                        continue;
                    }
                    let t = lr.mul(a, &self.minor(0, j).det(lr));
                    acc = if j % 2 == 0 { lr.add(&acc, &t) } else { lr.sub(&acc, &t) };
                }
                acc
            }
        }
    }

    fn minor(&self, r: usize, c: usize) -> SMat {
        let mut d = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            for j in 0..self.cols {
                if j != c {
                    d.push(self.get(i, j).clone());
                }
            }
        }
        SMat { rows: self.rows - 1, cols: self.cols - 1, d }
    }

    /// Inverse via the adjugate; `None` unless the determinant is a unit.
    pub fn inv(&self, lr: &LocRing) -> Option<SMat> {
        let n = self.rows;
        let dinv = lr.inv(&self.det(lr))?;
        if n == 1 {
            return Some(SMat { rows: 1, cols: 1, d: vec![dinv] });
        }
        Some(SMat::from_fn(n, n, |i, j| {
            let c = lr.mul(&self.minor(j, i).det(lr), &dinv);
            if (i + j) % 2 == 0 {
                c
            } else {
                lr.neg(&c)
            }
        }))
    }

    /// Entrywise `f ↦ f' G` for the log derivation with generator polynomial `g`.
    pub fn derivation(&self, lr: &LocRing, g: &Poly) -> SMat {
        let gs = lr.poly(g.clone());
        self.map(|s| lr.mul(&lr.derivative(s), &gs))
    }

    pub fn reduce_to(&self, hi: &LocRing, lo: &LocRing) -> SMat {
        self.map(|s| hi.reduce_to(lo, s))
    }

    pub fn lift_from(&self, hi: &LocRing) -> SMat {
        self.map(|s| hi.lift_from(s))
    }

    pub fn div_p_pow(&self, lr: &LocRing, k: u32) -> Option<SMat> {
        let mut d = Vec::with_capacity(self.d.len());
        for s in &self.d {
            d.push(lr.div_p_pow(s, k)?);
        }
        Some(SMat { rows: self.rows, cols: self.cols, d })
    }

    /// Keeps the entries where `keep(i, j)` holds.
    pub fn project(&self, keep: impl Fn(usize, usize) -> bool) -> SMat {
        self.map_indexed(|i, j, s| if keep(i, j) { s.clone() } else { Sec::default() })
    }

    /// True when every nonzero entry satisfies `allowed(i, j)`.
    pub fn supported_in(&self, allowed: impl Fn(usize, usize) -> bool) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| self.get(i, j).num.is_zero() || allowed(i, j)))
    }

    /// Kronecker-style block sum `A ⊕ B`.
    pub fn block_diag(a: &SMat, b: &SMat) -> SMat {
        let n = a.rows + b.rows;
        let m = a.cols + b.cols;
        SMat::from_fn(n, m, |i, j| {
            if i < a.rows && j < a.cols {
                a.get(i, j).clone()
            } else if i >= a.rows && j >= a.cols {
                b.get(i - a.rows, j - a.cols).clone()
            } else {
                Sec::default()
            }
        })
    }
}
