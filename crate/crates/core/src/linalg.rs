//! Linear algebra over the chain rings `W_n(F_q)`: Howell normal form,
//! kernels, solving and composition lengths.
//!
//! Vectors are rows. A [`Submodule`] is always kept in Howell form, so equal
//! spans have identical representations.

use thiserror::Error;

use crate::witt::{Ring, WittElem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("submodule is not contained in the ambient module")]
    NotContained,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    pub ring: Ring,
    pub rows: usize,
    pub cols: usize,
    pub d: Vec<WittElem>,
}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl Mat {
    pub fn zeros(ring: &Ring, rows: usize, cols: usize) -> Mat {
        Mat { ring: ring.clone(), rows, cols, d: vec![WittElem::ZERO; rows * cols] }
    }

    pub fn identity(ring: &Ring, k: usize) -> Mat {
        let mut m = Mat::zeros(ring, k, k);
        for i in 0..k {
            m.set(i, i, ring.one());
        }
        m
    }

    pub fn from_rows(ring: &Ring, cols: usize, rows: Vec<Vec<WittElem>>) -> Mat {
        let mut d = Vec::with_capacity(rows.len() * cols);
        let n = rows.len();
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix");
            d.extend(r);
        }
        Mat { ring: ring.clone(), rows: n, cols, d }
    }

    pub fn from_ints(ring: &Ring, rows: &[&[i64]]) -> Mat {
        let cols = rows.first().map_or(0, |r| r.len());
        Mat::from_rows(ring, cols, rows.iter().map(|r| r.iter().map(|&v| ring.from_i64(v)).collect()).collect())
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> WittElem {
        self.d[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: WittElem) {
        self.d[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[WittElem] {
        &self.d[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<WittElem>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(&self.ring, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `M v` for a column vector `v`.
    pub fn apply(&self, v: &[WittElem]) -> Result<Vec<WittElem>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        let r = &self.ring;
        Ok((0..self.rows)
            .map(|i| {
                let mut acc = WittElem::ZERO;
                for (j, &x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if !a.is_zero() && !x.is_zero() {
                        acc = r.add(acc, r.mul(a, x));
                    }
                }
                acc
            })
            .collect())
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows);
        let r = &self.ring;
        let mut out = Mat::zeros(r, self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        let cur = out.get(i, j);
                        out.set(i, j, r.add(cur, r.mul(a, b)));
                    }
                }
            }
        }
        out
    }
}

pub fn is_zero_vec(v: &[WittElem]) -> bool {
    v.iter().all(|x| x.is_zero())
}

/// `a - t*b` in place.
fn axpy(ring: &Ring, a: &mut [WittElem], t: WittElem, b: &[WittElem], from: usize) {
    if t.is_zero() {
        return;
    }
    for k in from..a.len() {
        if !b[k].is_zero() {
            a[k] = ring.sub(a[k], ring.mul(t, b[k]));
        }
    }
}

fn scale(ring: &Ring, a: &mut [WittElem], t: WittElem) {
    for x in a.iter_mut() {
        if !x.is_zero() {
            *x = ring.mul(*x, t);
        }
    }
}

/// Canonical residue of `a` modulo `p^v` and the quotient `(a - r)/p^v`.
fn split_mod_pv(ring: &Ring, a: WittElem, v: u32) -> (WittElem, WittElem) {
    let d = ring.p.pow(v);
    let mut r = WittElem::ZERO;
    let mut q = WittElem::ZERO;
    for i in 0..ring.m {
        r.c[i] = a.c[i] % d;
        q.c[i] = a.c[i] / d;
    }
    (r, q)
}

/// Row span in Howell normal form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Submodule {
    pub ambient: usize,
    /// Rows in echelon order; `pivots[i] = (column, valuation)`.
    pub rows: Vec<Vec<WittElem>>,
    pub pivots: Vec<(usize, u32)>,
}

impl Submodule {
    pub fn zero(ambient: usize) -> Submodule {
        Submodule { ambient, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn full(ring: &Ring, ambient: usize) -> Submodule {
        howell_form(&Mat::identity(ring, ambient))
    }

    /// Composition length: each row contributes `n - v`.
    pub fn length(&self, ring: &Ring) -> usize {
        self.pivots.iter().map(|&(_, v)| (ring.n - v) as usize).sum()
    }

    /// Canonical representative of `x` modulo the span, plus the coefficients
    /// used (`x = residue + sum coeffs[i] * rows[i]`).
    pub fn reduce(&self, ring: &Ring, x: &[WittElem]) -> (Vec<WittElem>, Vec<WittElem>) {
        let mut r = x.to_vec();
        let mut coeffs = vec![WittElem::ZERO; self.rows.len()];
        for (i, &(c, v)) in self.pivots.iter().enumerate() {
            let (rem, q) = split_mod_pv(ring, r[c], v);
            let _ = rem;
            if !q.is_zero() {
                axpy(ring, &mut r, q, &self.rows[i], c);
                coeffs[i] = q;
            }
        }
        (r, coeffs)
    }

    pub fn contains(&self, ring: &Ring, x: &[WittElem]) -> bool {
        is_zero_vec(&self.reduce(ring, x).0)
    }

    pub fn contains_module(&self, ring: &Ring, o: &Submodule) -> bool {
        o.rows.iter().all(|r| self.contains(ring, r))
    }

    pub fn as_mat(&self, ring: &Ring) -> Mat {
        Mat::from_rows(ring, self.ambient, self.rows.clone())
    }

    pub fn sum(&self, ring: &Ring, o: &Submodule) -> Submodule {
        let mut rows = self.rows.clone();
        rows.extend(o.rows.iter().cloned());
        howell_rows(ring, self.ambient, rows)
    }
}

/// Howell normal form of the row span of `m`.
pub fn howell_form(m: &Mat) -> Submodule {
    howell_rows(&m.ring, m.cols, m.row_vecs())
}

/// Howell normal form of the span of `rows`.
///
/// Columns are processed left to right; the pivot is the row of lowest
/// valuation in the column, ties broken by the lexicographically smallest row.
pub fn howell_rows(ring: &Ring, cols: usize, rows: Vec<Vec<WittElem>>) -> Submodule {
    let n = ring.n;
    let mut pool: Vec<Vec<WittElem>> = rows.into_iter().filter(|r| !is_zero_vec(r)).collect();
    let mut out_rows: Vec<Vec<WittElem>> = Vec::new();
    let mut pivots: Vec<(usize, u32)> = Vec::new();
    for c in 0..cols {
        if pool.is_empty() {
            break;
        }
        let mut best: Option<(u32, usize)> = None;
        for (i, r) in pool.iter().enumerate() {
            if r[c].is_zero() {
                continue;
            }
            let v = ring.val(r[c]);
            best = match best {
                None => Some((v, i)),
                Some((bv, bi)) => {
                    if v < bv || (v == bv && pool[i] < pool[bi]) {
                        Some((v, i))
                    } else {
                        Some((bv, bi))
                    }
                }
            };
        }
        let Some((v, bi)) = best else { continue };
        let mut piv = pool.swap_remove(bi);
        let (_, u) = ring.unit_part(piv[c]).unwrap();
        let uinv = ring.inv(u).unwrap();
        scale(ring, &mut piv, uinv);
        // the pivot entry is now p^v exactly (up to the undetermined high digits)
        piv[c] = ring.p_pow(v);
        for r in pool.iter_mut() {
            if r[c].is_zero() {
                continue;
            }
            let t = ring.div_p_pow(r[c], v).unwrap();
            axpy(ring, r, t, &piv, c);
            r[c] = WittElem::ZERO;
        }
        if v > 0 {
            let mut ann = piv.clone();
            scale(ring, &mut ann, ring.p_pow(n - v));
            ann[c] = WittElem::ZERO;
            pool.push(ann);
        }
        pool.retain(|r| !is_zero_vec(r));
        out_rows.push(piv);
        pivots.push((c, v));
    }
    // reduce entries above each pivot to canonical residues mod p^v
    for k in 0..out_rows.len() {
        let (c, v) = pivots[k];
        let (head, tail) = out_rows.split_at_mut(k);
        let pr = &tail[0];
        for r in head.iter_mut() {
            let (_, q) = split_mod_pv(ring, r[c], v);
            if !q.is_zero() {
                axpy(ring, r, q, pr, c);
            }
        }
    }
    Submodule { ambient: cols, rows: out_rows, pivots }
}

/// `{v : M v = 0}` for column vectors `v`.
pub fn kernel_basis(m: &Mat) -> Submodule {
    let ring = &m.ring;
    let (rows, cols) = (m.rows, m.cols);
    let aug: Vec<Vec<WittElem>> = (0..cols)
        .map(|j| {
            let mut r = Vec::with_capacity(rows + cols);
            r.extend((0..rows).map(|i| m.get(i, j)));
            r.extend((0..cols).map(|k| if k == j { ring.one() } else { WittElem::ZERO }));
            r
        })
        .collect();
    let h = howell_rows(ring, rows + cols, aug);
    let ker: Vec<Vec<WittElem>> = h
        .rows
        .iter()
        .zip(&h.pivots)
        .filter(|(_, &(c, _))| c >= rows)
        .map(|(r, _)| r[rows..].to_vec())
        .collect();
    howell_rows(ring, cols, ker)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solve {
    Solution(Vec<WittElem>),
    NoSolution,
}

/// Canonical solution of `M v = b`: the reduced representative modulo the kernel.
pub fn solve(m: &Mat, b: &[WittElem]) -> Result<Solve, LinalgError> {
    if b.len() != m.rows {
        return Err(LinalgError::DimensionMismatch { expected: m.rows, got: b.len() });
    }
    let ring = &m.ring;
    let (rows, cols) = (m.rows, m.cols);
    let aug: Vec<Vec<WittElem>> = (0..cols)
        .map(|j| {
            let mut r = Vec::with_capacity(rows + cols);
            r.extend((0..rows).map(|i| m.get(i, j)));
            r.extend((0..cols).map(|k| if k == j { ring.one() } else { WittElem::ZERO }));
            r
        })
        .collect();
    let h = howell_rows(ring, rows + cols, aug);
    let mut x: Vec<WittElem> = b.to_vec();
    x.extend(std::iter::repeat(WittElem::ZERO).take(cols));
    for (i, &(c, v)) in h.pivots.iter().enumerate() {
        if c >= rows {
            break;
        }
        let (rem, q) = split_mod_pv(ring, x[c], v);
        if !rem.is_zero() {
            return Ok(Solve::NoSolution);
        }
        axpy(ring, &mut x, q, &h.rows[i], c);
    }
    if !is_zero_vec(&x[..rows]) {
        return Ok(Solve::NoSolution);
    }
    let v: Vec<WittElem> = x[rows..].iter().map(|&e| ring.neg(e)).collect();
    let ker = kernel_basis(m);
    Ok(Solve::Solution(ker.reduce(ring, &v).0))
}

/// Composition length of `a / b`.
pub fn quotient_dim(ring: &Ring, a: &Submodule, b: &Submodule) -> Result<usize, LinalgError> {
    if a.ambient != b.ambient {
        return Err(LinalgError::DimensionMismatch { expected: a.ambient, got: b.ambient });
    }
    if !a.contains_module(ring, b) {
        return Err(LinalgError::NotContained);
    }
    Ok(a.length(ring) - b.length(ring))
}

/// Valuations of the invariant factors (`n` entries are dropped), ascending.
pub fn smith_valuations(m: &Mat) -> Vec<u32> {
    let ring = &m.ring;
    let mut a = m.row_vecs();
    let (rows, cols) = (m.rows, m.cols);
    let mut out = Vec::new();
    let mut active_rows: Vec<usize> = (0..rows).collect();
    let mut active_cols: Vec<usize> = (0..cols).collect();
    loop {
        let mut best: Option<(u32, usize, usize)> = None;
        for &i in &active_rows {
            for &j in &active_cols {
                if a[i][j].is_zero() {
                    continue;
                }
                let v = ring.val(a[i][j]);
                if best.map_or(true, |(bv, _, _)| v < bv) {
                    best = Some((v, i, j));
                }
            }
        }
        let Some((v, pi, pj)) = best else { break };
        out.push(v);
        let (_, u) = ring.unit_part(a[pi][pj]).unwrap();
        let uinv = ring.inv(u).unwrap();
        let prow = a[pi].clone();
        for &i in &active_rows {
            if i == pi || a[i][pj].is_zero() {
                continue;
            }
            let t = ring.mul(ring.div_p_pow(a[i][pj], v).unwrap(), uinv);
            let ai = &mut a[i];
            for k in 0..cols {
                ai[k] = ring.sub(ai[k], ring.mul(t, prow[k]));
            }
        }
        active_rows.retain(|&i| i != pi);
        active_cols.retain(|&j| j != pj);
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witt::WittRing;

    fn z9() -> Ring {
        WittRing::new(3, 2, 1, &[0, 1]).unwrap()
    }

    #[test]
    fn howell_of_six_is_three() {
        let r = z9();
        let h = howell_form(&Mat::from_ints(&r, &[&[6]]));
        assert_eq!(h.rows, vec![vec![r.from_u64(3)]]);
    }

    #[test]
    fn howell_keeps_diag_three_one() {
        let r = z9();
        let m = Mat::from_ints(&r, &[&[3, 0], &[0, 1]]);
        let h = howell_form(&m);
        assert_eq!(h.as_mat(&r), m);
    }

    #[test]
    fn identity_is_its_own_form() {
        let r = WittRing::new(3, 2, 1, &[0, 1]).unwrap();
        let h = howell_form(&Mat::identity(&r, 3));
        assert_eq!(h.as_mat(&r), Mat::identity(&r, 3));
    }

    #[test]
    fn kernel_examples() {
        let r = z9();
        let k = kernel_basis(&Mat::from_ints(&r, &[&[3]]));
        assert_eq!(k.rows, vec![vec![r.from_u64(3)]]);
        assert!(kernel_basis(&Mat::identity(&r, 2)).rows.is_empty());
        assert_eq!(kernel_basis(&Mat::from_ints(&r, &[&[0]])).rows, vec![vec![r.one()]]);
    }

    #[test]
    fn solve_examples() {
        let r = z9();
        let m = Mat::from_ints(&r, &[&[3]]);
        assert_eq!(solve(&m, &[r.from_u64(6)]).unwrap(), Solve::Solution(vec![r.from_u64(2)]));
        assert_eq!(solve(&m, &[r.one()]).unwrap(), Solve::NoSolution);
        let b = vec![r.from_u64(5), r.from_u64(7)];
        assert_eq!(solve(&Mat::identity(&r, 2), &b).unwrap(), Solve::Solution(b.clone()));
        assert!(solve(&m, &b).is_err());
    }

    #[test]
    fn quotient_dims() {
        let r = z9();
        let a = Submodule::full(&r, 1);
        let b = howell_form(&Mat::from_ints(&r, &[&[3]]));
        assert_eq!(quotient_dim(&r, &a, &b).unwrap(), 1);
        assert_eq!(quotient_dim(&r, &a, &a).unwrap(), 0);
        assert_eq!(quotient_dim(&r, &a, &Submodule::zero(1)).unwrap(), 2);
        assert_eq!(quotient_dim(&r, &b, &a), Err(LinalgError::NotContained));
    }

    #[test]
    fn smith_of_diag() {
        let r = z9();
        assert_eq!(smith_valuations(&Mat::from_ints(&r, &[&[3, 0], &[0, 1]])), vec![0, 1]);
        assert_eq!(smith_valuations(&Mat::from_ints(&r, &[&[3, 6], &[6, 3]])), vec![1]);
    }
}
