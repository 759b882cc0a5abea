//! Univariate polynomials over `W_n(F_q)` and the localized rings
//! `W_n[u][1/h]` that carry sections on affine charts of a curve.

use serde::{Deserialize, Serialize};

use crate::witt::{Ring, WittElem};

/// Coefficients, constant term first, without trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, PartialOrd, Ord)]
pub struct Poly(pub Vec<WittElem>);

impl Poly {
    pub fn zero() -> Poly {
        Poly(Vec::new())
    }

    pub fn constant(r: &Ring, c: WittElem) -> Poly {
        Poly(vec![c]).trimmed(r)
    }

    pub fn one(r: &Ring) -> Poly {
        Poly(vec![r.one()])
    }

    /// `u`
    pub fn x(r: &Ring) -> Poly {
        Poly(vec![r.zero(), r.one()])
    }

    pub fn monomial(r: &Ring, c: WittElem, k: usize) -> Poly {
        let mut v = vec![r.zero(); k + 1];
        v[k] = c;
        Poly(v).trimmed(r)
    }

    pub fn from_ints(r: &Ring, cs: &[i64]) -> Poly {
        Poly(cs.iter().map(|&c| r.from_i64(c)).collect()).trimmed(r)
    }

    pub fn trimmed(mut self, _r: &Ring) -> Poly {
        while self.0.last().map_or(false, |c| c.is_zero()) {
            self.0.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; `None` for zero.
    pub fn deg(&self) -> Option<usize> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.len() - 1)
        }
    }

    pub fn coeff(&self, k: usize) -> WittElem {
        self.0.get(k).copied().unwrap_or(WittElem::ZERO)
    }

    pub fn lead(&self) -> WittElem {
        self.0.last().copied().unwrap_or(WittElem::ZERO)
    }

    pub fn is_monic(&self, r: &Ring) -> bool {
        self.lead() == r.one()
    }

    pub fn add(&self, r: &Ring, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n).map(|k| r.add(self.coeff(k), o.coeff(k))).collect()).trimmed(r)
    }

    pub fn sub(&self, r: &Ring, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n).map(|k| r.sub(self.coeff(k), o.coeff(k))).collect()).trimmed(r)
    }

    pub fn neg(&self, r: &Ring) -> Poly {
        Poly(self.0.iter().map(|&c| r.neg(c)).collect())
    }

    pub fn scale(&self, r: &Ring, c: WittElem) -> Poly {
        Poly(self.0.iter().map(|&v| r.mul(v, c)).collect()).trimmed(r)
    }

    pub fn mul(&self, r: &Ring, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![WittElem::ZERO; self.0.len() + o.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in o.0.iter().enumerate() {
                if !b.is_zero() {
                    out[i + j] = r.add(out[i + j], r.mul(a, b));
                }
            }
        }
        Poly(out).trimmed(r)
    }

    pub fn pow(&self, r: &Ring, e: u32) -> Poly {
        let mut acc = Poly::one(r);
        for _ in 0..e {
            acc = acc.mul(r, self);
        }
        acc
    }

    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![WittElem::ZERO; k];
        v.extend(self.0.iter().copied());
        Poly(v)
    }

    pub fn derivative(&self, r: &Ring) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, &c)| r.mul(c, r.from_u64(k as u64))).collect())
            .trimmed(r)
    }

    /// Division by a polynomial with unit leading coefficient.
    pub fn divrem(&self, r: &Ring, d: &Poly) -> (Poly, Poly) {
        let dd = d.deg().expect("division by zero polynomial");
        let linv = r.inv(d.lead()).expect("leading coefficient must be a unit");
        let mut rem = self.0.clone();
        if rem.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut q = vec![WittElem::ZERO; rem.len() - dd];
        for k in (dd..rem.len()).rev() {
            let top = rem[k];
            if top.is_zero() {
                continue;
            }
            let c = r.mul(top, linv);
            q[k - dd] = c;
            for (i, &dv) in d.0.iter().enumerate() {
                rem[k - dd + i] = r.sub(rem[k - dd + i], r.mul(c, dv));
            }
        }
        rem.truncate(dd);
        (Poly(q).trimmed(r), Poly(rem).trimmed(r))
    }

    pub fn eval(&self, r: &Ring, x: WittElem) -> WittElem {
        let mut acc = WittElem::ZERO;
        for &c in self.0.iter().rev() {
            acc = r.add(r.mul(acc, x), c);
        }
        acc
    }

    /// Apply `f` to every coefficient.
    pub fn map(&self, r: &Ring, f: impl Fn(WittElem) -> WittElem) -> Poly {
        Poly(self.0.iter().map(|&c| f(c)).collect()).trimmed(r)
    }

    pub fn reduce_to(&self, r_low: &Ring) -> Poly {
        self.map(r_low, |c| {
            let mut e = c;
            for i in 0..r_low.m {
                e.c[i] %= r_low.pn;
            }
            e
        })
    }

    pub fn lift_to(&self, r_high: &Ring) -> Poly {
        self.map(r_high, |c| r_high.lift_from(c))
    }

    /// `u^{deg} p(1/u)` for the given nominal degree.
    pub fn reversed(&self, r: &Ring, deg: usize) -> Poly {
        let mut v = vec![WittElem::ZERO; deg + 1];
        for (k, &c) in self.0.iter().enumerate() {
            v[deg - k] = c;
        }
        Poly(v).trimmed(r)
    }

    /// Divides out the leading coefficient when it is a unit.
    pub fn monicized(&self, r: &Ring) -> Option<Poly> {
        let l = r.inv(self.lead())?;
        Some(self.scale(r, l))
    }

    pub fn format(&self, r: &Ring, var: &str) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (k, &c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let cs = r.format(c);
            parts.push(match k {
                0 => cs,
                1 => format!("{cs}*{var}"),
                _ => format!("{cs}*{var}^{k}"),
            });
        }
        parts.join(" + ")
    }
}

/// Monic gcd over a residue field (level-1 ring).
pub fn gcd_field(r: &Ring, a: &Poly, b: &Poly) -> Poly {
    debug_assert_eq!(r.n, 1);
    let (mut x, mut y) = (a.clone(), b.clone());
    while !y.is_zero() {
        let (_, rem) = x.divrem(r, &y);
        x = y;
        y = rem;
    }
    if x.is_zero() {
        x
    } else {
        x.monicized(r).unwrap()
    }
}

/// Basis element of `W_n[u][1/h]`: `u^k` when `j = 0`, else `u^k / h^j` with `k < deg h`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisKey {
    pub j: u32,
    pub k: u32,
}

/// `W_n[u][1/h]` for a monic `h`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocRing {
    pub ring: Ring,
    pub h: Poly,
}

/// `num / h^e` with `e` minimal.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Sec {
    pub num: Poly,
    pub e: u32,
}

impl LocRing {
    pub fn new(ring: &Ring, h: Poly) -> LocRing {
        assert!(h.is_monic(ring), "localizing polynomial must be monic");
        LocRing { ring: ring.clone(), h }
    }

    pub fn hdeg(&self) -> usize {
        self.h.deg().unwrap()
    }

    pub fn zero(&self) -> Sec {
        Sec::default()
    }

    pub fn one(&self) -> Sec {
        self.poly(Poly::one(&self.ring))
    }

    pub fn poly(&self, p: Poly) -> Sec {
        Sec { num: p, e: 0 }
    }

    pub fn constant(&self, c: WittElem) -> Sec {
        self.poly(Poly::constant(&self.ring, c))
    }

    pub fn normalize(&self, mut s: Sec) -> Sec {
        let r = &self.ring;
        if s.num.is_zero() {
            return Sec::default();
        }
        if self.hdeg() == 0 {
            return Sec { num: s.num, e: 0 };
        }
        while s.e > 0 {
            let (q, rem) = s.num.divrem(r, &self.h);
            if !rem.is_zero() {
                break;
            }
            s.num = q;
            s.e -= 1;
        }
        s
    }

    pub fn frac(&self, num: Poly, e: u32) -> Sec {
        self.normalize(Sec { num, e })
    }

    fn hpow(&self, e: u32) -> Poly {
        self.h.pow(&self.ring, e)
    }

    pub fn add(&self, a: &Sec, b: &Sec) -> Sec {
        let r = &self.ring;
        let e = a.e.max(b.e);
        let na = a.num.mul(r, &self.hpow(e - a.e));
        let nb = b.num.mul(r, &self.hpow(e - b.e));
        self.frac(na.add(r, &nb), e)
    }

    pub fn sub(&self, a: &Sec, b: &Sec) -> Sec {
        self.add(a, &self.neg(b))
    }

    pub fn neg(&self, a: &Sec) -> Sec {
        Sec { num: a.num.neg(&self.ring), e: a.e }
    }

    pub fn mul(&self, a: &Sec, b: &Sec) -> Sec {
        if a.num.is_zero() || b.num.is_zero() {
            return Sec::default();
        }
        self.frac(a.num.mul(&self.ring, &b.num), a.e + b.e)
    }

    pub fn scale(&self, a: &Sec, c: WittElem) -> Sec {
        self.normalize(Sec { num: a.num.scale(&self.ring, c), e: a.e })
    }

    pub fn is_zero(&self, a: &Sec) -> bool {
        a.num.is_zero()
    }

    /// `d/du`.
    pub fn derivative(&self, a: &Sec) -> Sec {
        let r = &self.ring;
        if a.e == 0 {
            return self.poly(a.num.derivative(r));
        }
        // (N / h^e)' = (N' h - e N h') / h^{e+1}
        let t1 = a.num.derivative(r).mul(r, &self.h);
        let t2 = a.num.mul(r, &self.h.derivative(r)).scale(r, r.from_u64(a.e as u64));
        self.frac(t1.sub(r, &t2), a.e + 1)
    }

    /// Inverse of a unit of `W_n[u][1/h]`, or `None`.
    pub fn inv(&self, a: &Sec) -> Option<Sec> {
        let r = &self.ring;
        if a.num.is_zero() {
            return None;
        }
        let r1 = r.at_level(1).ok()?;
        let nbar = a.num.reduce_to(&r1);
        let nd = nbar.deg()?;
        let hbar = self.h.reduce_to(&r1);
        // find N with nbar | hbar^N
        let mut hp = Poly::one(&r1);
        let mut found = None;
        for big_n in 0..=(nd as u32) {
            let (q, rem) = hp.divrem(&r1, &nbar);
            if rem.is_zero() {
                found = Some((big_n, q));
                break;
            }
            hp = hp.mul(&r1, &hbar);
        }
        let (big_n, q) = found?;
        // a^{-1} = q h^e / h^N modulo p, then Newton
        let mut x = self.frac(q.lift_to(r).mul(r, &self.hpow(a.e)), big_n);
        let two = self.constant(r.from_u64(2));
        for _ in 0..(32 - r.n.leading_zeros() + 1) {
            let ax = self.mul(a, &x);
            x = self.mul(&x, &self.sub(&two, &ax));
        }
        debug_assert_eq!(self.mul(a, &x), self.one());
        if self.mul(a, &x) != self.one() {
            return None;
        }
        Some(x)
    }

    /// `a / b` when it exists, for `b` nonzero mod p. Solved mod p, then digit by digit.
    pub fn div_exact(&self, a: &Sec, b: &Sec) -> Option<Sec> {
        let r = &self.ring;
        if a.num.is_zero() {
            return Some(self.zero());
        }
        let r1 = r.at_level(1).ok()?;
        let l1 = LocRing::new(&r1, self.h.reduce_to(&r1));
        let b1 = self.reduce_to(&l1, b);
        if b1.num.is_zero() {
            return None;
        }
        let x0 = self.lift_from(&l1.div_field(&self.reduce_to(&l1, a), &b1)?);
        let rest = self.sub(a, &self.mul(b, &x0));
        if rest.num.is_zero() {
            return Some(x0);
        }
        if r.n == 1 {
            return None;
        }
        let rest_p = self.div_p_pow(&rest, 1)?;
        let rn = r.at_level(r.n - 1).ok()?;
        let ln = LocRing::new(&rn, self.h.reduce_to(&rn));
        let y = ln.div_exact(&self.reduce_to(&ln, &rest_p), &self.reduce_to(&ln, b))?;
        Some(self.add(&x0, &self.scale(&self.lift_from(&y), r.p_pow(1))))
    }

    /// Exact division over a residue field.
    fn div_field(&self, a: &Sec, b: &Sec) -> Option<Sec> {
        let r = &self.ring;
        let mut b0 = b.num.clone();
        let mut bh = Poly::one(r);
        if self.hdeg() > 0 {
            loop {
                let g = gcd_field(r, &b0, &self.h);
                if g.deg().unwrap_or(0) == 0 {
                    break;
                }
                b0 = b0.divrem(r, &g).0;
                bh = bh.mul(r, &g);
            }
        }
        let (q, rem) = a.num.divrem(r, &b0);
        if !rem.is_zero() {
            return None;
        }
        let bh_inv = self.inv(&self.poly(bh))?;
        Some(self.mul(&self.frac(q.mul(r, &self.hpow(b.e)), a.e), &bh_inv))
    }

    pub fn pow(&self, a: &Sec, e: i64) -> Option<Sec> {
        let base = if e < 0 { self.inv(a)? } else { a.clone() };
        let mut acc = self.one();
        for _ in 0..e.unsigned_abs() {
            acc = self.mul(&acc, &base);
        }
        Some(acc)
    }

    /// Coordinates in the partial-fraction basis.
    pub fn expand(&self, a: &Sec) -> Vec<(BasisKey, WittElem)> {
        let r = &self.ring;
        let mut out = Vec::new();
        if a.num.is_zero() {
            return out;
        }
        let (q, rem) = if a.e == 0 { (a.num.clone(), Poly::zero()) } else { a.num.divrem(r, &self.hpow(a.e)) };
        for (k, &c) in q.0.iter().enumerate() {
            if !c.is_zero() {
                out.push((BasisKey { j: 0, k: k as u32 }, c));
            }
        }
        // h-adic digits of rem: rem = sum_i c_i h^i, contributes c_i / h^{e-i}
        let mut cur = rem;
        let mut i = 0u32;
        while !cur.is_zero() {
            let (qq, digit) = cur.divrem(r, &self.h);
            for (k, &c) in digit.0.iter().enumerate() {
                if !c.is_zero() {
                    out.push((BasisKey { j: a.e - i, k: k as u32 }, c));
                }
            }
            cur = qq;
            i += 1;
        }
        out.sort();
        out
    }

    pub fn basis_elem(&self, key: BasisKey) -> Sec {
        let r = &self.ring;
        self.frac(Poly::monomial(r, r.one(), key.k as usize), key.j)
    }

    /// Basis of the window: `u^k` for `k <= w`, and `u^k/h^j` for `1 <= j <= e`.
    pub fn window(&self, w: u32, e: u32) -> Vec<BasisKey> {
        let mut out: Vec<BasisKey> = (0..=w).map(|k| BasisKey { j: 0, k }).collect();
        if self.hdeg() > 0 {
            for j in 1..=e {
                for k in 0..self.hdeg() as u32 {
                    out.push(BasisKey { j, k });
                }
            }
        }
        out
    }

    /// Substitutes `u = num(v)/den(v)` into `a`, landing in `target` (coordinate `v`).
    pub fn substitute(&self, a: &Sec, num: &Poly, den: &Poly, target: &LocRing) -> Option<Sec> {
        let td_inv = target.inv(&target.poly(den.clone()))?;
        let phi = target.mul(&target.poly(num.clone()), &td_inv);
        self.compose(a, &phi, target)
    }

    /// Substitutes `u = phi` (a section of `target`) into `a`.
    pub fn compose(&self, a: &Sec, phi: &Sec, target: &LocRing) -> Option<Sec> {
        let eval = |p: &Poly| -> Sec {
            let mut acc = target.zero();
            for &c in p.0.iter().rev() {
                acc = target.add(&target.mul(&acc, phi), &target.constant(c));
            }
            acc
        };
        let n = eval(&a.num);
        if a.e == 0 {
            return Some(n);
        }
        let hinv = target.inv(&eval(&self.h))?;
        Some(target.mul(&n, &target.pow(&hinv, a.e as i64)?))
    }

    pub fn reduce_to(&self, low: &LocRing, a: &Sec) -> Sec {
        low.frac(a.num.reduce_to(&low.ring), a.e)
    }

    pub fn lift_from(&self, a: &Sec) -> Sec {
        self.frac(a.num.lift_to(&self.ring), a.e)
    }

    /// `a / p^k` when every coefficient is divisible (meaningful mod `p^{n-k}`).
    pub fn div_p_pow(&self, a: &Sec, k: u32) -> Option<Sec> {
        let r = &self.ring;
        let mut cs = Vec::with_capacity(a.num.0.len());
        for &c in &a.num.0 {
            cs.push(r.div_p_pow(c, k)?);
        }
        Some(Sec { num: Poly(cs), e: a.e })
    }

    pub fn map_coeffs(&self, a: &Sec, f: impl Fn(WittElem) -> WittElem) -> Sec {
        self.frac(a.num.map(&self.ring, f), a.e)
    }

    /// Numerator degree minus `e * deg h`: the pole order at infinity when positive.
    pub fn degree_at_infinity(&self, a: &Sec) -> Option<i64> {
        a.num.deg().map(|d| d as i64 - (a.e as i64) * self.hdeg() as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witt::WittRing;

    #[test]
    fn laurent_inverse_and_expand() {
        let r = WittRing::new(3, 2, 1, &[0, 1]).unwrap();
        let lr = LocRing::new(&r, Poly::x(&r));
        let s = lr.poly(Poly::x(&r));
        let si = lr.inv(&s).unwrap();
        assert_eq!(si, lr.frac(Poly::one(&r), 1));
        // (1 + 3u)/u: unit? reduction is 1/u, yes
        let a = lr.frac(Poly::from_ints(&r, &[1, 3]), 1);
        let ai = lr.inv(&a).unwrap();
        assert_eq!(lr.mul(&a, &ai), lr.one());
        let ex = lr.expand(&lr.frac(Poly::from_ints(&r, &[2, 0, 0, 5]), 2));
        assert_eq!(
            ex,
            vec![(BasisKey { j: 0, k: 1 }, r.from_u64(5)), (BasisKey { j: 2, k: 0 }, r.from_u64(2))]
        );
    }

    #[test]
    fn substitution_one_over_u() {
        let r = WittRing::new(5, 1, 1, &[0, 1]).unwrap();
        let src = LocRing::new(&r, Poly::x(&r));
        let dst = LocRing::new(&r, Poly::x(&r));
        // u^2 + 1/u with u = 1/v gives v^{-2} + v
        let a = src.frac(Poly::from_ints(&r, &[1, 0, 0, 1]), 1);
        let b = src.substitute(&a, &Poly::one(&r), &Poly::x(&r), &dst).unwrap();
        assert_eq!(b, dst.frac(Poly::from_ints(&r, &[1, 0, 0, 1]), 2));
    }

    #[test]
    fn non_units_have_no_inverse() {
        let r = WittRing::new(3, 2, 1, &[0, 1]).unwrap();
        let lr = LocRing::new(&r, Poly::x(&r));
        assert!(lr.inv(&lr.poly(Poly::from_ints(&r, &[1, 1]))).is_none());
        assert!(lr.inv(&lr.constant(r.from_u64(3))).is_none());
    }
}
