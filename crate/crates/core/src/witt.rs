//! Truncated Witt rings `W_n(F_{p^m})` presented as `(Z/p^n)[x]/(f_lift)`.
//!
//! Elements are plain coefficient arrays; every operation goes through the
//! owning [`WittRing`]. The minimal lift of `f_res` has coefficients in
//! `[0, p)`, so it is the same polynomial at every level and elements move
//! between levels by reducing (or re-reading) their coefficients.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported residue degree.
pub const MAX_M: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WittError {
    #[error("p = {0} is not an odd prime")]
    NonOddPrime(u64),
    #[error("residue polynomial is not irreducible of degree {0} over F_p")]
    ReduciblePolynomial(usize),
    #[error("Hensel iteration for the Frobenius image did not converge")]
    HenselFailure,
    #[error("bad level {got} (ring level {max})")]
    BadLevel { got: u32, max: u32 },
    #[error("unsupported ring parameters: {0}")]
    Unsupported(String),
}

/// Element of `W_n(F_q)`: coefficients of `1, x, .., x^{m-1}` reduced mod `p^n`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct WittElem {
    pub c: [u64; MAX_M],
}

impl fmt::Debug for WittElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.c.iter().rposition(|&v| v != 0).map_or(0, |i| i);
        write!(f, "{:?}", &self.c[..=last])
    }
}

impl WittElem {
    pub const ZERO: WittElem = WittElem { c: [0; MAX_M] };
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0)
    }
}

/// Serialized ring descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingDescriptor {
    pub p: u64,
    pub n: u32,
    pub m: usize,
    /// Coefficients of `f_res`, constant term first; empty means `x` (m = 1).
    #[serde(default)]
    pub f_res: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WittRing {
    pub p: u64,
    pub n: u32,
    pub m: usize,
    /// `p^n`
    pub pn: u64,
    /// Monic, constant term first, length m + 1.
    pub f_res: Vec<u64>,
    pub f_lift: Vec<u64>,
    pub frob_image: WittElem,
    frob_powers: Vec<WittElem>,
}

pub type Ring = Arc<WittRing>;

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Polynomial remainder over F_p; both monic-divisor and dividend constant-first.
fn fp_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r: Vec<u64> = a.iter().map(|v| v % p).collect();
    let db = b.len() - 1;
    let lead_inv = fp_inv(b[db], p);
    while r.len() > db {
        let top = *r.last().unwrap();
        let k = r.len() - 1 - db;
        if top != 0 {
            let c = top * lead_inv % p;
            for (i, &bv) in b.iter().enumerate() {
                r[k + i] = (r[k + i] + p * p - c * bv % p) % p;
            }
        }
        r.pop();
    }
    while r.len() > 1 && *r.last().unwrap() == 0 {
        r.pop();
    }
    r
}

fn fp_inv(a: u64, p: u64) -> u64 {
    let mut r = 1;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// Irreducibility over F_p by trial division with every monic polynomial of
/// degree up to m/2.
fn irreducible_fp(f: &[u64], p: u64) -> bool {
    let m = f.len() - 1;
    if m == 1 {
        return true;
    }
    for d in 1..=m / 2 {
        let count = p.pow(d as u32);
        for code in 0..count {
            let mut g = Vec::with_capacity(d + 1);
            let mut c = code;
            for _ in 0..d {
                g.push(c % p);
                c /= p;
            }
            g.push(1);
            let r = fp_rem(f, &g, p);
            if r.iter().all(|&v| v == 0) {
                return false;
            }
        }
    }
    true
}

impl WittRing {
    /// Builds `W_n(F_{p^m})` from a monic residue polynomial given constant term first.
    pub fn new(p: u64, n: u32, m: usize, f_res: &[u64]) -> Result<Ring, WittError> {
        if p == 2 || !is_prime(p) {
            return Err(WittError::NonOddPrime(p));
        }
        if n < 1 {
            return Err(WittError::BadLevel { got: n, max: n });
        }
        if m < 1 || m > MAX_M {
            return Err(WittError::Unsupported(format!("residue degree {m}")));
        }
        let pn = p
            .checked_pow(n)
            .filter(|v| v.checked_mul(*v).is_some())
            .ok_or_else(|| WittError::Unsupported(format!("p^n too large for p={p}, n={n}")))?;
        let f_res: Vec<u64> = if f_res.is_empty() && m == 1 {
            vec![0, 1]
        } else {
            f_res.iter().map(|v| v % p).collect()
        };
        if f_res.len() != m + 1 || f_res[m] != 1 {
            return Err(WittError::ReduciblePolynomial(m));
        }
        if !irreducible_fp(&f_res, p) {
            return Err(WittError::ReduciblePolynomial(m));
        }
        let mut ring = WittRing {
            p,
            n,
            m,
            pn,
            f_lift: f_res.clone(),
            f_res,
            frob_image: WittElem::ZERO,
            frob_powers: Vec::new(),
        };
        ring.frob_image = ring.hensel_frobenius()?;
        let mut pw = Vec::with_capacity(m);
        let mut cur = ring.one();
        for _ in 0..m {
            pw.push(cur);
            cur = ring.mul(cur, ring.frob_image);
        }
        ring.frob_powers = pw;
        Ok(Arc::new(ring))
    }

    pub fn from_descriptor(d: &RingDescriptor) -> Result<Ring, WittError> {
        WittRing::new(d.p, d.n, d.m, &d.f_res)
    }

    pub fn descriptor(&self) -> RingDescriptor {
        RingDescriptor { p: self.p, n: self.n, m: self.m, f_res: self.f_res.clone() }
    }

    /// Same residue field at another level.
    pub fn at_level(&self, n: u32) -> Result<Ring, WittError> {
        WittRing::new(self.p, n, self.m, &self.f_res)
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.m as u32)
    }

    /// Newton iteration for the root of `f_lift` congruent to `x^p`.
    fn hensel_frobenius(&self) -> Result<WittElem, WittError> {
        let mut y = self.pow(self.gen(), self.p);
        for _ in 0..=(self.n + 1) {
            let fy = self.eval_f_lift(y);
            if fy.is_zero() {
                return Ok(y);
            }
            let dfy = self.eval_f_lift_deriv(y);
            let inv = self.inv(dfy).ok_or(WittError::HenselFailure)?;
            y = self.sub(y, self.mul(fy, inv));
        }
        if self.eval_f_lift(y).is_zero() {
            Ok(y)
        } else {
            Err(WittError::HenselFailure)
        }
    }

    fn eval_f_lift(&self, y: WittElem) -> WittElem {
        let mut acc = WittElem::ZERO;
        for &c in self.f_lift.iter().rev() {
            acc = self.add(self.mul(acc, y), self.from_u64(c));
        }
        acc
    }

    fn eval_f_lift_deriv(&self, y: WittElem) -> WittElem {
        let mut acc = WittElem::ZERO;
        for (k, &c) in self.f_lift.iter().enumerate().skip(1).rev() {
            acc = self.add(self.mul(acc, y), self.from_u64(c * k as u64));
        }
        acc
    }

    pub fn zero(&self) -> WittElem {
        WittElem::ZERO
    }

    pub fn one(&self) -> WittElem {
        self.from_u64(1)
    }

    /// The class of `x`.
    pub fn gen(&self) -> WittElem {
        if self.m == 1 {
            // F_p: x is a root of f_res = x + c, i.e. the integer -c.
            return self.from_i64(-(self.f_res[0] as i64));
        }
        let mut e = WittElem::ZERO;
        e.c[1] = 1;
        e
    }

    pub fn from_u64(&self, v: u64) -> WittElem {
        let mut e = WittElem::ZERO;
        e.c[0] = v % self.pn;
        e
    }

    pub fn from_i64(&self, v: i64) -> WittElem {
        let pn = self.pn as i64;
        self.from_u64(v.rem_euclid(pn) as u64)
    }

    /// Coefficients reduced mod `p^n`; extra entries beyond `m` must vanish.
    pub fn from_coeffs(&self, cs: &[i64]) -> WittElem {
        let mut e = WittElem::ZERO;
        let pn = self.pn as i64;
        for (i, &v) in cs.iter().enumerate().take(self.m) {
            e.c[i] = v.rem_euclid(pn) as u64;
        }
        e
    }

    pub fn coeffs(&self, a: WittElem) -> Vec<u64> {
        a.c[..self.m].to_vec()
    }

    /// Integer value when `a` lies in the prime subring.
    pub fn as_integer(&self, a: WittElem) -> Option<u64> {
        if a.c[1..].iter().all(|&v| v == 0) {
            Some(a.c[0])
        } else {
            None
        }
    }

    pub fn add(&self, a: WittElem, b: WittElem) -> WittElem {
        let mut r = WittElem::ZERO;
        for i in 0..self.m {
            let s = a.c[i] + b.c[i];
            r.c[i] = if s >= self.pn { s - self.pn } else { s };
        }
        r
    }

    pub fn sub(&self, a: WittElem, b: WittElem) -> WittElem {
        let mut r = WittElem::ZERO;
        for i in 0..self.m {
            r.c[i] = if a.c[i] >= b.c[i] { a.c[i] - b.c[i] } else { a.c[i] + self.pn - b.c[i] };
        }
        r
    }

    pub fn neg(&self, a: WittElem) -> WittElem {
        self.sub(WittElem::ZERO, a)
    }

    pub fn mul(&self, a: WittElem, b: WittElem) -> WittElem {
        let m = self.m;
        let pn = self.pn;
        if m == 1 {
            let mut r = WittElem::ZERO;
            r.c[0] = a.c[0] * b.c[0] % pn;
            return r;
        }
        let mut t = [0u64; 2 * MAX_M];
        for i in 0..m {
            if a.c[i] == 0 {
                continue;
            }
            for j in 0..m {
                t[i + j] = (t[i + j] + a.c[i] * b.c[j]) % pn;
            }
        }
        for k in (m..2 * m - 1).rev() {
            let top = t[k];
            if top == 0 {
                continue;
            }
            for i in 0..m {
                let sub = top * self.f_lift[i] % pn;
                t[k - m + i] = (t[k - m + i] + pn - sub) % pn;
            }
            t[k] = 0;
        }
        let mut r = WittElem::ZERO;
        r.c[..m].copy_from_slice(&t[..m]);
        r
    }

    pub fn scale_int(&self, a: WittElem, k: i64) -> WittElem {
        self.mul(a, self.from_i64(k))
    }

    pub fn pow(&self, a: WittElem, mut e: u64) -> WittElem {
        let mut r = self.one();
        let mut b = a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        r
    }

    /// p-adic valuation; `n` for zero.
    pub fn val(&self, a: WittElem) -> u32 {
        let mut v = self.n;
        for i in 0..self.m {
            let mut c = a.c[i];
            if c == 0 {
                continue;
            }
            let mut k = 0;
            while c % self.p == 0 {
                c /= self.p;
                k += 1;
            }
            v = v.min(k);
        }
        v
    }

    pub fn is_unit(&self, a: WittElem) -> bool {
        self.val(a) == 0
    }

    /// Inverse of a unit: `a^{(q-1) q^{n-1} - 1}`.
    pub fn inv(&self, a: WittElem) -> Option<WittElem> {
        if !self.is_unit(a) {
            return None;
        }
        let q = self.q();
        let order = (q - 1) * q.pow(self.n - 1);
        Some(self.pow(a, order - 1))
    }

    pub fn p_pow(&self, k: u32) -> WittElem {
        if k >= self.n {
            WittElem::ZERO
        } else {
            self.from_u64(self.p.pow(k))
        }
    }

    /// `a / p^k` when every coefficient is divisible; the quotient is only
    /// meaningful modulo `p^{n-k}`.
    pub fn div_p_pow(&self, a: WittElem, k: u32) -> Option<WittElem> {
        let d = self.p.pow(k);
        let mut r = WittElem::ZERO;
        for i in 0..self.m {
            if a.c[i] % d != 0 {
                return None;
            }
            r.c[i] = a.c[i] / d;
        }
        Some(r)
    }

    /// Writes a nonzero `a` as `p^v * u` with `u` a unit.
    pub fn unit_part(&self, a: WittElem) -> Option<(u32, WittElem)> {
        if a.is_zero() {
            return None;
        }
        let v = self.val(a);
        let mut u = self.div_p_pow(a, v).unwrap();
        // pad the unknown high digits with zero; u is a unit since its reduction is nonzero
        for i in 0..self.m {
            u.c[i] %= self.pn;
        }
        Some((v, u))
    }

    /// The ring Frobenius: fixes `Z/p^n`, sends `x` to the cached Hensel root.
    pub fn frobenius(&self, a: WittElem) -> WittElem {
        if self.m == 1 {
            return a;
        }
        let mut r = WittElem::ZERO;
        for i in 0..self.m {
            if a.c[i] != 0 {
                r = self.add(r, self.mul(self.from_u64(a.c[i]), self.frob_powers[i]));
            }
        }
        r
    }

    pub fn frobenius_pow(&self, a: WittElem, k: usize) -> WittElem {
        let mut r = a;
        for _ in 0..(k % self.m) {
            r = self.frobenius(r);
        }
        r
    }

    /// Inverse Frobenius, `sigma^{m-1}`.
    pub fn frobenius_inv(&self, a: WittElem) -> WittElem {
        self.frobenius_pow(a, self.m - 1)
    }

    /// Coefficient-wise reduction to level `n2`; the result lives in `self.at_level(n2)`.
    pub fn reduce_level(&self, a: WittElem, n2: u32) -> Result<WittElem, WittError> {
        if n2 < 1 || n2 > self.n {
            return Err(WittError::BadLevel { got: n2, max: self.n });
        }
        let d = self.p.pow(n2);
        let mut r = a;
        for i in 0..self.m {
            r.c[i] %= d;
        }
        Ok(r)
    }

    /// Minimal lift from a lower level ring: coefficients are reinterpreted.
    pub fn lift_from(&self, a: WittElem) -> WittElem {
        let mut r = a;
        for i in 0..self.m {
            r.c[i] %= self.pn;
        }
        r
    }

    /// Teichmüller representative: iterate `a -> a^q` until it stops moving.
    pub fn teichmuller(&self, a: WittElem) -> WittElem {
        let q = self.q();
        let mut cur = a;
        for _ in 0..=self.n + 1 {
            let next = self.pow(cur, q);
            if next == cur {
                return cur;
            }
            cur = next;
        }
        cur
    }

    /// Every element, in coefficient order. Only for small rings.
    pub fn elements(&self) -> Vec<WittElem> {
        let total = self.pn.pow(self.m as u32);
        (0..total)
            .map(|mut code| {
                let mut e = WittElem::ZERO;
                for i in 0..self.m {
                    e.c[i] = code % self.pn;
                    code /= self.pn;
                }
                e
            })
            .collect()
    }

    /// Residue field elements lifted minimally (coefficients in `[0, p)`).
    pub fn residue_elements(&self) -> Vec<WittElem> {
        let total = self.q();
        (0..total)
            .map(|mut code| {
                let mut e = WittElem::ZERO;
                for i in 0..self.m {
                    e.c[i] = code % self.p;
                    code /= self.p;
                }
                e
            })
            .collect()
    }

    /// F_p-basis `1, x, .., x^{m-1}` of the residue field.
    pub fn basis(&self) -> Vec<WittElem> {
        (0..self.m)
            .map(|i| {
                let mut e = WittElem::ZERO;
                e.c[i] = 1;
                e
            })
            .collect()
    }

    pub fn format(&self, a: WittElem) -> String {
        if self.m == 1 {
            return a.c[0].to_string();
        }
        let mut parts = Vec::new();
        for (k, &c) in a.c[..self.m].iter().enumerate() {
            if c == 0 {
                continue;
            }
            parts.push(match k {
                0 => c.to_string(),
                1 => format!("{c}*g"),
                _ => format!("{c}*g^{k}"),
            });
        }
        if parts.is_empty() {
            return "0".into();
        }
        format!("({})", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f9(n: u32) -> Ring {
        WittRing::new(3, n, 2, &[1, 0, 1]).unwrap()
    }

    #[test]
    fn prime_field_has_trivial_frobenius() {
        let r = WittRing::new(3, 1, 1, &[0, 1]).unwrap();
        for a in r.elements() {
            assert_eq!(r.frobenius(a), a);
        }
    }

    #[test]
    fn rejects_even_and_composite() {
        assert_eq!(WittRing::new(2, 1, 1, &[0, 1]), Err(WittError::NonOddPrime(2)));
        assert_eq!(WittRing::new(9, 1, 1, &[0, 1]), Err(WittError::NonOddPrime(9)));
    }

    #[test]
    fn rejects_reducible() {
        // x^2 - 1 = (x - 1)(x + 1)
        assert!(matches!(WittRing::new(3, 1, 2, &[2, 0, 1]), Err(WittError::ReduciblePolynomial(2))));
    }

    #[test]
    fn frobenius_of_i_is_minus_i() {
        let r = f9(2);
        let x = r.gen();
        assert_eq!(r.frobenius(x), r.neg(x));
        assert_eq!(r.frobenius(r.frobenius(x)), x);
        let two = r.from_u64(2);
        assert_eq!(r.frobenius(two), two);
    }

    #[test]
    fn reduce_level_examples() {
        let r = WittRing::new(3, 2, 1, &[0, 1]).unwrap();
        assert_eq!(r.reduce_level(r.from_u64(4), 1).unwrap(), r.from_u64(1));
        assert!(r.reduce_level(r.one(), 3).is_err());
        let s = f9(2);
        assert_eq!(s.reduce_level(s.gen(), 1).unwrap(), f9(1).gen());
    }

    #[test]
    fn inverse_and_unit_factorisation_exhaustive() {
        let r = f9(2);
        for a in r.elements() {
            if a.is_zero() {
                continue;
            }
            let (v, u) = r.unit_part(a).unwrap();
            assert!(v < r.n);
            let ui = r.inv(u).unwrap();
            assert_eq!(r.mul(u, ui), r.one());
            // p^v u agrees with a modulo p^n
            assert_eq!(r.mul(r.p_pow(v), u), a);
        }
    }

    #[test]
    fn teichmuller_is_multiplicative_fixpoint() {
        let r = f9(3);
        let q = r.q();
        for a in r.residue_elements() {
            let t = r.teichmuller(a);
            assert_eq!(r.pow(t, q), t);
            assert_eq!(r.reduce_level(t, 1).unwrap(), r.reduce_level(a, 1).unwrap());
        }
    }
}
