//! Smooth log curves over `W_n` presented by finite affine chart covers.
//!
//! Every chart is `Spec W_n[u][1/h]` in a single coordinate `u` with a log
//! divisor given by monic polynomials in `u`. An intersection `U_σ` of charts
//! is presented in the coordinate of its smallest chart, localized at the
//! product of the boundary polynomials. Sections of `Ω¹(log D)` on `U_σ` are
//! stored as coefficients of the generator `du/(g_1..g_r)` of that chart.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_poly, parse_rational, Rational};
use crate::poly::{gcd_field, LocRing, Poly, Sec};
use crate::witt::{Ring, RingDescriptor, WittElem, WittError, WittRing};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Witt(#[from] WittError),
    #[error("unknown overlap {0:?}")]
    UnknownOverlap(Vec<usize>),
    #[error("reduction mismatch: {0}")]
    ReductionMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid cover: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub id: String,
    pub coord: String,
    /// Monic denominator `h`: sections live in `W_n[u][1/h]`.
    pub h: Poly,
    /// Monic divisor components in `u`.
    pub divisor: Vec<Poly>,
}

impl Chart {
    /// Product of the divisor components.
    pub fn g(&self, r: &Ring) -> Poly {
        self.divisor.iter().fold(Poly::one(r), |acc, d| acc.mul(r, d))
    }
}

pub type Simplex = Vec<usize>;

#[derive(Clone, Debug)]
pub struct Cover {
    pub ring: Ring,
    pub charts: Vec<Chart>,
    /// Transition maps as declared, keyed by ordered chart pair `(i, j)`: `u_j` in terms of `u_i`.
    pub declared: BTreeMap<(usize, usize), Rational>,
    rings: BTreeMap<Simplex, LocRing>,
    /// `u_j` as a section on `U_{ij}` for `i < j`.
    pair_coord: BTreeMap<(usize, usize), Sec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub ok: bool,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new() -> Report {
        Report { ok: true, failures: Vec::new(), warnings: Vec::new() }
    }
    pub fn fail(&mut self, s: impl Into<String>) {
        self.ok = false;
        self.failures.push(s.into());
    }
    pub fn warn(&mut self, s: impl Into<String>) {
        self.warnings.push(s.into());
    }
    pub fn merge(&mut self, o: Report) {
        self.ok &= o.ok;
        self.failures.extend(o.failures);
        self.warnings.extend(o.warnings);
    }
}

/// All nonempty subsets of `0..k` with at most `max` elements, sorted.
pub fn simplices(k: usize, max: usize) -> Vec<Simplex> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << k) {
        let s: Simplex = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        if s.len() <= max {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

fn level1(r: &Ring) -> Ring {
    r.at_level(1).expect("level 1 ring")
}

/// Adds the part of `c` not already divisible by a known factor (all mod p, monic).
fn push_factor(r1: &Ring, factors: &mut Vec<Poly>, c: &Poly) -> Result<(), GeoError> {
    if c.is_zero() {
        return Err(GeoError::Invalid("boundary polynomial vanishes mod p".into()));
    }
    let mut c = c.monicized(r1).ok_or_else(|| GeoError::Invalid("boundary polynomial vanishes mod p".into()))?;
    // only the support matters: drop repeated factors
    let dc = c.derivative(r1);
    if !dc.is_zero() {
        let g = gcd_field(r1, &c, &dc);
        if g.deg().unwrap_or(0) > 0 {
            c = c.divrem(r1, &g).0.monicized(r1).unwrap();
        }
    }
    for f in factors.iter() {
        loop {
            if c.deg().unwrap_or(0) == 0 {
                break;
            }
            let (q, rem) = c.divrem(r1, f);
            if rem.is_zero() {
                c = q;
            } else {
                break;
            }
        }
    }
    if c.deg().unwrap_or(0) > 0 {
        factors.push(c);
    }
    Ok(())
}

/// `den^{deg h} h(num/den)`
fn homogenized(r: &Ring, h: &Poly, num: &Poly, den: &Poly) -> Poly {
    let d = h.deg().unwrap_or(0) as u32;
    let mut acc = Poly::zero();
    for (k, &c) in h.0.iter().enumerate() {
        let term = num.pow(r, k as u32).mul(r, &den.pow(r, d - k as u32)).scale(r, c);
        acc = acc.add(r, &term);
    }
    acc
}

impl Cover {
    /// Builds a cover from charts and transition maps `u_j = num(u_i)/den(u_i)`
    /// declared at least for every pair `i < j`.
    pub fn new(
        ring: &Ring,
        charts: Vec<Chart>,
        declared: BTreeMap<(usize, usize), Rational>,
    ) -> Result<Cover, GeoError> {
        let k = charts.len();
        if k == 0 {
            return Err(GeoError::Invalid("cover has no charts".into()));
        }
        for c in &charts {
            if !c.h.is_monic(ring) {
                return Err(GeoError::Invalid(format!("chart {}: denominator must be monic", c.id)));
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                if !declared.contains_key(&(i, j)) {
                    return Err(GeoError::Invalid(format!(
                        "missing transition from chart {} to chart {}",
                        charts[i].id, charts[j].id
                    )));
                }
            }
        }
        let r1 = level1(ring);
        let mut rings = BTreeMap::new();
        for s in simplices(k, k.min(4)) {
            let a = s[0];
            let mut factors: Vec<Poly> = Vec::new();
            let ha = charts[a].h.reduce_to(&r1);
            if ha.deg().unwrap_or(0) > 0 {
                factors.push(ha);
            }
            for &b in &s[1..] {
                let m = &declared[&(a, b)];
                let num = m.num.reduce_to(&r1);
                let den = m.den.reduce_to(&r1);
                push_factor(&r1, &mut factors, &den)?;
                let hb = charts[b].h.reduce_to(&r1);
                push_factor(&r1, &mut factors, &homogenized(&r1, &hb, &num, &den))?;
            }
            let h = factors.iter().fold(Poly::one(&r1), |acc, f| acc.mul(&r1, f));
            rings.insert(s, LocRing::new(ring, h.lift_to(ring)));
        }
        let mut pair_coord = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                let lr = &rings[&vec![i, j]];
                let m = &declared[&(i, j)];
                let dinv = lr.inv(&lr.poly(m.den.clone())).ok_or_else(|| {
                    GeoError::Invalid(format!("transition {}->{}: denominator not invertible", i, j))
                })?;
                pair_coord.insert((i, j), lr.mul(&lr.poly(m.num.clone()), &dinv));
            }
        }
        Ok(Cover { ring: ring.clone(), charts, declared, rings, pair_coord })
    }

    pub fn level(&self) -> u32 {
        self.ring.n
    }

    pub fn num_charts(&self) -> usize {
        self.charts.len()
    }

    pub fn simplices(&self, max: usize) -> Vec<Simplex> {
        simplices(self.charts.len(), max.min(4))
    }

    pub fn loc(&self, s: &[usize]) -> Result<&LocRing, GeoError> {
        self.rings.get(s).ok_or_else(|| GeoError::UnknownOverlap(s.to_vec()))
    }

    pub fn pair_coord(&self, i: usize, j: usize) -> &Sec {
        &self.pair_coord[&(i, j)]
    }

    /// Coordinate `u_b` as a section on `U_τ` (with `b ∈ τ`).
    pub fn coord_on(&self, tau: &[usize], b: usize) -> Result<Sec, GeoError> {
        let a = tau[0];
        let lr = self.loc(tau)?;
        if a == b {
            return Ok(lr.poly(Poly::x(&self.ring)));
        }
        let pc = self.pair_coord.get(&(a, b)).ok_or_else(|| GeoError::UnknownOverlap(vec![a, b]))?;
        self.restrict(&[a, b], tau, pc)
    }

    /// Restriction of a section from `U_σ` to `U_τ`, `σ ⊆ τ`.
    pub fn restrict(&self, sigma: &[usize], tau: &[usize], f: &Sec) -> Result<Sec, GeoError> {
        if !sigma.iter().all(|x| tau.contains(x)) {
            return Err(GeoError::UnknownOverlap(tau.to_vec()));
        }
        let src = self.loc(sigma)?;
        let dst = self.loc(tau)?;
        let phi = if sigma[0] == tau[0] {
            dst.poly(Poly::x(&self.ring))
        } else {
            let pc = self.pair_coord.get(&(tau[0], sigma[0])).ok_or_else(|| GeoError::UnknownOverlap(tau.to_vec()))?;
            if tau.len() == 2 {
                pc.clone()
            } else {
                let pair = [tau[0], sigma[0]];
                let pl = self.loc(&pair)?;
                pl.compose(pc, &dst.poly(Poly::x(&self.ring)), dst)
                    .ok_or_else(|| GeoError::Invalid(format!("restriction {pair:?} -> {tau:?} failed")))?
            }
        };
        src.compose(f, &phi, dst)
            .ok_or_else(|| GeoError::Invalid(format!("restriction {sigma:?} -> {tau:?} not defined")))
    }

    /// `κ` with `ω_b = κ ω_{τ0}` on `U_τ`.
    pub fn kappa(&self, tau: &[usize], b: usize) -> Result<Sec, GeoError> {
        let a = tau[0];
        let lr = self.loc(tau)?;
        let r = &self.ring;
        if a == b {
            return Ok(lr.one());
        }
        let ub = self.coord_on(tau, b)?;
        let dub = lr.derivative(&ub);
        let ga = lr.poly(self.charts[a].g(r));
        let gb_chart = self.loc(&[b])?;
        let gb = gb_chart
            .compose(&gb_chart.poly(self.charts[b].g(r)), &ub, lr)
            .ok_or_else(|| GeoError::Invalid("divisor substitution failed".into()))?;
        lr.div_exact(&lr.mul(&dub, &ga), &gb).ok_or_else(|| {
            GeoError::Invalid(format!(
                "log forms of charts {} and {} are not compatible on {tau:?}",
                self.charts[a].id, self.charts[b].id
            ))
        })
    }

    /// Restriction of a log 1-form coefficient from `U_σ` to `U_τ`.
    pub fn restrict_form(&self, sigma: &[usize], tau: &[usize], f: &Sec) -> Result<Sec, GeoError> {
        let g = self.restrict(sigma, tau, f)?;
        if sigma[0] == tau[0] {
            return Ok(g);
        }
        let k = self.kappa(tau, sigma[0])?;
        Ok(self.loc(tau)?.mul(&g, &k))
    }

    /// `d f = δ(f) ω_{τ0}` with `δ = G_{τ0} d/du`.
    pub fn dlog_derivation(&self, tau: &[usize], f: &Sec) -> Sec {
        let lr = &self.rings[tau];
        let g = lr.poly(self.charts[tau[0]].g(&self.ring));
        lr.mul(&lr.derivative(f), &g)
    }

    /// Generator of `Ω¹(log D)` on a chart, as (numerator, denominator) of `du`.
    pub fn log_one_forms(&self, chart: usize) -> Poly {
        self.charts[chart].g(&self.ring)
    }

    pub fn validate(&self) -> Report {
        let mut rep = Report::new();
        let r = &self.ring;
        let r1 = level1(r);
        for c in &self.charts {
            if c.h.reduce_to(&r1).is_zero() {
                rep.fail(format!("chart {}: denominator vanishes mod p", c.id));
            }
            let reduced: Vec<Poly> = c.divisor.iter().map(|g| g.reduce_to(&r1)).collect();
            for (gi, g) in reduced.iter().enumerate() {
                if !c.divisor[gi].is_monic(r) || g.deg().unwrap_or(0) == 0 {
                    rep.fail(format!("chart {}: divisor component {gi} is not monic of positive degree", c.id));
                    continue;
                }
                let d = gcd_field(&r1, g, &g.derivative(&r1));
                if d.deg().unwrap_or(0) > 0 {
                    rep.fail(format!("chart {}: divisor component {gi} is not reduced mod p", c.id));
                }
                for (gj, g2) in reduced.iter().enumerate().skip(gi + 1) {
                    if g2.is_zero() {
                        continue;
                    }
                    if gcd_field(&r1, g, g2).deg().unwrap_or(0) > 0 {
                        rep.fail(format!("chart {}: divisor components {gi} and {gj} are not coprime mod p", c.id));
                    }
                }
            }
        }
        let k = self.charts.len();
        // declared inverse maps
        for (&(i, j), m) in &self.declared {
            if i < j {
                continue;
            }
            // u_i = m(u_j); check on U_{ji} in coordinate u_j
            let s = vec![j, i];
            let lr = match self.loc(&s) {
                Ok(l) => l,
                Err(e) => {
                    rep.fail(format!("{e}"));
                    continue;
                }
            };
            let ui = match self.coord_on(&s, i) {
                Ok(v) => v,
                Err(e) => {
                    rep.fail(format!("{e}"));
                    continue;
                }
            };
            let back = lr.inv(&lr.poly(m.den.clone())).map(|dinv| lr.mul(&lr.poly(m.num.clone()), &dinv));
            match back {
                Some(b) if b == ui => {}
                _ => rep.fail(format!(
                    "overlap ({}, {}): declared map is not inverse to ({}, {})",
                    self.charts[i].id, self.charts[j].id, self.charts[j].id, self.charts[i].id
                )),
            }
        }
        for s in self.simplices(3) {
            if s.len() == 3 {
                let (i, j, kk) = (s[0], s[1], s[2]);
                let direct = self.coord_on(&s, kk);
                let via = self.restrict(&[j, kk], &s, self.pair_coord(j, kk));
                match (direct, via) {
                    (Ok(a), Ok(b)) if a == b => {}
                    (Ok(_), Ok(_)) => rep.fail(format!(
                        "transition cocycle fails on ({}, {}, {})",
                        self.charts[i].id, self.charts[j].id, self.charts[kk].id
                    )),
                    (Err(e), _) | (_, Err(e)) => rep.fail(format!("{e}")),
                }
            }
            if s.len() >= 2 {
                for &b in &s[1..] {
                    match self.kappa(&s, b) {
                        Ok(kap) => {
                            if self.loc(&s).unwrap().inv(&kap).is_none() {
                                rep.fail(format!(
                                    "log forms of charts {} and {} disagree on {:?}",
                                    self.charts[s[0]].id, self.charts[b].id, s
                                ));
                            }
                        }
                        Err(e) => rep.fail(format!("{e}")),
                    }
                }
            }
        }
        let _ = k;
        rep
    }

    /// Coefficient-wise reduction to a lower level.
    pub fn reduce_to(&self, n: u32) -> Result<Cover, GeoError> {
        let low = self.ring.at_level(n)?;
        if n > self.ring.n {
            return Err(GeoError::Witt(WittError::BadLevel { got: n, max: self.ring.n }));
        }
        let charts = self
            .charts
            .iter()
            .map(|c| Chart {
                id: c.id.clone(),
                coord: c.coord.clone(),
                h: c.h.reduce_to(&low),
                divisor: c.divisor.iter().map(|g| g.reduce_to(&low)).collect(),
            })
            .collect();
        let declared = self
            .declared
            .iter()
            .map(|(k, m)| (*k, Rational { num: m.num.reduce_to(&low), den: m.den.reduce_to(&low) }))
            .collect();
        let mut out = Cover::new(&low, charts, declared)?;
        for (k, s) in &self.pair_coord {
            let lr_hi = &self.rings[&vec![k.0, k.1]];
            let lr_lo = out.rings[&vec![k.0, k.1]].clone();
            out.pair_coord.insert(*k, lr_hi.reduce_to(&lr_lo, s));
        }
        Ok(out)
    }

    /// Minimal coefficient lift to a higher level.
    pub fn lift_to(&self, n: u32) -> Result<Cover, GeoError> {
        let hi = self.ring.at_level(n)?;
        let lo = &self.ring;
        let charts = self
            .charts
            .iter()
            .map(|c| {
                let divisor: Vec<Poly> = c.divisor.iter().map(|g| lift_factor(lo, &hi, g)).collect();
                // keep h a product of divisor factors when it was one
                let mut rest = c.h.clone();
                let mut h = Poly::one(&hi);
                for (g, gh) in c.divisor.iter().zip(&divisor) {
                    let (q, rem) = rest.divrem(lo, g);
                    if rem.is_zero() && g.deg().unwrap_or(0) > 0 {
                        rest = q;
                        h = h.mul(&hi, gh);
                    }
                }
                let h = if rest.deg() == Some(0) && rest.coeff(0) == lo.one() { h } else { c.h.lift_to(&hi) };
                Chart { id: c.id.clone(), coord: c.coord.clone(), h, divisor }
            })
            .collect();
        let declared = self
            .declared
            .iter()
            .map(|(k, m)| (*k, Rational { num: m.num.lift_to(&hi), den: m.den.lift_to(&hi) }))
            .collect();
        let mut out = Cover::new(&hi, charts, declared)?;
        for (k, s) in &self.pair_coord {
            let lr = out.rings[&vec![k.0, k.1]].clone();
            out.pair_coord.insert(*k, lr.lift_from(s));
        }
        Ok(out)
    }

    /// Replaces the transition `u_j` on `U_{ij}` (for `i < j`); the declared
    /// map table is left as is, so only use this for thickening perturbations.
    pub fn with_pair_coord(&self, i: usize, j: usize, s: Sec) -> Cover {
        let mut c = self.clone();
        c.pair_coord.insert((i, j), s);
        c
    }

    /// True when both covers have the same charts and the same transitions.
    pub fn same_as(&self, o: &Cover) -> bool {
        self.ring == o.ring && self.charts == o.charts && self.pair_coord == o.pair_coord
    }

    /// Moves the transition maps along a log vector field `η`: on `U_{ij}`,
    /// `u_i ↦ u_i + p^{n-1} e_ij G_i`, where `e_ij` is a level-1 section.
    pub fn perturbed(&self, eta: &BTreeMap<(usize, usize), Sec>) -> Result<Cover, GeoError> {
        let r = &self.ring;
        let n = r.n;
        if n < 2 {
            return Err(GeoError::Unsupported("perturbation needs level >= 2".into()));
        }
        let mut out = self.clone();
        for (&(i, j), e) in eta {
            let lr = self.loc(&[i, j])?;
            let e_hi = lr.lift_from(e);
            let g = lr.poly(self.charts[i].g(r));
            let shift = lr.scale(&lr.mul(&e_hi, &g), r.p_pow(n - 1));
            let phi = &self.pair_coord[&(i, j)];
            let dphi = lr.derivative(phi);
            let np = lr.add(phi, &lr.mul(&shift, &dphi));
            out.declared.insert((i, j), Rational { num: np.num.clone(), den: lr.h.pow(r, np.e) });
            // the old inverse no longer applies; the forward map determines it
            out.declared.remove(&(j, i));
            out.pair_coord.insert((i, j), np);
        }
        Ok(out)
    }

    pub fn reduction_matches(&self, low: &Cover) -> bool {
        match self.reduce_to(low.level()) {
            Ok(red) => red.same_as(low),
            Err(_) => false,
        }
    }

    // ---- standard covers of the projective line ----

    /// `P¹` with charts `A¹_s` and `A¹_t`, `t = 1/s`; `points` are the finite
    /// divisor points (in `s`) and `infinity` adds the point `s = ∞`.
    pub fn p1(ring: &Ring, points: &[WittElem], infinity: bool) -> Result<Cover, GeoError> {
        let r = ring;
        let s_div: Vec<Poly> = points.iter().map(|&a| Poly(vec![r.neg(a), r.one()])).collect();
        let mut t_div: Vec<Poly> = Vec::new();
        if infinity {
            t_div.push(Poly::x(r));
        }
        for &a in points {
            if a.is_zero() {
                continue;
            }
            let ai = r.inv(a).ok_or_else(|| GeoError::Invalid("divisor point must be 0 or a unit".into()))?;
            t_div.push(Poly(vec![r.neg(ai), r.one()]));
        }
        let charts = vec![
            Chart { id: "s".into(), coord: "s".into(), h: Poly::one(r), divisor: s_div },
            Chart { id: "t".into(), coord: "t".into(), h: Poly::one(r), divisor: t_div },
        ];
        let mut declared = BTreeMap::new();
        declared.insert((0, 1), Rational { num: Poly::one(r), den: Poly::x(r) });
        declared.insert((1, 0), Rational { num: Poly::one(r), den: Poly::x(r) });
        Cover::new(r, charts, declared)
    }

    /// Three-chart cover of `P¹` with divisor `{0, ∞}`: `A¹_s \ {1}`, `A¹_t`, `A¹_s \ {0}`.
    pub fn p1_three(ring: &Ring) -> Result<Cover, GeoError> {
        let r = ring;
        let charts = vec![
            Chart { id: "a".into(), coord: "s".into(), h: Poly::from_ints(r, &[-1, 1]), divisor: vec![Poly::x(r)] },
            Chart { id: "b".into(), coord: "t".into(), h: Poly::one(r), divisor: vec![Poly::x(r)] },
            Chart { id: "c".into(), coord: "s".into(), h: Poly::x(r), divisor: vec![] },
        ];
        let mut declared = BTreeMap::new();
        declared.insert((0, 1), Rational { num: Poly::one(r), den: Poly::x(r) });
        declared.insert((0, 2), Rational { num: Poly::x(r), den: Poly::one(r) });
        declared.insert((1, 2), Rational { num: Poly::one(r), den: Poly::x(r) });
        Cover::new(r, charts, declared)
    }
}

// ---------------- JSON ----------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CoeffJson {
    Int(i64),
    Elem(Vec<i64>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PolyJson {
    Expr(String),
    Coeffs(Vec<CoeffJson>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RatJson {
    Expr(String),
    Frac { num: PolyJson, den: PolyJson },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChartJson {
    pub id: String,
    pub coords: Vec<String>,
    #[serde(default)]
    pub denominator: Option<PolyJson>,
    #[serde(default)]
    pub divisor: Vec<PolyJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OverlapJson {
    pub i: String,
    pub j: String,
    pub maps: BTreeMap<String, RatJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoverJson {
    #[serde(default)]
    pub schema: Option<String>,
    pub base: RingDescriptor,
    pub charts: Vec<ChartJson>,
    pub overlaps: Vec<OverlapJson>,
}

pub const COVER_SCHEMA: &str = "hdflow.cover/1";

pub fn elem_from_json(r: &Ring, c: &CoeffJson) -> WittElem {
    match c {
        CoeffJson::Int(v) => r.from_i64(*v),
        CoeffJson::Elem(v) => r.from_coeffs(v),
    }
}

pub fn elem_to_json(r: &Ring, e: WittElem) -> CoeffJson {
    if r.m == 1 {
        CoeffJson::Int(e.c[0] as i64)
    } else {
        CoeffJson::Elem(r.coeffs(e).into_iter().map(|v| v as i64).collect())
    }
}

pub fn poly_from_json(r: &Ring, var: &str, p: &PolyJson) -> Result<Poly, GeoError> {
    match p {
        PolyJson::Expr(s) => parse_poly(r, var, s).map_err(GeoError::Parse),
        PolyJson::Coeffs(cs) => Ok(Poly(cs.iter().map(|c| elem_from_json(r, c)).collect()).trimmed(r)),
    }
}

pub fn poly_to_json(r: &Ring, p: &Poly) -> PolyJson {
    PolyJson::Coeffs(p.0.iter().map(|&c| elem_to_json(r, c)).collect())
}

fn rat_from_json(r: &Ring, var: &str, m: &RatJson) -> Result<Rational, GeoError> {
    match m {
        RatJson::Expr(s) => parse_rational(r, var, s).map_err(GeoError::Parse),
        RatJson::Frac { num, den } => Ok(Rational { num: poly_from_json(r, var, num)?, den: poly_from_json(r, var, den)? }),
    }
}

impl Cover {
    pub fn from_json(j: &CoverJson) -> Result<Cover, GeoError> {
        let ring = WittRing::from_descriptor(&j.base)?;
        let mut charts = Vec::new();
        for c in &j.charts {
            if c.coords.len() != 1 {
                return Err(GeoError::Unsupported(format!(
                    "chart {}: relative dimension {} (only curves are supported)",
                    c.id,
                    c.coords.len()
                )));
            }
            let var = &c.coords[0];
            let h = match &c.denominator {
                Some(p) => poly_from_json(&ring, var, p)?,
                None => Poly::one(&ring),
            };
            let h = h.monicized(&ring).ok_or_else(|| GeoError::Invalid(format!("chart {}: denominator vanishes mod p", c.id)))?;
            let divisor = c.divisor.iter().map(|p| poly_from_json(&ring, var, p)).collect::<Result<Vec<_>, _>>()?;
            charts.push(Chart { id: c.id.clone(), coord: var.clone(), h, divisor });
        }
        let idx = |id: &str| -> Result<usize, GeoError> {
            charts.iter().position(|c| c.id == id).ok_or_else(|| GeoError::Parse(format!("unknown chart id '{id}'")))
        };
        let mut declared = BTreeMap::new();
        for o in &j.overlaps {
            let (i, jj) = (idx(&o.i)?, idx(&o.j)?);
            let target = &charts[jj].coord;
            let m = o
                .maps
                .get(target)
                .ok_or_else(|| GeoError::Parse(format!("overlap ({}, {}) lacks a map for '{target}'", o.i, o.j)))?;
            declared.insert((i, jj), rat_from_json(&ring, &charts[i].coord, m)?);
        }
        Cover::new(&ring, charts, declared)
    }

    pub fn to_json(&self) -> CoverJson {
        let r = &self.ring;
        CoverJson {
            schema: Some(COVER_SCHEMA.into()),
            base: r.descriptor(),
            charts: self
                .charts
                .iter()
                .map(|c| ChartJson {
                    id: c.id.clone(),
                    coords: vec![c.coord.clone()],
                    denominator: Some(poly_to_json(r, &c.h)),
                    divisor: c.divisor.iter().map(|g| poly_to_json(r, g)).collect(),
                })
                .collect(),
            overlaps: self
                .declared
                .iter()
                .map(|(&(i, j), m)| OverlapJson {
                    i: self.charts[i].id.clone(),
                    j: self.charts[j].id.clone(),
                    maps: [(
                        self.charts[j].coord.clone(),
                        RatJson::Frac { num: poly_to_json(r, &m.num), den: poly_to_json(r, &m.den) },
                    )]
                    .into_iter()
                    .collect(),
                })
                .collect(),
        }
    }
}

/// Parses and validates; construction failures become report entries.
pub fn validate_cover_json(j: &CoverJson) -> Report {
    match Cover::from_json(j) {
        Ok(c) => c.validate(),
        Err(GeoError::Parse(e)) => {
            let mut r = Report::new();
            r.fail(format!("parse error: {e}"));
            r
        }
        Err(e) => {
            let mut r = Report::new();
            r.fail(format!("{e}"));
            r
        }
    }
}

/// A level-`n+1` cover together with its level-`n` reduction.
#[derive(Clone, Debug)]
pub struct Thickening {
    pub high: Cover,
    pub low: Cover,
}

impl Thickening {
    /// Validates that `high` reduces to `low`.
    pub fn new(low: &Cover, high: Cover) -> Result<Thickening, GeoError> {
        if high.level() != low.level() + 1 {
            return Err(GeoError::ReductionMismatch(format!(
                "levels {} and {} are not adjacent",
                low.level(),
                high.level()
            )));
        }
        if !high.reduction_matches(low) {
            return Err(GeoError::ReductionMismatch("level n+1 data does not reduce to the level n cover".into()));
        }
        Ok(Thickening { high, low: low.clone() })
    }

    /// The minimal coefficient lift.
    pub fn canonical(low: &Cover) -> Result<Thickening, GeoError> {
        let high = low.lift_to(low.level() + 1)?;
        Thickening::new(low, high)
    }

    /// Ideal generator exponent: `I = (p^n)`.
    pub fn ideal_exponent(&self) -> u32 {
        self.low.level()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3(n: u32) -> Ring {
        WittRing::new(3, n, 1, &[0, 1]).unwrap()
    }

    #[test]
    fn p1_cover_is_valid() {
        let r = f3(2);
        let c = Cover::p1(&r, &[r.zero()], true).unwrap();
        let rep = c.validate();
        assert!(rep.ok, "{:?}", rep.failures);
        let c3 = Cover::p1_three(&r).unwrap();
        let rep3 = c3.validate();
        assert!(rep3.ok, "{:?}", rep3.failures);
    }

    #[test]
    fn tampered_inverse_is_rejected() {
        let r = f3(1);
        let mut c = Cover::p1(&r, &[], false).unwrap();
        c.declared.insert((1, 0), Rational { num: Poly::x(&r), den: Poly::one(&r) });
        assert!(!c.validate().ok);
    }

    #[test]
    fn non_reduced_divisor_is_rejected() {
        let r = f3(1);
        let mut c = Cover::p1(&r, &[], false).unwrap();
        c.charts[1].divisor = vec![Poly::from_ints(&r, &[0, 0, 1])];
        let rep = c.validate();
        assert!(rep.failures.iter().any(|f| f.contains("not reduced")), "{:?}", rep.failures);
    }

    #[test]
    fn restriction_of_s_and_dlog() {
        let r = f3(2);
        let c = Cover::p1(&r, &[r.zero()], true).unwrap();
        // s from chart s, expressed on U_01 in coordinate s, then as a function of t: 1/t
        let lr_t = c.loc(&[1]).unwrap().clone();
        let lr01 = c.loc(&[0, 1]).unwrap();
        let s_on = c.restrict(&[0], &[0, 1], &lr01.poly(Poly::x(&r))).unwrap();
        assert_eq!(s_on, lr01.poly(Poly::x(&r)));
        let t_on = c.coord_on(&[0, 1], 1).unwrap();
        assert_eq!(lr01.mul(&s_on, &t_on), lr01.one());
        let _ = lr_t;
        // dlog t = κ dlog s with κ = -1
        let k = c.kappa(&[0, 1], 1).unwrap();
        assert_eq!(k, lr01.constant(r.from_i64(-1)));
    }

    #[test]
    fn three_point_generator_is_principal() {
        let r = WittRing::new(5, 1, 1, &[0, 1]).unwrap();
        let lam = r.from_u64(2);
        let c = Cover::p1(&r, &[r.zero(), r.one(), lam], true).unwrap();
        let g = c.log_one_forms(0);
        // dt/t = (g/t) * generator with g/t a polynomial
        for comp in &c.charts[0].divisor {
            let (_, rem) = g.divrem(&r, comp);
            assert!(rem.is_zero());
        }
        let rep = c.validate();
        assert!(rep.ok, "{:?}", rep.failures);
    }

    #[test]
    fn thickening_checks() {
        let r = f3(1);
        let c = Cover::p1(&r, &[r.zero()], true).unwrap();
        let th = Thickening::canonical(&c).unwrap();
        assert_eq!(th.high.level(), 2);
        // perturb the transition by a unit: not a lift
        let hi = &th.high;
        let lr = hi.loc(&[0, 1]).unwrap();
        let bad = hi.with_pair_coord(0, 1, lr.add(hi.pair_coord(0, 1), &lr.one()));
        assert!(matches!(Thickening::new(&c, bad), Err(GeoError::ReductionMismatch(_))));
        // perturb by p * unit: a different valid thickening
        let mut eta = BTreeMap::new();
        eta.insert((0, 1), c.loc(&[0, 1]).unwrap().one());
        let moved = hi.perturbed(&eta).unwrap();
        assert!(Thickening::new(&c, moved.clone()).is_ok());
        assert!(!moved.same_as(hi));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"base":{"p":3,"n":1,"m":1},"charts":[
            {"id":"s","coords":["s"],"divisor":["s"]},
            {"id":"t","coords":["t"],"divisor":["t"]}],
            "overlaps":[{"i":"s","j":"t","maps":{"t":"1/s"}},{"i":"t","j":"s","maps":{"s":"1/t"}}]}"#;
        let j: CoverJson = serde_json::from_str(text).unwrap();
        let c = Cover::from_json(&j).unwrap();
        assert!(c.validate().ok);
        let back = Cover::from_json(&c.to_json()).unwrap();
        assert!(back.same_as(&c));
    }
}

/// Lifts a divisor factor; `u − a` with `a` Teichmüller stays Teichmüller.
fn lift_factor(lo: &Ring, hi: &Ring, g: &Poly) -> Poly {
    if g.deg() == Some(1) && g.is_monic(lo) {
        let a = lo.neg(g.coeff(0));
        if lo.teichmuller(a) == a {
            let ah = Poly(vec![a]).lift_to(hi).coeff(0);
            return Poly(vec![hi.neg(hi.teichmuller(ah)), hi.one()]);
        }
    }
    g.lift_to(hi)
}
