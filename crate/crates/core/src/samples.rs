//! Standard objects on the projective line: log line bundles, direct sums,
//! random filtered de Rham bundles and graded Higgs bundles, and the
//! uniformizing Higgs bundle of the Legendre family.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::bundle::{line_bundle_p1, Bundle, BundleError};
use crate::geometry::{Cover, GeoError};
use crate::poly::{Poly, Sec};
use crate::smat::SMat;
use crate::witt::{Ring, WittElem};

fn is_t(cov: &Cover, i: usize) -> bool {
    cov.charts[i].coord == "t"
}

/// `O(k)` with the log connection `d + α dlog s` on a cover of `P¹` whose
/// divisor contains `0` and `∞` (or where `s` is invertible).
pub fn line_bundle_log(cover: Arc<Cover>, k: i64, alpha: WittElem) -> Result<Bundle, BundleError> {
    let b = line_bundle_p1(cover.clone(), k)?;
    let r = &cover.ring;
    let mut conn = Vec::new();
    for i in 0..cover.num_charts() {
        let lr = cover.loc(&[i])?;
        let g = lr.poly(cover.charts[i].g(r));
        // dlog u / ω_i = G_i / u
        let ratio = lr
            .div_exact(&g, &lr.poly(Poly::x(r)))
            .ok_or_else(|| BundleError::InvalidInput("dlog s is not a log form on this chart".into()))?;
        let c = if is_t(&cover, i) { r.neg(r.add(alpha, r.from_i64(k))) } else { alpha };
        conn.push(SMat { rows: 1, cols: 1, d: vec![lr.scale(&ratio, c)] });
    }
    Bundle::new(cover, 1, b.trans.clone(), Some(conn), None, vec![0], false)
}

/// Block direct sum; weights and operators concatenate.
pub fn direct_sum(parts: &[Bundle]) -> Result<Bundle, BundleError> {
    let cover = parts[0].cover.clone();
    let k = cover.num_charts();
    let rank = parts.iter().map(|b| b.rank).sum();
    let fold = |ms: Vec<SMat>| ms.into_iter().reduce(|a, b| SMat::block_diag(&a, &b)).unwrap();
    let mut trans = BTreeMap::new();
    for i in 0..k {
        for j in i + 1..k {
            trans.insert((i, j), fold(parts.iter().map(|b| b.g(i, j)).collect()));
        }
    }
    let op = |f: &dyn Fn(&Bundle) -> Option<&Vec<SMat>>| -> Option<Vec<SMat>> {
        if parts.iter().all(|b| f(b).is_some()) {
            Some((0..k).map(|i| fold(parts.iter().map(|b| f(b).unwrap()[i].clone()).collect())).collect())
        } else {
            None
        }
    };
    let conn = op(&|b| b.conn.as_ref());
    let higgs = op(&|b| b.higgs.as_ref());
    let weights = parts.iter().flat_map(|b| b.weights.clone()).collect();
    let graded = parts.iter().any(|b| b.graded);
    Bundle::new(cover, rank, trans, conn, higgs, weights, graded)
}

fn random_poly(r: &Ring, rng: &mut impl Rng, deg: usize) -> Poly {
    let q = r.q();
    Poly((0..=deg).map(|_| r.from_u64(rng.gen_range(0..q))).collect()).trimmed(r)
}

/// A random filtered de Rham bundle of rank `rank` (≤ 3) with weights in
/// `{0, 1}`: a sum of log line bundles put into random unipotent adapted frames.
pub fn random_filtered(cover: Arc<Cover>, rank: usize, rng: &mut impl Rng) -> Result<Bundle, BundleError> {
    let r = cover.ring.clone();
    let q = r.q();
    let mut parts = Vec::new();
    for _ in 0..rank {
        let k = rng.gen_range(-2..=2);
        let alpha = r.from_u64(rng.gen_range(0..q));
        parts.push(line_bundle_log(cover.clone(), k, alpha)?);
    }
    let weights: Vec<i32> = (0..rank).map(|_| rng.gen_range(0..=1)).collect();
    let b = direct_sum(&parts)?.with_weights(weights.clone(), false);
    let frames: Vec<SMat> = (0..cover.num_charts())
        .map(|i| {
            let lr = cover.loc(&[i]).unwrap();
            SMat::from_fn(rank, rank, |a, c| {
                if a == c {
                    lr.one()
                } else if (weights[a] > weights[c] || (weights[a] == weights[c] && a < c)) && rng.gen_bool(0.6) {
                    lr.poly(random_poly(&r, rng, 2))
                } else {
                    lr.zero()
                }
            })
        })
        .collect();
    b.with_frames(&frames)
}

/// Graded Higgs bundle `⊕ O(k_a)` on a cover of `P¹` with `D = {0, ∞}`
/// (charts in `s` or `t = 1/s`); `theta` gives `θ_ab / dlog s` as a polynomial in `s` of
/// degree `≤ k_a − k_b` (the `t`-chart entry follows from `κ = −1`).
pub fn graded_higgs_p1(
    cover: Arc<Cover>,
    degrees: &[i64],
    weights: &[i32],
    theta: &BTreeMap<(usize, usize), Vec<i64>>,
) -> Result<Bundle, BundleError> {
    let r = cover.ring.clone();
    let n = degrees.len();
    let parts: Vec<Bundle> = degrees.iter().map(|&k| line_bundle_p1(cover.clone(), k)).collect::<Result<_, _>>()?;
    let b = direct_sum(&parts)?;
    let mut ths = Vec::new();
    for i in 0..cover.num_charts() {
        let lr = cover.loc(&[i])?;
        // dlog s / ω_i = ±G_i / u
        let ratio = lr
            .div_exact(&lr.poly(cover.charts[i].g(&r)), &lr.poly(Poly::x(&r)))
            .ok_or_else(|| BundleError::InvalidInput("dlog s is not a log form on this chart".into()))?;
        ths.push(SMat::from_fn(n, n, |a, c| match theta.get(&(a, c)) {
            None => lr.zero(),
            Some(cs) => {
                let m = (degrees[a] - degrees[c]) as usize;
                if is_t(&cover, i) {
                    let mut rev = vec![0i64; m + 1];
                    for (j, &v) in cs.iter().enumerate() {
                        rev[m - j] = -v;
                    }
                    lr.mul(&lr.poly(Poly::from_ints(&r, &rev)), &ratio)
                } else {
                    lr.mul(&lr.poly(Poly::from_ints(&r, cs)), &ratio)
                }
            }
        }));
    }
    Bundle::new(cover, n, b.trans.clone(), None, Some(ths), weights.to_vec(), true)
}

/// The field `F_9 = F_3[g]/(g² + 1)` at Witt level `n`.
pub fn f9(n: u32) -> Ring {
    crate::witt::WittRing::new(3, n, 2, &[1, 0, 1]).unwrap()
}

/// `P¹` with `D = {0, 1, λ, ∞}`, `λ` the Teichmüller lift of the given residue.
pub fn legendre_cover(ring: &Ring, lambda: WittElem) -> Result<Cover, GeoError> {
    let l = ring.teichmuller(lambda);
    Cover::p1(ring, &[ring.zero(), ring.one(), l], true)
}

/// The uniformizing graded Higgs bundle `O(1) ⊕ O(−1)` with `θ: O(1) ≅ O(−1) ⊗ Ω(log D)`
/// on the Legendre cover; `θ_s = E_10`, `θ_t = −λ⁻¹ E_10`.
pub fn legendre_higgs(cover: Arc<Cover>, lambda: WittElem) -> Result<Bundle, BundleError> {
    let r = cover.ring.clone();
    let l = r.teichmuller(lambda);
    let li = r.inv(l).ok_or_else(|| BundleError::InvalidInput("λ must be a unit".into()))?;
    let b = direct_sum(&[line_bundle_p1(cover.clone(), 1)?, line_bundle_p1(cover.clone(), -1)?])?;
    let mut ths = Vec::new();
    for i in 0..cover.num_charts() {
        let lr = cover.loc(&[i])?;
        let c = if is_t(&cover, i) { r.neg(li) } else { r.one() };
        let mut m = SMat::zeros(2, 2);
        m.set(1, 0, lr.constant(c));
        ths.push(m);
    }
    Bundle::new(cover, 2, b.trans.clone(), None, Some(ths), vec![1, 0], true)
}

/// A random level-1 section polynomial, used by generators elsewhere.
pub fn random_sec(cover: &Cover, sigma: &[usize], rng: &mut impl Rng, deg: usize) -> Sec {
    let lr = cover.loc(sigma).unwrap();
    lr.poly(random_poly(&cover.ring, rng, deg))
}
