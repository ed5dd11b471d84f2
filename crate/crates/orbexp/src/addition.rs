//! One-range addition theorems and the Coulomb expansion built on them.
//!
//! Analytic overlaps reduce both functions to finite sums of B functions and
//! apply the B-function convolution theorem. Everything else, including
//! unequal scaling parameters, goes through quadrature.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{eval, eval_radial, stf_radial, BasisFamily, BasisSpec, QuantumIndex, WeightSpec};
use crate::error::{Error, Result};
use crate::oracle::{integrate, integrate_semi_infinite, radial_quadrature, two_center_integral, CubatureSpec, QuadratureSpec};
use crate::report::{AccelColumn, ConvergenceReport, Verdict};
use crate::special::{
    angles, binomial, delta_ell, gaunt, gaunt_ells, irregular_solid_harmonic, ln_gamma, norm3, pochhammer_log,
    regular_solid_harmonic, spherical_harmonic, AngularIndex, GauntKey, LogReal,
};
use crate::transforms::{
    guseinov_to_bfun, lambda_to_bfun, power_times_bfun, projection_coeffs, stf_to_bfun, CoeffTensor, Target,
};

fn parity(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// ∫ B_{n1ℓ1}^{m1}(β, r−r′) B_{n2ℓ2}^{m2}(β, r′) d³r′ as a finite B sum in r.
///
/// (4π/β³) Σ_ℓ ⟨ℓ m1+m2|ℓ1 m1|ℓ2 m2⟩ Σ_t (−1)^t C(Δℓ, t) B_{n1+n2+ℓ1+ℓ2−ℓ−t+1, ℓ}^{m1+m2}.
pub fn bfun_convolution(q1: QuantumIndex, q2: QuantumIndex, beta: f64) -> Result<CoeffTensor> {
    let spec = BasisSpec::bfun(beta);
    spec.check_index(q1)?;
    spec.check_index(q2)?;
    let m = q1.m + q2.m;
    let pre = 4.0 * PI / beta.powi(3);
    let mut t = CoeffTensor::new(Target::Basis(spec));
    for ell in gaunt_ells(q1.ell, q1.m, q2.ell, q2.m) {
        let g = gaunt(GauntKey::new(ell, m, q1.ell, q1.m, q2.ell, q2.m));
        if g == 0.0 {
            continue;
        }
        let d = delta_ell(q1.ell, q2.ell, ell)?.delta;
        for tt in 0..=d {
            let c = pre * g * parity(tt) * binomial(d as f64, tt as u32);
            t.add(QuantumIndex::new(q1.n + q2.n + q1.ell + q2.ell - ell - tt + 1, ell, m), c);
        }
    }
    Ok(t)
}

/// A basis function as a finite B sum with the same β, when one exists.
pub fn as_bfun_sum(spec: &BasisSpec, q: QuantumIndex) -> Result<CoeffTensor> {
    spec.check_index(q)?;
    let beta = spec.beta;
    let t = match spec.family {
        BasisFamily::BFun => {
            let mut t = CoeffTensor::new(Target::Basis(BasisSpec::bfun(beta)));
            t.add(QuantumIndex::new(q.n, q.ell, 0), 1.0);
            t
        }
        BasisFamily::Lambda => lambda_to_bfun(q.n, q.ell, beta)?,
        BasisFamily::Guseinov { k } => guseinov_to_bfun(k, q.n, q.ell, beta)?,
        BasisFamily::Sturmian => guseinov_to_bfun(-1, q.n, q.ell, beta)?.scaled((beta / q.n as f64).sqrt()),
        BasisFamily::Stf { principal: None } => stf_to_bfun(q.n, q.ell, beta)?,
        _ => return Err(Error::Domain(format!("{} functions have no finite B-function form", spec.family.name()))),
    };
    Ok(t.with_m(q.m))
}

/// r^k times a B sum.
fn times_power(t: &CoeffTensor, k: i32, beta: f64) -> Result<CoeffTensor> {
    if k == 0 {
        return Ok(t.clone());
    }
    let mut out = CoeffTensor::new(Target::Basis(BasisSpec::bfun(beta)));
    for (q, c) in t.iter() {
        for (p, d) in power_times_bfun(k, q.n, q.ell, beta)?.iter() {
            out.add(QuantumIndex::new(p.n, p.ell, q.m), c * d);
        }
    }
    Ok(out)
}

/// ⟨bra| r^k |ket(· − shift)⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRequest {
    pub bra: (BasisSpec, QuantumIndex),
    pub ket: (BasisSpec, QuantumIndex),
    pub shift: [f64; 3],
    pub weight: WeightSpec,
}

impl OverlapRequest {
    fn power(&self) -> Result<i32> {
        match self.weight {
            WeightSpec::Power(k) => Ok(k),
            WeightSpec::Sobolev { .. } => Err(Error::Domain("overlaps take power weights only".into())),
        }
    }
}

/// B sum of ∫ G*(u) K(u − d) d³u as a function of −d, for B sums G and K.
///
/// G*(−x) = (−1)^{ℓ+m} B^{−m}(x), so the overlap is a convolution evaluated at −d.
fn overlap_bfun_tensor(g: &CoeffTensor, kt: &CoeffTensor, beta: f64) -> Result<CoeffTensor> {
    let mut out = CoeffTensor::new(Target::Basis(BasisSpec::bfun(beta)));
    for (qg, cg) in g.iter() {
        let flipped = QuantumIndex::new(qg.n, qg.ell, -qg.m);
        let sign = parity(qg.ell + qg.m);
        for (qk, ck) in kt.iter() {
            for (q, c) in bfun_convolution(flipped, qk, beta)?.iter() {
                out.add(q, sign * cg * ck * c);
            }
        }
    }
    Ok(out)
}

fn eval_bfun_tensor(t: &CoeffTensor, beta: f64, r: [f64; 3]) -> Result<Complex64> {
    let spec = BasisSpec::bfun(beta);
    let mut s = Complex64::new(0.0, 0.0);
    for (q, c) in t.iter() {
        s += eval(&spec, q, r)? * c;
    }
    Ok(s)
}

/// Analytic overlap through the convolution theorem, when both sides share β
/// and have finite B-function forms.
pub fn overlap_analytic(req: &OverlapRequest) -> Result<Complex64> {
    let k = req.power()?;
    let (bs, bq) = req.bra;
    let (ks, kq) = req.ket;
    if bs.beta != ks.beta {
        return Err(Error::Domain("analytic overlaps need equal scaling parameters".into()));
    }
    let beta = bs.beta;
    let g = times_power(&as_bfun_sum(&bs, bq)?, k, beta)?;
    let kt = as_bfun_sum(&ks, kq)?;
    let t = overlap_bfun_tensor(&g, &kt, beta)?;
    let d = req.shift;
    eval_bfun_tensor(&t, beta, [-d[0], -d[1], -d[2]])
}

/// Overlap by two-center cubature.
pub fn overlap_quadrature(req: &OverlapRequest, cub: &CubatureSpec) -> Result<Complex64> {
    let k = req.power()?;
    let (bs, bq) = req.bra;
    let (ks, kq) = req.ket;
    bs.check_index(bq)?;
    ks.check_index(kq)?;
    let d = req.shift;
    let f = |r: [f64; 3]| eval(&bs, bq, r).map(|v| v.conj() * norm3(r).powi(k)).unwrap_or(Complex64::new(f64::NAN, 0.0));
    let g = |r: [f64; 3]| eval(&ks, kq, [r[0] - d[0], r[1] - d[1], r[2] - d[2]]).unwrap_or(Complex64::new(f64::NAN, 0.0));
    two_center_integral(f, g, d, cub)
}

/// Overlap ⟨bra| r^k |ket(· − shift)⟩: analytic when possible, quadrature otherwise.
pub fn overlap(req: &OverlapRequest) -> Result<Complex64> {
    match overlap_analytic(req) {
        Ok(v) => Ok(v),
        Err(Error::Domain(_)) => overlap_quadrature(req, &CubatureSpec::default()),
        Err(e) => Err(e),
    }
}

/// Coefficients of f(r, r′) = Σ T_{ab} φ_a(r) φ_b(r′) over one basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTensor {
    pub spec: BasisSpec,
    pub entries: BTreeMap<(QuantumIndex, QuantumIndex), f64>,
}

impl PairTensor {
    pub fn get(&self, a: QuantumIndex, b: QuantumIndex) -> f64 {
        self.entries.get(&(a, b)).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The entries whose first index has n ≤ n_max.
    pub fn truncated(&self, n_max: i32) -> PairTensor {
        let entries = self.entries.iter().filter(|((a, _), _)| a.n <= n_max).map(|(k, v)| (*k, *v)).collect();
        PairTensor { spec: self.spec, entries }
    }

    pub fn eval(&self, r: [f64; 3], rp: [f64; 3]) -> Result<Complex64> {
        let mut cache_a: BTreeMap<QuantumIndex, Complex64> = BTreeMap::new();
        let mut cache_b: BTreeMap<QuantumIndex, Complex64> = BTreeMap::new();
        let mut s = Complex64::new(0.0, 0.0);
        for ((a, b), c) in &self.entries {
            let fa = match cache_a.get(a) {
                Some(v) => *v,
                None => {
                    let v = eval(&self.spec, *a, r)?;
                    cache_a.insert(*a, v);
                    v
                }
            };
            let fb = match cache_b.get(b) {
                Some(v) => *v,
                None => {
                    let v = eval(&self.spec, *b, rp)?;
                    cache_b.insert(*b, v);
                    v
                }
            };
            s += fa * fb * *c;
        }
        Ok(s)
    }
}

/// Exact rational parts of the Lambda ↔ B transforms.
///
/// Λ_{nℓ} = S(n,ℓ) Σ_ν ρ_ν B_{ν+1,ℓ} and B_{Nℓ} = (2β)^{−3/2} Σ_ν τ_ν Q(ν+ℓ+1,ℓ) Λ_{ν+ℓ+1,ℓ},
/// with S = (2β)^{3/2} 2^ℓ Q and Q(n,ℓ) = √((n+ℓ+1)!/(n−ℓ−1)!). The B sums carry
/// large alternating coefficients, so the chain Λ → B → convolution → Λ only
/// keeps its accuracy when the rational parts are combined exactly.
mod exact {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive};

    pub type Q = BigRational;

    pub fn int(n: i64) -> Q {
        Q::from_integer(BigInt::from(n))
    }

    pub fn poch(a: &Q, n: u32) -> Q {
        let mut acc = Q::one();
        let mut x = a.clone();
        for _ in 0..n {
            acc *= &x;
            x += Q::one();
        }
        acc
    }

    pub fn fact(n: u32) -> Q {
        poch(&Q::one(), n)
    }

    fn pow2(e: i32) -> Q {
        if e >= 0 {
            Q::from_integer(BigInt::one() << e as usize)
        } else {
            Q::new(BigInt::one(), BigInt::one() << (-e) as usize)
        }
    }

    pub fn to_f64(q: &Q) -> f64 {
        q.to_f64().unwrap_or(f64::NAN)
    }

    pub fn lambda_rho(n: i32, ell: i32) -> Vec<Q> {
        let dfo: BigInt = (1..=(2 * ell + 3)).step_by(2).map(BigInt::from).product();
        let pre = Q::new(BigInt::from(2 * n + 1), dfo);
        let half = Q::new(BigInt::from(2 * ell + 5), BigInt::from(2));
        (0..=(n - ell - 1) as u32)
            .map(|nu| &pre * poch(&int((ell + 1 - n) as i64), nu) * poch(&int((n + ell + 2) as i64), nu) / (fact(nu) * poch(&half, nu)))
            .collect()
    }

    pub fn bfun_tau(big_n: i32, ell: i32) -> Vec<Q> {
        let a = int((big_n + 2 * ell + 3) as i64);
        let pref = pow2(-(2 * big_n + 2 * ell - 1)) / fact((big_n + ell) as u32) * poch(&a, (big_n - 1) as u32);
        (0..big_n as u32).map(|nu| &pref * poch(&int((1 - big_n) as i64), nu) / poch(&a, nu)).collect()
    }
}

fn lambda_sqrt_factor(n: i32, ell: i32) -> f64 {
    (0.5 * (ln_gamma((n + ell + 2) as f64) - ln_gamma((n - ell) as f64))).exp()
}

/// Λ_{NL}^M(β, r − r′) = Σ T_{ab} Λ_a(β, r) Λ_b(β, r′), first index n ≤ n_max.
///
/// The overlap ⟨Λ_a|Λ_{NL}^M(· − r′)⟩ is a finite B sum in r′ through the
/// convolution theorem; each B function is then a finite Lambda sum. The
/// radial parts of every channel are combined in exact rational arithmetic.
/// Only the sum over the first index is infinite.
pub fn symmetric_coeffs_lambda(big_n: i32, big_l: i32, big_m: i32, n_max: i32, beta: f64) -> Result<PairTensor> {
    use exact::{int, to_f64, Q};
    use num_traits::Zero;
    let lam = BasisSpec::lambda(beta);
    lam.check_index(QuantumIndex::new(big_n, big_l, big_m))?;
    let rho_t = exact::lambda_rho(big_n, big_l);
    let s_t = (2.0 * beta).powf(1.5) * 2f64.powi(big_l) * lambda_sqrt_factor(big_n, big_l);
    let mut radial_rows = Vec::new();
    for n in 1..=n_max {
        for ell in 0..n {
            radial_rows.push((n, ell));
        }
    }
    let parts: Vec<Result<Vec<((QuantumIndex, QuantumIndex), f64)>>> = radial_rows
        .par_iter()
        .map(|&(n1, l1)| {
            let rho_a = exact::lambda_rho(n1, l1);
            let s_a = (2.0 * beta).powf(1.5) * 2f64.powi(l1) * lambda_sqrt_factor(n1, l1);
            // channel ℓ → exact coefficient of Q(n_b,ℓ) Λ_{n_b,ℓ}
            let mut channels: BTreeMap<i32, BTreeMap<i32, f64>> = BTreeMap::new();
            let lo = (l1 - big_l).abs();
            for ell in (lo..=l1 + big_l).step_by(2) {
                let d = delta_ell(l1, big_l, ell)?.delta;
                let mut w: BTreeMap<i32, Q> = BTreeMap::new();
                for (v1, r1) in rho_a.iter().enumerate() {
                    for (v2, r2) in rho_t.iter().enumerate() {
                        let prod = r1 * r2;
                        for t in 0..=d {
                            let np = v1 as i32 + v2 as i32 + 3 + l1 + big_l - ell - t;
                            let c = &prod * int(parity(t) as i64 * binomial(d as f64, t as u32) as i64);
                            *w.entry(np).or_insert_with(Q::zero) += c;
                        }
                    }
                }
                let mut core: BTreeMap<i32, Q> = BTreeMap::new();
                for (np, c) in w {
                    for (nu, tau) in exact::bfun_tau(np, ell).into_iter().enumerate() {
                        *core.entry(nu as i32 + ell + 1).or_insert_with(Q::zero) += &c * tau;
                    }
                }
                channels.insert(ell, core.iter().map(|(nb, v)| (*nb, to_f64(v))).collect());
            }
            let pre = 4.0 * PI / beta.powi(3) * s_a * s_t * (2.0 * beta).powf(-1.5);
            let mut out = Vec::new();
            for m1 in -l1..=l1 {
                let mb = big_m - m1;
                for (&ell, core) in &channels {
                    if mb.abs() > ell {
                        continue;
                    }
                    let g = gaunt(GauntKey::new(ell, mb, l1, -m1, big_l, big_m));
                    if g == 0.0 {
                        continue;
                    }
                    let sign = parity(l1 + m1) * parity(ell);
                    for (&nb, &v) in core {
                        if v != 0.0 {
                            let b = QuantumIndex::new(nb, ell, mb);
                            out.push(((QuantumIndex::new(n1, l1, m1), b), sign * pre * g * lambda_sqrt_factor(nb, ell) * v));
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut entries = BTreeMap::new();
    for p in parts {
        for (k, v) in p? {
            *entries.entry(k).or_insert(0.0) += v;
        }
    }
    Ok(PairTensor { spec: lam, entries })
}

/// Grid-L² error of a truncated addition theorem for Λ_{NL}^M(r − r′) at fixed r′.
///
/// Radii r_i = 0.25 i/β, i = 1..32, along three directions, weighted by r².
pub fn addition_grid_error(t: &PairTensor, target: QuantumIndex, rp: [f64; 3]) -> Result<f64> {
    let beta = t.spec.beta;
    let dirs = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt()]];
    let mut s = 0.0;
    for d in dirs {
        for i in 1..=32 {
            let r = 0.25 * i as f64 / beta;
            let p = [r * d[0], r * d[1], r * d[2]];
            let exact = eval(&t.spec, target, [p[0] - rp[0], p[1] - rp[1], p[2] - rp[2]])?;
            let approx = t.eval(p, rp)?;
            s += (exact - approx).norm_sqr() * r * r * 0.25 / beta;
        }
    }
    Ok(s.sqrt())
}

/// Overlap coefficients ₖ𝐗_{nℓm} = ∫ [ₖΨ_{nℓm}(γ, r)]* r^k χ_{NL}^M(β, r − shift) d³r.
///
/// A zero shift keeps only ℓ = L, m = M and reduces to a radial quadrature.
/// Nonzero shifts use two-center cubature for every (n, ℓ, m) with n ≤ n_max.
#[allow(clippy::too_many_arguments)]
pub fn guseinov_unsym_coeffs(
    big_n: f64,
    big_l: i32,
    big_m: i32,
    k: i32,
    gamma: f64,
    beta: f64,
    shift: [f64; 3],
    n_max: i32,
) -> Result<CoeffTensor> {
    let gus = BasisSpec::new(BasisFamily::Guseinov { k }, gamma)?;
    BasisSpec::new(BasisFamily::Stf { principal: Some(big_n) }, beta)?;
    AngularIndex::new(big_l, big_m)?;
    if 2.0 * (big_n - 1.0) + k as f64 + 2.0 <= -1.0 {
        return Err(Error::Existence(format!("χ with N = {big_n} is not in the r^{k} space")));
    }
    let mut t = CoeffTensor::new(Target::Basis(gus));
    if norm3(shift) == 0.0 {
        if big_l < n_max {
            let proj = projection_coeffs(|r| stf_radial(big_n, big_l, beta, r).unwrap_or(f64::NAN), &gus, big_l, n_max, k)?;
            for (i, c) in proj.into_iter().enumerate() {
                t.add(QuantumIndex::new(big_l + 1 + i as i32, big_l, big_m), c);
            }
        }
        return Ok(t);
    }
    let cub = CubatureSpec::default();
    let chi_ang = AngularIndex::new(big_l, big_m)?;
    let mut idx = Vec::new();
    for n in 1..=n_max {
        for ell in 0..n {
            for m in -ell..=ell {
                idx.push(QuantumIndex::new(n, ell, m));
            }
        }
    }
    let vals: Vec<Result<(QuantumIndex, f64)>> = idx
        .par_iter()
        .map(|&q| {
            let f = |r: [f64; 3]| eval(&gus, q, r).map(|v| v.conj() * norm3(r).powi(k)).unwrap_or(Complex64::new(f64::NAN, 0.0));
            let g = |r: [f64; 3]| {
                let p = [r[0] - shift[0], r[1] - shift[1], r[2] - shift[2]];
                let (th, ph) = angles(p);
                spherical_harmonic(chi_ang, th, ph) * stf_radial(big_n, big_l, beta, norm3(p)).unwrap_or(f64::NAN)
            };
            let v = two_center_integral(f, g, shift, &cub)?;
            Ok((q, v.re))
        })
        .collect();
    for v in vals {
        let (q, c) = v?;
        t.add(q, c);
    }
    Ok(t)
}

/// ∫ |χ_{NL}^M(β, r)|² r^k d³r is shift-free only for k = 0; this is the general
/// shifted norm by cubature.
pub fn shifted_stf_norm_sq(big_n: f64, big_l: i32, k: i32, beta: f64, shift: [f64; 3]) -> Result<f64> {
    if norm3(shift) == 0.0 || k == 0 {
        let quad = QuadratureSpec::with_tolerances(1e-14, 1e-12);
        return radial_quadrature(|r| stf_radial(big_n, big_l, beta, r).unwrap_or(f64::NAN).powi(2), k as f64, &quad);
    }
    let ang = AngularIndex::new(big_l, 0)?;
    let f = |r: [f64; 3]| Complex64::new(norm3(r).powi(k), 0.0);
    let g = |r: [f64; 3]| {
        let p = [r[0] - shift[0], r[1] - shift[1], r[2] - shift[2]];
        let (th, ph) = angles(p);
        let v = spherical_harmonic(ang, th, ph) * stf_radial(big_n, big_l, beta, norm3(p)).unwrap_or(f64::NAN);
        Complex64::new(v.norm_sqr(), 0.0)
    };
    Ok(two_center_integral(f, g, shift, &CubatureSpec::default())?.re)
}

/// Inner sums of the rearranged Laguerre expansion of x^μ in L_n^{(α)}.
///
/// The coefficient of x^j after interchanging the summations is
/// Σ_{n≥j} c_n (−1)^j C(n+α, n−j)/j!; this returns its partial sums over
/// n = j..j+terms−1.
pub fn rearranged_inner_sums(mu: f64, alpha: f64, j: u32, terms: usize) -> Vec<f64> {
    let pre = LogReal { sign: 1.0, ln_abs: ln_gamma(mu + alpha + 1.0) - ln_gamma(alpha + 1.0) };
    let jf = j as f64;
    let sign_j = parity(j as i32);
    let mut s = 0.0;
    (0..terms)
        .map(|i| {
            let n = j + i as u32;
            let nf = n as f64;
            let binom = LogReal { sign: 1.0, ln_abs: ln_gamma(nf + alpha + 1.0) - ln_gamma(nf - jf + 1.0) - ln_gamma(jf + alpha + 1.0) };
            let c = pre * pochhammer_log(-mu, n) / pochhammer_log(alpha + 1.0, n) * binom;
            s += sign_j * c.value() / crate::special::factorial(j);
            s
        })
        .collect()
}

/// One-center limit (r′ = 0, γ = β) of the rearranged STF addition theorem.
///
/// χ_{N,0} in ₖΨ_{n,0} is x^μ with μ = N−1 in L_n^{(k+2)}(x). The report carries
/// the inner sums for the first power j beyond μ (j = 0 when μ < 0). For
/// integer N ≥ 1 every inner sum is finite and the rearranged series is the
/// identity x^μ = x^μ; otherwise the inner series is (−μ)_j ₁F₀(j−μ; 1) with
/// j − μ > 0, whose terms keep one sign and do not decay.
pub fn one_center_nonexistence_probe(big_n: f64, k: i32, n_max: usize) -> Result<ConvergenceReport> {
    if k < -1 {
        return Err(Error::Domain(format!("Guseinov weight order must be ≥ −1, got {k}")));
    }
    let mu = big_n - 1.0;
    let alpha = (k + 2) as f64;
    if mu + alpha <= -1.0 {
        return Err(Error::Existence(format!("χ_N with N = {big_n} is not in the r^{k} space")));
    }
    let integer = mu >= 0.0 && mu.fract() == 0.0;
    let j = if mu < 0.0 { 0 } else { mu.floor() as u32 + 1 };
    let sums = rearranged_inner_sums(mu, alpha, j, n_max + 1);
    let orders: Vec<usize> = (0..=n_max).collect();
    let mut rep = ConvergenceReport::new(format!("rearranged one-center STF N={big_n}, k={k}, power {j}"), orders, sums);
    rep.verdict_heuristic = false;
    if integer {
        rep.verdict = Verdict::Terminating;
        rep = rep.with_reference(0.0);
        rep.notes.push(format!("all inner sums finite; power {} sums to 1, the others to 0", mu as u32));
    } else {
        rep.verdict = Verdict::Diverging;
        rep.notes.push(format!("inner series is (-mu)_j 1F0({}; 1) with positive parameter", j as f64 - mu));
    }
    Ok(rep)
}

/// Partial sums of the Laplace expansion of 1/|r − r′| over λ = 0..=L_max.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceResult {
    pub value: f64,
    pub partial_sums: Vec<f64>,
}

/// 1/|r − r′| = Σ_λ 4π/(2λ+1) Σ_μ 𝒴_λ^μ(r_<)* 𝒵_λ^μ(r_>).
pub fn laplace_coulomb(r: [f64; 3], rp: [f64; 3], l_max: i32) -> Result<LaplaceResult> {
    let (a, b) = (norm3(r), norm3(rp));
    if (a - b).abs() <= 1e-14 * a.max(b) {
        return Err(Error::Degenerate(format!("|r| = |r′| = {a}: the two-range expansion does not converge")));
    }
    let (small, big) = if a < b { (r, rp) } else { (rp, r) };
    let mut s = 0.0;
    let mut partial = Vec::with_capacity(l_max as usize + 1);
    for lam in 0..=l_max {
        let mut term = Complex64::new(0.0, 0.0);
        for mu in -lam..=lam {
            let ai = AngularIndex::new(lam, mu)?;
            term += regular_solid_harmonic(ai, small).conj() * irregular_solid_harmonic(ai, big)?;
        }
        s += 4.0 * PI / (2 * lam + 1) as f64 * term.re;
        partial.push(s);
    }
    Ok(LaplaceResult { value: s, partial_sums: partial })
}

/// Least-squares slope of ln|err_λ| against λ over the upper half of the orders.
///
/// The error is replaced by its upper envelope max_{λ′≥λ} |err_λ′| first, so
/// sign changes of the Legendre factor do not pull the fit. `algebraic` is a
/// known power-law amplitude λ^p divided out before fitting: −1/2 for a
/// non-collinear pair, where P_λ(cos γ) decays like λ^{−1/2}, and 0 otherwise.
pub fn log_error_slope(errors: &[f64], algebraic: f64) -> f64 {
    let mut env = vec![0.0; errors.len()];
    let mut run = 0.0f64;
    for (i, e) in errors.iter().enumerate().rev() {
        run = run.max(e.abs() / ((i + 1) as f64).powf(algebraic));
        env[i] = run;
    }
    let pts: Vec<(f64, f64)> = env
        .iter()
        .enumerate()
        .skip(errors.len() / 2)
        .filter(|(_, e)| **e > 0.0 && e.is_finite())
        .map(|(i, e)| (i as f64, e.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// (absolute factor on the L¹ bound, relative) for the inner two-range integral.
pub const INNER_TOLERANCE: [f64; 2] = [1e-14, 1e-11];
/// (absolute factor on the L¹ bound, relative) for the outer two-range integral.
pub const OUTER_TOLERANCE: [f64; 2] = [1e-13, 1e-10];

/// Double radial integral ∫∫ a(r) b(r′) r_<^ℓ / r_>^{ℓ+1} dr dr′.
///
/// Split at r = r′ into ∫ a(r) r^{−ℓ−1} ∫_0^r b(t) t^ℓ dt dr and its mirror.
/// Absolute tolerances are relative to the L¹ bounds ∫|b| t^ℓ and ∫|a|/r · ∫|b| t^ℓ,
/// since inner integrals of oscillating radial functions cancel to tiny values.
pub fn two_range_radial<A, B>(a: A, b: B, ell: i32, scale: f64, symmetric: bool) -> Result<f64>
where
    A: Fn(f64) -> f64 + Sync,
    B: Fn(f64) -> f64 + Sync,
{
    let rough = QuadratureSpec::with_tolerances(1e-300, 1e-6);
    let half = |f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64| -> Result<f64> {
        let g_l1 = integrate_semi_infinite(|t| (g(t) * t.powi(ell)).abs(), 0.0, scale, &rough)?.value;
        let f_l1 = integrate_semi_infinite(|r| (f(r) / r).abs(), 0.0, scale, &rough)?.value;
        let inner_q = QuadratureSpec::with_tolerances(INNER_TOLERANCE[0] * g_l1, INNER_TOLERANCE[1]);
        let outer_q = QuadratureSpec::with_tolerances(OUTER_TOLERANCE[0] * g_l1 * f_l1, OUTER_TOLERANCE[1]);
        let mut err = None;
        let v = integrate_semi_infinite(
            |r| {
                let p = match integrate(|t| g(t) * t.powi(ell), 0.0, r, &inner_q) {
                    Ok(e) => e.value,
                    Err(e) => {
                        err.get_or_insert(e);
                        f64::NAN
                    }
                };
                f(r) * r.powi(-ell - 1) * p
            },
            0.0,
            scale,
            &outer_q,
        );
        if let Some(e) = err {
            return Err(e);
        }
        Ok(v?.value)
    };
    let first = half(&a, &b)?;
    if symmetric {
        return Ok(2.0 * first);
    }
    Ok(first + half(&b, &a)?)
}

/// One-center Coulomb matrix ₖΓ over ₖΨ(β), with ℓ = ℓ′ and m = m′.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTensor {
    pub k: i32,
    pub beta: f64,
    pub n_max: i32,
    pub ell_max: i32,
    pub entries: BTreeMap<(QuantumIndex, QuantumIndex), f64>,
}

/// Metadata written next to a Γ tensor CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSidecar {
    pub k: i32,
    pub beta: f64,
    pub n_max: i32,
    pub ell_max: i32,
    pub inner_tolerance: [f64; 2],
    pub outer_tolerance: [f64; 2],
    pub tolerance_note: String,
    pub code_version: String,
}

impl GammaTensor {
    pub fn get(&self, a: QuantumIndex, b: QuantumIndex) -> f64 {
        self.entries.get(&(a, b)).copied().unwrap_or(0.0)
    }

    /// Dense block for one (ℓ, m), rows and columns n = ℓ+1..=n_max.
    pub fn block(&self, ell: i32, m: i32) -> nalgebra::DMatrix<f64> {
        let dim = (self.n_max - ell).max(0) as usize;
        nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
            self.get(QuantumIndex::new(ell + 1 + i as i32, ell, m), QuantumIndex::new(ell + 1 + j as i32, ell, m))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,l,m,n',l',m',value\n");
        for ((a, b), v) in &self.entries {
            s.push_str(&format!("{},{},{},{},{},{},{}\n", a.n, a.ell, a.m, b.n, b.ell, b.m, crate::report::fmt_real(*v)));
        }
        s
    }

    pub fn sidecar(&self) -> GammaSidecar {
        GammaSidecar {
            k: self.k,
            beta: self.beta,
            n_max: self.n_max,
            ell_max: self.ell_max,
            inner_tolerance: INNER_TOLERANCE,
            outer_tolerance: OUTER_TOLERANCE,
            tolerance_note: "absolute tolerances scale with L1 bounds of the integrands".into(),
            code_version: crate::VERSION.to_string(),
        }
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes")
    }
}

/// ₖΓ_{nℓm,n′ℓm} = 4π/(2ℓ+1) ∫∫ R_n(r) R_n′(r′) r^{k+2} r′^{k+2} r_<^ℓ/r_>^{ℓ+1} dr dr′.
///
/// Angular integration of the Laplace expansion leaves only ℓ = ℓ′, m = m′.
/// Radial entries are computed in parallel and stored for every m.
pub fn coulomb_gamma(k: i32, beta: f64, n_max: i32, ell_max: i32) -> Result<GammaTensor> {
    let spec = BasisSpec::new(BasisFamily::Guseinov { k }, beta)?;
    let mut jobs = Vec::new();
    for ell in 0..=ell_max.min(n_max - 1) {
        for n in ell + 1..=n_max {
            for np in n..=n_max {
                jobs.push((ell, n, np));
            }
        }
    }
    let vals: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(ell, n, np)| {
            let a = |r: f64| eval_radial(&spec, QuantumIndex::new(n, ell, 0), r).unwrap_or(f64::NAN) * r.powi(k + 2);
            let b = |r: f64| eval_radial(&spec, QuantumIndex::new(np, ell, 0), r).unwrap_or(f64::NAN) * r.powi(k + 2);
            let v = two_range_radial(a, b, ell, 1.0 / beta, n == np)?;
            Ok(4.0 * PI / (2 * ell + 1) as f64 * v)
        })
        .collect();
    let mut entries = BTreeMap::new();
    for (&(ell, n, np), v) in jobs.iter().zip(vals) {
        let v = v?;
        for m in -ell..=ell {
            let a = QuantumIndex::new(n, ell, m);
            let b = QuantumIndex::new(np, ell, m);
            entries.insert((a, b), v);
            entries.insert((b, a), v);
        }
    }
    Ok(GammaTensor { k, beta, n_max, ell_max, entries })
}

/// Coefficients ∫ ρ(r) ₖΨ_{n00}(β, r) d³r of a spherical density.
pub fn density_coeffs<F: Fn(f64) -> f64>(rho: F, k: i32, beta: f64, n_max: i32) -> Result<CoeffTensor> {
    let spec = BasisSpec::new(BasisFamily::Guseinov { k }, beta)?;
    let proj = projection_coeffs(rho, &spec, 0, n_max, 0)?;
    let mut t = CoeffTensor::new(Target::Basis(spec));
    let y00 = (4.0 * PI).sqrt();
    for (i, c) in proj.into_iter().enumerate() {
        t.add(QuantumIndex::new(i as i32 + 1, 0, 0), y00 * c);
    }
    Ok(t)
}

/// Normalized 1s density (ζ³/π) e^{−2ζr}.
pub fn density_1s(zeta: f64) -> impl Fn(f64) -> f64 {
    move |r| zeta.powi(3) / PI * (-2.0 * zeta * r).exp()
}

/// Partial sums of Σ F_a Γ_{ab} G_b in shells of constant n + n′.
///
/// Within a shell terms are added in (ℓ, m, n) order. Order s of the report
/// holds every pair with n + n′ ≤ s + 1.
pub fn coulomb_energy_series(f: &CoeffTensor, g: &CoeffTensor, gamma: &GammaTensor) -> ConvergenceReport {
    let mut terms: Vec<(i32, i32, i32, i32, f64)> = Vec::new();
    for ((a, b), v) in &gamma.entries {
        let fa = f.get(*a);
        let gb = g.get(*b);
        if fa == 0.0 || gb == 0.0 {
            continue;
        }
        terms.push((a.n + b.n, a.ell, a.m, a.n, fa * v * gb));
    }
    terms.sort_by(|x, y| (x.0, x.1, x.2, x.3).cmp(&(y.0, y.1, y.2, y.3)));
    let mut sums = Vec::new();
    let mut orders = Vec::new();
    let mut s = 0.0;
    let mut i = 0;
    let top = terms.last().map(|t| t.0).unwrap_or(2);
    for shell in 2..=top {
        while i < terms.len() && terms[i].0 == shell {
            s += terms[i].4;
            i += 1;
        }
        orders.push((shell - 1) as usize);
        sums.push(s);
    }
    let mut rep = ConvergenceReport::new(format!("Coulomb series k={}, beta={}", gamma.k, gamma.beta), orders, sums);
    rep.notes.push("summation order: shells of constant n+n', then (l, m) lexicographic".into());
    rep.notes.push("no convergence guarantee: the expansion converges weakly at best".into());
    rep
}

/// Self-energy series of the normalized 1s density in ₖΨ(β), shells 1..=shells.
pub fn coulomb_1s_study(zeta: f64, k: i32, beta: f64, shells: i32) -> Result<ConvergenceReport> {
    let n_max = shells;
    let gamma = coulomb_gamma(k, beta, n_max, 0)?;
    let f = density_coeffs(density_1s(zeta), k, beta, n_max)?;
    let mut rep = coulomb_energy_series(&f, &f, &gamma);
    let keep = rep.orders.iter().take_while(|&&o| o <= shells as usize).count();
    rep = truncate_report(rep, keep);
    Ok(rep.with_reference(5.0 * zeta / 8.0))
}

fn truncate_report(rep: ConvergenceReport, keep: usize) -> ConvergenceReport {
    let mut out = ConvergenceReport::new(rep.label, rep.orders[..keep].to_vec(), rep.partial_sums[..keep].to_vec());
    out.notes = rep.notes;
    out
}

/// Partial sums Σ_{n≤N} Γ_{n00,n00}; unbounded growth reflects 1/|r − r′|
/// lying outside every weighted L² space.
pub fn gamma_diagonal_growth(gamma: &GammaTensor) -> ConvergenceReport {
    let mut s = 0.0;
    let mut sums = Vec::new();
    for n in 1..=gamma.n_max {
        let q = QuantumIndex::new(n, 0, 0);
        s += gamma.get(q, q).abs();
        sums.push(s);
    }
    let orders = (1..=gamma.n_max as usize).collect();
    ConvergenceReport::new(format!("diagonal Gamma norm k={}, beta={}", gamma.k, gamma.beta), orders, sums)
}

/// Radial Yukawa kernel averaged over angles:
/// (e^{−β|r−r′|} − e^{−β(r+r′)}) / (2β r r′); the Coulomb limit is 1/r_>.
fn yukawa_s_kernel(beta: f64, r: f64, rp: f64) -> f64 {
    if beta == 0.0 {
        return 1.0 / r.max(rp);
    }
    let d = (r - rp).abs();
    // e^{−βd}(1 − e^{−2β r_<}) without cancellation
    (-beta * d).exp() * -(-2.0 * beta * r.min(rp)).exp_m1() / (2.0 * beta * r * rp)
}

/// 𝒴(ρ, ρ; β_s) for the normalized 1s density by nested quadrature.
pub fn yukawa_1s(zeta: f64, screen: f64) -> Result<f64> {
    let rho = density_1s(zeta);
    let q = QuadratureSpec::with_tolerances(1e-15, 1e-12);
    let mut err = None;
    let outer = integrate_semi_infinite(
        |r| {
            let inner = integrate(|t| rho(t) * t * t * yukawa_s_kernel(screen, r, t), 0.0, r, &q)
                .and_then(|a| integrate_semi_infinite(|t| rho(t) * t * t * yukawa_s_kernel(screen, r, t), r, 0.5 / zeta, &q).map(|b| a.value + b.value));
            match inner {
                Ok(v) => rho(r) * r * r * v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        0.5 / zeta,
        &q,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok((4.0 * PI).powi(2) * outer?.value)
}

/// Bulirsch–Stoer rational extrapolation of (x_i, y_i) to x = 0.
pub fn rational_extrapolate(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::Domain("need matching nonempty samples".into()));
    }
    let mut c = y.to_vec();
    let mut d = y.to_vec();
    let mut est = y[n - 1];
    // tableau built against the last sample, as in the standard recursion
    let mut best = 0;
    for i in 1..n {
        if x[i].abs() < x[best].abs() {
            best = i;
        }
    }
    est = if n == 1 { est } else { y[best] };
    let mut ns = best as isize;
    ns -= 1;
    for m in 1..n {
        for i in 0..n - m {
            let w = c[i + 1] - d[i];
            let h = x[i + m];
            let t = x[i] * d[i] / h;
            let dd = t - c[i + 1];
            if dd == 0.0 {
                return Err(Error::Breakdown("pole in rational extrapolation".into()));
            }
            let dd = w / dd;
            d[i] = c[i + 1] * dd;
            c[i] = t * dd;
        }
        let dy = if 2 * (ns + 1) < (n - m) as isize {
            c[(ns + 1) as usize]
        } else {
            let v = d[ns.max(0) as usize];
            ns -= 1;
            v
        };
        est += dy;
    }
    Ok(est)
}

/// 𝒴(β_s) for a decreasing screening sequence, with rational extrapolation to β_s → 0.
///
/// The extrapolated value goes into the report's accelerated column, one per
/// prefix of the sequence.
pub fn yukawa_vs_coulomb_limit(zeta: f64, screens: &[f64]) -> Result<ConvergenceReport> {
    let vals: Vec<f64> = screens.iter().map(|&b| yukawa_1s(zeta, b)).collect::<Result<_>>()?;
    let extra: Vec<Option<f64>> =
        (0..screens.len()).map(|i| if i == 0 { None } else { rational_extrapolate(&screens[..=i], &vals[..=i]).ok() }).collect();
    let orders = (0..screens.len()).collect();
    let mut rep = ConvergenceReport::new(format!("Yukawa 1s self-energy, zeta={zeta}"), orders, vals).with_reference(5.0 * zeta / 8.0);
    rep.accelerated = Some(AccelColumn { method: "rational-extrapolation".into(), order: screens.len(), values: extra, breakdown: false });
    rep.notes.push(format!("screens: {screens:?}"));
    Ok(rep)
}
