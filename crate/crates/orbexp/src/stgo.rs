//! The spherical tensor gradient operator 𝒴_ℓ^m(∇).
//!
//! Radial derivatives are applied through the operator D = (1/r) d/dr, either
//! symbolically on sums of r^p e^{−a r} and r^p e^{−a r²}, or by Richardson
//! finite differences on sampled functions. Finite differences are meant as an
//! oracle; the analytic route is the primary one.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{bfun_radial, BasisSpec, QuantumIndex};
use crate::error::{Error, Result};
use crate::oracle::sphere_quadrature;
use crate::special::{
    angles, binomial, delta_ell, double_factorial_odd, factorial, gaunt, gaunt_ells, norm3, pochhammer, spherical_harmonic,
    AngularIndex, GauntKey,
};
use crate::transforms::{CoeffTensor, Target};

fn parity(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Decay of one term: none, e^{−a r}, or e^{−a r²}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Decay {
    None,
    Exp(u64),
    Gauss(u64),
}

impl Decay {
    pub fn exp(a: f64) -> Decay {
        if a == 0.0 {
            Decay::None
        } else {
            Decay::Exp(a.to_bits())
        }
    }

    pub fn gauss(a: f64) -> Decay {
        if a == 0.0 {
            Decay::None
        } else {
            Decay::Gauss(a.to_bits())
        }
    }

    fn factor(self, r: f64) -> f64 {
        match self {
            Decay::None => 1.0,
            Decay::Exp(a) => (-f64::from_bits(a) * r).exp(),
            Decay::Gauss(a) => (-f64::from_bits(a) * r * r).exp(),
        }
    }
}

/// Σ c r^p × decay, closed under multiplication by r^q and under D = (1/r) d/dr.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpLaurent {
    terms: BTreeMap<(Decay, i32), f64>,
}

impl ExpLaurent {
    pub fn term(coef: f64, power: i32, decay: Decay) -> Self {
        let mut e = ExpLaurent::default();
        e.add_term(coef, power, decay);
        e
    }

    /// c r^p.
    pub fn monomial(coef: f64, power: i32) -> Self {
        Self::term(coef, power, Decay::None)
    }

    /// c r^p e^{−a r}.
    pub fn exponential(coef: f64, power: i32, rate: f64) -> Self {
        Self::term(coef, power, Decay::exp(rate))
    }

    /// c r^p e^{−a r²}.
    pub fn gaussian(coef: f64, power: i32, rate: f64) -> Self {
        Self::term(coef, power, Decay::gauss(rate))
    }

    /// Radial part of B_{n,ℓ}(β, r), n + ℓ ≥ 0.
    pub fn bfun(n: i32, ell: i32, beta: f64) -> Result<Self> {
        if n + ell < 0 {
            return Err(Error::DistributionalRange(format!("B_{{{n},{ell}}} is a distribution")));
        }
        let denom = 2f64.powi(n + ell) * factorial((n + ell) as u32);
        // k̂_{n−1/2}(z) = z^{shift} k̂_{j+1/2}(z) with j ≥ 0
        let (j, shift) = if n >= 1 { (n - 1, 0) } else { (-n, 2 * n - 1) };
        let mut out = ExpLaurent::default();
        let mut c = 1.0;
        for i in 0..=j {
            if i > 0 {
                c *= ((j + i) * (j - i + 1)) as f64 / (2 * i) as f64;
            }
            let p = j - i + shift + ell;
            out.add_term(c * beta.powi(p) / denom, p, Decay::exp(beta));
        }
        Ok(out)
    }

    fn add_term(&mut self, coef: f64, power: i32, decay: Decay) {
        if coef == 0.0 {
            return;
        }
        let e = self.terms.entry((decay, power)).or_insert(0.0);
        *e += coef;
        if *e == 0.0 {
            self.terms.remove(&(decay, power));
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn plus(&self, other: &ExpLaurent) -> ExpLaurent {
        let mut out = self.clone();
        for (&(d, p), &c) in &other.terms {
            out.add_term(c, p, d);
        }
        out
    }

    pub fn scaled(&self, s: f64) -> ExpLaurent {
        let mut out = ExpLaurent::default();
        for (&(d, p), &c) in &self.terms {
            out.add_term(s * c, p, d);
        }
        out
    }

    pub fn times_power(&self, q: i32) -> ExpLaurent {
        let terms = self.terms.iter().map(|(&(d, p), &c)| ((d, p + q), c)).collect();
        ExpLaurent { terms }
    }

    /// D = (1/r) d/dr.
    pub fn inv_r_d_dr(&self) -> ExpLaurent {
        let mut out = ExpLaurent::default();
        for (&(d, p), &c) in &self.terms {
            out.add_term(c * p as f64, p - 2, d);
            match d {
                Decay::None => {}
                Decay::Exp(a) => out.add_term(-c * f64::from_bits(a), p - 1, d),
                Decay::Gauss(a) => out.add_term(-2.0 * c * f64::from_bits(a), p, d),
            }
        }
        out
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|(&(d, p), &c)| c * r.powi(p) * d.factor(r)).sum()
    }
}

/// Step policy for finite-difference radial derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// First step as a fraction of r; halved at each Richardson level.
    pub relative_step: f64,
    pub levels: usize,
    /// Largest total number of D applications allowed.
    pub max_order: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy { relative_step: 0.125, levels: 6, max_order: 4 }
    }
}

/// A radial function with a way to apply D = (1/r) d/dr.
#[derive(Clone)]
pub enum RadialFunctionHandle {
    Analytic(ExpLaurent),
    Sampled { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, policy: StepPolicy, order_used: usize },
}

impl fmt::Debug for RadialFunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialFunctionHandle::Analytic(e) => f.debug_tuple("Analytic").field(e).finish(),
            RadialFunctionHandle::Sampled { policy, order_used, .. } => {
                f.debug_struct("Sampled").field("policy", policy).field("order_used", order_used).finish()
            }
        }
    }
}

/// d/dr by central differences with Richardson extrapolation in h².
fn richardson_derivative(f: &(dyn Fn(f64) -> f64 + Send + Sync), r: f64, policy: StepPolicy) -> f64 {
    let mut table: Vec<f64> = Vec::with_capacity(policy.levels);
    let mut h = policy.relative_step * r;
    for i in 0..policy.levels {
        let mut d = (f(r + h) - f(r - h)) / (2.0 * h);
        let mut pow4 = 1.0;
        for prev in table.iter_mut().take(i) {
            pow4 *= 4.0;
            let nd = d + (d - *prev) / (pow4 - 1.0);
            *prev = d;
            d = nd;
        }
        table.push(d);
        h *= 0.5;
    }
    *table.last().unwrap()
}

impl RadialFunctionHandle {
    pub fn analytic(e: ExpLaurent) -> Self {
        RadialFunctionHandle::Analytic(e)
    }

    pub fn sampled<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, policy: StepPolicy) -> Self {
        RadialFunctionHandle::Sampled { f: Arc::new(f), policy, order_used: 0 }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::Domain(format!("radial functions are defined on r > 0, got {r}")));
        }
        Ok(match self {
            RadialFunctionHandle::Analytic(e) => e.eval(r),
            RadialFunctionHandle::Sampled { f, .. } => f(r),
        })
    }

    pub fn times_power(&self, q: i32) -> Self {
        match self {
            RadialFunctionHandle::Analytic(e) => RadialFunctionHandle::Analytic(e.times_power(q)),
            RadialFunctionHandle::Sampled { f, policy, order_used } => {
                let f = f.clone();
                RadialFunctionHandle::Sampled { f: Arc::new(move |r| r.powi(q) * f(r)), policy: *policy, order_used: *order_used }
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            RadialFunctionHandle::Analytic(e) => RadialFunctionHandle::Analytic(e.scaled(s)),
            RadialFunctionHandle::Sampled { f, policy, order_used } => {
                let f = f.clone();
                RadialFunctionHandle::Sampled { f: Arc::new(move |r| s * f(r)), policy: *policy, order_used: *order_used }
            }
        }
    }

    /// Sum of two handles; sampled if either is.
    pub fn plus(&self, other: &Self) -> Self {
        match (self, other) {
            (RadialFunctionHandle::Analytic(a), RadialFunctionHandle::Analytic(b)) => RadialFunctionHandle::Analytic(a.plus(b)),
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let (policy, used) = match (self, other) {
                    (RadialFunctionHandle::Sampled { policy, order_used, .. }, RadialFunctionHandle::Sampled { order_used: u2, .. }) => {
                        (*policy, (*order_used).max(*u2))
                    }
                    (RadialFunctionHandle::Sampled { policy, order_used, .. }, _) | (_, RadialFunctionHandle::Sampled { policy, order_used, .. }) => {
                        (*policy, *order_used)
                    }
                    _ => unreachable!(),
                };
                RadialFunctionHandle::Sampled {
                    f: Arc::new(move |r| a.eval(r).unwrap_or(f64::NAN) + b.eval(r).unwrap_or(f64::NAN)),
                    policy,
                    order_used: used,
                }
            }
        }
    }

    /// D^j = ((1/r) d/dr)^j.
    pub fn inv_r_d_dr(&self, j: usize) -> Result<Self> {
        match self {
            RadialFunctionHandle::Analytic(e) => {
                let mut e = e.clone();
                for _ in 0..j {
                    e = e.inv_r_d_dr();
                }
                Ok(RadialFunctionHandle::Analytic(e))
            }
            RadialFunctionHandle::Sampled { f, policy, order_used } => {
                if order_used + j > policy.max_order {
                    return Err(Error::DerivativeUnavailable(format!(
                        "{} finite-difference derivatives requested, policy allows {}",
                        order_used + j,
                        policy.max_order
                    )));
                }
                let mut f = f.clone();
                let p = *policy;
                for _ in 0..j {
                    let g = f.clone();
                    f = Arc::new(move |r| richardson_derivative(g.as_ref(), r, p) / r);
                }
                Ok(RadialFunctionHandle::Sampled { f, policy: p, order_used: order_used + j })
            }
        }
    }
}

/// Radial part of one term of a tensor derivative.
#[derive(Clone, Debug)]
pub enum RadialPart {
    Function(RadialFunctionHandle),
    /// B functions with the term's (ℓ, m); only the radial factors are used.
    BSum(CoeffTensor),
}

/// weight × radial(r) × Y_ℓ^m(θ, φ).
#[derive(Clone, Debug)]
pub struct TensorTerm {
    pub angular: AngularIndex,
    pub weight: f64,
    pub radial: RadialPart,
}

#[derive(Clone, Debug)]
pub struct TensorDerivativeResult {
    pub terms: Vec<TensorTerm>,
}

impl TensorDerivativeResult {
    pub fn eval(&self, r_vec: [f64; 3]) -> Result<Complex64> {
        let r = norm3(r_vec);
        let (th, ph) = angles(r_vec);
        let mut s = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let radial = match &t.radial {
                RadialPart::Function(h) => h.eval(r)?,
                RadialPart::BSum(c) => {
                    let beta = match c.target {
                        Target::Basis(spec) => spec.beta,
                        _ => return Err(Error::Domain("B-sum term needs a basis target".into())),
                    };
                    let mut v = 0.0;
                    for (q, coef) in c.iter() {
                        v += coef * bfun_radial(q.n, q.ell, beta, r)?;
                    }
                    v
                }
            };
            s += spherical_harmonic(t.angular, th, ph) * (t.weight * radial);
        }
        Ok(s)
    }

    pub fn angular_indices(&self) -> Vec<AngularIndex> {
        self.terms.iter().map(|t| t.angular).collect()
    }
}

/// 𝒴_ℓ^m(∇) φ(r) = [D^ℓ φ](r) 𝒴_ℓ^m(r), returned with the surface harmonic:
/// radial factor r^ℓ D^ℓ φ.
pub fn stgo_on_radial(ell: i32, m: i32, phi: &RadialFunctionHandle) -> Result<TensorDerivativeResult> {
    let a = AngularIndex::new(ell, m)?;
    let radial = phi.inv_r_d_dr(ell as usize)?.times_power(ell);
    Ok(TensorDerivativeResult { terms: vec![TensorTerm { angular: a, weight: 1.0, radial: RadialPart::Function(radial) }] })
}

/// One term of 𝒴_{ℓ1}^{m1}(∇) 𝒴_{ℓ2}^{m2}(∇) = Σ ⟨ℓ m1+m2|ℓ1 m1|ℓ2 m2⟩ ∇^{2Δℓ} 𝒴_ℓ^{m1+m2}(∇).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedTerm {
    pub ell: i32,
    pub weight: f64,
    pub laplacian_power: i32,
}

pub fn stgo_linearize(l1: i32, m1: i32, l2: i32, m2: i32) -> Result<Vec<LinearizedTerm>> {
    AngularIndex::new(l1, m1)?;
    AngularIndex::new(l2, m2)?;
    let m = m1 + m2;
    let mut out = Vec::new();
    for ell in gaunt_ells(l1, m1, l2, m2) {
        let w = gaunt(GauntKey::new(ell, m, l1, m1, l2, m2));
        if w == 0.0 {
            continue;
        }
        out.push(LinearizedTerm { ell, weight: w, laplacian_power: delta_ell(l1, l2, ell)?.delta });
    }
    Ok(out)
}

fn d_pow(h: &RadialFunctionHandle, j: i32) -> Result<RadialFunctionHandle> {
    if j < 0 {
        return Err(Error::Coupling(format!("negative derivative order {j}")));
    }
    h.inv_r_d_dr(j as usize)
}

/// γ_{ℓ1ℓ2}^ℓ(r) of 𝒴_{ℓ1}^{m1}(∇)[f(r) Y_{ℓ2}^{m2}] = Σ_ℓ ⟨ℓ m1+m2|ℓ1 m1|ℓ2 m2⟩ γ^ℓ(r) Y_ℓ^{m1+m2}.
///
/// Six equivalent closed forms. Form 4 needs ℓ ≤ ℓ2 and form 5 needs ℓ ≥ ℓ2.
pub fn gamma_radial(form: u8, f: &RadialFunctionHandle, l1: i32, l2: i32, ell: i32) -> Result<RadialFunctionHandle> {
    let d = delta_ell(l1, l2, ell)?;
    let (dl, dl1, dl2, sigma) = (d.delta, d.delta1, d.delta2, d.sigma);
    let f_over = f.times_power(-l2);
    let f_up = f.times_power(l2 + 1);
    match form {
        1 => {
            let mut acc: Option<RadialFunctionHandle> = None;
            for q in 0..=dl {
                let c = pochhammer(-(dl as f64), q as u32) * pochhammer(-(sigma as f64) - 0.5, q as u32) / factorial(q as u32)
                    * 2f64.powi(q);
                if c == 0.0 {
                    continue;
                }
                let t = d_pow(&f_over, l1 - q)?.times_power(l1 + l2 - 2 * q).scaled(c);
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.plus(&t),
                });
            }
            Ok(acc.unwrap_or(RadialFunctionHandle::Analytic(ExpLaurent::default())))
        }
        2 => Ok(d_pow(&d_pow(&f_over, dl2)?.times_power(l1 + l2 + ell + 1), dl)?.times_power(-ell - 1)),
        3 => Ok(d_pow(&d_pow(&f_up, dl)?.times_power(l1 - l2 - ell - 1), dl2)?.times_power(ell)),
        4 => {
            if ell > l2 {
                return Err(Error::Coupling(format!("form 4 needs ℓ ≤ ℓ2, got ℓ = {ell}, ℓ2 = {l2}")));
            }
            let inner = d_pow(&f_up, l2 - ell)?.times_power(-2 * ell - 1);
            let mid = d_pow(&inner, dl2)?.times_power(l1 - l2 + 3 * ell + 1);
            Ok(d_pow(&mid, dl2)?.times_power(-ell - 1))
        }
        5 => {
            if ell < l2 {
                return Err(Error::Coupling(format!("form 5 needs ℓ ≥ ℓ2, got ℓ = {ell}, ℓ2 = {l2}")));
            }
            let inner = d_pow(&f_over, ell - l2)?.times_power(2 * ell + 1);
            let mid = d_pow(&inner, dl)?.times_power(l1 + l2 - 3 * ell - 1);
            Ok(d_pow(&mid, dl)?.times_power(ell))
        }
        6 => {
            let mut acc: Option<RadialFunctionHandle> = None;
            for s in 0..=dl2 {
                let c = pochhammer(-(dl2 as f64), s as u32) * pochhammer(dl1 as f64 + 0.5, s as u32) / factorial(s as u32)
                    * 2f64.powi(s);
                if c == 0.0 {
                    continue;
                }
                let t = d_pow(&f_up, l1 - s)?.times_power(l1 - l2 - 2 * s - 1).scaled(c);
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.plus(&t),
                });
            }
            Ok(acc.unwrap_or(RadialFunctionHandle::Analytic(ExpLaurent::default())))
        }
        _ => Err(Error::Domain(format!("γ form must be 1..=6, got {form}"))),
    }
}

/// 𝒴_{ℓ1}^{m1}(∇)[f(r) Y_{ℓ2}^{m2}] through the chosen γ form.
pub fn stgo_on_tensor(l1: i32, m1: i32, l2: i32, m2: i32, f: &RadialFunctionHandle, form: u8) -> Result<TensorDerivativeResult> {
    let mut terms = Vec::new();
    for lt in stgo_linearize(l1, m1, l2, m2)? {
        let use_form = match form {
            4 if lt.ell > l2 => 5,
            5 if lt.ell < l2 => 4,
            other => other,
        };
        let g = gamma_radial(use_form, f, l1, l2, lt.ell)?;
        terms.push(TensorTerm { angular: AngularIndex::new(lt.ell, m1 + m2)?, weight: lt.weight, radial: RadialPart::Function(g) });
    }
    Ok(TensorDerivativeResult { terms })
}

/// 𝒴_{ℓ1}^{m1}(∇) B_{n2ℓ2}^{m2}(β, r) as a B-function sum:
/// (−β)^{ℓ1} Σ_ℓ ⟨ℓ m1+m2|ℓ1 m1|ℓ2 m2⟩ Σ_t (−1)^t C(Δℓ, t) B_{n2+ℓ2−ℓ−t, ℓ}^{m1+m2}.
pub fn stgo_on_bfun(l1: i32, m1: i32, n2: i32, l2: i32, m2: i32, beta: f64) -> Result<CoeffTensor> {
    let spec = BasisSpec::new(crate::basis::BasisFamily::BFun, beta)?;
    spec.check_index(QuantumIndex::new(n2, l2, m2))?;
    let m = m1 + m2;
    let pre = (-beta).powi(l1);
    let mut t = CoeffTensor::new(Target::Basis(spec));
    for lt in stgo_linearize(l1, m1, l2, m2)? {
        for tt in 0..=lt.laplacian_power {
            let n = n2 + l2 - lt.ell - tt;
            if n + lt.ell < 0 {
                return Err(Error::DistributionalRange(format!("term B_{{{n},{}}} is a distribution", lt.ell)));
            }
            t.add(QuantumIndex::new(n, lt.ell, m), pre * lt.weight * parity(tt) * binomial(lt.laplacian_power as f64, tt as u32));
        }
    }
    Ok(t)
}

/// ∇^{2ν}/β^{2ν} B_{nℓ}^m = Σ_t (−1)^t C(ν, t) B_{n−t,ℓ}^m.
///
/// Requires n − ν ≥ 1; lower indices would reach distributional B functions.
pub fn laplacian_power_on_bfun(nu: i32, n: i32, ell: i32, m: i32, beta: f64) -> Result<CoeffTensor> {
    if nu < 0 {
        return Err(Error::Domain(format!("Laplacian power must be ≥ 0, got {nu}")));
    }
    if n - nu < 1 {
        return Err(Error::DistributionalRange(format!("n − ν = {} < 1", n - nu)));
    }
    let spec = BasisSpec::new(crate::basis::BasisFamily::BFun, beta)?;
    spec.check_index(QuantumIndex::new(n, ell, m))?;
    let mut t = CoeffTensor::new(Target::Basis(spec));
    for tt in 0..=nu {
        t.add(QuantumIndex::new(n - tt, ell, m), parity(tt) * binomial(nu as f64, tt as u32));
    }
    Ok(t)
}

/// Monomial coefficients of 𝒴_ℓ^m as a polynomial in (x, y, z).
pub fn solid_harmonic_polynomial(a: AngularIndex) -> BTreeMap<[u32; 3], Complex64> {
    if a.m < 0 {
        let sign = parity(a.m);
        return solid_harmonic_polynomial(AngularIndex { ell: a.ell, m: -a.m }).into_iter().map(|(k, c)| (k, c.conj() * sign)).collect();
    }
    let (l, m) = (a.ell, a.m);
    let pref = ((2 * l + 1) as f64 / (4.0 * PI) * factorial((l + m) as u32) * factorial((l - m) as u32)).sqrt();
    let i = Complex64::new(0.0, 1.0);
    let mut out: BTreeMap<[u32; 3], Complex64> = BTreeMap::new();
    let mut k = 0;
    while l - m - 2 * k >= 0 {
        let den = 2f64.powi(m + 2 * k) * factorial((m + k) as u32) * factorial(k as u32) * factorial((l - m - 2 * k) as u32);
        let (p, q) = ((m + k) as u32, k as u32);
        // (−x − iy)^p (x − iy)^q
        for a1 in 0..=p {
            let c1 = binomial(p as f64, a1) * parity(p as i32) * i.powu(p - a1);
            for b1 in 0..=q {
                let c2 = binomial(q as f64, b1) * (-i).powu(q - b1);
                let key = [a1 + b1, (p - a1) + (q - b1), (l - m - 2 * k) as u32];
                *out.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c1 * c2 * (pref / den);
            }
        }
        k += 1;
    }
    out.retain(|_, c| c.norm() > 1e-15);
    out
}

/// 𝒴_ℓ^m(∇) g at r by Cartesian finite differences of the polynomial operator.
pub fn stgo_cartesian_fd<G: Fn([f64; 3]) -> Complex64>(a: AngularIndex, g: &G, r: [f64; 3], h: f64) -> Result<Complex64> {
    let mut s = Complex64::new(0.0, 0.0);
    for (k, c) in solid_harmonic_polynomial(a) {
        s += c * crate::oracle::cartesian_partial(g, r, k, h)?;
    }
    Ok(s)
}

/// (−1)^ℓ/(2ℓ−1)!! 𝒴_ℓ^m(∇)(1/r), which equals 𝒵_ℓ^m(r).
pub fn hobson_irregular(a: AngularIndex, r_vec: [f64; 3]) -> Result<Complex64> {
    let coulomb = RadialFunctionHandle::Analytic(ExpLaurent::monomial(1.0, -1));
    let res = stgo_on_radial(a.ell, a.m, &coulomb)?;
    Ok(res.eval(r_vec)? * (parity(a.ell) / double_factorial_odd(a.ell)))
}

/// Modified Helmholtz harmonic (4π)^{1/2} (−β)^{−ℓ} 𝒴_ℓ^m(∇) B_{00}^0(β, r).
pub fn helmholtz_harmonic(a: AngularIndex, beta: f64, r_vec: [f64; 3]) -> Result<Complex64> {
    let b00 = ExpLaurent::bfun(0, 0, beta)?.scaled((4.0 * PI).sqrt().recip());
    let res = stgo_on_radial(a.ell, a.m, &RadialFunctionHandle::Analytic(b00))?;
    Ok(res.eval(r_vec)? * ((4.0 * PI).sqrt() * (-beta).powi(-a.ell)))
}

/// β^{ℓ+1} B_{−ℓ,ℓ}^m(β, r) at the given screenings, with linear
/// extrapolation to β = 0 from the two smallest, and the target (2ℓ−1)!! 𝒵_ℓ^m(r).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningLimit {
    pub betas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub extrapolated: Complex64,
    pub target: Complex64,
}

fn neville_at_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = x.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
        }
    }
    p[0]
}

pub fn helmholtz_screening_limit(a: AngularIndex, r_vec: [f64; 3], betas: &[f64]) -> Result<ScreeningLimit> {
    if betas.is_empty() || betas.iter().any(|b| *b <= 0.0) {
        return Err(Error::Domain("screenings must be positive".into()));
    }
    let spec = BasisSpec::bfun(1.0);
    let mut values = Vec::new();
    for &b in betas {
        let v = crate::basis::eval(&BasisSpec { beta: b, ..spec }, QuantumIndex::new(-a.ell, a.ell, a.m), r_vec)?;
        values.push(v * b.powi(a.ell + 1));
    }
    // the two smallest screenings; far nodes add higher-order error
    let mut order: Vec<usize> = (0..betas.len()).collect();
    order.sort_by(|&i, &j| betas[i].total_cmp(&betas[j]));
    order.truncate(2);
    let xs: Vec<f64> = order.iter().map(|&i| betas[i]).collect();
    let re: Vec<f64> = order.iter().map(|&i| values[i].re).collect();
    let im: Vec<f64> = order.iter().map(|&i| values[i].im).collect();
    let extrapolated = Complex64::new(neville_at_zero(&xs, &re), neville_at_zero(&xs, &im));
    let target = crate::special::irregular_solid_harmonic(a, r_vec)? * double_factorial_odd(a.ell);
    Ok(ScreeningLimit { betas: betas.to_vec(), values, extrapolated, target })
}

/// x^u y^v z^w = Σ C r^{2ν} 𝒴_λ^μ(r).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub nu: i32,
    pub angular: AngularIndex,
    pub coefficient: Complex64,
}

/// Degrees up to 6, by projection on the unit sphere; 2ν + λ equals the degree.
pub fn monomial_tensor_decomposition(u: u32, v: u32, w: u32) -> Result<Vec<MonomialTerm>> {
    let n = u + v + w;
    if n > 6 {
        return Err(Error::DegreeExceeded(n));
    }
    let mut out = Vec::new();
    for lambda in (0..=n as i32).rev().step_by(2) {
        for mu in -lambda..=lambda {
            let a = AngularIndex::new(lambda, mu)?;
            let c = sphere_quadrature(
                |th, ph| {
                    let (st, ct) = th.sin_cos();
                    let (sp, cp) = ph.sin_cos();
                    let mono = (st * cp).powi(u as i32) * (st * sp).powi(v as i32) * ct.powi(w as i32);
                    spherical_harmonic(a, th, ph).conj() * mono
                },
                2 * n as usize + 2,
            );
            if c.norm() > 1e-13 {
                out.push(MonomialTerm { nu: (n as i32 - lambda) / 2, angular: a, coefficient: c });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval;
    use crate::special::{irregular_solid_harmonic, regular_solid_harmonic};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const POINTS: [[f64; 3]; 5] = [[0.3, 0.4, 0.9], [-0.7, 0.2, 0.5], [1.1, -0.6, -0.3], [0.2, 1.3, 0.8], [-0.5, -0.5, 1.4]];

    fn exp_r() -> RadialFunctionHandle {
        RadialFunctionHandle::Analytic(ExpLaurent::exponential(1.0, 0, 1.0))
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-3)
    }

    #[test]
    fn explaurent_derivative_rules() {
        let e = ExpLaurent::exponential(2.0, 3, 0.5);
        let d = e.inv_r_d_dr();
        for r in [0.3f64, 1.7] {
            let direct = 2.0 * (3.0 * r.powi(2) - 0.5 * r.powi(3)) * (-0.5 * r).exp() / r;
            assert_relative_eq!(d.eval(r), direct, max_relative = 1e-14);
        }
        let g = ExpLaurent::gaussian(1.0, 0, 0.7);
        assert_relative_eq!(g.inv_r_d_dr().eval(1.2), -1.4 * (-0.7f64 * 1.44).exp(), max_relative = 1e-14);
    }

    #[test]
    fn bfun_radial_agrees_with_basis() {
        for (n, ell) in [(1, 0), (3, 1), (0, 0), (0, 2), (-1, 1), (-2, 2), (4, 3)] {
            let e = ExpLaurent::bfun(n, ell, 1.3).unwrap();
            for r in [0.2, 1.0, 3.5] {
                assert_relative_eq!(e.eval(r), bfun_radial(n, ell, 1.3, r).unwrap(), max_relative = 1e-13);
            }
        }
        assert!(matches!(ExpLaurent::bfun(-3, 2, 1.0), Err(Error::DistributionalRange(_))));
    }

    #[test]
    fn radial_examples() {
        let phi = exp_r();
        let id = stgo_on_radial(0, 0, &phi).unwrap();
        let p = [0.3, 0.1, 0.6];
        assert!(close(id.eval(p).unwrap(), Complex64::new((-norm3(p)).exp() / (4.0 * PI).sqrt(), 0.0), 1e-14));
        let coul = RadialFunctionHandle::Analytic(ExpLaurent::monomial(1.0, -1));
        let r1 = coul.inv_r_d_dr(1).unwrap();
        assert_relative_eq!(r1.eval(2.0).unwrap(), -1.0 / 8.0, max_relative = 1e-15);
        // ℓ = 2 on e^{−r} against Cartesian differences
        let a = AngularIndex::new(2, 0).unwrap();
        let res = stgo_on_radial(2, 0, &phi).unwrap();
        let g = |q: [f64; 3]| Complex64::new((-norm3(q)).exp(), 0.0);
        for p in POINTS {
            let fd = stgo_cartesian_fd(a, &g, p, 1e-2).unwrap();
            assert!(close(res.eval(p).unwrap(), fd, 1e-6), "{p:?}");
        }
    }

    #[test]
    fn solid_polynomial_matches_harmonic() {
        for ell in 0..=4 {
            for m in -ell..=ell {
                let a = AngularIndex::new(ell, m).unwrap();
                let poly = solid_harmonic_polynomial(a);
                for p in POINTS {
                    let v: Complex64 = poly
                        .iter()
                        .map(|(k, c)| c * p[0].powi(k[0] as i32) * p[1].powi(k[1] as i32) * p[2].powi(k[2] as i32))
                        .sum();
                    assert!(close(v, regular_solid_harmonic(a, p), 1e-13));
                }
            }
        }
    }

    #[test]
    fn hobson_identity() {
        for ell in 0..=3 {
            for m in -ell..=ell {
                let a = AngularIndex::new(ell, m).unwrap();
                for p in POINTS.iter().chain(&[[2.0, 0.1, -0.4], [0.0, 0.0, 1.5], [0.9, 0.9, 0.9], [-1.2, 0.3, 0.0], [0.4, -2.2, 1.0]]) {
                    let lhs = hobson_irregular(a, *p).unwrap();
                    let rhs = irregular_solid_harmonic(a, *p).unwrap();
                    assert!(close(lhs, rhs, 1e-8), "ℓ={ell} m={m} at {p:?}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn hobson_identity_by_cartesian_differences() {
        let g = |q: [f64; 3]| Complex64::new(1.0 / norm3(q), 0.0);
        for ell in 0..=3 {
            let a = AngularIndex::new(ell, ell.min(1)).unwrap();
            let p = [0.8, -0.5, 1.1];
            let fd = stgo_cartesian_fd(a, &g, p, 1e-2).unwrap() * (parity(ell) / double_factorial_odd(ell));
            assert!(close(fd, irregular_solid_harmonic(a, p).unwrap(), 1e-6), "ℓ={ell}");
        }
    }

    #[test]
    fn linearize_examples() {
        let t = stgo_linearize(0, 0, 2, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_relative_eq!(t[0].weight, (4.0 * PI).sqrt().recip(), max_relative = 1e-14);
        assert_eq!(t[0].laplacian_power, 0);
        let t = stgo_linearize(1, 0, 1, 0).unwrap();
        assert_eq!(t.iter().map(|x| (x.ell, x.laplacian_power)).collect::<Vec<_>>(), vec![(0, 1), (2, 0)]);
        let t = stgo_linearize(1, 1, 1, 1).unwrap();
        assert_eq!(t.iter().map(|x| x.ell).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn gamma_forms_agree() {
        let radii: Vec<f64> = (1..=10).map(|i| 0.35 * i as f64).collect();
        for (l1, l2) in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (2, 3), (3, 3)] {
            let f = RadialFunctionHandle::Analytic(ExpLaurent::exponential(1.0, l2, 1.0).plus(&ExpLaurent::gaussian(0.5, l2 + 1, 0.3)));
            for ell in gaunt_ells(l1, 0, l2, 0) {
                let reference = gamma_radial(1, &f, l1, l2, ell).unwrap();
                for form in 2..=6u8 {
                    let g = match gamma_radial(form, &f, l1, l2, ell) {
                        Ok(g) => g,
                        Err(Error::Coupling(_)) if form == 4 || form == 5 => continue,
                        Err(e) => panic!("{e}"),
                    };
                    for &r in &radii {
                        let (a, b) = (reference.eval(r).unwrap(), g.eval(r).unwrap());
                        assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-8), "form {form} ({l1},{l2},{ell}) r={r}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_special_cases() {
        let coul = RadialFunctionHandle::Analytic(ExpLaurent::monomial(1.0, -1));
        let g = gamma_radial(1, &coul, 1, 0, 1).unwrap();
        let via_radial = stgo_on_radial(1, 0, &coul).unwrap();
        let p = [0.0, 0.0, 1.7];
        // γ Y_1^0 ⟨1 0|1 0|0 0⟩ = 𝒴_1^0(∇)[Y_0^0/r]
        let lhs = g.eval(1.7).unwrap() * gaunt(GauntKey::new(1, 0, 1, 0, 0, 0)) * spherical_harmonic(AngularIndex::new(1, 0).unwrap(), 0.0, 0.0).re;
        let rhs = via_radial.eval(p).unwrap().re / (4.0 * PI).sqrt();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
        assert_relative_eq!(g.eval(1.7).unwrap(), -1.0 / 1.7f64.powi(2), max_relative = 1e-13);
        let f = exp_r();
        for form in 1..=6u8 {
            let g = gamma_radial(form, &f, 0, 2, 2).unwrap();
            assert_relative_eq!(g.eval(0.8).unwrap(), (-0.8f64).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn tensor_derivative_matches_cartesian() {
        for (l1, m1, l2, m2) in [(1, 0, 1, 1), (2, 1, 1, 0), (1, -1, 2, 1), (2, 0, 2, -2)] {
            let f = RadialFunctionHandle::Analytic(ExpLaurent::exponential(1.0, l2, 1.0));
            let res = stgo_on_tensor(l1, m1, l2, m2, &f, 1).unwrap();
            let a2 = AngularIndex::new(l2, m2).unwrap();
            let g = move |q: [f64; 3]| regular_solid_harmonic(a2, q) * (-norm3(q)).exp();
            let a1 = AngularIndex::new(l1, m1).unwrap();
            for p in POINTS {
                let fd = stgo_cartesian_fd(a1, &g, p, 1e-2).unwrap();
                assert!(close(res.eval(p).unwrap(), fd, 1e-6), "({l1},{m1},{l2},{m2}) at {p:?}");
            }
        }
    }

    #[test]
    fn sampled_handle_matches_analytic() {
        let f = RadialFunctionHandle::sampled(|r| (-r).exp() * r, StepPolicy::default());
        let a = RadialFunctionHandle::Analytic(ExpLaurent::exponential(1.0, 1, 1.0));
        for form in [1u8, 6] {
            let gs = gamma_radial(form, &f, 1, 1, 0).unwrap();
            let ga = gamma_radial(form, &a, 1, 1, 0).unwrap();
            for r in [0.5, 1.0, 2.0] {
                assert_relative_eq!(gs.eval(r).unwrap(), ga.eval(r).unwrap(), max_relative = 1e-7);
            }
        }
        let tight = StepPolicy { max_order: 1, ..StepPolicy::default() };
        let f = RadialFunctionHandle::sampled(|r| (-r).exp(), tight);
        assert!(matches!(stgo_on_radial(2, 0, &f), Err(Error::DerivativeUnavailable(_))));
    }

    fn bsum_at(t: &CoeffTensor, p: [f64; 3]) -> Complex64 {
        let spec = match t.target {
            Target::Basis(s) => s,
            _ => unreachable!(),
        };
        t.iter().map(|(q, c)| eval(&spec, q, p).unwrap() * c).sum()
    }

    #[test]
    fn bfun_examples() {
        let beta = 1.4;
        let t = stgo_on_bfun(1, 0, 2, 0, 0, beta).unwrap();
        assert_eq!(t.len(), 1);
        assert_relative_eq!(t.get(QuantumIndex::new(1, 1, 0)), -beta / (4.0 * PI).sqrt(), max_relative = 1e-14);
        let t = stgo_on_bfun(0, 0, 3, 2, -1, beta).unwrap();
        assert_eq!(t.len(), 1);
        assert_relative_eq!(t.get(QuantumIndex::new(3, 2, -1)), (4.0 * PI).sqrt().recip(), max_relative = 1e-14);
        let t = stgo_on_bfun(1, 0, 1, 1, 0, beta).unwrap();
        let ells: std::collections::BTreeSet<i32> = t.entries.keys().map(|q| q.ell).collect();
        assert_eq!(ells.into_iter().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn bfun_matches_cartesian() {
        let beta = 1.1;
        let spec = BasisSpec::bfun(beta);
        for (l1, m1) in [(1, 0), (1, 1), (2, 0), (2, -1), (2, 2)] {
            for (n2, l2, m2) in [(1, 1, 0), (2, 0, 0), (2, 1, -1), (3, 2, 1)] {
                let t = stgo_on_bfun(l1, m1, n2, l2, m2, beta).unwrap();
                let q2 = QuantumIndex::new(n2, l2, m2);
                let g = move |q: [f64; 3]| eval(&spec, q2, q).unwrap();
                let a1 = AngularIndex::new(l1, m1).unwrap();
                for p in POINTS {
                    let fd = stgo_cartesian_fd(a1, &g, p, 1e-2).unwrap();
                    let v = bsum_at(&t, p);
                    assert!(close(v, fd, 1e-6), "({l1},{m1}) on {q2:?} at {p:?}: {v} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn laplacian_powers() {
        let beta = 0.9;
        let t = laplacian_power_on_bfun(0, 3, 1, 0, beta).unwrap();
        assert_eq!(t.len(), 1);
        let t = laplacian_power_on_bfun(1, 3, 0, 0, beta).unwrap();
        assert_eq!(t.get(QuantumIndex::new(3, 0, 0)), 1.0);
        assert_eq!(t.get(QuantumIndex::new(2, 0, 0)), -1.0);
        assert!(laplacian_power_on_bfun(2, 3, 0, 0, beta).is_ok());
        assert!(matches!(laplacian_power_on_bfun(2, 2, 0, 0, beta), Err(Error::DistributionalRange(_))));
        // ∇² by Cartesian differences
        let spec = BasisSpec::bfun(beta);
        for (n, ell, m) in [(3, 0, 0), (3, 1, 1), (4, 2, -1)] {
            let t = laplacian_power_on_bfun(1, n, ell, m, beta).unwrap();
            let q = QuantumIndex::new(n, ell, m);
            let g = move |x: [f64; 3]| eval(&spec, q, x).unwrap();
            for p in POINTS {
                let mut lap = Complex64::new(0.0, 0.0);
                for axis in 0..3 {
                    let mut o = [0u32; 3];
                    o[axis] = 2;
                    lap += crate::oracle::cartesian_partial(&g, p, o, 1e-2).unwrap();
                }
                let v = bsum_at(&t, p) * beta * beta;
                assert!(close(v, lap, 1e-6), "{q:?} at {p:?}");
            }
        }
    }

    #[test]
    fn helmholtz_chain() {
        for ell in 0..=2 {
            for m in [0, ell] {
                let a = AngularIndex::new(ell, m).unwrap();
                for p in &POINTS[..3] {
                    let h = helmholtz_harmonic(a, 0.8, *p).unwrap();
                    let b = eval(&BasisSpec::bfun(0.8), QuantumIndex::new(-ell, ell, m), *p).unwrap();
                    assert!(close(h, b, 1e-12), "ℓ={ell}: {h} vs {b}");
                }
                let lim = helmholtz_screening_limit(a, POINTS[1], &[1.0, 0.1, 0.01]).unwrap();
                let plain = (lim.values[2] - lim.target).norm();
                let extra = (lim.extrapolated - lim.target).norm();
                assert!(extra <= 1e-3 * lim.target.norm(), "ℓ={ell}: {extra}");
                assert!(plain <= 1e-2 * lim.target.norm());
                // only ℓ = 0 has a term linear in β
                if ell == 0 {
                    assert!(extra < plain);
                }
            }
        }
    }

    #[test]
    fn monomial_examples() {
        let t = monomial_tensor_decomposition(0, 0, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].nu, t[0].angular.ell, t[0].angular.m), (0, 1, 0));
        assert_relative_eq!(t[0].coefficient.re, (4.0 * PI / 3.0).sqrt(), max_relative = 1e-13);
        // x² + y² + z² = √(4π) r² 𝒴_0^0
        let mut s = BTreeMap::new();
        for (u, v, w) in [(2, 0, 0), (0, 2, 0), (0, 0, 2)] {
            for term in monomial_tensor_decomposition(u, v, w).unwrap() {
                *s.entry((term.nu, term.angular.ell, term.angular.m)).or_insert(Complex64::new(0.0, 0.0)) += term.coefficient;
            }
        }
        s.retain(|_, c: &mut Complex64| c.norm() > 1e-12);
        assert_eq!(s.len(), 1);
        assert_relative_eq!(s[&(1, 0, 0)].re, (4.0 * PI).sqrt(), max_relative = 1e-13);
        let t = monomial_tensor_decomposition(1, 1, 0).unwrap();
        assert!(t.iter().all(|x| x.angular.ell == 2 && x.angular.m.abs() == 2));
        assert!(matches!(monomial_tensor_decomposition(4, 2, 1), Err(Error::DegreeExceeded(7))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monomial_reconstruction(u in 0u32..4, v in 0u32..3, w in 0u32..3, x in -1.5f64..1.5, y in -1.5f64..1.5, z in -1.5f64..1.5) {
            prop_assume!(u + v + w <= 6);
            let terms = monomial_tensor_decomposition(u, v, w).unwrap();
            let p = [x, y, z];
            let r2 = x * x + y * y + z * z;
            let sum: Complex64 = terms.iter().map(|t| regular_solid_harmonic(t.angular, p) * t.coefficient * r2.powi(t.nu)).sum();
            let direct = x.powi(u as i32) * y.powi(v as i32) * z.powi(w as i32);
            prop_assert!((sum.re - direct).abs() <= 1e-11 * (1.0 + r2.powf((u + v + w) as f64 / 2.0)));
            prop_assert!(sum.im.abs() <= 1e-11 * (1.0 + r2.powf((u + v + w) as f64 / 2.0)));
        }

        #[test]
        fn stgo_result_indices_within_gaunt_limits(l1 in 0i32..4, l2 in 0i32..4, m1s in 0i32..100, m2s in 0i32..100) {
            let m1 = m1s % (2 * l1 + 1) - l1;
            let m2 = m2s % (2 * l2 + 1) - l2;
            let t = stgo_on_bfun(l1, m1, l2 + 2, l2, m2, 1.0).unwrap();
            let (lo, hi, _) = crate::special::gaunt_limits(l1, m1, l2, m2);
            for q in t.entries.keys() {
                prop_assert!(q.ell >= lo && q.ell <= hi && q.m == m1 + m2);
            }
        }
    }
}
