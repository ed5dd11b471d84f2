//! Finite inter-basis transforms.
//!
//! Each generator returns the coefficients of one source function in a target
//! family. Coefficients are assembled in [`LogReal`] form so factorial ratios
//! never overflow; signs come from the Pochhammer symbols.
//!
//! Two printed formulas are not used as printed. The Lambda→Guseinov
//! coefficient is the exact inverse of the Guseinov→Lambda transform, and the
//! power-times-B coefficient multiplies by (n+ℓ+1)_{s−σ} rather than dividing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::{eval_radial, BasisSpec, QuantumIndex};
use crate::error::{Error, Result};
use crate::oracle::{radial_quadrature, QuadratureSpec};
use crate::special::{
    binomial, double_factorial_odd, laguerre, ln_factorial, ln_gamma, pochhammer_log, reduced_bessel, HalfOrder, LogReal,
};

/// The family a coefficient tensor expands into.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Basis(BasisSpec),
    /// L_n^{(α)}(x), keyed by n.
    Laguerre { alpha: f64 },
    /// e^{−z} L_n^{(α)}(2z), keyed by n.
    ExpLaguerre { alpha: f64 },
    /// k̂_{n+1/2}(z), keyed by n.
    ReducedBessel,
}

/// Sparse coefficients over a target family.
///
/// Basis targets are keyed by (n, ℓ, m). Scalar-indexed targets use the key's
/// n with ℓ = m = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffTensor {
    pub target: Target,
    pub entries: BTreeMap<QuantumIndex, f64>,
}

impl CoeffTensor {
    pub fn new(target: Target) -> Self {
        CoeffTensor { target, entries: BTreeMap::new() }
    }

    pub fn add(&mut self, q: QuantumIndex, c: f64) {
        *self.entries.entry(q).or_insert(0.0) += c;
    }

    pub fn get(&self, q: QuantumIndex) -> f64 {
        self.entries.get(&q).copied().unwrap_or(0.0)
    }

    /// Coefficient of a scalar-indexed target.
    pub fn at(&self, n: i32) -> f64 {
        self.get(QuantumIndex::new(n, 0, 0))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (QuantumIndex, f64)> + '_ {
        self.entries.iter().map(|(q, c)| (*q, *c))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Every key re-labelled with magnetic number `m`; the transforms do not depend on it.
    pub fn with_m(mut self, m: i32) -> Self {
        self.entries = self.entries.into_iter().map(|(q, c)| (QuantumIndex::new(q.n, q.ell, m), c)).collect();
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for c in self.entries.values_mut() {
            *c *= s;
        }
        self
    }

    /// Replace every target function by its own expansion.
    pub fn compose<F>(&self, mut expand: F) -> Result<CoeffTensor>
    where
        F: FnMut(QuantumIndex) -> Result<CoeffTensor>,
    {
        let mut out: Option<CoeffTensor> = None;
        for (q, c) in self.iter() {
            let inner = expand(q)?;
            let acc = out.get_or_insert_with(|| CoeffTensor::new(inner.target));
            for (p, d) in inner.iter() {
                acc.add(p, c * d);
            }
        }
        out.ok_or_else(|| Error::InvalidIndex("composition of an empty tensor".into()))
    }

    /// Σ c · (radial factor of the target function) at r.
    pub fn eval_radial(&self, r: f64) -> Result<f64> {
        Ok(self.eval_radial_with_magnitude(r)?.0)
    }

    /// The reconstruction at r together with Σ |c · φ(r)|.
    pub fn eval_radial_with_magnitude(&self, r: f64) -> Result<(f64, f64)> {
        let (mut s, mut m) = (0.0, 0.0);
        for (q, c) in self.iter() {
            let t = c * target_radial(self.target, q, r)?;
            s += t;
            m += t.abs();
        }
        Ok((s, m))
    }

    /// Largest pointwise error against `direct` over `radii`, relative to the
    /// magnitude Σ |c · φ(r)| of the sum.
    ///
    /// Near the origin a function vanishing like r^p is often a sum of O(1)
    /// terms, so double precision cannot deliver a small error relative to
    /// |f(r)| there. A wrong coefficient still shows up at order one.
    pub fn reconstruction_error<F: Fn(f64) -> f64>(&self, direct: F, radii: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &r in radii {
            let (s, m) = self.eval_radial_with_magnitude(r)?;
            let d = direct(r);
            let scale = m.max(d.abs());
            if scale > 0.0 {
                worst = worst.max((s - d).abs() / scale);
            }
        }
        Ok(worst)
    }
}

/// 20 log-spaced radii spanning [1e−3, 30]/β.
pub fn reconstruction_radii(beta: f64) -> Vec<f64> {
    (0..20).map(|i| 1e-3 * (3e4f64).powf(i as f64 / 19.0) / beta).collect()
}

fn target_radial(t: Target, q: QuantumIndex, r: f64) -> Result<f64> {
    match t {
        Target::Basis(spec) => eval_radial(&spec, q, r),
        Target::Laguerre { alpha } => Ok(laguerre(q.n as u32, alpha, r)),
        Target::ExpLaguerre { alpha } => Ok((-r).exp() * laguerre(q.n as u32, alpha, 2.0 * r)),
        Target::ReducedBessel => reduced_bessel(HalfOrder::half_integer(q.n), r),
    }
}

fn ln_val(x: f64) -> LogReal {
    LogReal { sign: 1.0, ln_abs: x }
}

fn lfact(n: i32) -> f64 {
    ln_factorial(n as u32)
}

fn poch(a: f64, n: i32) -> LogReal {
    pochhammer_log(a, n as u32)
}

/// (a)_j for any integer j, as Γ(a+j)/Γ(a) with positive arguments.
fn poch_signed(a: f64, j: i32) -> LogReal {
    if j >= 0 {
        poch(a, j)
    } else {
        ln_val(ln_gamma(a + j as f64) - ln_gamma(a))
    }
}

fn basis_index_ok(n: i32, ell: i32) -> Result<()> {
    if ell < 0 || n < ell + 1 {
        return Err(Error::InvalidIndex(format!("need 0 ≤ ℓ < n, got n = {n}, ℓ = {ell}")));
    }
    Ok(())
}

fn guseinov_k_ok(k: i32) -> Result<()> {
    if k < -1 {
        return Err(Error::Domain(format!("Guseinov weight order must be ≥ −1, got {k}")));
    }
    Ok(())
}

/// Λ_{n,ℓ} as a sum of B_{ν+1,ℓ}, ν = 0..n−ℓ−1.
pub fn lambda_to_bfun(n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    basis_index_ok(n, ell)?;
    let pref = ln_val(1.5 * (2.0 * beta).ln() + ell as f64 * 2f64.ln() + 0.5 * (lfact(n + ell + 1) - lfact(n - ell - 1)))
        * ((2 * n + 1) as f64 / double_factorial_odd(ell + 2));
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::bfun(beta)));
    for nu in 0..=(n - ell - 1) {
        let c = pref * poch((-n + ell + 1) as f64, nu) * poch((n + ell + 2) as f64, nu)
            / (ln_val(lfact(nu)) * poch(ell as f64 + 2.5, nu));
        t.add(QuantumIndex::new(nu + 1, ell, 0), c.value());
    }
    Ok(t)
}

/// B_{n,ℓ} as a sum of Λ_{ν+ℓ+1,ℓ}, ν = 0..n−1.
pub fn bfun_to_lambda(n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    if n < 1 || ell < 0 {
        return Err(Error::InvalidIndex(format!("need n ≥ 1, ℓ ≥ 0, got n = {n}, ℓ = {ell}")));
    }
    let a = (n + 2 * ell + 3) as f64;
    let pref = ln_val(-1.5 * (2.0 * beta).ln() - (2 * n + 2 * ell - 1) as f64 * 2f64.ln() - lfact(n + ell)) * poch(a, n - 1);
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::lambda(beta)));
    for nu in 0..n {
        let c = pref * poch((1 - n) as f64, nu) / poch(a, nu) * ln_val(0.5 * (lfact(nu + 2 * ell + 2) - lfact(nu)));
        t.add(QuantumIndex::new(nu + ell + 1, ell, 0), c.value());
    }
    Ok(t)
}

/// χ_{n,ℓ} (integer n) as a sum of Λ_{ν+ℓ+1,ℓ}.
pub fn stf_to_lambda(n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    basis_index_ok(n, ell)?;
    let a = (2 * ell + 3) as f64;
    let pref = ln_val(-1.5 * (2.0 * beta).ln() - (n - 1) as f64 * 2f64.ln()) * poch(a, n - ell - 1);
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::lambda(beta)));
    for nu in 0..=(n - ell - 1) {
        let c = pref * poch((-n + ell + 1) as f64, nu) / poch(a, nu) * ln_val(0.5 * (lfact(nu + 2 * ell + 2) - lfact(nu)));
        t.add(QuantumIndex::new(nu + ell + 1, ell, 0), c.value());
    }
    Ok(t)
}

/// χ_{n,ℓ} (integer n) as a sum of B_{n−ℓ−σ,ℓ}.
pub fn stf_to_bfun(n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    basis_index_ok(n, ell)?;
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::bfun(beta)));
    let a = -((n - ell - 1) as f64) / 2.0;
    let b = -((n - ell) as f64) / 2.0;
    for sigma in 0..=((n - ell) / 2) {
        let c = poch(a, sigma) * poch(b, sigma) / ln_val(lfact(sigma)) * ln_val(n as f64 * 2f64.ln() + lfact(n - sigma));
        if c.is_zero() {
            continue;
        }
        let sign = if sigma % 2 == 0 { 1.0 } else { -1.0 };
        t.add(QuantumIndex::new(n - ell - sigma, ell, 0), sign * c.value());
    }
    Ok(t)
}

/// L_n^{(β)} as a sum of L_{n−m}^{(α)}.
pub fn laguerre_superscript_shift(n: i32, beta_sup: f64, alpha_sup: f64) -> Result<CoeffTensor> {
    if n < 0 {
        return Err(Error::InvalidIndex(format!("Laguerre degree must be ≥ 0, got {n}")));
    }
    let mut t = CoeffTensor::new(Target::Laguerre { alpha: alpha_sup });
    for m in 0..=n {
        let c = poch(beta_sup - alpha_sup, m) / ln_val(lfact(m));
        if !c.is_zero() {
            t.add(QuantumIndex::new(n - m, 0, 0), c.value());
        }
    }
    Ok(t)
}

/// k̂_{n+1/2}(z) as a sum of e^{−z} L_m^{(α)}(2z).
pub fn rbf_to_laguerre(n: i32, alpha: f64) -> Result<CoeffTensor> {
    if n < 0 {
        return Err(Error::InvalidIndex(format!("order index must be ≥ 0, got {n}")));
    }
    let pref = ln_val(lfact(n) - n as f64 * 2f64.ln()).value();
    let mut t = CoeffTensor::new(Target::ExpLaguerre { alpha });
    for m in 0..=n {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        t.add(QuantumIndex::new(m, 0, 0), sign * pref * binomial((2 * n) as f64 + alpha + 1.0, (n - m) as u32));
    }
    Ok(t)
}

/// e^{−z} L_n^{(α)}(2z) as a sum of k̂_{ν+1/2}(z).
pub fn laguerre_inverse_expand(n: i32, alpha: f64) -> Result<CoeffTensor> {
    if n < 0 {
        return Err(Error::InvalidIndex(format!("Laguerre degree must be ≥ 0, got {n}")));
    }
    if alpha <= -1.0 {
        return Err(Error::Domain(format!("superscript must exceed −1, got {alpha}")));
    }
    let mut t = CoeffTensor::new(Target::ReducedBessel);
    let lead = (2 * n) as f64 + alpha + 1.0;
    for nu in 0..=n {
        let c = ln_val(ln_gamma(n as f64 + alpha + nu as f64 + 1.0) - lfact(nu) - lfact(n - nu) - ln_gamma(alpha + (2 * nu) as f64 + 2.0)
            + nu as f64 * 2f64.ln());
        let sign = if nu % 2 == 0 { 1.0 } else { -1.0 };
        t.add(QuantumIndex::new(nu, 0, 0), sign * lead * c.value());
    }
    Ok(t)
}

/// Λ_{n,ℓ} as a sum of ₖΨ_{n−ν,ℓ}.
///
/// The coefficient (2β)^{−k/2} [(n−ℓ−ν)_ν Γ(n−ν+ℓ+k+2)/Γ(n+ℓ+2)]^{1/2} (−k)_ν/ν!
/// inverts [`guseinov_to_lambda`] exactly.
pub fn lambda_to_guseinov(k: i32, n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    basis_index_ok(n, ell)?;
    guseinov_k_ok(k)?;
    let top = if k >= 0 { (n - ell - 1).min(k) } else { n - ell - 1 };
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::guseinov(k, beta)));
    for nu in 0..=top {
        let ratio = poch((n - ell - nu) as f64, nu)
            * ln_val(ln_gamma((n - nu + ell + k + 2) as f64) - ln_gamma((n + ell + 2) as f64));
        let c = ln_val(-0.5 * k as f64 * (2.0 * beta).ln()) * ratio.sqrt() * poch(-k as f64, nu) / ln_val(lfact(nu));
        if !c.is_zero() {
            t.add(QuantumIndex::new(n - nu, ell, 0), c.value());
        }
    }
    Ok(t)
}

/// ₖΨ_{n,ℓ} as a sum of Λ_{n−ν,ℓ}.
pub fn guseinov_to_lambda(k: i32, n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    basis_index_ok(n, ell)?;
    guseinov_k_ok(k)?;
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::lambda(beta)));
    for nu in 0..=(n - ell - 1) {
        let ratio = poch((n - ell - nu) as f64, nu) / poch_signed((n + ell - nu + 2) as f64, k + nu);
        let c = ln_val(0.5 * k as f64 * (2.0 * beta).ln()) * ratio.sqrt() * poch(k as f64, nu) / ln_val(lfact(nu));
        if !c.is_zero() {
            t.add(QuantumIndex::new(n - nu, ell, 0), c.value());
        }
    }
    Ok(t)
}

/// ₖΨ_{n,ℓ} as a sum of B_{ν+1,ℓ}.
pub fn guseinov_to_bfun(k: i32, n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    basis_index_ok(n, ell)?;
    guseinov_k_ok(k)?;
    let (kf, lf) = (k as f64, ell as f64);
    let a = lf + 2.0 + 0.5 * kf;
    let b = lf + 0.5 * (kf + 5.0);
    let pref = ln_val(
        0.5 * ((kf + 3.0) * beta.ln() + ln_gamma((n + ell + k + 2) as f64) - (kf + 1.0) * 2f64.ln() - lfact(n - ell - 1))
            + ln_gamma(0.5)
            + lfact(ell + 1)
            - ln_gamma(a)
            - ln_gamma(b),
    ) * (2 * n + k + 1) as f64;
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::bfun(beta)));
    for nu in 0..=(n - ell - 1) {
        let c = pref * poch((-n + ell + 1) as f64, nu) * poch((n + ell + k + 2) as f64, nu) * poch(lf + 2.0, nu)
            / (ln_val(lfact(nu)) * poch(a, nu) * poch(b, nu));
        t.add(QuantumIndex::new(nu + 1, ell, 0), c.value());
    }
    Ok(t)
}

/// B_{n,ℓ} as a sum of ₖΨ_{ν+ℓ+1,ℓ}.
pub fn bfun_to_guseinov(k: i32, n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    if n < 1 || ell < 0 {
        return Err(Error::InvalidIndex(format!("need n ≥ 1, ℓ ≥ 0, got n = {n}, ℓ = {ell}")));
    }
    guseinov_k_ok(k)?;
    let a = (n + 2 * ell + k + 3) as f64;
    let pref = ln_val(-((2 * n + 2 * ell - 1) as f64) * 2f64.ln() - lfact(n + ell)) * poch(a, n - 1);
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::guseinov(k, beta)));
    for nu in 0..n {
        let root = ln_val(0.5 * (lfact(nu + 2 * ell + k + 2) - (k + 3) as f64 * (2.0 * beta).ln() - lfact(nu)));
        let c = pref * poch((1 - n) as f64, nu) / poch(a, nu) * root;
        t.add(QuantumIndex::new(nu + ell + 1, ell, 0), c.value());
    }
    Ok(t)
}

/// ₖΨ_{n,ℓ}(γ) as a sum of χ_{ν+ℓ+1,ℓ}(γ).
pub fn guseinov_to_stf(k: i32, n: i32, ell: i32, gamma: f64) -> Result<CoeffTensor> {
    basis_index_ok(n, ell)?;
    guseinov_k_ok(k)?;
    let pref = ln_val(
        ell as f64 * 2f64.ln() + 0.5 * ((k + 3) as f64 * (2.0 * gamma).ln() + ln_gamma((n + ell + k + 2) as f64) - lfact(n - ell - 1)),
    );
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::stf(gamma)));
    for nu in 0..=(n - ell - 1) {
        let c = pref * poch((-n + ell + 1) as f64, nu)
            * ln_val(nu as f64 * 2f64.ln() - ln_gamma((2 * ell + k + nu + 3) as f64) - lfact(nu));
        t.add(QuantumIndex::new(nu + ell + 1, ell, 0), c.value());
    }
    Ok(t)
}

/// r^s B_{n,ℓ} as a sum of B_{n+s−σ,ℓ}, s ≥ −1.
///
/// (2/β)^s Σ_σ (−1)^σ (−s/2)_σ (−n−[s−1]/2)_σ (n+ℓ+1)_{s−σ} / σ!.
pub fn power_times_bfun(s: i32, n: i32, ell: i32, beta: f64) -> Result<CoeffTensor> {
    if s < -1 || n < 1 || ell < 0 {
        return Err(Error::InvalidIndex(format!("need s ≥ −1, n ≥ 1, ℓ ≥ 0, got s = {s}, n = {n}, ℓ = {ell}")));
    }
    let top = if s % 2 == 0 { s / 2 } else { n + (s - 1) / 2 };
    let scale = (2.0 / beta).powi(s);
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::bfun(beta)));
    for sigma in 0..=top {
        let c = poch(-(s as f64) / 2.0, sigma) * poch(-(n as f64) - (s - 1) as f64 / 2.0, sigma)
            * poch_signed((n + ell + 1) as f64, s - sigma)
            / ln_val(lfact(sigma));
        if c.is_zero() {
            continue;
        }
        let sign = if sigma % 2 == 0 { 1.0 } else { -1.0 };
        t.add(QuantumIndex::new(n + s - sigma, ell, 0), sign * scale * c.value());
    }
    Ok(t)
}

/// Coefficients ∫ R_n(r) r^k f(r) r² dr of a radial function against an
/// orthonormal family, for n = ℓ+1..=n_max. Quadrature oracle for the closed forms.
pub fn projection_coeffs<F: Fn(f64) -> f64>(f: F, spec: &BasisSpec, ell: i32, n_max: i32, weight_k: i32) -> Result<Vec<f64>> {
    let quad = QuadratureSpec::with_tolerances(1e-13, 1e-11);
    (ell + 1..=n_max)
        .map(|n| {
            let q = QuantumIndex::new(n, ell, 0);
            spec.check_index(q)?;
            radial_quadrature(|r| f(r) * eval_radial(spec, q, r).unwrap_or(f64::NAN), weight_k as f64, &quad)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{bfun_radial, stf_radial};
    use crate::special::reduced_bessel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const BETA: f64 = 0.85;

    fn radii(beta: f64) -> Vec<f64> {
        reconstruction_radii(beta)
    }

    fn reconstruction_error<F: Fn(f64) -> f64>(t: &CoeffTensor, direct: F, grid: &[f64]) -> f64 {
        t.reconstruction_error(direct, grid).unwrap()
    }

    fn radial(spec: BasisSpec, n: i32, ell: i32) -> impl Fn(f64) -> f64 {
        move |r| eval_radial(&spec, QuantumIndex::new(n, ell, 0), r).unwrap()
    }

    #[test]
    fn lambda_to_bfun_examples() {
        let t = lambda_to_bfun(1, 0, BETA).unwrap();
        assert_eq!(t.len(), 1);
        let want = (2.0 * BETA).powf(1.5) * 2f64.sqrt();
        assert_relative_eq!(t.get(QuantumIndex::new(1, 0, 0)), want, max_relative = 1e-14);
        assert!(reconstruction_error(&t, radial(BasisSpec::lambda(BETA), 1, 0), &radii(BETA)) <= 1e-12);
        let t = lambda_to_bfun(2, 0, BETA).unwrap();
        assert_eq!(t.len(), 2);
        assert!(reconstruction_error(&t, radial(BasisSpec::lambda(BETA), 2, 0), &radii(BETA)) <= 1e-12);
        for n in 1..8 {
            assert_eq!(lambda_to_bfun(n, n - 1, BETA).unwrap().len(), 1);
        }
    }

    #[test]
    fn bfun_to_lambda_examples() {
        for ell in 0..4 {
            assert_eq!(bfun_to_lambda(1, ell, BETA).unwrap().len(), 1);
        }
        let t = bfun_to_lambda(2, 0, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::bfun(BETA), 2, 0), &radii(BETA)) <= 1e-12);
    }

    #[test]
    fn stf_examples() {
        let t = stf_to_lambda(1, 0, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::stf(BETA), 1, 0), &radii(BETA)) <= 1e-12);
        let t = stf_to_lambda(3, 1, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::stf(BETA), 3, 1), &radii(BETA)) <= 1e-12);
        assert_eq!(stf_to_lambda(4, 3, BETA).unwrap().len(), 1);

        let t = stf_to_bfun(1, 0, BETA).unwrap();
        assert_eq!(t.len(), 1);
        assert_relative_eq!(t.get(QuantumIndex::new(1, 0, 0)), 2.0, max_relative = 1e-15);
        assert_eq!(stf_to_bfun(2, 1, BETA).unwrap().len(), 1);
        let t = stf_to_bfun(3, 0, BETA).unwrap();
        assert_eq!(t.len(), 2);
        assert!(reconstruction_error(&t, radial(BasisSpec::stf(BETA), 3, 0), &radii(BETA)) <= 1e-12);
    }

    #[test]
    fn superscript_shift_examples() {
        let t = laguerre_superscript_shift(5, 1.5, 1.5).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.at(5), 1.0);
        let t = laguerre_superscript_shift(1, 2.0, 0.0).unwrap();
        assert_relative_eq!(t.eval_radial(1.0).unwrap(), 2.0, max_relative = 1e-15);
        let t = laguerre_superscript_shift(2, 3.5, -0.5).unwrap();
        for x in [0.1, 0.7, 2.0, 5.5, 11.0] {
            assert_relative_eq!(t.eval_radial(x).unwrap(), laguerre(2, 3.5, x), max_relative = 1e-12);
        }
    }

    #[test]
    fn reduced_bessel_laguerre_examples() {
        let t = rbf_to_laguerre(0, 1.0).unwrap();
        assert_eq!(t.len(), 1);
        assert_relative_eq!(t.at(0), 1.0);
        let t = rbf_to_laguerre(1, 0.0).unwrap();
        for i in 0..10 {
            let z = 0.1 + 0.9 * i as f64;
            assert_relative_eq!(t.eval_radial(z).unwrap(), (1.0 + z) * (-z).exp(), max_relative = 1e-12);
        }
        let t = rbf_to_laguerre(3, 2.0).unwrap();
        for z in [0.05, 0.5, 2.0, 7.0, 15.0] {
            let want = reduced_bessel(HalfOrder::half_integer(3), z).unwrap();
            assert_relative_eq!(t.eval_radial(z).unwrap(), want, max_relative = 1e-11);
        }
        let t = laguerre_inverse_expand(0, 2.3).unwrap();
        assert_relative_eq!(t.at(0), 1.0, max_relative = 1e-14);
        let t = laguerre_inverse_expand(1, 2.0).unwrap();
        for z in [0.05, 0.5, 2.0, 7.0] {
            assert_relative_eq!(t.eval_radial(z).unwrap(), (-z).exp() * laguerre(1, 2.0, 2.0 * z), max_relative = 1e-12);
        }
    }

    #[test]
    fn reduced_bessel_round_trip() {
        for alpha in [0.0, 1.0, 2.5] {
            for n in 0..=4 {
                let t = rbf_to_laguerre(n, alpha).unwrap();
                let back = t.compose(|q| laguerre_inverse_expand(q.n, alpha)).unwrap();
                for j in 0..=n {
                    let want = if j == n { 1.0 } else { 0.0 };
                    assert!((back.at(j) - want).abs() <= 1e-10, "α = {alpha}, n = {n}, j = {j}");
                }
            }
        }
    }

    #[test]
    fn guseinov_lambda_examples() {
        let t = lambda_to_guseinov(0, 4, 1, BETA).unwrap();
        assert_eq!(t.len(), 1);
        assert_relative_eq!(t.get(QuantumIndex::new(4, 1, 0)), 1.0, max_relative = 1e-14);
        let t = lambda_to_guseinov(2, 3, 0, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::lambda(BETA), 3, 0), &radii(BETA)) <= 1e-10);
        assert_eq!(lambda_to_guseinov(1, 3, 2, BETA).unwrap().len(), 1);
        let t = guseinov_to_lambda(0, 3, 0, BETA).unwrap();
        assert_eq!(t.len(), 1);
        let t = guseinov_to_lambda(1, 2, 0, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::guseinov(1, BETA), 2, 0), &radii(BETA)) <= 1e-10);
    }

    /// The coefficient as printed: [(n−ℓ−ν)_ν/(n+ℓ+2)_{k−ν}]^{1/2}.
    fn lambda_to_guseinov_as_printed(k: i32, n: i32, ell: i32, beta: f64) -> CoeffTensor {
        let mut t = CoeffTensor::new(Target::Basis(BasisSpec::guseinov(k, beta)));
        for nu in 0..=(n - ell - 1).min(k) {
            let ratio = poch((n - ell - nu) as f64, nu) / poch((n + ell + 2) as f64, k - nu);
            let c = ln_val(-0.5 * k as f64 * (2.0 * beta).ln()) * ratio.sqrt() * poch(-k as f64, nu) / ln_val(lfact(nu));
            t.add(QuantumIndex::new(n - nu, ell, 0), c.value());
        }
        t
    }

    #[test]
    fn printed_lambda_to_guseinov_fails_and_projection_agrees_with_derived() {
        let printed = lambda_to_guseinov_as_printed(2, 3, 0, BETA);
        assert!(reconstruction_error(&printed, radial(BasisSpec::lambda(BETA), 3, 0), &radii(BETA)) > 0.1);
        // projection: c_n = ∫ Ψ_n r^k Λ r² dr
        for (k, n, ell) in [(1, 4, 1), (2, 3, 0), (2, 5, 2), (-1, 4, 0)] {
            let spec = BasisSpec::guseinov(k, BETA);
            let proj = projection_coeffs(radial(BasisSpec::lambda(BETA), n, ell), &spec, ell, n, k).unwrap();
            let t = lambda_to_guseinov(k, n, ell, BETA).unwrap();
            for (i, p) in proj.iter().enumerate() {
                let c = t.get(QuantumIndex::new(ell + 1 + i as i32, ell, 0));
                assert!((c - p).abs() <= 1e-10 * (1.0 + p.abs()), "k={k} n={n} ℓ={ell} i={i}: {c} vs {p}");
            }
        }
    }

    #[test]
    fn guseinov_bfun_examples() {
        let t = guseinov_to_bfun(0, 1, 0, BETA).unwrap();
        assert_eq!(t.len(), 1);
        assert!(reconstruction_error(&t, radial(BasisSpec::guseinov(0, BETA), 1, 0), &radii(BETA)) <= 1e-12);
        let t = guseinov_to_bfun(-1, 2, 0, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::guseinov(-1, BETA), 2, 0), &radii(BETA)) <= 1e-10);
        let t = guseinov_to_bfun(1, 3, 1, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::guseinov(1, BETA), 3, 1), &radii(BETA)) <= 1e-10);

        for ell in 0..3 {
            assert_eq!(bfun_to_guseinov(2, 1, ell, BETA).unwrap().len(), 1);
        }
        let a = bfun_to_guseinov(0, 2, 0, BETA).unwrap();
        let b = bfun_to_lambda(2, 0, BETA).unwrap();
        for (q, c) in b.iter() {
            assert_relative_eq!(a.get(q), c, max_relative = 1e-13);
        }
    }

    #[test]
    fn guseinov_to_stf_examples() {
        let t = guseinov_to_stf(0, 1, 0, BETA).unwrap();
        assert_eq!(t.len(), 1);
        let want = ((2.0 * BETA).powi(3) * 2.0).sqrt() / 2.0;
        assert_relative_eq!(t.get(QuantumIndex::new(1, 0, 0)), want, max_relative = 1e-14);
        assert!(reconstruction_error(&t, radial(BasisSpec::guseinov(0, BETA), 1, 0), &radii(BETA)) <= 1e-12);
        let t = guseinov_to_stf(-1, 2, 1, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::guseinov(-1, BETA), 2, 1), &radii(BETA)) <= 1e-11);
        let t = guseinov_to_stf(1, 4, 0, BETA).unwrap();
        assert!(reconstruction_error(&t, radial(BasisSpec::guseinov(1, BETA), 4, 0), &radii(BETA)) <= 1e-10);
    }

    #[test]
    fn stf_coefficients_grow_with_n() {
        for ell in 0..3 {
            let mut prev = 0.0;
            for n in ell + 1..=10 {
                let m = guseinov_to_stf(1, n, ell, 1.0).unwrap().max_abs();
                assert!(m >= prev, "ℓ = {ell}, n = {n}");
                prev = m;
            }
        }
    }

    #[test]
    fn power_times_bfun_examples() {
        let t = power_times_bfun(0, 3, 1, BETA).unwrap();
        assert_eq!(t.len(), 1);
        assert_relative_eq!(t.get(QuantumIndex::new(3, 1, 0)), 1.0);
        for (s, n, ell, tol) in [(2, 1, 0, 1e-12), (-1, 2, 1, 1e-11), (1, 3, 2, 1e-10), (3, 2, 0, 1e-10), (4, 1, 1, 1e-10)] {
            let t = power_times_bfun(s, n, ell, BETA).unwrap();
            let f = move |r: f64| r.powi(s) * bfun_radial(n, ell, BETA, r).unwrap();
            assert!(reconstruction_error(&t, f, &radii(BETA)) <= tol, "s={s} n={n} ℓ={ell}");
        }
    }

    fn pointwise_ok(t: &CoeffTensor, direct: impl Fn(f64) -> f64) -> bool {
        reconstruction_error(t, direct, &radii(BETA)) <= 1e-10
    }

    #[test]
    fn all_transforms_reconstruct_on_the_full_index_range() {
        let b = BETA;
        for n in 1..=6 {
            for ell in 0..n.min(4) {
                assert!(pointwise_ok(&lambda_to_bfun(n, ell, b).unwrap(), radial(BasisSpec::lambda(b), n, ell)), "Λ→B {n} {ell}");
                assert!(pointwise_ok(&stf_to_lambda(n, ell, b).unwrap(), move |r| stf_radial(n as f64, ell, b, r).unwrap()), "χ→Λ {n} {ell}");
                assert!(pointwise_ok(&stf_to_bfun(n, ell, b).unwrap(), move |r| stf_radial(n as f64, ell, b, r).unwrap()), "χ→B {n} {ell}");
                for k in -1..=2 {
                    let g = BasisSpec::guseinov(k, b);
                    assert!(pointwise_ok(&lambda_to_guseinov(k, n, ell, b).unwrap(), radial(BasisSpec::lambda(b), n, ell)), "Λ→Ψ {k} {n} {ell}");
                    assert!(pointwise_ok(&guseinov_to_lambda(k, n, ell, b).unwrap(), radial(g, n, ell)), "Ψ→Λ {k} {n} {ell}");
                    assert!(pointwise_ok(&guseinov_to_bfun(k, n, ell, b).unwrap(), radial(g, n, ell)), "Ψ→B {k} {n} {ell}");
                    assert!(pointwise_ok(&guseinov_to_stf(k, n, ell, b).unwrap(), radial(g, n, ell)), "Ψ→χ {k} {n} {ell}");
                    assert!(pointwise_ok(&bfun_to_guseinov(k, n, ell, b).unwrap(), radial(BasisSpec::bfun(b), n, ell)), "B→Ψ {k} {n} {ell}");
                }
                assert!(pointwise_ok(&bfun_to_lambda(n, ell, b).unwrap(), radial(BasisSpec::bfun(b), n, ell)), "B→Λ {n} {ell}");
                for s in -1..=2 {
                    let f = move |r: f64| r.powi(s) * bfun_radial(n, ell, b, r).unwrap();
                    assert!(pointwise_ok(&power_times_bfun(s, n, ell, b).unwrap(), f), "r^s B {s} {n} {ell}");
                }
            }
        }
    }

    fn identity_error(t: &CoeffTensor, q: QuantumIndex) -> f64 {
        let mut worst: f64 = (t.get(q) - 1.0).abs();
        for (p, c) in t.iter() {
            if p != q {
                worst = worst.max(c.abs());
            }
        }
        worst
    }

    #[test]
    fn round_trips_are_identities() {
        let b = BETA;
        for n in 1..=6 {
            for ell in 0..n.min(4) {
                let q = QuantumIndex::new(n, ell, 0);
                let t = lambda_to_bfun(n, ell, b).unwrap().compose(|p| bfun_to_lambda(p.n, p.ell, b)).unwrap();
                assert!(identity_error(&t, q) <= 1e-10, "Λ→B→Λ {n} {ell}");
                for k in -1..=2 {
                    let t = lambda_to_guseinov(k, n, ell, b).unwrap().compose(|p| guseinov_to_lambda(k, p.n, p.ell, b)).unwrap();
                    assert!(identity_error(&t, q) <= 1e-10, "Λ→Ψ→Λ {k} {n} {ell}");
                    let t = guseinov_to_lambda(k, n, ell, b).unwrap().compose(|p| lambda_to_guseinov(k, p.n, p.ell, b)).unwrap();
                    assert!(identity_error(&t, q) <= 1e-10, "Ψ→Λ→Ψ {k} {n} {ell}");
                    let t = bfun_to_guseinov(k, n, ell, b).unwrap().compose(|p| guseinov_to_bfun(k, p.n, p.ell, b)).unwrap();
                    assert!(identity_error(&t, q) <= 1e-10, "B→Ψ→B {k} {n} {ell}");
                }
            }
        }
    }

    #[test]
    fn with_m_relabels() {
        let t = lambda_to_bfun(3, 1, 1.0).unwrap().with_m(-1);
        assert!(t.iter().all(|(q, _)| q.m == -1));
    }

    proptest! {
        #[test]
        fn superscript_shift_is_a_polynomial_identity(n in 0i32..12, b in -0.9f64..6.0, a in -0.9f64..6.0, x in 0.0f64..30.0) {
            let t = laguerre_superscript_shift(n, b, a).unwrap();
            let direct = laguerre(n as u32, b, x);
            let scale: f64 = t.iter().map(|(q, c)| (c * laguerre(q.n as u32, a, x)).abs()).sum::<f64>().max(1.0);
            prop_assert!((t.eval_radial(x).unwrap() - direct).abs() <= 1e-12 * scale);
        }

        #[test]
        fn guseinov_round_trip_any_beta(k in -1i32..4, n in 1i32..8, dl in 0i32..8, beta in 0.2f64..4.0) {
            let ell = dl % n;
            let t = guseinov_to_lambda(k, n, ell, beta).unwrap().compose(|p| lambda_to_guseinov(k, p.n, p.ell, beta)).unwrap();
            prop_assert!(identity_error(&t, QuantumIndex::new(n, ell, 0)) <= 1e-10);
        }
    }
}
