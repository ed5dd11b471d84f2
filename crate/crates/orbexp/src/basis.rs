//! Exponentially decaying basis families and their weighted Gram matrices.
//!
//! Every function is a radial factor times a surface harmonic Y_ℓ^m. The
//! radial factor absorbs the (c·r)^ℓ of the solid harmonic in each definition,
//! so `eval = eval_radial · Y_ℓ^m`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{radial_quadrature, QuadratureSpec};
use crate::special::{
    angles, double_factorial_odd, factorial, laguerre, ln_factorial, ln_gamma, norm3, reduced_bessel, spherical_harmonic,
    AngularIndex, HalfOrder,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QuantumIndex {
    pub n: i32,
    pub ell: i32,
    pub m: i32,
}

impl QuantumIndex {
    pub const fn new(n: i32, ell: i32, m: i32) -> Self {
        QuantumIndex { n, ell, m }
    }

    pub fn angular(self) -> AngularIndex {
        AngularIndex { ell: self.ell, m: self.m }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BasisFamily {
    /// Unnormalized Slater-type function. `principal` overrides the integer n
    /// with a real principal quantum number.
    Stf { principal: Option<f64> },
    Lambda,
    Sturmian,
    /// Guseinov's functions, orthonormal under the weight r^k.
    Guseinov { k: i32 },
    BFun,
    Oscillator,
}

impl BasisFamily {
    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::Stf { .. } => "stf",
            BasisFamily::Lambda => "lambda",
            BasisFamily::Sturmian => "sturmian",
            BasisFamily::Guseinov { .. } => "guseinov",
            BasisFamily::BFun => "bfun",
            BasisFamily::Oscillator => "oscillator",
        }
    }

    fn is_laguerre_type(self) -> bool {
        matches!(self, BasisFamily::Lambda | BasisFamily::Sturmian | BasisFamily::Guseinov { .. } | BasisFamily::Oscillator)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub beta: f64,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("scaling parameter must be positive, got {beta}")));
        }
        if let BasisFamily::Guseinov { k } = family {
            if k < -1 {
                return Err(Error::Domain(format!("Guseinov weight order must be ≥ −1, got {k}")));
            }
        }
        Ok(BasisSpec { family, beta })
    }

    pub fn lambda(beta: f64) -> Self {
        BasisSpec { family: BasisFamily::Lambda, beta }
    }

    pub fn sturmian(beta: f64) -> Self {
        BasisSpec { family: BasisFamily::Sturmian, beta }
    }

    pub fn guseinov(k: i32, beta: f64) -> Self {
        BasisSpec { family: BasisFamily::Guseinov { k }, beta }
    }

    pub fn bfun(beta: f64) -> Self {
        BasisSpec { family: BasisFamily::BFun, beta }
    }

    pub fn stf(beta: f64) -> Self {
        BasisSpec { family: BasisFamily::Stf { principal: None }, beta }
    }

    pub fn oscillator(beta: f64) -> Self {
        BasisSpec { family: BasisFamily::Oscillator, beta }
    }

    pub fn check_index(&self, q: QuantumIndex) -> Result<()> {
        if q.ell < 0 || q.m.abs() > q.ell {
            return Err(Error::InvalidIndex(format!("(ℓ, m) = ({}, {})", q.ell, q.m)));
        }
        if self.family.is_laguerre_type() && q.n < q.ell + 1 {
            return Err(Error::InvalidIndex(format!("n = {} < ℓ + 1 = {}", q.n, q.ell + 1)));
        }
        if self.family == BasisFamily::BFun && q.n + q.ell < 0 {
            return Err(Error::InvalidIndex(format!("B function needs n + ℓ ≥ 0, got n = {}, ℓ = {}", q.n, q.ell)));
        }
        Ok(())
    }
}

/// Weight of a radial inner product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightSpec {
    /// ∫ f* r^k g d³r.
    Power(i32),
    /// ∫ f* (η² − ∇²)/(2η²) g d³r.
    Sobolev { eta: f64 },
}

impl WeightSpec {
    /// The weight under which a family is orthonormal.
    pub fn natural(family: BasisFamily) -> WeightSpec {
        match family {
            BasisFamily::Guseinov { k } => WeightSpec::Power(k),
            BasisFamily::Sturmian => WeightSpec::Power(-1),
            _ => WeightSpec::Power(0),
        }
    }
}

/// [(2β)^{k+3} (n−ℓ−1)! / Γ(n+ℓ+k+2)]^{1/2}.
pub fn guseinov_norm(k: f64, n: i32, ell: i32, beta: f64) -> f64 {
    (0.5 * ((k + 3.0) * (2.0 * beta).ln() + ln_factorial((n - ell - 1) as u32) - ln_gamma(n as f64 + ell as f64 + k + 2.0))).exp()
}

fn laguerre_radial(norm: f64, n: i32, ell: i32, alpha: f64, beta: f64, r: f64) -> f64 {
    let x = 2.0 * beta * r;
    norm * (-beta * r).exp() * laguerre((n - ell - 1) as u32, alpha, x) * x.powi(ell)
}

/// Radial factor f_{nℓ}(r) with the full function f_{nℓ}(r) Y_ℓ^m(θ, φ).
pub fn eval_radial(spec: &BasisSpec, q: QuantumIndex, r: f64) -> Result<f64> {
    spec.check_index(q)?;
    if r < 0.0 {
        return Err(Error::Domain(format!("negative radius {r}")));
    }
    let (n, ell, beta) = (q.n, q.ell, spec.beta);
    let v = match spec.family {
        BasisFamily::Lambda => {
            let norm = (2.0 * beta).powf(1.5)
                * (0.5 * (ln_factorial((n - ell - 1) as u32) - ln_factorial((n + ell + 1) as u32))).exp();
            laguerre_radial(norm, n, ell, (2 * ell + 2) as f64, beta, r)
        }
        BasisFamily::Sturmian => {
            let norm = (2.0 * beta).powf(1.5)
                * (0.5 * (ln_factorial((n - ell - 1) as u32) - (2.0 * n as f64).ln() - ln_factorial((n + ell) as u32))).exp();
            laguerre_radial(norm, n, ell, (2 * ell + 1) as f64, beta, r)
        }
        BasisFamily::Guseinov { k } => {
            let norm = guseinov_norm(k as f64, n, ell, beta);
            laguerre_radial(norm, n, ell, (2 * ell + k + 2) as f64, beta, r)
        }
        BasisFamily::Oscillator => {
            let norm = beta.powf(1.5)
                * (0.5 * (2.0f64.ln() + ln_factorial((n - ell - 1) as u32) - ln_gamma(n as f64 + 0.5))).exp();
            let t = beta * r;
            norm * (-0.5 * t * t).exp() * laguerre((n - ell - 1) as u32, ell as f64 + 0.5, t * t) * t.powi(ell)
        }
        BasisFamily::BFun => bfun_radial(n, ell, beta, r)?,
        BasisFamily::Stf { principal } => stf_radial(principal.unwrap_or(n as f64), ell, beta, r)?,
    };
    Ok(v)
}

/// k̂_{n−1/2}(βr) (βr)^ℓ / (2^{n+ℓ} (n+ℓ)!).
pub fn bfun_radial(n: i32, ell: i32, beta: f64, r: f64) -> Result<f64> {
    if n + ell < 0 {
        return Err(Error::InvalidIndex(format!("B function needs n + ℓ ≥ 0, got n = {n}, ℓ = {ell}")));
    }
    let z = beta * r;
    let denom = 2f64.powi(n + ell) * factorial((n + ell) as u32);
    if z == 0.0 {
        if n < 1 {
            return Err(Error::Domain(format!("B function with n = {n} is singular at the origin")));
        }
        // k̂_{n−1/2}(0) = (2n−3)!!
        let k0 = double_factorial_odd(n - 1);
        return Ok(if ell == 0 { k0 / denom } else { 0.0 });
    }
    Ok(reduced_bessel(HalfOrder::new(2 * n - 1)?, z)? * z.powi(ell) / denom)
}

/// (βr)^{N−1} e^{−βr}: the radial factor of an STF with real principal number N.
pub fn stf_radial(n: f64, ell: i32, beta: f64, r: f64) -> Result<f64> {
    let z = beta * r;
    if z == 0.0 {
        if n - ell as f64 - 1.0 < 0.0 {
            return Err(Error::Domain(format!("STF with N − L − 1 = {} is singular at the origin", n - ell as f64 - 1.0)));
        }
        return Ok(if n == 1.0 { 1.0 } else { 0.0 });
    }
    Ok(z.powf(n - 1.0) * (-z).exp())
}

/// Full function value f_{nℓ}(r) Y_ℓ^m(θ, φ).
pub fn eval(spec: &BasisSpec, q: QuantumIndex, r_vec: [f64; 3]) -> Result<Complex64> {
    let r = norm3(r_vec);
    let f = eval_radial(spec, q, r)?;
    let (theta, phi) = angles(r_vec);
    Ok(spherical_harmonic(q.angular(), theta, phi) * f)
}

/// Quadrature for Gram entries.
///
/// Adaptive rather than Gauss–Laguerre: the 200-point rule carries about
/// 1e−13 of rounding from its log-weights, too close to the Gram tolerance.
pub fn gram_quadrature() -> QuadratureSpec {
    QuadratureSpec::with_tolerances(1e-13, 1e-12)
}

/// Weighted radial Gram matrix over n = ℓ+1..=n_max at fixed (ℓ, m).
pub fn gram_matrix(spec: &BasisSpec, weight: WeightSpec, n_max: i32, ell: i32, m: i32) -> Result<DMatrix<f64>> {
    spec.check_index(QuantumIndex::new(n_max, ell, m))?;
    let k = match weight {
        WeightSpec::Power(k) => k,
        WeightSpec::Sobolev { eta } => {
            if spec.family != BasisFamily::Sturmian {
                return Err(Error::Domain(format!("Sobolev Gram is reduced analytically only for Sturmians, not {}", spec.family.name())));
            }
            return sobolev_gram_sturmian_eta(spec.beta, eta, n_max, ell);
        }
    };
    let ns: Vec<i32> = (ell + 1..=n_max).collect();
    let dim = ns.len();
    let quad = gram_quadrature();
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
    let values: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (qi, qj) = (QuantumIndex::new(ns[i], ell, m), QuantumIndex::new(ns[j], ell, m));
            radial_quadrature(
                |r| eval_radial(spec, qi, r).unwrap_or(f64::NAN) * eval_radial(spec, qj, r).unwrap_or(f64::NAN),
                k as f64,
                &quad,
            )
        })
        .collect();
    let mut g = DMatrix::zeros(dim, dim);
    for (&(i, j), v) in pairs.iter().zip(values) {
        let v = v?;
        g[(i, j)] = v;
        g[(j, i)] = v;
    }
    Ok(g)
}

/// Sobolev Gram matrix of Sturmians with η = β.
///
/// The differential equation (β² − ∇²)Ψ_n = (2βn/r)Ψ_n turns every entry
/// into (n′/β) times the 1/r Gram entry, which is the identity.
pub fn sobolev_gram_sturmian(beta: f64, n_max: i32, ell: i32) -> Result<DMatrix<f64>> {
    sobolev_gram_sturmian_eta(beta, beta, n_max, ell)
}

fn sobolev_gram_sturmian_eta(beta: f64, eta: f64, n_max: i32, ell: i32) -> Result<DMatrix<f64>> {
    if !(eta.abs() > 0.0) {
        return Err(Error::Domain("Sobolev parameter η must be nonzero".into()));
    }
    let spec = BasisSpec::new(BasisFamily::Sturmian, beta)?;
    let inv_r = gram_matrix(&spec, WeightSpec::Power(-1), n_max, ell, 0)?;
    let overlap = if eta == beta { None } else { Some(gram_matrix(&spec, WeightSpec::Power(0), n_max, ell, 0)?) };
    let dim = inv_r.nrows();
    let mut g = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let nj = (ell + 1 + j as i32) as f64;
            let mut v = 2.0 * beta * nj * inv_r[(i, j)];
            if let Some(s) = &overlap {
                v += (eta * eta - beta * beta) * s[(i, j)];
            }
            g[(i, j)] = v / (2.0 * eta * eta);
        }
    }
    Ok(g)
}

/// Radial part of the Fourier transform of B_{n,ℓ}^m(α, r):
/// (2/π)^{1/2} α^{2n+ℓ−1} p^ℓ / (α² + p²)^{n+ℓ+1}.
pub fn bfun_fourier_radial(n: i32, ell: i32, alpha: f64, p: f64) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * alpha.powi(2 * n + ell - 1) * p.powi(ell) / (alpha * alpha + p * p).powi(n + ell + 1)
}
