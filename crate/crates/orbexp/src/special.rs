//! Scalar special functions and angular algebra.
//!
//! Spherical harmonics use the Condon–Shortley phase throughout. Factorial and
//! Pochhammer ratios go through [`LogReal`] so that large arguments neither
//! overflow nor lose their sign.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Div, Mul};
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real number kept as a sign and the logarithm of its magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogReal {
    pub sign: f64,
    pub ln_abs: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { sign: 0.0, ln_abs: f64::NEG_INFINITY };
    pub const ONE: LogReal = LogReal { sign: 1.0, ln_abs: 0.0 };

    pub fn new(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogReal { sign: x.signum(), ln_abs: x.abs().ln() }
        }
    }

    pub fn value(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0.0
    }

    /// Square root of a nonnegative value.
    pub fn sqrt(self) -> Self {
        debug_assert!(self.sign >= 0.0, "sqrt of negative LogReal");
        if self.is_zero() {
            self
        } else {
            LogReal { sign: 1.0, ln_abs: 0.5 * self.ln_abs }
        }
    }

    pub fn powf(self, p: f64) -> Self {
        debug_assert!(self.sign >= 0.0);
        if self.is_zero() {
            self
        } else {
            LogReal { sign: 1.0, ln_abs: p * self.ln_abs }
        }
    }

    pub fn recip(self) -> Self {
        LogReal { sign: self.sign, ln_abs: -self.ln_abs }
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, o: LogReal) -> LogReal {
        if self.is_zero() || o.is_zero() {
            return LogReal::ZERO;
        }
        LogReal { sign: self.sign * o.sign, ln_abs: self.ln_abs + o.ln_abs }
    }
}

impl Mul<f64> for LogReal {
    type Output = LogReal;
    fn mul(self, o: f64) -> LogReal {
        self * LogReal::new(o)
    }
}

impl Div for LogReal {
    type Output = LogReal;
    fn div(self, o: LogReal) -> LogReal {
        assert!(!o.is_zero(), "LogReal division by zero");
        if self.is_zero() {
            return LogReal::ZERO;
        }
        LogReal { sign: self.sign * o.sign, ln_abs: self.ln_abs - o.ln_abs }
    }
}

impl Div<f64> for LogReal {
    type Output = LogReal;
    fn div(self, o: f64) -> LogReal {
        self / LogReal::new(o)
    }
}

const FACT_MAX: usize = 170;

fn factorial_table() -> &'static [f64; FACT_MAX + 1] {
    static T: OnceLock<[f64; FACT_MAX + 1]> = OnceLock::new();
    T.get_or_init(|| {
        let mut t = [1.0; FACT_MAX + 1];
        for i in 1..=FACT_MAX {
            t[i] = t[i - 1] * i as f64;
        }
        t
    })
}

/// n! in double precision (infinite past 170).
pub fn factorial(n: u32) -> f64 {
    if (n as usize) <= FACT_MAX {
        factorial_table()[n as usize]
    } else {
        f64::INFINITY
    }
}

pub fn ln_factorial(n: u32) -> f64 {
    if (n as usize) <= FACT_MAX {
        factorial_table()[n as usize].ln()
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// (2n−1)!! with the convention (−1)!! = 1.
pub fn double_factorial_odd(n: i32) -> f64 {
    let mut acc = 1.0;
    let mut k = 2 * n - 1;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

fn as_small_nonneg_int(x: f64) -> Option<u32> {
    if x >= 0.0 && x.fract() == 0.0 && x <= 1.0e6 {
        Some(x as u32)
    } else {
        None
    }
}

/// ln Γ(x) for x > 0, exact table lookup on integers.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if let Some(k) = as_small_nonneg_int(x) {
        if k >= 1 && (k as usize) <= FACT_MAX + 1 {
            return ln_factorial(k - 1);
        }
    }
    statrs::function::gamma::ln_gamma(x)
}

/// Γ(x) in sign/log form for any real x that is not a pole.
pub fn gamma_log(x: f64) -> Result<LogReal> {
    if x > 0.0 {
        return Ok(LogReal { sign: 1.0, ln_abs: ln_gamma(x) });
    }
    if x.fract() == 0.0 {
        return Err(Error::Domain(format!("Gamma pole at {x}")));
    }
    // reflection: Γ(x) = π / (sin(πx) Γ(1−x))
    let s = (PI * x).sin();
    Ok(LogReal { sign: s.signum(), ln_abs: PI.ln() - s.abs().ln() - ln_gamma(1.0 - x) })
}

pub fn gamma(x: f64) -> Result<f64> {
    gamma_log(x).map(LogReal::value)
}

/// Pochhammer symbol (a)_n in sign/log form.
pub fn pochhammer_log(a: f64, n: u32) -> LogReal {
    if n == 0 {
        return LogReal::ONE;
    }
    if a <= 0.0 && a.fract() == 0.0 && (n as f64) > -a {
        return LogReal::ZERO;
    }
    if a > 0.0 && n > 24 {
        return LogReal { sign: 1.0, ln_abs: ln_gamma(a + n as f64) - ln_gamma(a) };
    }
    let mut sign = 1.0;
    let mut ln_abs = 0.0;
    for i in 0..n {
        let t = a + i as f64;
        if t < 0.0 {
            sign = -sign;
        }
        ln_abs += t.abs().ln();
    }
    LogReal { sign, ln_abs }
}

pub fn pochhammer(a: f64, n: u32) -> f64 {
    if n <= 24 {
        let mut p = 1.0;
        for i in 0..n {
            p *= a + i as f64;
        }
        return p;
    }
    pochhammer_log(a, n).value()
}

/// Generalized binomial coefficient binom(a, k).
pub fn binomial(a: f64, k: u32) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c *= (a - j as f64) / (j + 1) as f64;
    }
    c
}

/// L_n^{(α)}(x) by upward three-term recurrence.
///
/// The recurrence is a polynomial identity in α, so any real superscript works.
pub fn laguerre(n: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// All of L_0^{(α)}(x) .. L_{n_max}^{(α)}(x) from a single recurrence pass.
pub fn laguerre_all(n_max: u32, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    out.push(1.0 + alpha - x);
    for k in 1..n_max as usize {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Explicit alternating sum Σ_ν (−1)^ν binom(n+α, n−ν) x^ν / ν!.
///
/// Kept as an independent reference for the recurrence; it loses accuracy
/// for large n and x through cancellation.
pub fn laguerre_explicit(n: u32, alpha: f64, x: f64) -> f64 {
    (0..=n)
        .map(|nu| {
            let sign = if nu % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n as f64 + alpha, n - nu) * x.powi(nu as i32) / factorial(nu)
        })
        .sum()
}

/// Order of a reduced Bessel function, stored as 2ν.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HalfOrder {
    twice_nu: i32,
}

impl HalfOrder {
    pub fn new(twice_nu: i32) -> Result<Self> {
        if twice_nu.rem_euclid(2) != 1 {
            return Err(Error::Domain(format!("reduced Bessel order 2ν = {twice_nu} is not half-integral")));
        }
        Ok(HalfOrder { twice_nu })
    }

    /// The order n + 1/2.
    pub fn half_integer(n: i32) -> Self {
        HalfOrder { twice_nu: 2 * n + 1 }
    }

    pub fn twice_nu(self) -> i32 {
        self.twice_nu
    }

    pub fn nu(self) -> f64 {
        self.twice_nu as f64 / 2.0
    }
}

/// Reduced Bessel function ĥk_ν(z) = (2/π)^{1/2} z^ν K_ν(z) of half-integral order.
pub fn reduced_bessel(order: HalfOrder, z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Err(Error::Domain(format!("reduced Bessel function needs z > 0, got {z}")));
    }
    let tn = order.twice_nu;
    if tn > 0 {
        Ok(reduced_bessel_pos((tn - 1) / 2, z))
    } else {
        // ĥk_{−ν}(z) = z^{−2ν} ĥk_ν(z)
        let n = (-tn - 1) / 2;
        Ok(reduced_bessel_pos(n, z) * z.powi(tn))
    }
}

/// ĥk_{n+1/2}(z) = e^{−z} Σ_j (n+j)! / (j!(n−j)!) 2^{−j} z^{n−j}.
fn reduced_bessel_pos(n: i32, z: f64) -> f64 {
    let mut c = 1.0;
    let mut poly = z.powi(n);
    for j in 1..=n {
        c *= ((n + j) * (n - j + 1)) as f64 / (2 * j) as f64;
        poly += c * z.powi(n - j);
    }
    (-z).exp() * poly
}

/// Orbital and magnetic quantum numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AngularIndex {
    pub ell: i32,
    pub m: i32,
}

impl AngularIndex {
    pub fn new(ell: i32, m: i32) -> Result<Self> {
        if ell < 0 || m.abs() > ell {
            return Err(Error::InvalidIndex(format!("(ℓ, m) = ({ell}, {m})")));
        }
        Ok(AngularIndex { ell, m })
    }
}

/// Normalized associated Legendre values P̄_ℓ^m(x) for ℓ = m..=ell_max, without
/// the Condon–Shortley phase.
fn normalized_legendre(ell_max: i32, m: i32, x: f64) -> Vec<f64> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    let mut out = vec![pmm];
    if ell_max == m {
        return out;
    }
    let mut prev = pmm;
    let mut cur = x * (2.0 * m as f64 + 3.0).sqrt() * pmm;
    out.push(cur);
    for l in (m + 2)..=ell_max {
        let lf = l as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let a_prev = ((4.0 * (lf - 1.0).powi(2) - 1.0) / ((lf - 1.0).powi(2) - mf * mf)).sqrt();
        let next = a * (x * cur - prev / a_prev);
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Y_ℓ^m(θ, φ) with the Condon–Shortley phase.
pub fn spherical_harmonic(a: AngularIndex, theta: f64, phi: f64) -> Complex64 {
    let am = a.m.abs();
    let p = *normalized_legendre(a.ell, am, theta.cos()).last().unwrap();
    let phase = if a.m > 0 && a.m % 2 != 0 { -1.0 } else { 1.0 };
    Complex64::from_polar(phase * p, a.m as f64 * phi)
}

/// All Y_ℓ^m for one m and ℓ = |m|..=ell_max.
pub fn spherical_harmonics_column(ell_max: i32, m: i32, theta: f64, phi: f64) -> Vec<Complex64> {
    let am = m.abs();
    let phase = if m > 0 && m % 2 != 0 { -1.0 } else { 1.0 };
    let e = Complex64::from_polar(phase, m as f64 * phi);
    normalized_legendre(ell_max, am, theta.cos()).into_iter().map(|p| e * p).collect()
}

/// Spherical angles (θ, φ) of a vector; θ = 0 at the origin.
pub fn angles(r: [f64; 3]) -> (f64, f64) {
    let rho = (r[0] * r[0] + r[1] * r[1]).sqrt();
    let theta = rho.atan2(r[2]);
    let phi = r[1].atan2(r[0]);
    (theta, phi)
}

pub fn norm3(r: [f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// 𝒴_ℓ^m(r) = r^ℓ Y_ℓ^m from its homogeneous harmonic polynomial.
pub fn regular_solid_harmonic(a: AngularIndex, r: [f64; 3]) -> Complex64 {
    if a.m < 0 {
        let sign = if a.m % 2 == 0 { 1.0 } else { -1.0 };
        return regular_solid_harmonic(AngularIndex { ell: a.ell, m: -a.m }, r).conj() * sign;
    }
    let (l, m) = (a.ell, a.m);
    let [x, y, z] = r;
    let mxy = Complex64::new(-x, -y);
    let pxy = Complex64::new(x, -y);
    let pref = ((2 * l + 1) as f64 / (4.0 * PI) * factorial((l + m) as u32) * factorial((l - m) as u32)).sqrt();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut k = 0;
    while l - m - 2 * k >= 0 {
        let den = 2f64.powi(m + 2 * k)
            * factorial((m + k) as u32)
            * factorial(k as u32)
            * factorial((l - m - 2 * k) as u32);
        sum += mxy.powi(m + k) * pxy.powi(k) * z.powi(l - m - 2 * k) / den;
        k += 1;
    }
    sum * pref
}

/// 𝒵_ℓ^m(r) = r^{−ℓ−1} Y_ℓ^m.
pub fn irregular_solid_harmonic(a: AngularIndex, r: [f64; 3]) -> Result<Complex64> {
    let rn = norm3(r);
    if rn == 0.0 {
        return Err(Error::Domain("irregular solid harmonic is singular at the origin".into()));
    }
    let (t, p) = angles(r);
    Ok(spherical_harmonic(a, t, p) * rn.powi(-a.ell - 1))
}

/// Clebsch–Gordan coefficient ⟨j1 m1 j2 m2 | j m⟩ for integer angular momenta.
pub fn clebsch_gordan(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if j < (j1 - j2).abs() || j > j1 + j2 {
        return 0.0;
    }
    let f = |n: i32| factorial(n as u32);
    let pre = ((2 * j + 1) as f64 * f(j + j1 - j2) * f(j - j1 + j2) * f(j1 + j2 - j) / f(j1 + j2 + j + 1)).sqrt()
        * (f(j + m) * f(j - m) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2)).sqrt();
    let kmin = 0.max(j2 - j - m1).max(j1 + m2 - j);
    let kmax = (j1 + j2 - j).min(j1 - m1).min(j2 + m2);
    let mut s = 0.0;
    for k in kmin..=kmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign
            / (f(k) * f(j1 + j2 - j - k) * f(j1 - m1 - k) * f(j2 + m2 - k) * f(j - j2 + m1 + k) * f(j - j1 - m2 + k));
    }
    pre * s
}

/// Key ⟨ℓ3 m3 | ℓ2 m2 | ℓ1 m1⟩ = ∫ Y_{ℓ3}^{m3*} Y_{ℓ2}^{m2} Y_{ℓ1}^{m1} dΩ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GauntKey {
    pub ell3: i32,
    pub m3: i32,
    pub ell2: i32,
    pub m2: i32,
    pub ell1: i32,
    pub m1: i32,
}

impl GauntKey {
    pub fn new(ell3: i32, m3: i32, ell2: i32, m2: i32, ell1: i32, m1: i32) -> Self {
        GauntKey { ell3, m3, ell2, m2, ell1, m1 }
    }

    /// Ordering that identifies keys related by (ℓ1,m1) ↔ (ℓ2,m2).
    fn canonical(self) -> Self {
        if (self.ell1, self.m1) > (self.ell2, self.m2) {
            GauntKey { ell1: self.ell2, m1: self.m2, ell2: self.ell1, m2: self.m1, ..self }
        } else {
            self
        }
    }
}

fn gaunt_uncached(k: GauntKey) -> f64 {
    let GauntKey { ell3, m3, ell2, m2, ell1, m1 } = k;
    if m3 != m1 + m2 || m1.abs() > ell1 || m2.abs() > ell2 || m3.abs() > ell3 {
        return 0.0;
    }
    if (ell1 + ell2 + ell3) % 2 != 0 || ell3 < (ell1 - ell2).abs() || ell3 > ell1 + ell2 {
        return 0.0;
    }
    let pre = ((2 * ell1 + 1) as f64 * (2 * ell2 + 1) as f64 / (4.0 * PI * (2 * ell3 + 1) as f64)).sqrt();
    pre * clebsch_gordan(ell1, 0, ell2, 0, ell3, 0) * clebsch_gordan(ell1, m1, ell2, m2, ell3, m3)
}

/// Memoized Gaunt coefficients, safe for concurrent use.
#[derive(Default)]
pub struct GauntTable {
    cache: RwLock<HashMap<GauntKey, f64>>,
}

impl GauntTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: GauntKey) -> f64 {
        let c = key.canonical();
        if let Some(v) = self.cache.read().unwrap().get(&c) {
            return *v;
        }
        let v = gaunt_uncached(c);
        self.cache.write().unwrap().insert(c, v);
        v
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn global_table() -> &'static GauntTable {
    static T: OnceLock<GauntTable> = OnceLock::new();
    T.get_or_init(GauntTable::new)
}

/// Gaunt coefficient through the process-wide table.
pub fn gaunt(key: GauntKey) -> f64 {
    global_table().get(key)
}

/// Range of ℓ in the Gaunt linearization of Y_{ℓ1}^{m1} Y_{ℓ2}^{m2}: (ℓ_min, ℓ_max, 2).
pub fn gaunt_limits(ell1: i32, m1: i32, ell2: i32, m2: i32) -> (i32, i32, i32) {
    let ell_max = ell1 + ell2;
    let lambda_min = (ell1 - ell2).abs().max((m1 + m2).abs());
    let ell_min = if (ell_max + lambda_min) % 2 == 0 { lambda_min } else { lambda_min + 1 };
    (ell_min, ell_max, 2)
}

/// Iterator over the ℓ values allowed by [`gaunt_limits`].
pub fn gaunt_ells(ell1: i32, m1: i32, ell2: i32, m2: i32) -> impl Iterator<Item = i32> {
    let (lo, hi, step) = gaunt_limits(ell1, m1, ell2, m2);
    (lo..=hi).step_by(step as usize)
}

/// The half sums Δℓ, Δℓ1, Δℓ2 and σ(ℓ) of a coupling triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeltaEll {
    pub delta: i32,
    pub delta1: i32,
    pub delta2: i32,
    pub sigma: i32,
}

pub fn delta_ell(ell1: i32, ell2: i32, ell: i32) -> Result<DeltaEll> {
    let twice = [ell1 + ell2 - ell, ell - ell1 + ell2, ell + ell1 - ell2, ell1 + ell2 + ell];
    if twice.iter().any(|&t| t < 0 || t % 2 != 0) {
        return Err(Error::Coupling(format!("(ℓ1, ℓ2, ℓ) = ({ell1}, {ell2}, {ell})")));
    }
    Ok(DeltaEll { delta: twice[0] / 2, delta1: twice[1] / 2, delta2: twice[2] / 2, sigma: twice[3] / 2 })
}
