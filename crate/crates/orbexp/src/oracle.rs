//! Independent numerical ground truth.
//!
//! Everything here is plain quadrature: adaptive Gauss–Kronrod on finite and
//! semi-infinite ranges, Gauss–Legendre and Gauss–Laguerre rules, a product
//! rule on the sphere, a prolate-spheroidal rule for two-center integrals and
//! an oscillation-aware spherical Bessel transform.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::accel;
use crate::error::{Error, Result};
use crate::special::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    /// Gauss–Laguerre rule rescaled to the decay rate `scale` of the integrand.
    GaussLaguerre { scale: f64 },
    AdaptiveGk,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of subintervals per adaptive integral.
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { scheme: Scheme::AdaptiveGk, abs_tol: 1e-12, rel_tol: 1e-10, max_refinements: 2000 }
    }
}

impl QuadratureSpec {
    pub fn gauss_laguerre(scale: f64) -> Self {
        QuadratureSpec { scheme: Scheme::GaussLaguerre { scale }, ..Self::default() }
    }

    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureSpec { abs_tol, rel_tol, ..Self::default() }
    }

    fn tol(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// An integral estimate with its error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut absk = fc.abs() * WGK[7];
    let mut fv = [0.0; 15];
    fv[7] = fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        kron += WGK[j] * (f1 + f2);
        absk += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kron * 0.5;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let asc = asc * h.abs();
    let mut err = ((kron - gauss) * h).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (1.0f64).min((200.0 * err / asc).powf(1.5));
    }
    let absk = absk * h.abs();
    if absk > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * absk);
    }
    Segment { a, b, value: kron * h, error: err, abs: absk }
}

/// Globally adaptive G7K15 quadrature on a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    let (est, _) = integrate_with_abs(&mut f, a, b, spec)?;
    Ok(est)
}

fn integrate_with_abs<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<(Estimate, f64)> {
    if a == b {
        return Ok((Estimate { value: 0.0, error: 0.0 }, 0.0));
    }
    let first = gk15(f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut abs = first.abs;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while !(error <= spec.tol(value)) {
        if heap.len() >= spec.max_refinements || !value.is_finite() || !error.is_finite() {
            return Err(Error::Nonconvergence { estimate: value, error });
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            return Err(Error::Nonconvergence { estimate: value, error });
        }
        let l = gk15(f, worst.a, mid);
        let r = gk15(f, mid, worst.b);
        value += l.value + r.value - worst.value;
        error += l.error + r.error - worst.error;
        abs += l.abs + r.abs - worst.abs;
        heap.push(l);
        heap.push(r);
        // resynchronize the running sums to avoid drift
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
            abs = heap.iter().map(|s| s.abs).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    if !value.is_finite() {
        return Err(Error::Nonconvergence { estimate: value, error });
    }
    Ok((Estimate { value, error }, abs))
}

/// ∫_a^∞ f by adaptive panels of doubling width starting at `scale`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(mut f: F, a: f64, scale: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    let mut total = 0.0;
    let mut error = 0.0;
    let mut total_abs = 0.0;
    let mut lo = a;
    let mut width = scale;
    let mut quiet = 0;
    for _ in 0..200 {
        let hi = lo + width;
        let panel_spec = QuadratureSpec { abs_tol: spec.abs_tol * 0.1, ..*spec };
        let (est, abs) = integrate_with_abs(&mut f, lo, hi, &panel_spec)?;
        total += est.value;
        error += est.error;
        total_abs += abs;
        if abs <= 1e-17 * total_abs || abs == 0.0 {
            quiet += 1;
            if quiet >= 2 {
                return Ok(Estimate { value: total, error });
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Nonconvergence { estimate: total, error })
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Generalized Gauss–Laguerre rule: nodes and log-weights for ∫_0^∞ x^α e^{−x} g(x) dx.
///
/// Jacobi-matrix eigenvalues seed a Newton polish; weights come from the
/// closed form so tiny tail weights keep full relative accuracy.
pub fn gauss_laguerre(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = 2.0 * i as f64 + alpha + 1.0;
        if i + 1 < n {
            let b = ((i + 1) as f64 * (i as f64 + 1.0 + alpha)).sqrt();
            jac[(i, i + 1)] = b;
            jac[(i + 1, i)] = b;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut ln_w = vec![0.0; n];
    for (i, z) in nodes.iter_mut().enumerate() {
        let mut p2 = 0.0;
        let mut pp = 1.0;
        for _ in 0..50 {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 - 1.0 + alpha - *z) * p2 - (j as f64 - 1.0 + alpha) * p3) / j as f64;
            }
            pp = (nf * p1 - (nf + alpha) * p2) / *z;
            let dz = p1 / pp;
            *z -= dz;
            if dz.abs() <= 1e-15 * z.abs() {
                break;
            }
        }
        ln_w[i] = ln_gamma(alpha + nf) - ln_gamma(nf) - (pp.abs().ln() + nf.ln() + p2.abs().ln());
    }
    (nodes, ln_w)
}

fn laguerre_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R200: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R120: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        200 => R200.get_or_init(|| gauss_laguerre(200, 0.0)),
        _ => R120.get_or_init(|| gauss_laguerre(120, 0.0)),
    }
}

fn gauss_laguerre_integral<F: FnMut(f64) -> f64>(f: &mut F, scale: f64, n: usize) -> f64 {
    let (x, lw) = laguerre_rule(n);
    let mut s = 0.0;
    for (xi, lwi) in x.iter().zip(lw) {
        let g = f(xi / scale);
        if g != 0.0 {
            s += g.signum() * (g.abs().ln() + lwi + xi).exp();
        }
    }
    s / scale
}

/// ∫_0^∞ f(r) r^{w+2} dr; the +2 is the volume element.
pub fn radial_quadrature<F: FnMut(f64) -> f64>(mut f: F, weight_exponent: f64, spec: &QuadratureSpec) -> Result<f64> {
    let p = weight_exponent + 2.0;
    let mut g = |r: f64| if r == 0.0 { if p > 0.0 { 0.0 } else { f(r) } } else { f(r) * r.powf(p) };
    match spec.scheme {
        Scheme::GaussLaguerre { scale } => {
            let a = gauss_laguerre_integral(&mut g, scale, 200);
            let b = gauss_laguerre_integral(&mut g, scale, 120);
            if (a - b).abs() <= spec.tol(a) {
                return Ok(a);
            }
            integrate_semi_infinite(g, 0.0, 1.0 / scale, spec).map(|e| e.value)
        }
        Scheme::AdaptiveGk => integrate_semi_infinite(g, 0.0, 1.0, spec).map(|e| e.value),
    }
}

/// Product Gauss–Legendre × trapezoid rule on the unit sphere.
///
/// Exact for spherical-harmonic content up to `degree`.
pub fn sphere_quadrature<G: FnMut(f64, f64) -> Complex64>(mut g: G, degree: usize) -> Complex64 {
    let nt = degree / 2 + 1;
    let np = degree + 1;
    let (x, w) = gauss_legendre(nt);
    let dphi = 2.0 * PI / np as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for (xi, wi) in x.iter().zip(&w) {
        let theta = xi.acos();
        for j in 0..np {
            s += g(theta, j as f64 * dphi) * (wi * dphi);
        }
    }
    s
}

/// Settings for [`two_center_integral`].
#[derive(Clone, Copy, Debug)]
pub struct CubatureSpec {
    pub quad: QuadratureSpec,
    /// Gauss–Legendre points in the angular-type coordinate.
    pub n_eta: usize,
    /// Trapezoid points in the azimuth.
    pub n_phi: usize,
}

impl Default for CubatureSpec {
    fn default() -> Self {
        CubatureSpec { quad: QuadratureSpec::with_tolerances(1e-13, 1e-11), n_eta: 48, n_phi: 16 }
    }
}

fn orthonormal_frame(axis: [f64; 3]) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let r = crate::special::norm3(axis);
    let ez = [axis[0] / r, axis[1] / r, axis[2] / r];
    let trial = if ez[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = trial[0] * ez[0] + trial[1] * ez[1] + trial[2] * ez[2];
    let mut ex = [trial[0] - d * ez[0], trial[1] - d * ez[1], trial[2] - d * ez[2]];
    let nx = crate::special::norm3(ex);
    ex = [ex[0] / nx, ex[1] / nx, ex[2] / nx];
    let ey = [ez[1] * ex[2] - ez[2] * ex[1], ez[2] * ex[0] - ez[0] * ex[2], ez[0] * ex[1] - ez[1] * ex[0]];
    (ex, ey, ez)
}

/// ∫ f(r) g(r) d³r for functions decaying exponentially about the origin and
/// about `center_b` respectively.
///
/// Uses prolate spheroidal coordinates with foci at 0 and `center_b`, so the
/// integrand is smooth in (ξ, η) and a trigonometric polynomial in φ. A zero
/// separation falls back to spherical coordinates.
pub fn two_center_integral<F, G>(f: F, g: G, center_b: [f64; 3], spec: &CubatureSpec) -> Result<Complex64>
where
    F: Fn([f64; 3]) -> Complex64,
    G: Fn([f64; 3]) -> Complex64,
{
    let big_r = crate::special::norm3(center_b);
    let (eta, w_eta) = gauss_legendre(spec.n_eta);
    let dphi = 2.0 * PI / spec.n_phi as f64;
    let (cphi, sphi): (Vec<f64>, Vec<f64>) = (0..spec.n_phi).map(|j| ((j as f64 * dphi).cos(), (j as f64 * dphi).sin())).unzip();
    if big_r < 1e-12 {
        let inner = |r: f64, part: usize| -> f64 {
            let mut s = Complex64::new(0.0, 0.0);
            for (ct, wt) in eta.iter().zip(&w_eta) {
                let st = (1.0 - ct * ct).sqrt();
                for j in 0..spec.n_phi {
                    let p = [r * st * cphi[j], r * st * sphi[j], r * ct];
                    s += f(p) * g(p) * *wt;
                }
            }
            let v = s * dphi * r * r;
            if part == 0 { v.re } else { v.im }
        };
        let re = integrate_semi_infinite(|r| inner(r, 0), 0.0, 1.0, &spec.quad)?;
        let im = integrate_semi_infinite(|r| inner(r, 1), 0.0, 1.0, &spec.quad)?;
        return Ok(Complex64::new(re.value, im.value));
    }
    let (ex, ey, ez) = orthonormal_frame(center_b);
    let half = 0.5 * big_r;
    let inner = |xi: f64| -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (et, wt) in eta.iter().zip(&w_eta) {
            let zloc = half * (1.0 + xi * et);
            let rho = half * ((xi * xi - 1.0).max(0.0) * (1.0 - et * et)).sqrt();
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..spec.n_phi {
                let (a, b) = (rho * cphi[j], rho * sphi[j]);
                let p = [
                    zloc * ez[0] + a * ex[0] + b * ey[0],
                    zloc * ez[1] + a * ex[1] + b * ey[1],
                    zloc * ez[2] + a * ex[2] + b * ey[2],
                ];
                acc += f(p) * g(p);
            }
            s += acc * (*wt * (xi * xi - et * et));
        }
        s * (half * half * half * dphi)
    };
    let scale = (1.0 / big_r).max(0.25);
    let re = integrate_semi_infinite(|u| inner(1.0 + u).re, 0.0, scale, &spec.quad)?;
    let im = integrate_semi_infinite(|u| inner(1.0 + u).im, 0.0, scale, &spec.quad)?;
    Ok(Complex64::new(re.value, im.value))
}

/// (f ⋆ g)(r_s) = ∫ f(r_s − r′) g(r′) d³r′.
pub fn convolution_3d<F, G>(f: F, g: G, r_sample: [f64; 3], spec: &CubatureSpec) -> Result<Complex64>
where
    F: Fn([f64; 3]) -> Complex64,
    G: Fn([f64; 3]) -> Complex64,
{
    let shifted = |p: [f64; 3]| f([r_sample[0] - p[0], r_sample[1] - p[1], r_sample[2] - p[2]]);
    two_center_integral(g, shifted, r_sample, spec)
}

/// Spherical Bessel function j_ℓ(x).
pub fn spherical_bessel_j(ell: u32, x: f64) -> f64 {
    let l = ell as i32;
    if x.abs() < 1e-300 {
        return if ell == 0 { 1.0 } else { 0.0 };
    }
    if x > l as f64 {
        let j0 = x.sin() / x;
        if ell == 0 {
            return j0;
        }
        let mut jm = j0;
        let mut j = x.sin() / (x * x) - x.cos() / x;
        for k in 1..l {
            let jp = (2 * k + 1) as f64 / x * j - jm;
            jm = j;
            j = jp;
        }
        j
    } else {
        // power series, safe for x ≤ ℓ
        let mut term = x.powi(l) / crate::special::double_factorial_odd(l + 1);
        let mut sum = term;
        let q = -0.5 * x * x;
        for k in 1..200 {
            term *= q / (k as f64 * (2 * (l + k) + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    }
}

/// (2/π)^{1/2} ∫_0^∞ f(r) j_ℓ(pr) r² dr.
///
/// The range is cut at the asymptotic zeros of j_ℓ; the sequence of
/// partial-interval sums is passed through the ε algorithm.
pub fn spherical_bessel_transform<F: Fn(f64) -> f64>(f: F, ell: u32, p: f64, spec: &QuadratureSpec) -> Result<f64> {
    let pref = (2.0 / PI).sqrt();
    if p == 0.0 {
        if ell != 0 {
            return Ok(0.0);
        }
        return radial_quadrature(f, 0.0, spec).map(|v| pref * v);
    }
    let integrand = |r: f64| f(r) * spherical_bessel_j(ell, p * r) * r * r;
    let step = PI / p;
    let mut edges = vec![0.0];
    let first = (0.5 * ell as f64 + 1.0) * step;
    edges.push(first);
    let mut sums = Vec::new();
    let mut total = 0.0;
    let mut total_abs = 0.0;
    let mut quiet = 0;
    let panel_spec = QuadratureSpec { abs_tol: spec.abs_tol * 0.01, ..*spec };
    for i in 0..100_000 {
        let (a, b) = (edges[i], edges[i + 1]);
        let (est, abs) = integrate_with_abs(&mut { integrand }, a, b, &panel_spec)?;
        total += est.value;
        total_abs += abs;
        sums.push(total);
        edges.push(b + step);
        if abs <= 1e-17 * total_abs || abs == 0.0 {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let tail = &sums[sums.len().saturating_sub(12)..];
    let est = if tail.len() >= 3 { accel::wynn_epsilon(tail).best } else { total };
    let value = if (est - total).abs() <= spec.tol(total).max(1e-14 * total_abs) { est } else { total };
    Ok(pref * value)
}

/// Fourth-order central stencil for the d-th derivative, d ≤ 3, as (offset, weight·h^d).
fn central_stencil(d: u32) -> &'static [(i32, f64)] {
    match d {
        0 => &[(0, 1.0)],
        1 => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        2 => &[(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)],
        _ => &[(-3, 1.0 / 8.0), (-2, -1.0), (-1, 13.0 / 8.0), (1, -13.0 / 8.0), (2, 1.0), (3, -1.0 / 8.0)],
    }
}

/// ∂_x^u ∂_y^v ∂_z^w g at `r` by tensor-product fourth-order central differences.
///
/// Orders up to 3 per axis.
pub fn cartesian_partial<G: Fn([f64; 3]) -> Complex64>(g: &G, r: [f64; 3], orders: [u32; 3], h: f64) -> Result<Complex64> {
    if orders.iter().any(|&d| d > 3) {
        return Err(Error::DerivativeUnavailable(format!("finite-difference orders {orders:?} exceed 3 per axis")));
    }
    let (sx, sy, sz) = (central_stencil(orders[0]), central_stencil(orders[1]), central_stencil(orders[2]));
    let mut acc = Complex64::new(0.0, 0.0);
    for &(i, wi) in sx {
        for &(j, wj) in sy {
            for &(k, wk) in sz {
                let p = [r[0] + i as f64 * h, r[1] + j as f64 * h, r[2] + k as f64 * h];
                acc += g(p) * (wi * wj * wk);
            }
        }
    }
    Ok(acc / h.powi((orders[0] + orders[1] + orders[2]) as i32))
}
