//! Radial Laguerre series, Parseval diagnostics and divergence probes.
//!
//! Laguerre targets use the unnormalized L_n^{(α)} with weight e^{−x}x^α,
//! whose squared norms are h_n = Γ(n+α+1)/n!. Basis targets are orthonormal,
//! so their Parseval sums are plain sums of squares.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, QuantumIndex, WeightSpec};
use crate::error::{Error, Result};
use crate::oracle::{integrate, integrate_semi_infinite, QuadratureSpec};
use crate::report::{ConvergenceReport, Verdict};
use crate::special::{laguerre_all, ln_factorial, ln_gamma, pochhammer_log, LogReal};
use crate::transforms::{CoeffTensor, Target};

/// Parameters of x^μ e^{ux} expanded in L_n^{(α)}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSeriesSpec {
    pub mu: f64,
    pub u: f64,
    pub alpha: f64,
    pub n_max: usize,
}

impl RadialSeriesSpec {
    pub fn new(mu: f64, u: f64, alpha: f64, n_max: usize) -> Result<Self> {
        if alpha.is_nan() || alpha <= -1.0 {
            return Err(Error::Domain(format!("Laguerre superscript must exceed −1, got {alpha}")));
        }
        if mu.is_nan() || mu + alpha <= -1.0 {
            return Err(Error::Existence(format!("x^μ needs μ+α > −1, got μ = {mu}, α = {alpha}")));
        }
        if u.is_nan() || u >= 0.5 {
            return Err(Error::Domain(format!("exponential rate must be below 1/2, got {u}")));
        }
        Ok(RadialSeriesSpec { mu, u, alpha, n_max })
    }

    pub fn power(mu: f64, alpha: f64, n_max: usize) -> Result<Self> {
        Self::new(mu, 0.0, alpha, n_max)
    }

    /// x^μ e^{ux}.
    pub fn eval(&self, x: f64) -> f64 {
        x.powf(self.mu) * (self.u * x).exp()
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// ₂F₁(−n, b; c; z) as a terminating sum. c must not be a nonpositive integer below n.
pub fn hyp2f1_terminating(n: usize, b: f64, c: f64, z: f64) -> f64 {
    let mut t = 1.0;
    let mut terms = Vec::with_capacity(n + 1);
    terms.push(t);
    for j in 0..n {
        let jf = j as f64;
        t *= (jf - n as f64) * (b + jf) * z / ((c + jf) * (jf + 1.0));
        terms.push(t);
    }
    compensated_sum(terms)
}

/// Squared norm h_n = Γ(n+α+1)/n! of L_n^{(α)}.
pub fn laguerre_norm_sq(n: usize, alpha: f64) -> f64 {
    (ln_gamma(n as f64 + alpha + 1.0) - ln_factorial(n as u32)).exp()
}

/// The n-dependent factor (−μ)_n/(α+1)_n of the power coefficients.
pub fn power_laguerre_shape(mu: f64, alpha: f64, n: usize) -> f64 {
    (pochhammer_log(-mu, n as u32) / pochhammer_log(alpha + 1.0, n as u32)).value()
}

/// x^μ = Σ c_n L_n^{(α)}(x) with c_n = Γ(μ+α+1)/Γ(α+1)·(−μ)_n/(α+1)_n.
///
/// For integer μ ≥ 0 the series stops at n = μ and the identity is exact.
pub fn power_laguerre_coeffs(spec: &RadialSeriesSpec) -> Result<CoeffTensor> {
    if spec.u != 0.0 {
        return Err(Error::Domain("power series needs u = 0".into()));
    }
    let pre = LogReal { sign: 1.0, ln_abs: ln_gamma(spec.mu + spec.alpha + 1.0) - ln_gamma(spec.alpha + 1.0) };
    let mut t = CoeffTensor::new(Target::Laguerre { alpha: spec.alpha });
    for n in 0..=spec.n_max {
        let c = pre * (pochhammer_log(-spec.mu, n as u32) / pochhammer_log(spec.alpha + 1.0, n as u32));
        if !c.is_zero() {
            t.add(QuantumIndex::new(n as i32, 0, 0), c.value());
        }
    }
    Ok(t)
}

/// x^μ e^{ux} = Σ c_n L_n^{(α)}(x), u < 1/2.
///
/// c_n = (1−u)^{−α−μ−1} Γ(α+μ+1)/Γ(α+1) ₂F₁(−n, α+μ+1; α+1; 1/(1−u)).
pub fn expo_power_laguerre_coeffs(spec: &RadialSeriesSpec) -> Result<CoeffTensor> {
    let a = spec.alpha + spec.mu + 1.0;
    let ln_pre = -a * (1.0 - spec.u).ln() + ln_gamma(a) - ln_gamma(spec.alpha + 1.0);
    let pre = ln_pre.exp();
    let z = 1.0 / (1.0 - spec.u);
    let mut t = CoeffTensor::new(Target::Laguerre { alpha: spec.alpha });
    for n in 0..=spec.n_max {
        let c = pre * hyp2f1_terminating(n, a, spec.alpha + 1.0, z);
        if c != 0.0 {
            t.add(QuantumIndex::new(n as i32, 0, 0), c);
        }
    }
    Ok(t)
}

/// Coefficients of a Laguerre tensor as a dense vector c_0..c_{n_max}.
pub fn dense_laguerre(coeffs: &CoeffTensor, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| coeffs.at(n as i32)).collect()
}

/// Partial sums S_0..S_N of Σ c_n L_n^{(α)}(x).
pub fn laguerre_partial_sums(c: &[f64], alpha: f64, x: f64) -> Vec<f64> {
    if c.is_empty() {
        return Vec::new();
    }
    let l = laguerre_all(c.len() as u32 - 1, alpha, x);
    let mut s = 0.0;
    c.iter().zip(&l).map(|(ci, li)| {
        s += ci * li;
        s
    }).collect()
}

/// ‖f − Σ_{n≤N} c_n L_n^{(α)}‖ in L²(e^{−x}x^α) by adaptive quadrature.
pub fn laguerre_norm_error<F: Fn(f64) -> f64>(f: F, c: &[f64], alpha: f64) -> Result<f64> {
    let quad = QuadratureSpec::with_tolerances(1e-15, 1e-10);
    let n = c.len().max(1) as u32 - 1;
    let g = |x: f64| {
        let l = laguerre_all(n, alpha, x);
        let s: f64 = c.iter().zip(&l).map(|(a, b)| a * b).sum();
        let d = f(x) - s;
        d * d * (-x).exp() * x.powf(alpha)
    };
    Ok(integrate_semi_infinite(g, 0.0, 1.0, &quad)?.value.max(0.0).sqrt())
}

/// Pointwise partial sums of the x^μ e^{ux} series at `x`.
///
/// Norm errors come from Parseval against ‖x^μ e^{ux}‖² = Γ(2μ+α+1)/(1−2u)^{2μ+α+1}.
/// Convergent series stop early once three consecutive terms fall below
/// 1e−14 of the running sum.
pub fn power_laguerre_report(spec: &RadialSeriesSpec, x: f64) -> Result<ConvergenceReport> {
    let coeffs = if spec.u == 0.0 { power_laguerre_coeffs(spec)? } else { expo_power_laguerre_coeffs(spec)? };
    let c = dense_laguerre(&coeffs, spec.n_max);
    let l = laguerre_all(spec.n_max as u32, spec.alpha, x);
    let e = 2.0 * spec.mu + spec.alpha + 1.0;
    let norm_sq = if e > 0.0 { Some((ln_gamma(e) - e * (1.0 - 2.0 * spec.u).ln()).exp()) } else { None };
    let mut sums = Vec::new();
    let mut errs = Vec::new();
    let mut s = 0.0;
    let mut acc = 0.0;
    let mut small = 0;
    for n in 0..=spec.n_max {
        let term = c[n] * l[n];
        s += term;
        acc += c[n] * c[n] * laguerre_norm_sq(n, spec.alpha);
        sums.push(s);
        if let Some(ns) = norm_sq {
            errs.push((ns - acc).max(0.0).sqrt());
        }
        small = if term.abs() < 1e-14 * s.abs() { small + 1 } else { 0 };
        if small >= 3 {
            break;
        }
    }
    let orders: Vec<usize> = (0..sums.len()).collect();
    let label = format!("x^{} e^({} x) Laguerre(alpha={}) at x={}", spec.mu, spec.u, spec.alpha, x);
    let mut rep = ConvergenceReport::new(label, orders, sums).with_reference(spec.eval(x));
    if norm_sq.is_some() {
        rep = rep.with_norm_errors(errs);
    } else {
        rep.notes.push("x^mu e^(ux) is not in the weighted space; norm errors omitted".into());
    }
    Ok(rep)
}

/// e^{−xβr} = Σ_n ᵏℰ_n ₖΨ_{n,0}^0(β, r)·√(4π), the coefficient ᵏℰ_n(x, β).
///
/// ᵏℰ_n = [2/(x+1)]^{k+3} [(n+k+1)!/((2β)^{k+3}(n−1)!)]^{1/2} q^{n−1},
/// q = (x−1)/(x+1). The target is spherically symmetric, so ℓ > 0 terms vanish.
pub fn guseinov_exp_coeffs(k: i32, x: f64, beta: f64, n: i32) -> Result<f64> {
    if k < -1 {
        return Err(Error::Domain(format!("Guseinov weight order must be ≥ −1, got {k}")));
    }
    if x.is_nan() || x <= 0.0 || beta.is_nan() || beta <= 0.0 {
        return Err(Error::Domain(format!("need x > 0 and β > 0, got x = {x}, β = {beta}")));
    }
    if n < 1 {
        return Err(Error::InvalidIndex(format!("need n ≥ 1, got {n}")));
    }
    let kk = (k + 3) as f64;
    let q = (x - 1.0) / (x + 1.0);
    if q == 0.0 && n > 1 {
        return Ok(0.0);
    }
    let mut ln_abs = kk * (2.0 / (x + 1.0)).ln()
        + 0.5 * (ln_factorial((n + k + 1) as u32) - kk * (2.0 * beta).ln() - ln_factorial((n - 1) as u32));
    if n > 1 {
        ln_abs += (n - 1) as f64 * q.abs().ln();
    }
    let sign = if q < 0.0 && (n - 1) % 2 == 1 { -1.0 } else { 1.0 };
    Ok(sign * ln_abs.exp())
}

/// ᵏℰ_n for n = 1..=n_max as a tensor over ₖΨ_{n,0}^0(β).
///
/// The tensor expands e^{−xβr}·Y_0^0 with unit-normalized angular part.
pub fn guseinov_exp_tensor(k: i32, x: f64, beta: f64, n_max: i32) -> Result<CoeffTensor> {
    let mut t = CoeffTensor::new(Target::Basis(BasisSpec::guseinov(k, beta)));
    for n in 1..=n_max {
        let c = guseinov_exp_coeffs(k, x, beta, n)?;
        if c != 0.0 {
            t.add(QuantumIndex::new(n, 0, 0), c);
        }
    }
    Ok(t)
}

/// Relative L²(r^k) truncation error of the e^{−xβr} series kept to n ≤ n_max.
///
/// (1−q²)^{k+3} Σ_{j≥n_max} C(j+k+2, j) q^{2j} is the lost fraction of the
/// squared norm; the result is its square root. β drops out.
pub fn guseinov_exp_truncation_error(k: i32, x: f64, n_max: i32) -> Result<f64> {
    if k < -1 || x.is_nan() || x <= 0.0 || n_max < 0 {
        return Err(Error::Domain(format!("need k ≥ −1, x > 0, n_max ≥ 0; got k = {k}, x = {x}, n_max = {n_max}")));
    }
    let q2 = ((x - 1.0) / (x + 1.0)).powi(2);
    if q2 == 0.0 {
        return Ok(if n_max == 0 { 1.0 } else { 0.0 });
    }
    let kk = (k + 3) as f64;
    let j0 = n_max as f64;
    // ln of C(j0+k+2, j0) q^{2 j0} (1−q²)^{k+3}
    let ln_first = ln_gamma(j0 + kk) - ln_gamma(j0 + 1.0) - ln_gamma(kk) + j0 * q2.ln() + kk * (1.0 - q2).ln();
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut j = j0;
    loop {
        sum += term;
        term *= (j + kk) / (j + 1.0) * q2;
        j += 1.0;
        if term < 1e-18 * sum {
            break;
        }
    }
    Ok((ln_first + sum.ln()).exp().min(1.0).sqrt())
}

/// Both sides of Parseval's equality for a radial function with angular momentum ℓ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsevalGap {
    /// ‖f‖² in the weighted space; infinite when f lies outside it.
    pub lhs: f64,
    /// Σ|c|² over the supplied coefficients.
    pub rhs: f64,
    /// lhs − rhs.
    pub gap: f64,
}

impl ParsevalGap {
    pub fn relative_gap(&self) -> f64 {
        if self.lhs.is_finite() {
            self.gap.abs() / self.lhs.abs().max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        }
    }

    pub fn closes(&self, tol: f64) -> bool {
        self.relative_gap() <= tol
    }
}

/// Parseval check ‖f‖² vs Σ|c|² for coefficients over an orthonormal family.
///
/// f is the radial factor of f(r)Y_ℓ^m with ℓ taken from the coefficients.
/// The weighted norm is integrated from 1e−12/β outward. Near the origin the
/// two decades [1e−12, 1e−9]/β and [1e−9, 1e−6]/β are compared: an integrable
/// density r^p (p > −1) shrinks the inner one by 10^{−3(p+1)}, so an inner
/// shell holding at least half the outer one marks the norm as infinite.
/// Sobolev norms use a five-point derivative.
pub fn parseval_check<F: Fn(f64) -> f64>(coeffs: &CoeffTensor, f: F, weight: WeightSpec) -> Result<ParsevalGap> {
    let spec = match coeffs.target {
        Target::Basis(s) => s,
        _ => return Err(Error::Domain("Parseval check needs an orthonormal basis target".into())),
    };
    let ell = coeffs.entries.keys().next().map(|q| q.ell).unwrap_or(0);
    if coeffs.entries.keys().any(|q| q.ell != ell) {
        return Err(Error::Domain("Parseval check handles one angular momentum at a time".into()));
    }
    let density: Box<dyn Fn(f64) -> f64 + '_> = match weight {
        WeightSpec::Power(k) => Box::new(move |r: f64| {
            let v = f(r);
            v * v * r.powi(k + 2)
        }),
        WeightSpec::Sobolev { eta } => {
            let l2 = (ell * (ell + 1)) as f64;
            let f = &f;
            Box::new(move |r: f64| {
                let h = 1e-3 * r.min(1.0 / spec.beta);
                let d = (f(r - 2.0 * h) - 8.0 * f(r - h) + 8.0 * f(r + h) - f(r + 2.0 * h)) / (12.0 * h);
                let v = f(r);
                ((eta * eta + l2 / (r * r)) * v * v + d * d) * r * r / (2.0 * eta * eta)
            })
        }
    };
    let quad = QuadratureSpec::with_tolerances(1e-16, 1e-12);
    let scale = 1.0 / spec.beta;
    let lo = 1e-6 * scale;
    let core = integrate_semi_infinite(&density, lo, scale, &quad)?.value;
    let outer = integrate(&density, 1e-9 * scale, lo, &quad);
    let inner = integrate(&density, 1e-12 * scale, 1e-9 * scale, &quad);
    let lhs = match (outer, inner) {
        (Ok(o), Ok(i)) if o.value.is_finite() && i.value.is_finite() && !(i.value.abs() >= 0.5 * o.value.abs() && o.value != 0.0) => {
            core + o.value + i.value
        }
        _ => f64::INFINITY,
    };
    let rhs: f64 = coeffs.entries.values().map(|c| c * c).sum();
    Ok(ParsevalGap { lhs, rhs, gap: lhs - rhs })
}

/// Laguerre series of 1/x (μ = −1) at a point, with its weighted-L² error.
///
/// c_n = n!/(α (α+1)_n). Pointwise the partial sums blow up as x → 0 because
/// L_n^{(α)}(0) = (α+1)_n/n!. In the mean the series converges whenever
/// 1/x lies in L²(e^{−x}x^α), i.e. α > 1; the norm errors then come from
/// Parseval with ‖1/x‖² = Γ(α−1).
pub fn inverse_power_divergence_probe(x: f64, alpha: f64, n_max: usize) -> Result<ConvergenceReport> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("need x > 0, got {x}")));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Existence(format!("the 1/x series needs α > 0, got {alpha}")));
    }
    let spec = RadialSeriesSpec::power(-1.0, alpha, n_max)?;
    let c = dense_laguerre(&power_laguerre_coeffs(&spec)?, n_max);
    let sums = laguerre_partial_sums(&c, alpha, x);
    let orders: Vec<usize> = (0..=n_max).collect();
    let mut rep = ConvergenceReport::new(format!("1/x Laguerre(alpha={alpha}) at x={x}"), orders, sums).with_reference(1.0 / x);
    if alpha > 1.0 {
        let norm_sq = ln_gamma(alpha - 1.0).exp();
        let mut acc = 0.0;
        let errs = c
            .iter()
            .enumerate()
            .map(|(n, cn)| {
                acc += cn * cn * laguerre_norm_sq(n, alpha);
                (norm_sq - acc).max(0.0).sqrt()
            })
            .collect();
        rep = rep.with_norm_errors(errs);
    } else {
        rep.notes.push(format!("1/x is not in L2(e^-x x^{alpha}); the weighted error is infinite"));
    }
    let increasing = rep.partial_sums.windows(2).all(|w| w[1] > w[0]);
    if increasing && rep.verdict == Verdict::Diverging {
        rep.notes.push("partial sums increase monotonically".into());
    }
    Ok(rep)
}

/// Partial sums of ₁F₀(k−μ; 1) = Σ_m (k−μ)_m/m!, the inner series of the
/// rearranged Laguerre expansion of x^μ.
///
/// The sums are S_M = (k−μ+1)_M/M!. When k−μ is a nonpositive integer the
/// series terminates with value 0; otherwise the verdict is heuristic.
pub fn rearrangement_probe(mu: f64, k: i32, n_max: usize) -> Result<ConvergenceReport> {
    if mu.is_nan() || k < 0 {
        return Err(Error::Domain(format!("need a real μ and k ≥ 0, got μ = {mu}, k = {k}")));
    }
    let a = k as f64 - mu;
    let mut term = 1.0;
    let mut s = 0.0;
    let mut sums = Vec::with_capacity(n_max + 1);
    let mut terms = Vec::with_capacity(n_max + 1);
    for m in 0..=n_max {
        s += term;
        sums.push(s);
        terms.push(term);
        term *= (a + m as f64) / (m as f64 + 1.0);
    }
    let orders: Vec<usize> = (0..=n_max).collect();
    let mut rep = ConvergenceReport::new(format!("1F0({a}; 1) for mu={mu}, k={k}"), orders, sums);
    if a <= 0.0 && a.fract() == 0.0 && (-a) as usize <= n_max {
        rep.verdict = Verdict::Terminating;
        rep.verdict_heuristic = false;
        rep = rep.with_reference(0.0);
        rep.notes.push(format!("terminates after {} terms with sum 0", -a as usize + 1));
    } else if a > 0.0 {
        rep.verdict = Verdict::Diverging;
        rep.verdict_heuristic = false;
        rep.notes.push("all terms positive and (1-y)^(mu-k) is infinite at y = 1".into());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::{accelerate_report, plateau, Transformer};
    use crate::basis::eval_radial;
    use crate::oracle::radial_quadrature;
    use crate::transforms::projection_coeffs;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laguerre_projection<F: Fn(f64) -> f64>(f: F, alpha: f64, n: usize) -> f64 {
        let quad = QuadratureSpec::with_tolerances(1e-13, 1e-11);
        let g = |x: f64| f(x) * crate::special::laguerre(n as u32, alpha, x) * (-x).exp() * x.powf(alpha);
        integrate_semi_infinite(g, 0.0, 1.0, &quad).unwrap().value / laguerre_norm_sq(n, alpha)
    }

    #[test]
    fn power_examples() {
        let t = power_laguerre_coeffs(&RadialSeriesSpec::power(2.0, 0.0, 5).unwrap()).unwrap();
        let c = dense_laguerre(&t, 5);
        assert_eq!(c, vec![2.0, -4.0, 2.0, 0.0, 0.0, 0.0]);
        let t = power_laguerre_coeffs(&RadialSeriesSpec::power(0.0, 0.7, 4).unwrap()).unwrap();
        assert_eq!(dense_laguerre(&t, 4), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        // expand the three polynomials by hand: 2 − 4(1−x) + (2 − 4x + x²)
        for x in [0.3, 1.7, 5.0] {
            let lhs = 2.0 - 4.0 * (1.0 - x) + (2.0 - 4.0 * x + x * x);
            assert_relative_eq!(lhs, x * x, max_relative = 1e-14);
        }
    }

    #[test]
    fn half_power_matches_projection() {
        let t = power_laguerre_coeffs(&RadialSeriesSpec::power(0.5, 0.0, 10).unwrap()).unwrap();
        for n in 0..=10 {
            let p = laguerre_projection(f64::sqrt, 0.0, n);
            assert!((t.at(n as i32) - p).abs() <= 1e-10, "n={n}: {} vs {p}", t.at(n as i32));
        }
    }

    #[test]
    fn existence_and_domain_errors() {
        assert!(matches!(RadialSeriesSpec::power(-1.0, 0.0, 3), Err(Error::Existence(_))));
        assert!(matches!(RadialSeriesSpec::new(1.0, 0.5, 0.0, 3), Err(Error::Domain(_))));
        assert!(matches!(guseinov_exp_coeffs(0, 0.0, 1.0, 1), Err(Error::Domain(_))));
        assert!(matches!(guseinov_exp_coeffs(0, 1.0, 1.0, 0), Err(Error::InvalidIndex(_))));
    }

    #[test]
    fn expo_reduces_to_power_at_u_zero() {
        for (mu, alpha) in [(0.5, 0.0), (-0.5, 1.0), (2.3, 0.5), (3.0, 2.0)] {
            let s = RadialSeriesSpec::power(mu, alpha, 15).unwrap();
            let p = dense_laguerre(&power_laguerre_coeffs(&s).unwrap(), 15);
            let e = dense_laguerre(&expo_power_laguerre_coeffs(&s).unwrap(), 15);
            let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for n in 0..=15 {
                assert!((p[n] - e[n]).abs() <= 1e-10 * scale, "μ={mu} n={n}: {} vs {}", p[n], e[n]);
            }
        }
    }

    #[test]
    fn expo_exponential_reconstructs_in_norm() {
        let s = RadialSeriesSpec::new(0.0, -1.0, 0.0, 30).unwrap();
        let c = dense_laguerre(&expo_power_laguerre_coeffs(&s).unwrap(), 30);
        let err = laguerre_norm_error(|x| (-x).exp(), &c, 0.0).unwrap();
        assert!(err <= 1e-8, "norm error {err}");
    }

    #[test]
    fn expo_matches_projection() {
        let s = RadialSeriesSpec::new(1.0, 0.25, 1.0, 8).unwrap();
        let t = expo_power_laguerre_coeffs(&s).unwrap();
        for n in 0..=8 {
            let p = laguerre_projection(|x| x * (0.25 * x).exp(), 1.0, n);
            assert!((t.at(n as i32) - p).abs() <= 1e-9 * p.abs().max(1.0), "n={n}: {} vs {p}", t.at(n as i32));
        }
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let terms = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(terms), 2.0);
        // (1−z)^n from ₂F₁(−n, c; c; z), and Gauss' sum (c−b)_n/(c)_n at z = 1
        assert_relative_eq!(hyp2f1_terminating(10, 1.5, 1.5, 0.3), 0.7f64.powi(10), max_relative = 1e-13);
        let gauss = crate::special::pochhammer(2.5 - 0.7, 8) / crate::special::pochhammer(2.5, 8);
        assert_relative_eq!(hyp2f1_terminating(8, 0.7, 2.5, 1.0), gauss, max_relative = 1e-12);
    }

    #[test]
    fn guseinov_exp_examples() {
        for k in -1..=3 {
            assert_eq!(guseinov_exp_coeffs(k, 1.0, 0.8, 2).unwrap(), 0.0);
            assert_eq!(guseinov_exp_coeffs(k, 1.0, 0.8, 7).unwrap(), 0.0);
        }
        assert_relative_eq!(guseinov_exp_coeffs(0, 1.0, 0.5, 1).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
        let t = guseinov_exp_tensor(2, 1.0, 1.3, 12).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn guseinov_exp_matches_projection() {
        let beta = 0.7;
        for k in [-1, 0, 1, 2] {
            for x in [3.0, 0.4] {
                let spec = BasisSpec::guseinov(k, beta);
                let proj = projection_coeffs(|r| (-x * beta * r).exp(), &spec, 0, 12, k).unwrap();
                for (i, p) in proj.iter().enumerate() {
                    let c = guseinov_exp_coeffs(k, x, beta, i as i32 + 1).unwrap();
                    assert!((c - p).abs() <= 1e-9 * proj[0].abs(), "k={k} x={x} n={}: {c} vs {p}", i + 1);
                }
            }
        }
    }

    #[test]
    fn guseinov_exp_ratio_is_independent_of_k() {
        let x = 3.0;
        let q = (x - 1.0) / (x + 1.0);
        for k in 0..=3 {
            let ratio = |n: i32| guseinov_exp_coeffs(k, x, 1.0, n + 1).unwrap() / guseinov_exp_coeffs(k, x, 1.0, n).unwrap();
            let corr = |n: i32| (((n + k + 2) as f64) / n as f64).sqrt();
            for n in 1..30 {
                assert_relative_eq!(ratio(n) / corr(n), q, max_relative = 1e-13);
            }
            assert!((ratio(400) - q).abs() < 0.01);
        }
    }

    #[test]
    fn truncation_error_grows_with_k() {
        let e: Vec<f64> = (0..=3).map(|k| guseinov_exp_truncation_error(k, 3.0, 10).unwrap()).collect();
        assert!(e.windows(2).all(|w| w[1] > w[0]), "{e:?}");
        assert_eq!(guseinov_exp_truncation_error(2, 1.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn truncation_error_matches_quadrature() {
        let (x, beta, n_max) = (3.0, 0.9, 6);
        for k in 0..=3 {
            let t = guseinov_exp_tensor(k, x, beta, n_max).unwrap();
            let quad = QuadratureSpec::with_tolerances(1e-16, 1e-12);
            let diff = |r: f64| (-x * beta * r).exp() - t.eval_radial(r).unwrap();
            let num = radial_quadrature(|r| diff(r).powi(2), k as f64, &quad).unwrap();
            let den = radial_quadrature(|r| (-2.0 * x * beta * r).exp(), k as f64, &quad).unwrap();
            let closed = guseinov_exp_truncation_error(k, x, n_max).unwrap();
            assert_relative_eq!((num / den).sqrt(), closed, max_relative = 1e-6);
        }
    }

    #[test]
    fn parseval_basis_element() {
        let spec = BasisSpec::lambda(1.1);
        let mut t = CoeffTensor::new(Target::Basis(spec));
        let q = QuantumIndex::new(2, 1, 0);
        t.add(q, 1.0);
        let g = parseval_check(&t, |r| eval_radial(&spec, q, r).unwrap(), WeightSpec::Power(0)).unwrap();
        assert!(g.gap.abs() <= 1e-12, "{g:?}");
    }

    #[test]
    fn parseval_exponential_in_lambda() {
        let beta = 0.6;
        let t = guseinov_exp_tensor(0, 1.5, beta, 40).unwrap();
        let g = parseval_check(&t, |r| (-1.5 * beta * r).exp(), WeightSpec::Power(0)).unwrap();
        assert!(g.gap.abs() <= 1e-8, "{g:?}");
        assert_relative_eq!(g.lhs, 2.0 / (3.0 * beta).powi(3), max_relative = 1e-10);
    }

    #[test]
    fn parseval_fails_for_yukawa_under_inverse_weight() {
        let beta = 1.0;
        let spec = BasisSpec::sturmian(beta);
        let yuk = |r: f64| (-beta * r).exp() / r;
        let proj = projection_coeffs(yuk, &spec, 0, 30, -1).unwrap();
        let mut t = CoeffTensor::new(Target::Basis(spec));
        for (i, c) in proj.iter().enumerate() {
            t.add(QuantumIndex::new(i as i32 + 1, 0, 0), *c);
        }
        let g = parseval_check(&t, yuk, WeightSpec::Power(-1)).unwrap();
        assert!(!g.lhs.is_finite() && !g.closes(1e-6), "{g:?}");
        // the same function is fine in the unweighted space
        let lam = BasisSpec::lambda(beta);
        let proj = projection_coeffs(yuk, &lam, 0, 60, 0).unwrap();
        let mut t = CoeffTensor::new(Target::Basis(lam));
        for (i, c) in proj.iter().enumerate() {
            t.add(QuantumIndex::new(i as i32 + 1, 0, 0), *c);
        }
        let g = parseval_check(&t, yuk, WeightSpec::Power(0)).unwrap();
        assert!(g.lhs.is_finite() && g.relative_gap() < 0.05, "{g:?}");
    }

    #[test]
    fn parseval_sobolev_sturmian() {
        let beta = 0.8;
        let spec = BasisSpec::sturmian(beta);
        let q = QuantumIndex::new(3, 1, 0);
        let mut t = CoeffTensor::new(Target::Basis(spec));
        t.add(q, 1.0);
        let g = parseval_check(&t, |r| eval_radial(&spec, q, r).unwrap(), WeightSpec::Sobolev { eta: beta }).unwrap();
        assert!(g.gap.abs() <= 1e-8, "{g:?}");
    }

    #[test]
    fn inverse_power_diverges_pointwise() {
        for alpha in [1.0, 2.0] {
            let r = inverse_power_divergence_probe(1e-3, alpha, 200).unwrap();
            assert!(r.partial_sums.windows(2).all(|w| w[1] > w[0]));
            assert!(r.last() > 10.0 * r.partial_sums[0]);
            assert_eq!(r.verdict, Verdict::Diverging);
        }
    }

    #[test]
    fn inverse_power_at_four_is_slow_and_oscillatory() {
        let r = inverse_power_divergence_probe(4.0, 1.0, 100).unwrap();
        let err = r.partial_errors.as_ref().unwrap();
        assert!(err[100] < err[10]);
        assert!(err[100] > 1e-3);
        let d: Vec<f64> = r.partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(d.windows(2).any(|w| w[0] * w[1] < 0.0));
    }

    #[test]
    fn inverse_power_mean_convergence() {
        let r = inverse_power_divergence_probe(1e-3, 2.0, 200).unwrap();
        let ne = r.norm_errors.as_ref().unwrap();
        assert!(ne.windows(2).all(|w| w[1] < w[0]));
        // closed form 1/(N+2) for α = 2, and a quadrature cross-check
        for n in [5usize, 20, 200] {
            assert_relative_eq!(ne[n] * ne[n], 1.0 / (n as f64 + 2.0), max_relative = 1e-10);
        }
        let spec = RadialSeriesSpec::power(-1.0, 2.0, 20).unwrap();
        let c = dense_laguerre(&power_laguerre_coeffs(&spec).unwrap(), 20);
        let q = laguerre_norm_error(|x| 1.0 / x, &c, 2.0).unwrap();
        assert_relative_eq!(q, ne[20], max_relative = 1e-7);
        assert!(inverse_power_divergence_probe(1e-3, 1.0, 10).unwrap().norm_errors.is_none());
    }

    #[test]
    fn mean_convergence_nonincreasing() {
        for (mu, alpha) in [(0.5, 0.0), (-1.0, 2.0)] {
            let f = move |x: f64| x.powf(mu);
            let mut prev = f64::INFINITY;
            for n_max in [5usize, 10, 20, 40] {
                let spec = RadialSeriesSpec::power(mu, alpha, n_max).unwrap();
                let c = dense_laguerre(&power_laguerre_coeffs(&spec).unwrap(), n_max);
                let e = laguerre_norm_error(f, &c, alpha).unwrap();
                assert!(e <= prev, "μ={mu} n_max={n_max}: {e} > {prev}");
                prev = e;
            }
        }
    }

    #[test]
    fn coefficient_decay_contrast() {
        let ns = [50usize, 100, 200, 400];
        let fit = |mu: f64, alpha: f64| {
            let pts: Vec<(f64, f64)> = ns.iter().map(|&n| ((n as f64).ln(), power_laguerre_shape(mu, alpha, n).abs().ln())).collect();
            let (x0, y0) = pts[0];
            let (x1, y1) = pts[pts.len() - 1];
            (y1 - y0) / (x1 - x0)
        };
        let half = fit(0.5, 0.0);
        assert!(half < -1.0, "slope {half}");
        let inv = fit(-1.0, 0.0);
        assert!(inv.abs() < 1e-12, "slope {inv}");
    }

    #[test]
    fn rearrangement_table() {
        let r = rearrangement_probe(-1.0, 0, 50).unwrap();
        assert_eq!(r.verdict, Verdict::Diverging);
        assert_eq!(r.last(), 51.0);
        let r = rearrangement_probe(3.0, 1, 50).unwrap();
        assert_eq!(r.verdict, Verdict::Terminating);
        assert_eq!(r.last(), 0.0);
        let r = rearrangement_probe(0.5, 2, 200).unwrap();
        assert_eq!(r.verdict, Verdict::Diverging);
        assert!(r.last() > r.partial_sums[100]);
        let r = rearrangement_probe(2.0, 4, 30).unwrap();
        assert_eq!(r.verdict, Verdict::Diverging);
        // k < μ nonintegral: terms decay like m^{k−μ−1}, partial sums tend to 0
        let r = rearrangement_probe(2.5, 1, 400).unwrap();
        assert!(r.last().abs() < 1e-2 && r.verdict != Verdict::Diverging);
    }

    #[test]
    fn rearrangement_partial_sums_closed_form() {
        for (mu, k) in [(-1.0, 0), (0.5, 2), (2.5, 1), (-0.3, 3)] {
            let r = rearrangement_probe(mu, k, 40).unwrap();
            let a = k as f64 - mu;
            for (m, s) in r.partial_sums.iter().enumerate() {
                let closed = (pochhammer_log(a + 1.0, m as u32) / LogReal::new(ln_factorial(m as u32).exp())).value();
                assert_relative_eq!(*s, closed, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn levin_t_finds_no_plateau_on_divergent_rearrangement() {
        let r = rearrangement_probe(-0.5, 0, 20).unwrap();
        let acc = accelerate_report(&r, Transformer::LevinT, 8);
        let vals: Vec<f64> = acc.accelerated.unwrap().values.into_iter().flatten().collect();
        assert!(plateau(&vals, 1e-6).is_none());
    }

    #[test]
    fn half_power_pointwise_report() {
        let spec = RadialSeriesSpec::power(0.5, 0.0, 60).unwrap();
        let r = power_laguerre_report(&spec, 2.0).unwrap();
        let ne = r.norm_errors.as_ref().unwrap();
        assert!(ne.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.partial_errors.as_ref().unwrap().last().unwrap() < &0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn integer_powers_are_polynomial_identities(m in 0u32..8, alpha in -0.5f64..3.0, seed in 0u64..1000) {
            let spec = RadialSeriesSpec::power(m as f64, alpha, 12).unwrap();
            let t = power_laguerre_coeffs(&spec).unwrap();
            prop_assert!(t.entries.keys().all(|q| q.n <= m as i32));
            prop_assert!(t.at(m as i32) != 0.0);
            let c = dense_laguerre(&t, 12);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10 {
                let x: f64 = rng.random_range(0.0..6.0);
                let s = *laguerre_partial_sums(&c, alpha, x).last().unwrap();
                let mag: f64 = c.iter().zip(laguerre_all(12, alpha, x)).map(|(a, b)| (a * b).abs()).sum();
                prop_assert!((s - x.powi(m as i32)).abs() <= 1e-12 * mag.max(1.0));
            }
        }

        #[test]
        fn exp_series_tail_is_beta_free(k in -1i32..4, x in 0.2f64..5.0, beta in 0.3f64..3.0) {
            // Σ_{n ≤ N} ᵏℰ_n² (2xβ)^{k+3}/Γ(k+3) = 1 − tail²
            let n_max = 8;
            let s: f64 = (1..=n_max).map(|n| guseinov_exp_coeffs(k, x, beta, n).unwrap().powi(2)).sum();
            let norm = ln_gamma((k + 3) as f64).exp() / (2.0 * x * beta).powi(k + 3);
            let tail = guseinov_exp_truncation_error(k, x, n_max).unwrap();
            prop_assert!((1.0 - s / norm - tail * tail).abs() < 1e-12);
        }
    }
}
