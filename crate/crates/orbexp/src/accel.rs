//! Nonlinear sequence transformations: Wynn's ε algorithm, the Levin u and t
//! transformations and Brezinski's θ algorithm.
//!
//! Breakdowns (a vanishing difference) truncate the table instead of
//! propagating non-finite values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{AccelColumn, ConvergenceReport};
use crate::special::binomial;

const TINY: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonTable {
    /// Even columns ε_0, ε_2, ...; column 2k has len − 2k entries.
    pub even_columns: Vec<Vec<f64>>,
    /// Last entry of the deepest even column.
    pub best: f64,
    pub breakdown: bool,
}

/// Wynn's ε algorithm on partial sums.
pub fn wynn_epsilon(s: &[f64]) -> EpsilonTable {
    assert!(!s.is_empty(), "empty sequence");
    let mut prev: Vec<f64> = vec![0.0; s.len() + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut even = vec![cur.clone()];
    let mut k = 0;
    let mut breakdown = false;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            // rounding-level differences mean the column has converged
            if d.abs() < TINY || d.abs() <= 8.0 * f64::EPSILON * cur[i].abs().max(cur[i + 1].abs()) {
                breakdown = true;
                break;
            }
            let v = prev[i + 1] + 1.0 / d;
            if !v.is_finite() {
                breakdown = true;
                break;
            }
            next.push(v);
        }
        if breakdown && next.len() < cur.len() - 1 {
            // a constant tail means the sequence has already converged
            break;
        }
        prev = cur;
        cur = next;
        k += 1;
        if k % 2 == 0 {
            even.push(cur.clone());
        }
    }
    let best = *even.last().unwrap().last().unwrap();
    EpsilonTable { even_columns: even, best, breakdown }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevinVariant {
    /// ω_n = (n + 1) a_n
    U,
    /// ω_n = a_n
    T,
}

/// Levin transformation of the partial sums s_start.. with remainder
/// estimates built from the matching terms, β = 1.
pub fn levin(s: &[f64], terms: &[f64], start: usize, variant: LevinVariant) -> Result<f64> {
    assert_eq!(s.len(), terms.len());
    if s.is_empty() {
        return Err(Error::Breakdown("empty sequence".into()));
    }
    let k = s.len() - 1;
    let beta = 1.0;
    let n = start as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..=k {
        let w = match variant {
            LevinVariant::U => (beta + n + j as f64) * terms[j],
            LevinVariant::T => terms[j],
        };
        if w == 0.0 {
            return Err(Error::Breakdown(format!("zero remainder estimate at index {}", start + j)));
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign * binomial(k as f64, j as u32) * ((beta + n + j as f64) / (beta + n + k as f64)).powi(k as i32 - 1);
        num += c * s[j] / w;
        den += c / w;
    }
    if den.abs() < TINY {
        return Err(Error::Breakdown("vanishing Levin denominator".into()));
    }
    Ok(num / den)
}

fn partial_sums(terms: &[f64]) -> Vec<f64> {
    terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect()
}

/// Highest-order Levin u estimate from the series terms a_0, a_1, ...
pub fn levin_u(terms: &[f64]) -> Result<f64> {
    levin_from_terms(terms, LevinVariant::U)
}

/// Highest-order Levin t estimate from the series terms.
pub fn levin_t(terms: &[f64]) -> Result<f64> {
    levin_from_terms(terms, LevinVariant::T)
}

fn levin_from_terms(terms: &[f64], variant: LevinVariant) -> Result<f64> {
    // a sequence that has hit exact zeros is already summed
    if let Some(last_nz) = terms.iter().rposition(|&t| t != 0.0) {
        if last_nz + 1 < terms.len() {
            return Ok(terms[..=last_nz].iter().sum());
        }
    } else {
        return Ok(0.0);
    }
    levin(&partial_sums(terms), terms, 0, variant)
}

/// Brezinski's θ algorithm; returns the deepest even-column entry.
pub fn brezinski_theta(s: &[f64]) -> Result<f64> {
    if s.len() < 3 {
        return Err(Error::Breakdown("θ needs at least three partial sums".into()));
    }
    let mut prev_odd: Vec<f64> = vec![0.0; s.len()];
    let mut even: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap();
    while even.len() >= 4 {
        let mut odd = Vec::with_capacity(even.len() - 1);
        for n in 0..even.len() - 1 {
            let d = even[n + 1] - even[n];
            if d.abs() < TINY {
                return Ok(best);
            }
            odd.push(prev_odd[n + 1] + 1.0 / d);
        }
        let mut next = Vec::with_capacity(even.len() - 3);
        for n in 0..even.len() - 3 {
            let d2 = odd[n + 2] - 2.0 * odd[n + 1] + odd[n];
            if d2.abs() < TINY {
                return Ok(best);
            }
            next.push(even[n + 1] + (even[n + 2] - even[n + 1]) * (odd[n + 2] - odd[n + 1]) / d2);
        }
        let last = *next.last().unwrap();
        if !last.is_finite() {
            return Ok(best);
        }
        best = last;
        prev_odd = odd;
        even = next;
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transformer {
    Epsilon,
    LevinU,
    LevinT,
    Theta,
}

impl Transformer {
    pub fn name(self) -> &'static str {
        match self {
            Transformer::Epsilon => "wynn_epsilon",
            Transformer::LevinU => "levin_u",
            Transformer::LevinT => "levin_t",
            Transformer::Theta => "brezinski_theta",
        }
    }
}

/// Transform the window of partial sums ending at `end` (inclusive) using at
/// most `order + 1` entries.
pub fn transform_window(s: &[f64], end: usize, order: usize, method: Transformer) -> Result<f64> {
    let start = end.saturating_sub(order);
    let win = &s[start..=end];
    if win.len() < 3 {
        return Err(Error::Breakdown("window shorter than three entries".into()));
    }
    match method {
        Transformer::Epsilon => Ok(wynn_epsilon(win).best),
        Transformer::Theta => brezinski_theta(win),
        Transformer::LevinU | Transformer::LevinT => {
            let terms: Vec<f64> = (start..=end).map(|i| if i == 0 { s[0] } else { s[i] - s[i - 1] }).collect();
            let variant = if method == Transformer::LevinU { LevinVariant::U } else { LevinVariant::T };
            levin(win, &terms, start, variant)
        }
    }
}

/// Attach transformed estimates to every row of a report.
pub fn accelerate_report(report: &ConvergenceReport, method: Transformer, order: usize) -> ConvergenceReport {
    let mut out = report.clone();
    let mut breakdown = false;
    let values = (0..report.partial_sums.len())
        .map(|i| match transform_window(&report.partial_sums, i, order, method) {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) => {
                breakdown = true;
                None
            }
            Err(Error::Breakdown(_)) if i >= 2 => {
                breakdown = true;
                None
            }
            Err(_) => None,
        })
        .collect();
    out.accelerated = Some(AccelColumn { method: method.name().into(), order, values, breakdown });
    out
}

/// Mid-value of a run of estimates whose spread is within `tol` (relative to
/// max(1, |mean|)); `None` when no plateau exists.
pub fn plateau(estimates: &[f64], tol: f64) -> Option<f64> {
    if estimates.is_empty() || estimates.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let lo = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    if hi - lo <= tol * mid.abs().max(1.0) {
        Some(mid)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ln2_terms(n: usize) -> Vec<f64> {
        (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (i + 1) as f64).collect()
    }

    #[test]
    fn epsilon_exact_on_geometric_triplet() {
        let t = wynn_epsilon(&[1.0, 1.5, 1.75]);
        assert_eq!(t.best, 2.0);
    }

    #[test]
    fn epsilon_constant_sequence() {
        let t = wynn_epsilon(&[3.25; 6]);
        assert_eq!(t.best, 3.25);
        assert!(t.breakdown);
    }

    #[test]
    fn epsilon_on_ln2() {
        let s = partial_sums(&ln2_terms(10));
        let plain = (s[9] - 2f64.ln()).abs();
        let acc = (wynn_epsilon(&s).best - 2f64.ln()).abs();
        assert!(plain > 4e-2);
        assert!(acc <= 1e-6, "{acc}");
    }

    #[test]
    fn levin_on_ln2() {
        let t = ln2_terms(10);
        assert!((levin_u(&t).unwrap() - 2f64.ln()).abs() <= 1e-9);
        assert!((levin_t(&t).unwrap() - 2f64.ln()).abs() <= 1e-9);
    }

    #[test]
    fn levin_terminating_sequence_is_exact() {
        assert_eq!(levin_u(&[2.5, 0.0, 0.0, 0.0]).unwrap(), 2.5);
        assert_eq!(levin_t(&[1.0, 0.5, 0.0, 0.0]).unwrap(), 1.5);
    }

    #[test]
    fn monotone_order_quality_on_ln2() {
        let s = partial_sums(&ln2_terms(14));
        let t = ln2_terms(14);
        let err_eps = |k: usize| (wynn_epsilon(&s[..=k]).best - 2f64.ln()).abs();
        let err_lu = |k: usize| (levin(&s[..=k], &t[..=k], 0, LevinVariant::U).unwrap() - 2f64.ln()).abs();
        for k in 2..=8 {
            assert!(err_eps(k + 2) <= err_eps(k), "ε order {k}");
            assert!(err_lu(k + 2) <= err_lu(k), "Levin order {k}");
        }
    }

    #[test]
    fn theta_on_ln2_improves() {
        let s = partial_sums(&ln2_terms(12));
        let acc = (brezinski_theta(&s).unwrap() - 2f64.ln()).abs();
        assert!(acc < 1e-6, "{acc}");
    }

    proptest! {
        #[test]
        fn epsilon_geometric_exact(q in prop_oneof![-0.95f64..-0.05, 0.05f64..0.95, -4.0f64..-1.1], n in 3usize..9) {
            let s: Vec<f64> = (0..n).map(|k| (1.0 - q.powi(k as i32 + 1)) / (1.0 - q)).collect();
            let best = wynn_epsilon(&s).best;
            prop_assert!((best - 1.0 / (1.0 - q)).abs() <= 1e-12 * (1.0 / (1.0 - q)).abs().max(1.0));
        }

        #[test]
        fn translation_invariance(c in -10.0f64..10.0, n in 5usize..12) {
            let t = ln2_terms(n);
            let s = partial_sums(&t);
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            let e0 = wynn_epsilon(&s).best;
            let e1 = wynn_epsilon(&shifted).best;
            prop_assert!((e1 - (e0 + c)).abs() <= 1e-12 * (1.0 + c.abs()) * 10.0);
            for v in [LevinVariant::U, LevinVariant::T] {
                let l0 = levin(&s, &t, 0, v).unwrap();
                let l1 = levin(&shifted, &t, 0, v).unwrap();
                prop_assert!((l1 - (l0 + c)).abs() <= 1e-12 * (1.0 + c.abs()));
            }
        }
    }

    #[test]
    fn accelerate_report_does_not_degrade_converged_stream() {
        let s: Vec<f64> = (0..20).map(|k| 1.0 - 1e-16 * k as f64).collect();
        let r = ConvergenceReport::new("flat", (0..20).collect(), s).with_reference(1.0);
        let a = accelerate_report(&r, Transformer::Epsilon, 10);
        let last = a.accelerated.unwrap().values[19].unwrap();
        assert!((last - 1.0).abs() <= 10.0 * (r.last() - 1.0).abs().max(1e-16));
    }

    #[test]
    fn plateau_detection() {
        assert!(plateau(&[1.0, 1.0 + 1e-8, 1.0 - 1e-8], 1e-6).is_some());
        assert!(plateau(&[11.2, 12.6, 14.1], 1e-6).is_none());
    }
}
