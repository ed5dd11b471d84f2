//! Convergence reports shared by the expansion, addition and acceleration studies.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
    Stagnant,
    /// Finitely many nonzero terms.
    Terminating,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converging => "converging",
            Verdict::Diverging => "diverging",
            Verdict::Stagnant => "stagnant",
            Verdict::Terminating => "terminating",
        }
    }
}

/// Transformed estimates attached to a report, one per order where available.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelColumn {
    pub method: String,
    pub order: usize,
    pub values: Vec<Option<f64>>,
    pub breakdown: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    /// Truncation index of every row.
    pub orders: Vec<usize>,
    pub partial_sums: Vec<f64>,
    /// |partial sum − reference| when a reference is known.
    pub partial_errors: Option<Vec<f64>>,
    /// Weighted-L² truncation errors, when meaningful.
    pub norm_errors: Option<Vec<f64>>,
    pub accelerated: Option<AccelColumn>,
    pub reference: Option<f64>,
    pub verdict: Verdict,
    /// True when the verdict comes from the growth heuristic rather than exact arithmetic.
    pub verdict_heuristic: bool,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    pub fn new(label: impl Into<String>, orders: Vec<usize>, partial_sums: Vec<f64>) -> Self {
        assert_eq!(orders.len(), partial_sums.len());
        let verdict = classify(&partial_sums);
        ConvergenceReport {
            label: label.into(),
            orders,
            partial_sums,
            partial_errors: None,
            norm_errors: None,
            accelerated: None,
            reference: None,
            verdict,
            verdict_heuristic: true,
            notes: Vec::new(),
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.partial_errors = Some(self.partial_sums.iter().map(|s| (s - reference).abs()).collect());
        self.reference = Some(reference);
        self
    }

    pub fn with_norm_errors(mut self, errs: Vec<f64>) -> Self {
        assert_eq!(errs.len(), self.orders.len());
        self.norm_errors = Some(errs);
        self
    }

    pub fn last(&self) -> f64 {
        *self.partial_sums.last().expect("empty report")
    }

    /// CSV with a header row; reals in round-trippable scientific notation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("order,partial_sum,partial_error,norm_error,accel_method,accel_order,accel_value,verdict\n");
        for i in 0..self.orders.len() {
            let pe = self.partial_errors.as_ref().map(|v| fmt_real(v[i])).unwrap_or_default();
            let ne = self.norm_errors.as_ref().map(|v| fmt_real(v[i])).unwrap_or_default();
            let (am, ao, av) = match &self.accelerated {
                Some(a) => (a.method.clone(), a.order.to_string(), a.values[i].map(fmt_real).unwrap_or_default()),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.orders[i],
                fmt_real(self.partial_sums[i]),
                pe,
                ne,
                am,
                ao,
                av,
                self.verdict.as_str()
            ));
        }
        out
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Growth heuristic over the last ten partial sums.
///
/// |S_N| / |S_{N−10}| above 1.01 means diverging; below 0.99, or a stalled
/// difference, means converging. Anything else is stagnant.
pub fn classify(s: &[f64]) -> Verdict {
    let n = s.len();
    if n < 2 {
        return Verdict::Stagnant;
    }
    let w = 10.min(n - 1);
    let last = s[n - 1];
    let back = s[n - 1 - w];
    if s[n - 1 - w..].iter().all(|&v| v == last) {
        return Verdict::Converging;
    }
    let scale = last.abs().max(back.abs());
    let max_step = s[n - 1 - w..].windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max);
    if max_step <= 1e-10 * scale.max(1e-300) {
        return Verdict::Converging;
    }
    if back == 0.0 {
        return Verdict::Stagnant;
    }
    let g = last.abs() / back.abs();
    if g > 1.01 {
        Verdict::Diverging
    } else if g < 0.99 {
        Verdict::Converging
    } else {
        let d1 = (s[n - 1] - s[n - 2]).abs();
        let d0 = (s[n - 1 - w + 1] - s[n - 1 - w]).abs();
        if d1 < d0 {
            Verdict::Converging
        } else {
            Verdict::Stagnant
        }
    }
}
