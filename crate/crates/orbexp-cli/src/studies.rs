//! Study runners. Each returns CSV text plus a JSON summary.

use orbexp::accel::accelerate_report;
use orbexp::addition::{
    addition_grid_error, coulomb_1s_study, laplace_coulomb, log_error_slope, one_center_nonexistence_probe,
    symmetric_coeffs_lambda, INNER_TOLERANCE, OUTER_TOLERANCE,
};
use orbexp::basis::{
    bfun_radial, eval_radial, gram_matrix, gram_quadrature, sobolev_gram_sturmian, stf_radial, BasisSpec, QuantumIndex,
    WeightSpec,
};
use orbexp::expansions::{inverse_power_divergence_probe, power_laguerre_report, rearrangement_probe, RadialSeriesSpec};
use orbexp::report::{fmt_real, ConvergenceReport};
use orbexp::special::norm3;
use orbexp::transforms::{
    bfun_to_guseinov, bfun_to_lambda, guseinov_to_bfun, guseinov_to_lambda, guseinov_to_stf, lambda_to_bfun, lambda_to_guseinov,
    power_times_bfun, reconstruction_radii, stf_to_bfun, stf_to_lambda, CoeffTensor,
};
use orbexp::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::{Family, Probe, Series, Study, StudyConfig};

/// CSV text and sidecar summary of one study, possibly partial.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub csv: String,
    pub summary: Map<String, Value>,
    pub notes: Vec<String>,
}

impl Output {
    fn with_header(header: &str) -> Self {
        Output { csv: format!("{header}\n"), ..Default::default() }
    }

    fn row(&mut self, fields: &[String]) {
        self.csv.push_str(&fields.join(","));
        self.csv.push('\n');
    }

    fn set(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }
}

/// Why a study stopped.
#[derive(Debug)]
pub enum Failure {
    /// Parameters outside the domain of an operation.
    Config(String),
    /// A numerical method failed to converge; the partial output is kept.
    Numerical { message: String, partial: Output },
}

fn fail(e: Error, partial: &Output) -> Failure {
    match e {
        Error::Nonconvergence { .. } | Error::Breakdown(_) => Failure::Numerical { message: e.to_string(), partial: partial.clone() },
        other => Failure::Config(other.to_string()),
    }
}

pub fn run(c: &StudyConfig) -> Result<Output, Failure> {
    match c.study {
        Study::Orthonormality => orthonormality(c),
        Study::Transforms => transforms(c),
        Study::Expand => expand(c),
        Study::Addition => addition(c),
        Study::Coulomb => coulomb(c),
        Study::Diverge => diverge(c),
        Study::Accelerate => accelerate(c),
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn orthonormality(c: &StudyConfig) -> Result<Output, Failure> {
    let beta = c.beta_or(1.0);
    let k = c.k.unwrap_or(0);
    let mut out = Output::with_header("l,n,n_prime,value,target,deviation,n_max");
    let (spec, weight) = match c.family {
        Family::Lambda => (BasisSpec::lambda(beta), WeightSpec::Power(0)),
        Family::Guseinov => (BasisSpec::guseinov(k, beta), WeightSpec::Power(k)),
        Family::Sturmian => (BasisSpec::sturmian(beta), WeightSpec::Power(-1)),
        Family::SturmianSobolev => (BasisSpec::sturmian(beta), WeightSpec::Sobolev { eta: beta }),
        Family::Oscillator => (BasisSpec::oscillator(beta), WeightSpec::Power(0)),
    };
    let (mut max_dev, mut max_off) = (0.0f64, 0.0f64);
    for ell in 0..=c.ell_max.min(c.n_max - 1) {
        let g = match c.family {
            Family::SturmianSobolev => sobolev_gram_sturmian(beta, c.n_max, ell),
            _ => gram_matrix(&spec, weight, c.n_max, ell, 0),
        }
        .map_err(|e| fail(e, &out))?;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let (n, np) = (ell + 1 + i as i32, ell + 1 + j as i32);
                let target = match (i == j, c.family) {
                    (false, _) => 0.0,
                    (true, Family::Sturmian) => beta / n as f64,
                    (true, _) => 1.0,
                };
                let dev = (g[(i, j)] - target).abs();
                max_dev = max_dev.max(dev);
                if i != j {
                    max_off = max_off.max(dev);
                }
                out.row(&[ell.to_string(), n.to_string(), np.to_string(), fmt_real(g[(i, j)]), fmt_real(target), fmt_real(dev), c.n_max.to_string()]);
            }
        }
    }
    let q = gram_quadrature();
    out.set("max_deviation", num(max_dev));
    out.set("max_off_diagonal", num(max_off));
    out.set("passed", json!(max_dev <= c.tol));
    out.set("tolerances", json!({"pass": c.tol, "quadrature_abs": q.abs_tol, "quadrature_rel": q.rel_tol}));
    if c.family == Family::Sturmian {
        out.notes.push("Sturmians are orthogonal under 1/r with diagonal beta/n".into());
    }
    Ok(out)
}

fn identity_error(t: &CoeffTensor, q: QuantumIndex) -> f64 {
    let mut worst: f64 = (t.get(q) - 1.0).abs();
    for (p, v) in t.iter() {
        if p != q {
            worst = worst.max(v.abs());
        }
    }
    worst
}

fn transforms(c: &StudyConfig) -> Result<Output, Failure> {
    let b = c.beta_or(1.0);
    let radii = reconstruction_radii(b);
    let ks: Vec<i32> = match c.k {
        Some(k) => vec![k],
        None => (-1..=2).collect(),
    };
    let mut out = Output::with_header("kind,transform,k,n,l,terms,error");
    let mut worst = (0.0f64, 0.0f64);
    let radial = |spec: BasisSpec, n: i32, ell: i32| move |r: f64| eval_radial(&spec, QuantumIndex::new(n, ell, 0), r).unwrap_or(f64::NAN);
    for n in 1..=c.n_max {
        for ell in 0..n.min(c.ell_max + 1) {
            let q = QuantumIndex::new(n, ell, 0);
            let mut recon: Vec<(String, Option<i32>, orbexp::Result<CoeffTensor>, Box<dyn Fn(f64) -> f64>)> = vec![
                ("lambda->bfun".into(), None, lambda_to_bfun(n, ell, b), Box::new(radial(BasisSpec::lambda(b), n, ell))),
                ("bfun->lambda".into(), None, bfun_to_lambda(n, ell, b), Box::new(radial(BasisSpec::bfun(b), n, ell))),
                ("stf->lambda".into(), None, stf_to_lambda(n, ell, b), Box::new(move |r| stf_radial(n as f64, ell, b, r).unwrap_or(f64::NAN))),
                ("stf->bfun".into(), None, stf_to_bfun(n, ell, b), Box::new(move |r| stf_radial(n as f64, ell, b, r).unwrap_or(f64::NAN))),
            ];
            for &k in &ks {
                let g = BasisSpec::guseinov(k, b);
                recon.push(("lambda->guseinov".into(), Some(k), lambda_to_guseinov(k, n, ell, b), Box::new(radial(BasisSpec::lambda(b), n, ell))));
                recon.push(("guseinov->lambda".into(), Some(k), guseinov_to_lambda(k, n, ell, b), Box::new(radial(g, n, ell))));
                recon.push(("guseinov->bfun".into(), Some(k), guseinov_to_bfun(k, n, ell, b), Box::new(radial(g, n, ell))));
                recon.push(("guseinov->stf".into(), Some(k), guseinov_to_stf(k, n, ell, b), Box::new(radial(g, n, ell))));
                recon.push(("bfun->guseinov".into(), Some(k), bfun_to_guseinov(k, n, ell, b), Box::new(radial(BasisSpec::bfun(b), n, ell))));
            }
            for s in -1..=2 {
                recon.push((
                    format!("r^{s}*bfun"),
                    None,
                    power_times_bfun(s, n, ell, b),
                    Box::new(move |r: f64| r.powi(s) * bfun_radial(n, ell, b, r).unwrap_or(f64::NAN)),
                ));
            }
            for (name, k, t, f) in recon {
                let t = t.map_err(|e| fail(e, &out))?;
                let e = t.reconstruction_error(f, &radii).map_err(|e| fail(e, &out))?;
                worst.0 = worst.0.max(e);
                let ks = k.map(|k| k.to_string()).unwrap_or_default();
                out.row(&["reconstruction".into(), name, ks, n.to_string(), ell.to_string(), t.len().to_string(), fmt_real(e)]);
            }
            let mut trips: Vec<(String, Option<i32>, orbexp::Result<CoeffTensor>)> = vec![
                ("lambda->bfun->lambda".into(), None, lambda_to_bfun(n, ell, b).and_then(|t| t.compose(|p| bfun_to_lambda(p.n, p.ell, b)))),
                ("bfun->lambda->bfun".into(), None, bfun_to_lambda(n, ell, b).and_then(|t| t.compose(|p| lambda_to_bfun(p.n, p.ell, b)))),
            ];
            for &k in &ks {
                trips.push((
                    "lambda->guseinov->lambda".into(),
                    Some(k),
                    lambda_to_guseinov(k, n, ell, b).and_then(|t| t.compose(|p| guseinov_to_lambda(k, p.n, p.ell, b))),
                ));
                trips.push((
                    "guseinov->lambda->guseinov".into(),
                    Some(k),
                    guseinov_to_lambda(k, n, ell, b).and_then(|t| t.compose(|p| lambda_to_guseinov(k, p.n, p.ell, b))),
                ));
                trips.push((
                    "bfun->guseinov->bfun".into(),
                    Some(k),
                    bfun_to_guseinov(k, n, ell, b).and_then(|t| t.compose(|p| guseinov_to_bfun(k, p.n, p.ell, b))),
                ));
            }
            for (name, k, t) in trips {
                let t = t.map_err(|e| fail(e, &out))?;
                let e = identity_error(&t, q);
                worst.1 = worst.1.max(e);
                let ks = k.map(|k| k.to_string()).unwrap_or_default();
                out.row(&["round_trip".into(), name, ks, n.to_string(), ell.to_string(), t.len().to_string(), fmt_real(e)]);
            }
        }
    }
    out.set("max_reconstruction_error", num(worst.0));
    out.set("max_round_trip_error", num(worst.1));
    out.set("passed", json!(worst.0 <= c.tol && worst.1 <= c.tol));
    out.set("tolerances", json!({"pass": c.tol, "radii": radii.len()}));
    Ok(out)
}

fn report_output(rep: &ConvergenceReport) -> Output {
    let mut out = Output { csv: rep.to_csv(), ..Default::default() };
    let first = rep.partial_sums.first().copied().unwrap_or(f64::NAN);
    out.set("label", json!(rep.label));
    out.set("first_partial_sum", num(first));
    out.set("final_partial_sum", num(rep.last()));
    out.set("final_order", json!(rep.orders.last()));
    out.set("verdict", json!(rep.verdict.as_str()));
    out.set("verdict_heuristic", json!(rep.verdict_heuristic));
    if let Some(r) = rep.reference {
        out.set("reference", num(r));
        out.set("final_error", num((rep.last() - r).abs()));
    }
    if let Some(ne) = rep.norm_errors.as_ref().and_then(|v| v.last()) {
        out.set("final_norm_error", num(*ne));
    }
    if let Some(acc) = &rep.accelerated {
        let last = acc.values.iter().rev().flatten().next().copied();
        out.set("accelerated_method", json!(acc.method));
        out.set("accelerated_order", json!(acc.order));
        out.set("accelerated_breakdown", json!(acc.breakdown));
        if let Some(v) = last {
            out.set("accelerated_final", num(v));
            if let Some(r) = rep.reference {
                out.set("accelerated_final_error", num((v - r).abs()));
            }
        }
    }
    out.notes.extend(rep.notes.iter().cloned());
    out
}

fn maybe_accelerate(rep: ConvergenceReport, c: &StudyConfig) -> ConvergenceReport {
    match c.method {
        Some(m) => accelerate_report(&rep, m, c.order),
        None => rep,
    }
}

fn expand(c: &StudyConfig) -> Result<Output, Failure> {
    let empty = Output::default();
    let spec = RadialSeriesSpec::new(c.mu, c.u, c.alpha, c.n_max as usize).map_err(|e| fail(e, &empty))?;
    let rep = power_laguerre_report(&spec, c.x).map_err(|e| fail(e, &empty))?;
    let stopped = rep.orders.len() < c.n_max as usize + 1;
    let rep = maybe_accelerate(rep, c);
    let mut out = report_output(&rep);
    if stopped {
        out.notes.push(format!("terms fell below 1e-14 of the sum; stopped at order {}", rep.orders.last().unwrap_or(&0)));
    }
    Ok(out)
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = norm3(v);
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn addition(c: &StudyConfig) -> Result<Output, Failure> {
    const LAPLACE_L_MAX: i32 = 30;
    const LAPLACE_R: f64 = 2.5;
    let beta = c.beta_or(1.0);
    let (big_n, big_l, big_m) = c.target;
    let target = QuantumIndex::new(big_n, big_l, big_m);
    let mut out = Output::with_header("kind,order,value");
    let full = symmetric_coeffs_lambda(big_n, big_l, big_m, c.n_max, beta).map_err(|e| fail(e, &out))?;
    let rp = [0.0, 0.0, c.x / beta];
    let mut orders: Vec<i32> = std::iter::successors(Some(2), |o| Some(o * 2)).take_while(|o| *o < c.n_max).collect();
    orders.push(c.n_max);
    let mut errs = Vec::new();
    for &o in &orders {
        if o < big_n {
            continue;
        }
        let e = addition_grid_error(&full.truncated(o), target, rp).map_err(|e| fail(e, &out))?;
        errs.push(e);
        out.row(&["lambda_grid_l2".into(), o.to_string(), fmt_real(e)]);
    }
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (a, b) = (random_direction(&mut rng), random_direction(&mut rng));
    let ratio = (c.x / LAPLACE_R).min(0.9);
    let r = [LAPLACE_R * a[0], LAPLACE_R * a[1], LAPLACE_R * a[2]];
    let rpp = [LAPLACE_R * ratio * b[0], LAPLACE_R * ratio * b[1], LAPLACE_R * ratio * b[2]];
    let exact = 1.0 / norm3([r[0] - rpp[0], r[1] - rpp[1], r[2] - rpp[2]]);
    let lap = laplace_coulomb(r, rpp, LAPLACE_L_MAX).map_err(|e| fail(e, &out))?;
    let lerr: Vec<f64> = lap.partial_sums.iter().map(|s| (s - exact).abs()).collect();
    for (l, e) in lerr.iter().enumerate() {
        out.row(&["laplace_error".into(), l.to_string(), fmt_real(*e)]);
    }
    // Fit only above the roundoff floor.
    let above = lerr.iter().position(|e| *e < 1e-12).unwrap_or(lerr.len());
    let slope = log_error_slope(&lerr[..above.max(4)], -0.5);
    out.set("target", json!([big_n, big_l, big_m]));
    out.set("lambda_grid_errors", json!(errs.iter().map(|e| num(*e)).collect::<Vec<_>>()));
    out.set("lambda_grid_decreasing", json!(decreasing));
    out.set("laplace_ratio", num(ratio));
    out.set("laplace_slope", num(slope));
    out.set("laplace_expected_slope", num(ratio.ln()));
    out.set("tolerances", json!({"grid": "32 radii x 3 directions, mean square"}));
    Ok(out)
}

fn coulomb(c: &StudyConfig) -> Result<Output, Failure> {
    let k = c.k.unwrap_or(0);
    let beta = c.beta_or(c.zeta);
    let rep = coulomb_1s_study(c.zeta, k, beta, c.shells).map_err(|e| fail(e, &Output::default()))?;
    let rep = maybe_accelerate(rep, c);
    let mut out = report_output(&rep);
    let err = rep.reference.map(|r| (rep.last() - r).abs()).unwrap_or(f64::NAN);
    out.set("passed", json!(err <= c.tol * c.zeta));
    out.set(
        "tolerances",
        json!({
            "pass": c.tol,
            "inner_quadrature": INNER_TOLERANCE,
            "outer_quadrature": OUTER_TOLERANCE,
            "note": "absolute quadrature tolerances scale with L1 bounds of the integrands",
        }),
    );
    Ok(out)
}

fn diverge(c: &StudyConfig) -> Result<Output, Failure> {
    let n = c.n_max as usize;
    let k = c.k.unwrap_or(0);
    let empty = Output::default();
    let rep = match c.probe {
        Probe::InversePower => inverse_power_divergence_probe(c.x, c.alpha, n),
        Probe::Rearrangement => rearrangement_probe(c.mu, k, n),
        Probe::OneCenter => one_center_nonexistence_probe(c.principal, k, n),
    }
    .map_err(|e| fail(e, &empty))?;
    Ok(report_output(&maybe_accelerate(rep, c)))
}

fn accelerate(c: &StudyConfig) -> Result<Output, Failure> {
    let n = c.n_max as usize;
    let empty = Output::default();
    let rep = match c.series {
        Series::Laguerre => {
            let spec = RadialSeriesSpec::new(c.mu, c.u, c.alpha, n).map_err(|e| fail(e, &empty))?;
            power_laguerre_report(&spec, c.x)
        }
        Series::Coulomb => coulomb_1s_study(c.zeta, c.k.unwrap_or(0), c.beta_or(c.zeta), c.shells),
        Series::Ln2 => {
            let mut s = 0.0;
            let sums: Vec<f64> = (0..=n)
                .map(|i| {
                    s += if i % 2 == 0 { 1.0 } else { -1.0 } / (i + 1) as f64;
                    s
                })
                .collect();
            Ok(ConvergenceReport::new("alternating ln 2", (0..=n).collect(), sums).with_reference(2f64.ln()))
        }
        Series::Rearrangement => rearrangement_probe(c.mu, c.k.unwrap_or(0), n),
    }
    .map_err(|e| fail(e, &empty))?;
    Ok(report_output(&maybe_accelerate(rep, c)))
}
