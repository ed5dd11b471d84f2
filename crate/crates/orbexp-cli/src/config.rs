//! Study configuration: a typed key=value map merged from a file and flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use orbexp::accel::Transformer;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Study {
    Orthonormality,
    Transforms,
    Expand,
    Addition,
    Coulomb,
    Diverge,
    Accelerate,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Orthonormality => "orthonormality",
            Study::Transforms => "transforms",
            Study::Expand => "expand",
            Study::Addition => "addition",
            Study::Coulomb => "coulomb",
            Study::Diverge => "diverge",
            Study::Accelerate => "accelerate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Lambda,
    Guseinov,
    Sturmian,
    SturmianSobolev,
    Oscillator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Probe {
    InversePower,
    Rearrangement,
    OneCenter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    Laguerre,
    Coulomb,
    Ln2,
    Rearrangement,
}

/// Every accepted key with its documented default.
pub const KEYS: &[(&str, &str)] = &[
    ("family", "basis family: lambda, guseinov, sturmian, sturmian-sobolev, oscillator (default lambda)"),
    ("k", "Guseinov weight order (default 0; transforms sweeps -1..2 when unset)"),
    ("beta", "basis scaling parameter (default 1; coulomb defaults to zeta)"),
    ("n_max", "largest principal quantum number or series order (default per study)"),
    ("ell_max", "largest angular momentum (default 3)"),
    ("x", "evaluation point, exponent ratio or shift (default per study)"),
    ("mu", "power of x (default 0.5; diverge defaults to -1)"),
    ("alpha", "Laguerre superscript (default 2)"),
    ("u", "exponential rate in x^mu e^(u x) (default 0)"),
    ("zeta", "1s orbital exponent (default 1)"),
    ("shells", "Coulomb shells n + n' (default 20)"),
    ("target", "Lambda target N,L,M for the addition study (default 1,0,0)"),
    ("probe", "divergence probe: inverse-power, rearrangement, one-center (default inverse-power)"),
    ("principal", "principal quantum number N of the one-center probe (default 1.5)"),
    ("series", "series to accelerate: laguerre, coulomb, ln2, rearrangement (default laguerre)"),
    ("method", "sequence transformation: none, epsilon, levin-u, levin-t, theta (default none; accelerate: epsilon)"),
    ("order", "transformation window (default 10)"),
    ("tol", "pass threshold echoed in the sidecar (default 1e-10; coulomb 1e-4)"),
    ("seed", "seed for sample-point selection (default 42)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Normalize `n-max` and `n_max` to one spelling.
pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parse a `key = value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected key=value, got {raw:?}", i + 1));
        };
        let key = normalize_key(k);
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return err(format!("line {}: duplicate key {key}", i + 1));
        }
    }
    Ok(out)
}

/// Resolved, typed parameters of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub study: Study,
    pub family: Family,
    pub k: Option<i32>,
    pub beta: Option<f64>,
    pub n_max: i32,
    pub ell_max: i32,
    pub x: f64,
    pub mu: f64,
    pub alpha: f64,
    pub u: f64,
    pub zeta: f64,
    pub shells: i32,
    pub target: (i32, i32, i32),
    pub probe: Probe,
    pub principal: f64,
    pub series: Series,
    pub method: Option<Transformer>,
    pub order: usize,
    pub tol: f64,
    pub seed: u64,
    pub output_path: PathBuf,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse::<T>().map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}")))
}

fn parse_finite(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = parse_num(key, v)?;
    if !x.is_finite() {
        return err(format!("{key}: must be finite, got {v}"));
    }
    Ok(x)
}

fn parse_method(v: &str) -> Result<Option<Transformer>, ConfigError> {
    Ok(match v {
        "none" => None,
        "epsilon" => Some(Transformer::Epsilon),
        "levin-u" => Some(Transformer::LevinU),
        "levin-t" => Some(Transformer::LevinT),
        "theta" => Some(Transformer::Theta),
        _ => return err(format!("method: unknown transformation {v:?}")),
    })
}

impl StudyConfig {
    /// Apply defaults, then every entry of `map`; unknown keys are an error.
    pub fn from_map(study: Study, map: &BTreeMap<String, String>, output_path: PathBuf) -> Result<Self, ConfigError> {
        for key in map.keys() {
            if !KEYS.iter().any(|(k, _)| k == key) {
                return err(format!("unknown key {key:?}"));
            }
        }
        let n_max = match study {
            Study::Orthonormality | Study::Transforms => 6,
            Study::Expand => 100,
            Study::Addition => 16,
            Study::Diverge => 200,
            Study::Accelerate => 20,
            Study::Coulomb => 0,
        };
        let x = match study {
            Study::Addition => 0.5,
            Study::Diverge => 1e-3,
            _ => 2.0,
        };
        let mut c = StudyConfig {
            study,
            family: Family::Lambda,
            k: None,
            beta: None,
            n_max,
            ell_max: 3,
            x,
            mu: if study == Study::Diverge { -1.0 } else { 0.5 },
            alpha: 2.0,
            u: 0.0,
            zeta: 1.0,
            shells: 20,
            target: (1, 0, 0),
            probe: Probe::InversePower,
            principal: 1.5,
            series: Series::Laguerre,
            method: if study == Study::Accelerate { Some(Transformer::Epsilon) } else { None },
            order: 10,
            tol: if study == Study::Coulomb { 1e-4 } else { 1e-10 },
            seed: 42,
            output_path,
        };
        for (key, v) in map {
            let v = v.as_str();
            match key.as_str() {
                "family" => {
                    c.family = match v {
                        "lambda" => Family::Lambda,
                        "guseinov" => Family::Guseinov,
                        "sturmian" => Family::Sturmian,
                        "sturmian-sobolev" => Family::SturmianSobolev,
                        "oscillator" => Family::Oscillator,
                        _ => return err(format!("family: unknown basis {v:?}")),
                    }
                }
                "k" => c.k = Some(parse_num(key, v)?),
                "beta" => {
                    let b = parse_finite(key, v)?;
                    if b <= 0.0 {
                        return err(format!("beta: must be positive, got {v}"));
                    }
                    c.beta = Some(b);
                }
                "n_max" => c.n_max = parse_num(key, v)?,
                "ell_max" => c.ell_max = parse_num(key, v)?,
                "x" => c.x = parse_finite(key, v)?,
                "mu" => c.mu = parse_finite(key, v)?,
                "alpha" => c.alpha = parse_finite(key, v)?,
                "u" => c.u = parse_finite(key, v)?,
                "zeta" => {
                    c.zeta = parse_finite(key, v)?;
                    if c.zeta <= 0.0 {
                        return err(format!("zeta: must be positive, got {v}"));
                    }
                }
                "shells" => c.shells = parse_num(key, v)?,
                "target" => {
                    let parts: Vec<&str> = v.split(',').collect();
                    if parts.len() != 3 {
                        return err(format!("target: expected N,L,M, got {v:?}"));
                    }
                    c.target = (parse_num(key, parts[0])?, parse_num(key, parts[1])?, parse_num(key, parts[2])?);
                }
                "probe" => {
                    c.probe = match v {
                        "inverse-power" => Probe::InversePower,
                        "rearrangement" => Probe::Rearrangement,
                        "one-center" => Probe::OneCenter,
                        _ => return err(format!("probe: unknown probe {v:?}")),
                    }
                }
                "principal" => c.principal = parse_finite(key, v)?,
                "series" => {
                    c.series = match v {
                        "laguerre" => Series::Laguerre,
                        "coulomb" => Series::Coulomb,
                        "ln2" => Series::Ln2,
                        "rearrangement" => Series::Rearrangement,
                        _ => return err(format!("series: unknown series {v:?}")),
                    }
                }
                "method" => c.method = parse_method(v)?,
                "order" => c.order = parse_num(key, v)?,
                "tol" => {
                    c.tol = parse_finite(key, v)?;
                    if c.tol <= 0.0 {
                        return err(format!("tol: must be positive, got {v}"));
                    }
                }
                "seed" => c.seed = parse_num(key, v)?,
                _ => unreachable!("keys were checked above"),
            }
        }
        if c.n_max < 0 || c.ell_max < 0 || c.shells < 1 {
            return err("n_max and ell_max must be nonnegative and shells positive");
        }
        Ok(c)
    }

    pub fn beta_or(&self, default: f64) -> f64 {
        self.beta.unwrap_or(default)
    }

    /// Full echo of the resolved configuration.
    pub fn echo(&self) -> Value {
        let family = match self.family {
            Family::Lambda => "lambda",
            Family::Guseinov => "guseinov",
            Family::Sturmian => "sturmian",
            Family::SturmianSobolev => "sturmian-sobolev",
            Family::Oscillator => "oscillator",
        };
        let probe = match self.probe {
            Probe::InversePower => "inverse-power",
            Probe::Rearrangement => "rearrangement",
            Probe::OneCenter => "one-center",
        };
        let series = match self.series {
            Series::Laguerre => "laguerre",
            Series::Coulomb => "coulomb",
            Series::Ln2 => "ln2",
            Series::Rearrangement => "rearrangement",
        };
        json!({
            "study": self.study.name(),
            "family": family,
            "k": self.k,
            "beta": self.beta,
            "n_max": self.n_max,
            "ell_max": self.ell_max,
            "x": self.x,
            "mu": self.mu,
            "alpha": self.alpha,
            "u": self.u,
            "zeta": self.zeta,
            "shells": self.shells,
            "target": [self.target.0, self.target.1, self.target.2],
            "probe": probe,
            "principal": self.principal,
            "series": series,
            "method": self.method.map(|m| m.name()),
            "order": self.order,
            "tol": self.tol,
            "seed": self.seed,
            "output_path": self.output_path.display().to_string(),
        })
    }
}
