//! `orbexp`: run a named convergence study and write `<study>.csv` and `<study>.json`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical nonconvergence
//! (a partial report is still written).

mod config;
mod studies;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use config::{normalize_key, parse_config_text, ConfigError, Study, StudyConfig, KEYS};
use studies::{Failure, Output};

#[derive(Parser, Debug)]
#[command(name = "orbexp", version, about = "Convergence studies for one-range expansions", allow_negative_numbers = true)]
struct Cli {
    /// Study to run.
    #[arg(value_enum)]
    study: Study,
    /// key=value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Extra KEY=VALUE parameter (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long = "n-max")]
    n_max: Option<String>,
    #[arg(long = "ell-max")]
    ell_max: Option<String>,
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    u: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    shells: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    probe: Option<String>,
    #[arg(long)]
    principal: Option<String>,
    #[arg(long)]
    series: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl Cli {
    fn flag_entries(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("family", &self.family),
            ("k", &self.k),
            ("beta", &self.beta),
            ("n_max", &self.n_max),
            ("ell_max", &self.ell_max),
            ("x", &self.x),
            ("mu", &self.mu),
            ("alpha", &self.alpha),
            ("u", &self.u),
            ("zeta", &self.zeta),
            ("shells", &self.shells),
            ("target", &self.target),
            ("probe", &self.probe),
            ("principal", &self.principal),
            ("series", &self.series),
            ("method", &self.method),
            ("order", &self.order),
            ("tol", &self.tol),
            ("seed", &self.seed),
        ]
    }
}

fn resolve(cli: &Cli) -> Result<StudyConfig, ConfigError> {
    let mut map = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for kv in &cli.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(ConfigError(format!("--set expects KEY=VALUE, got {kv:?}")));
        };
        map.insert(normalize_key(k), v.trim().to_string());
    }
    for (k, v) in cli.flag_entries() {
        if let Some(v) = v {
            map.insert(k.to_string(), v.clone());
        }
    }
    StudyConfig::from_map(cli.study, &map, cli.out.clone())
}

fn threads() -> Result<Option<usize>, ConfigError> {
    match std::env::var("ORBEXP_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError(format!("ORBEXP_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn write_outputs(dir: &Path, c: &StudyConfig, out: &Output, status: &str, error: Option<&str>, threads: Option<usize>) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let name = c.study.name();
    fs::write(dir.join(format!("{name}.csv")), &out.csv)?;
    let sidecar = json!({
        "study": name,
        "status": status,
        "error": error,
        "config": c.echo(),
        "summary": Value::Object(out.summary.clone()),
        "notes": out.notes,
        "library_version": orbexp::VERSION,
        "cli_version": env!("CARGO_PKG_VERSION"),
        "threads": threads,
        "csv_dialect": "comma-separated, '.' decimal, 17 significant digits",
    });
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(dir.join(format!("{name}.json")), text + "\n")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code == 1 {
                eprintln!("accepted keys:");
                for (k, d) in KEYS {
                    eprintln!("  {k}: {d}");
                }
            }
            return ExitCode::from(code);
        }
    };
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("orbexp: config error: {e}");
            return ExitCode::from(1);
        }
    };
    let threads = match threads() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("orbexp: config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("orbexp: cannot size thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let (out, status, error, code) = match studies::run(&config) {
        Ok(out) => (out, "ok", None, 0),
        Err(Failure::Config(msg)) => {
            eprintln!("orbexp: config error: {msg}");
            return ExitCode::from(1);
        }
        Err(Failure::Numerical { message, partial }) => (partial, "nonconvergence", Some(message), 2),
    };
    if let Err(e) = write_outputs(&config.output_path, &config, &out, status, error.as_deref(), threads) {
        eprintln!("orbexp: cannot write outputs to {}: {e}", config.output_path.display());
        return ExitCode::from(1);
    }
    match &error {
        Some(msg) => eprintln!("orbexp: {}: nonconvergence: {msg} (partial report written)", config.study.name()),
        None => println!(
            "orbexp: {} done; wrote {}",
            config.study.name(),
            config.output_path.join(format!("{}.csv", config.study.name())).display()
        ),
    }
    ExitCode::from(code)
}
