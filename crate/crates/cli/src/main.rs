//! `solharm`: batch front end for solharm-core.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or a
//! computation is refused, 2 on configuration errors.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::Failure;
use config::{Command, ConfigError, FilterConfig, Format, RunConfig, SystemConfig};

#[derive(Debug, Parser)]
#[command(name = "solharm", version, about = "Wavelet representations on solenoids: tables, sweeps and checks")]
struct Args {
    /// Command to run; may also come from the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline JSON run configuration.
    #[arg(long, conflicts_with = "config")]
    config_json: Option<String>,
    /// Bundled filter: haar, constant or d4.
    #[arg(long)]
    filter: Option<String>,
    /// Branching N of the circle map.
    #[arg(long = "N")]
    n: Option<u32>,
    /// Quadrature panels.
    #[arg(long)]
    panels: Option<usize>,
    #[arg(long)]
    root: Option<f64>,
    /// Comma-separated roots for the tree-based checks.
    #[arg(long, value_delimiter = ',')]
    roots: Option<Vec<f64>>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Arc list `a,b;c,d`.
    #[arg(long, allow_hyphen_values = true)]
    b0: Option<String>,
    /// Arc list `a,b;c,d`.
    #[arg(long, allow_hyphen_values = true)]
    a0: Option<String>,
    /// Comma-separated visit exponents.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Decay rate to audit against the fitted rate.
    #[arg(long)]
    b: Option<f64>,
    /// Check suite name or `all`.
    #[arg(long)]
    suite: Option<String>,
    /// p-harmonic, additive or qmf-weight.
    #[arg(long)]
    role: Option<String>,
    /// nu0 or random.
    #[arg(long)]
    source: Option<String>,
}

impl Args {
    fn into_config(self) -> Result<RunConfig, ConfigError> {
        let mut c = match (&self.config, &self.config_json) {
            (Some(path), _) => RunConfig::from_file(path)?,
            (None, Some(text)) => RunConfig::from_json(text)?,
            (None, None) => RunConfig::default(),
        };
        if self.command.is_some() {
            c.command = self.command;
        }
        if let Some(f) = self.filter {
            c.filter = FilterConfig::Named(f);
        }
        if self.n.is_some() || self.panels.is_some() {
            let SystemConfig::Circle { n, panels } = &mut c.system else {
                return Err(ConfigError::new("system.kind", "--N and --panels apply to circle systems"));
            };
            *n = self.n.unwrap_or(*n);
            *panels = self.panels.unwrap_or(*panels);
        }
        let p = &mut c.params;
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { p.$field = v; })* };
        }
        set!(root, roots, samples, length, paths, b0, a0, m, suite, role, source);
        if self.depth.is_some() {
            p.depth = self.depth;
        }
        if self.b.is_some() {
            p.b = self.b;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.out.is_some() {
            c.output.path = self.out;
        }
        if self.format.is_some() {
            c.output.format = self.format;
        }
        Ok(c)
    }
}

fn threads_from_env() -> Result<(), ConfigError> {
    let Ok(value) = std::env::var("SOLHARM_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::new("SOLHARM_THREADS", format!("`{value}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::new("SOLHARM_THREADS", e))
}

fn write_output(path: Option<&PathBuf>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let validated = threads_from_env().and_then(|_| args.into_config()).and_then(|c| c.validate());
    let v = match validated {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let output = match commands::run(&v) {
        Ok(o) => o,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_output(v.output.path.as_ref(), &output.text) {
        eprintln!("config error: config key `output.path`: {e}");
        return ExitCode::from(2);
    }
    if output.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for name in &output.failed {
            eprintln!("failed check: {name}");
        }
        ExitCode::from(1)
    }
}
