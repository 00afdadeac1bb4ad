//! Run configuration: a JSON document, optionally overridden by flags.

use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use solharm_core::checks::{Suite, VerifyConfig};
use solharm_core::dynsys::DEFAULT_PANELS;
use solharm_core::{AbstractTree, ArcSet, FilterSpec, Role, SystemSpec};

/// A configuration problem, reported with the key that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError { key: key.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Tree,
    Walk,
    Martin,
    Harmonic,
    Lyapunov,
    Decay,
    Decompose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemConfig {
    Circle {
        #[serde(rename = "N")]
        n: u32,
        #[serde(default = "default_panels")]
        panels: usize,
    },
    Tree {
        children: Vec<Vec<usize>>,
        weights: Vec<f64>,
    },
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::Circle { n: 2, panels: DEFAULT_PANELS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterConfig {
    Named(String),
    Custom {
        name: String,
        /// h_0, …, h_K as [re, im] pairs.
        coefficients: Vec<[f64; 2]>,
    },
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig::Named("haar".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub root: f64,
    pub roots: Vec<f64>,
    /// Tree depth; commands pick their own default when absent.
    pub depth: Option<usize>,
    pub samples: usize,
    pub length: usize,
    pub paths: usize,
    /// Arc list "a,b;c,d" for the domain-shift statistic.
    pub b0: String,
    /// Arc list for the visit-probability sweep.
    pub a0: String,
    /// Visit-probability exponents.
    pub m: Vec<usize>,
    /// Optional decay rate b to audit against the fitted rate.
    pub b: Option<f64>,
    pub suite: String,
    pub role: String,
    /// `nu0` (the walk's own measure) or `random`.
    pub source: String,
}

impl Default for Params {
    fn default() -> Self {
        let v = VerifyConfig::default();
        Params {
            root: 0.123_447_785_1,
            roots: v.roots,
            depth: None,
            samples: v.samples,
            length: v.length,
            paths: 10,
            b0: "0,0.45;0.55,1".into(),
            a0: "0.4,0.6".into(),
            m: (3..=10).collect(),
            b: None,
            suite: "all".into(),
            role: "p-harmonic".into(),
            source: "nu0".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    /// CSV for tables and JSON lines for check reports when absent.
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub filter: FilterConfig,
    pub command: Option<Command>,
    pub seed: u64,
    pub params: Params,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemConfig::default(),
            filter: FilterConfig::default(),
            command: None,
            seed: 7,
            params: Params::default(),
            output: OutputConfig::default(),
        }
    }
}

fn default_panels() -> usize {
    DEFAULT_PANELS
}

impl RunConfig {
    /// Parses a JSON document; errors carry the dotted path of the bad key.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "<document>".to_string() } else { path };
            ConfigError::new(key, e.into_inner())
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// A configuration checked against the library's preconditions.
#[derive(Debug)]
pub struct Validated {
    pub command: Command,
    pub sys: SystemSpec,
    /// Present for circle systems.
    pub filter: Option<FilterSpec>,
    pub seed: u64,
    pub params: Params,
    pub b0: ArcSet,
    pub a0: ArcSet,
    pub suites: Vec<Suite>,
    pub role: Role,
    pub output: OutputConfig,
}

pub fn parse_arcs(key: &str, s: &str) -> Result<ArcSet, ConfigError> {
    let mut arcs = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let ends: Vec<&str> = part.split(',').map(str::trim).collect();
        let [a, b] = ends[..] else {
            return Err(ConfigError::new(key, format!("arc `{part}` is not of the form `a,b`")));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|e| ConfigError::new(key, format!("`{x}`: {e}")));
        arcs.push((num(a)?, num(b)?));
    }
    ArcSet::new(arcs).map_err(|e| ConfigError::new(key, e))
}

impl RunConfig {
    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let command = self.command.ok_or_else(|| ConfigError::new("command", "no command given"))?;
        let sys = match &self.system {
            SystemConfig::Circle { n, panels } => {
                if *panels == 0 {
                    return Err(ConfigError::new("system.panels", "must be positive"));
                }
                SystemSpec::circle_with_panels(*n, *panels).map_err(|e| ConfigError::new("system.N", e))?
            }
            SystemConfig::Tree { children, weights } => SystemSpec::abstract_tree(
                AbstractTree::new(children.clone(), weights.clone())
                    .map_err(|e| ConfigError::new("system.children", e))?,
            ),
        };
        let circle = matches!(self.system, SystemConfig::Circle { .. });
        if let Some(why) = sys.degenerate() {
            eprintln!("warning: {why}");
        }
        let filter = if circle {
            let f = match &self.filter {
                FilterConfig::Named(name) => FilterSpec::by_name(name, &sys),
                FilterConfig::Custom { name, coefficients } => FilterSpec::new(
                    name.clone(),
                    coefficients.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
                    &sys,
                ),
            }
            .map_err(|e| ConfigError::new("filter", e))?;
            Some(f)
        } else {
            None
        };
        let circle_only = matches!(command, Command::Verify | Command::Lyapunov | Command::Decay | Command::Decompose);
        if circle_only && !circle {
            return Err(ConfigError::new("system.kind", format!("`{command:?}` needs a circle system")));
        }
        if command == Command::Verify && matches!(self.filter, FilterConfig::Custom { .. }) {
            return Err(ConfigError::new("filter", "verify runs on the bundled filters only"));
        }
        let p = &self.params;
        if !circle && (p.root < 0.0 || p.root.fract() != 0.0) {
            return Err(ConfigError::new("params.root", "an abstract tree root is a node label"));
        }
        if circle && !(p.root.is_finite()) {
            return Err(ConfigError::new("params.root", "must be finite"));
        }
        if p.roots.is_empty() || p.roots.iter().any(|r| !r.is_finite()) {
            return Err(ConfigError::new("params.roots", "needs at least one finite root"));
        }
        match p.depth {
            Some(0) => return Err(ConfigError::new("params.depth", "must be positive")),
            Some(d) if d > 24 => return Err(ConfigError::new("params.depth", "at most 24")),
            _ => {}
        }
        if p.samples < 2 {
            return Err(ConfigError::new("params.samples", "at least 2"));
        }
        if p.length == 0 {
            return Err(ConfigError::new("params.length", "must be positive"));
        }
        if p.m.is_empty() || p.m.contains(&0) {
            return Err(ConfigError::new("params.m", "needs exponents m ≥ 1"));
        }
        if let Some(b) = p.b {
            if !(b > 0.0 && b < 1.0) {
                return Err(ConfigError::new("params.b", "must lie in (0, 1)"));
            }
        }
        if !matches!(p.source.as_str(), "nu0" | "random") {
            return Err(ConfigError::new("params.source", format!("`{}` is neither `nu0` nor `random`", p.source)));
        }
        let role: Role = p.role.parse().map_err(|e| ConfigError::new("params.role", e))?;
        let suites = Suite::parse_list(&p.suite).map_err(|e| ConfigError::new("params.suite", e))?;
        Ok(Validated {
            command,
            sys,
            filter,
            seed: self.seed,
            params: p.clone(),
            b0: parse_arcs("params.b0", &p.b0)?,
            a0: parse_arcs("params.a0", &p.a0)?,
            suites,
            role,
            output: self.output.clone(),
        })
    }
}
