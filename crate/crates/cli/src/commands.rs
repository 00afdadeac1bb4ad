//! Command implementations. Each returns the rendered artifact and the names
//! of any failed checks.

use std::fmt::Write as _;

use serde::Serialize;
use solharm_core::boundary;
use solharm_core::checks::{self, CheckRecord, VerifyConfig};
use solharm_core::decomp;
use solharm_core::filter;
use solharm_core::harmonic::{self, Role};
use solharm_core::rng::substream;
use solharm_core::tree::angle_point;
use solharm_core::walk::walk_for;
use solharm_core::{CircleWalk, Error, NodeFunction, Point, Tree};

use crate::config::{Command, ConfigError, Format, Validated};

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Runtime(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(Debug, Default)]
pub struct Output {
    pub text: String,
    pub failed: Vec<String>,
}

/// One table cell.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Shortest round-trip text; integral values print without a fraction.
pub fn fmt_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

pub struct Table {
    headers: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(headers: &'static [&'static str]) -> Self {
        Table { headers, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(self.headers).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
            }
            Format::Json => {
                let mut out = String::new();
                for row in &self.rows {
                    let obj: serde_json::Map<String, serde_json::Value> = self
                        .headers
                        .iter()
                        .zip(row)
                        .map(|(h, c)| (h.to_string(), serde_json::to_value(c).expect("plain cell")))
                        .collect();
                    writeln!(out, "{}", serde_json::Value::Object(obj)).expect("string write");
                }
                out
            }
        }
    }
}

pub fn run(v: &Validated) -> Result<Output, Failure> {
    match v.command {
        Command::Verify => verify(v),
        Command::Tree => tree_table(v),
        Command::Walk => walk_table(v),
        Command::Martin => martin_table(v),
        Command::Harmonic => harmonic_table(v),
        Command::Lyapunov => lyapunov(v),
        Command::Decay => decay(v),
        Command::Decompose => decompose(v),
    }
}

fn circle_filter(v: &Validated) -> &solharm_core::FilterSpec {
    v.filter.as_ref().expect("circle commands are validated to carry a filter")
}

fn table_format(v: &Validated) -> Format {
    v.output.format.unwrap_or(Format::Csv)
}

fn root_point(v: &Validated) -> Result<Point, Failure> {
    if v.filter.is_some() {
        Ok(angle_point(v.params.root).map_err(|e| ConfigError::new("params.root", e))?)
    } else {
        Ok(Point::Label(v.params.root as usize))
    }
}

fn build_tree(v: &Validated, default_depth: usize) -> Result<Tree, Failure> {
    let walk = walk_for(&v.sys, v.filter.as_ref()).map_err(|e| ConfigError::new("filter", e))?;
    let root = root_point(v)?;
    Ok(Tree::build(walk.as_ref(), root, v.params.depth.unwrap_or(default_depth))?)
}

fn regular_tree(v: &Validated, default_depth: usize) -> Result<Tree, Failure> {
    let tree = build_tree(v, default_depth)?;
    tree.require_regular().map_err(|e| ConfigError::new("params.root", e))?;
    Ok(tree)
}

fn records_output(records: &[CheckRecord], format: Format) -> Output {
    let text = match format {
        Format::Json => records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect(),
        Format::Csv => {
            let mut t = Table::new(&["check", "statistic", "threshold", "pass"]);
            for r in records {
                t.push(vec![r.check.as_str().into(), r.statistic.into(), r.threshold.into(), r.pass.into()]);
            }
            t.render(Format::Csv)
        }
    };
    let failed = records.iter().filter(|r| !r.pass).map(|r| r.check.clone()).collect();
    Output { text, failed }
}

fn verify_config(v: &Validated) -> VerifyConfig {
    let f = circle_filter(v);
    let defaults = VerifyConfig::default();
    VerifyConfig {
        n: f.branching(),
        filter: f.name().to_string(),
        seed: v.seed,
        samples: v.params.samples,
        roots: v.params.roots.clone(),
        depth: v.params.depth.unwrap_or(defaults.depth),
        length: v.params.length,
    }
}

fn verify(v: &Validated) -> Result<Output, Failure> {
    let records = checks::run(&v.suites, &verify_config(v))?;
    Ok(records_output(&records, v.output.format.unwrap_or(Format::Json)))
}

fn tree_table(v: &Validated) -> Result<Output, Failure> {
    let tree = build_tree(v, 4)?;
    let mut t = Table::new(&["id", "parent", "depth", "point", "W", "Wn", "D"]);
    for (id, node) in tree.nodes().iter().enumerate() {
        t.push(vec![
            id.into(),
            node.parent.into(),
            node.depth.into(),
            node.point.coordinate().into(),
            node.w.into(),
            node.wn.into(),
            node.metric_weight.into(),
        ]);
    }
    if let Some(w) = &tree.regularity().witness {
        eprintln!("warning: {w}");
    }
    Ok(Output { text: t.render(table_format(v)), failed: Vec::new() })
}

fn walk_table(v: &Validated) -> Result<Output, Failure> {
    let walk = walk_for(&v.sys, v.filter.as_ref()).map_err(|e| ConfigError::new("filter", e))?;
    let root = root_point(v)?;
    let mut t = Table::new(&["path", "step", "point", "W", "cumulative_product"]);
    for i in 0..v.params.paths {
        let mut rng = substream(v.seed, i as u64);
        let path = boundary::sample_path_with(walk.as_ref(), root, v.params.length, &mut rng)?;
        let mut product = 1.0;
        for (k, &p) in path.points().iter().enumerate() {
            let w = walk.weight(p)?;
            if k > 0 {
                product *= w;
            }
            t.push(vec![i.into(), k.into(), p.coordinate().into(), w.into(), product.into()]);
        }
    }
    Ok(Output { text: t.render(table_format(v)), failed: Vec::new() })
}

fn martin_table(v: &Validated) -> Result<Output, Failure> {
    let tree = regular_tree(v, 4)?;
    let mut t = Table::new(&["x", "y", "green", "kernel", "rho", "rho_tail"]);
    for x in 0..tree.len() {
        for y in 0..tree.len() {
            let (rho, tail) = tree.martin_metric(x, y)?;
            t.push(vec![
                x.into(),
                y.into(),
                tree.green(x, y)?.into(),
                tree.martin_kernel(x, y)?.into(),
                rho.into(),
                tail.into(),
            ]);
        }
    }
    Ok(Output { text: t.render(table_format(v)), failed: Vec::new() })
}

fn harmonic_table(v: &Validated) -> Result<Output, Failure> {
    let tree = regular_tree(v, 4)?;
    let nu = match v.params.source.as_str() {
        "nu0" => harmonic::nu0(&tree),
        _ => harmonic::random_additive(&tree, &mut substream(v.seed, 0), 1.0)?,
    };
    let f: NodeFunction = match v.role {
        Role::Additive => nu,
        Role::PHarmonic => harmonic::additive_to_harmonic(&tree, &nu)?,
        Role::QmfWeight => harmonic::additive_to_weight(&tree, &nu)?,
        Role::Generic => {
            return Err(ConfigError::new("params.role", "harmonic tables need a constrained role").into());
        }
    };
    let mut t = Table::new(&["id", "point", "depth", "value", "role", "residual"]);
    for (id, node) in tree.nodes().iter().enumerate() {
        t.push(vec![
            id.into(),
            node.point.coordinate().into(),
            node.depth.into(),
            f.values[id].into(),
            f.role.name().into(),
            harmonic::local_residual(&tree, &f, id).into(),
        ]);
    }
    let mut failed = Vec::new();
    if let Err(e) = harmonic::validate(&tree, &f) {
        eprintln!("{e}");
        failed.push(format!("harmonic.{}", f.role.name()));
    }
    Ok(Output { text: t.render(table_format(v)), failed })
}

fn lyapunov(v: &Validated) -> Result<Output, Failure> {
    let f = circle_filter(v);
    let a = filter::lyapunov(f, &v.sys)?;
    let mut t = Table::new(&["filter", "N", "value", "error", "jensen_ok"]);
    t.push(vec![f.name().into(), (f.branching() as usize).into(), a.value.into(), a.error.into(), a.jensen_ok.into()]);
    let failed = if a.jensen_ok { Vec::new() } else { vec!["lyapunov.jensen".to_string()] };
    Ok(Output { text: t.render(table_format(v)), failed })
}

#[derive(Serialize)]
struct DecayJson<'a> {
    filter: &'a str,
    a0: &'a [(f64, f64)],
    probabilities: Vec<VisitJson>,
    strictly_decreasing: bool,
    fitted_rate: f64,
    sum: f64,
    b: Option<f64>,
}

#[derive(Serialize)]
struct VisitJson {
    m: usize,
    probability: f64,
    error: f64,
}

fn decay(v: &Validated) -> Result<Output, Failure> {
    let f = circle_filter(v);
    let report = decomp::decay_report(&v.sys, f, &v.a0, &v.params.m)?;
    let mut failed = Vec::new();
    if let Some(b) = v.params.b {
        if report.fitted_rate >= b {
            failed.push("decay.fitted_rate".to_string());
        }
    }
    eprintln!(
        "fitted rate {}, strictly decreasing: {}, sum {}",
        fmt_float(report.fitted_rate),
        report.strictly_decreasing,
        fmt_float(report.sum)
    );
    let text = match table_format(v) {
        Format::Csv => {
            let mut t = Table::new(&["m", "probability", "error"]);
            for &(m, p, e) in &report.probabilities {
                t.push(vec![m.into(), p.into(), e.into()]);
            }
            t.render(Format::Csv)
        }
        Format::Json => {
            let json = DecayJson {
                filter: f.name(),
                a0: v.a0.arcs(),
                probabilities: report
                    .probabilities
                    .iter()
                    .map(|&(m, probability, error)| VisitJson { m, probability, error })
                    .collect(),
                strictly_decreasing: report.strictly_decreasing,
                fitted_rate: report.fitted_rate,
                sum: report.sum,
                b: v.params.b,
            };
            serde_json::to_string(&json).expect("plain report") + "\n"
        }
    };
    Ok(Output { text, failed })
}

#[derive(Serialize)]
struct HistogramJson<'a> {
    b0: &'a [(f64, f64)],
    length: usize,
    counts: &'a std::collections::BTreeMap<usize, usize>,
    undecided: usize,
    total: usize,
    undecided_fraction: f64,
}

fn decompose(v: &Validated) -> Result<Output, Failure> {
    let f = circle_filter(v);
    let walk = CircleWalk::new(&v.sys, f)?;
    let h = decomp::domain_shift_stat(&walk, &v.b0, v.params.samples, v.params.length, v.seed)?;
    let json = HistogramJson {
        b0: v.b0.arcs(),
        length: v.params.length,
        counts: &h.counts,
        undecided: h.undecided,
        total: h.total,
        undecided_fraction: h.undecided as f64 / h.total as f64,
    };
    let mut text = serde_json::to_string(&json).expect("plain histogram") + "\n";
    let records = checks::run(&[checks::Suite::Decomp], &verify_config(v))?;
    let report = records_output(&records, Format::Json);
    text.push_str(&report.text);
    Ok(Output { text, failed: report.failed })
}
