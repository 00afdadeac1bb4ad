//! Invariant suites, one per module. Each check reports the statistic it
//! measured, the threshold it was held to, and whether it passed.

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use serde::Serialize;

use crate::arcs::ArcSet;
use crate::boundary::{self, PathPrefix};
use crate::decomp::{self, FiberVector, FundamentalDomain};
use crate::dynsys::{self, Angle, Point, SystemSpec};
use crate::error::{Error, Result};
use crate::filter::{self, FilterSpec};
use crate::harmonic::{self, NodeFunction, Role};
use crate::quadrature;
use crate::rng::{self, Rng};
use crate::solenoid::{self, CylinderIndicator, SolenoidSample};
use crate::tree::{self, Tree, MAX_METRIC_NODES};
use crate::trig::TrigPoly;
use crate::walk::CircleWalk;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Passes when statistic ≤ threshold.
    pub fn at_most(check: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        CheckRecord { check: check.into(), statistic, threshold, pass: statistic <= threshold }
    }

    /// Passes when statistic ≥ threshold.
    pub fn at_least(check: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        CheckRecord { check: check.into(), statistic, threshold, pass: statistic >= threshold }
    }

    pub fn flag(check: impl Into<String>, ok: bool) -> Self {
        CheckRecord { check: check.into(), statistic: f64::from(u8::from(!ok)), threshold: 0.0, pass: ok }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Dynsys,
    Filter,
    Tree,
    Boundary,
    Harmonic,
    Solenoid,
    Decomp,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Dynsys, Suite::Filter, Suite::Tree, Suite::Boundary, Suite::Harmonic, Suite::Solenoid, Suite::Decomp];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Dynsys => "dynsys",
            Suite::Filter => "filter",
            Suite::Tree => "tree",
            Suite::Boundary => "boundary",
            Suite::Harmonic => "harmonic",
            Suite::Solenoid => "solenoid",
            Suite::Decomp => "decomp",
        }
    }

    /// Parses a suite name; `all` expands to every suite.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .iter()
            .find(|x| x.name() == s)
            .map(|&x| vec![x])
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub n: u32,
    pub filter: String,
    pub seed: u64,
    /// Monte Carlo sample count.
    pub samples: usize,
    /// Regular roots for the tree-based suites.
    pub roots: Vec<f64>,
    pub depth: usize,
    /// Backward length L of solenoid samples.
    pub length: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n: 2,
            filter: "haar".into(),
            seed: 7,
            samples: 100_000,
            roots: vec![0.1234477851, 0.3819660113, 0.7071067812],
            depth: 6,
            length: solenoid::DEFAULT_LENGTH,
        }
    }
}

struct Ctx {
    sys: SystemSpec,
    filter: FilterSpec,
    cfg: VerifyConfig,
}

impl Ctx {
    fn walk(&self) -> Result<CircleWalk<'_>> {
        CircleWalk::new(&self.sys, &self.filter)
    }

    fn seed(&self, salt: u64) -> u64 {
        rng::derive_seed(self.cfg.seed, salt)
    }

    fn rng(&self, salt: u64) -> Rng {
        rng::substream(self.seed(salt), 0)
    }

    fn trees(&self, depth: usize) -> Result<Vec<Tree>> {
        let walk = self.walk()?;
        self.cfg
            .roots
            .iter()
            .map(|&t| {
                let tree = Tree::build(&walk, tree::angle_point(t)?, depth)?;
                tree.require_regular().map_err(|e| match e {
                    Error::NotRegular(w) => Error::NotRegular(format!("root {t}: {w}")),
                    e => e,
                })?;
                Ok(tree)
            })
            .collect()
    }

    /// Largest depth ≤ the configured one whose tree fits the metric cap.
    fn metric_depth(&self) -> usize {
        let n = self.cfg.n as usize;
        let mut d = self.cfg.depth;
        while d > 1 && tree_size(n, d) > MAX_METRIC_NODES {
            d -= 1;
        }
        d
    }
}

fn tree_size(n: usize, depth: usize) -> usize {
    (0..=depth).map(|k| n.pow(k as u32)).sum()
}

pub fn run(suites: &[Suite], cfg: &VerifyConfig) -> Result<Vec<CheckRecord>> {
    let sys = SystemSpec::circle(cfg.n)?;
    if let Some(why) = sys.degenerate() {
        return Err(Error::InvalidSystem(why.into()));
    }
    let filter = FilterSpec::by_name(&cfg.filter, &sys)?;
    if cfg.samples < 2 {
        return Err(Error::InvalidArgument("verify needs at least 2 samples".into()));
    }
    if cfg.roots.is_empty() {
        return Err(Error::InvalidArgument("verify needs at least one root".into()));
    }
    if cfg.depth < 2 {
        return Err(Error::InvalidArgument("verify needs depth ≥ 2".into()));
    }
    if cfg.length < 8 {
        return Err(Error::InvalidArgument("verify needs length ≥ 8".into()));
    }
    let ctx = Ctx { sys, filter, cfg: cfg.clone() };
    let mut out = Vec::new();
    for suite in suites {
        let records = match suite {
            Suite::Dynsys => dynsys_suite(&ctx)?,
            Suite::Filter => filter_suite(&ctx)?,
            Suite::Tree => tree_suite(&ctx)?,
            Suite::Boundary => boundary_suite(&ctx)?,
            Suite::Harmonic => harmonic_suite(&ctx)?,
            Suite::Solenoid => solenoid_suite(&ctx)?,
            Suite::Decomp => decomp_suite(&ctx)?,
        };
        out.extend(records.into_iter().map(|mut r| {
            r.check = format!("{}.{}", suite.name(), r.check);
            r
        }));
    }
    Ok(out)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A random trigonometric polynomial with coefficients in the unit square.
pub fn random_trig_poly(degree: usize, rng: &mut Rng) -> TrigPoly {
    let coeffs = (0..2 * degree + 1)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    TrigPoly::from_symmetric(coeffs)
}

fn test_functions(rng: &mut Rng) -> Vec<(&'static str, Box<dyn Fn(Angle) -> Complex64 + Sync>)> {
    let p = random_trig_poly(8, rng);
    vec![
        ("one", Box::new(|_| c(1.0))),
        ("character", Box::new(|t: Angle| t.character())),
        ("cos2", Box::new(|t: Angle| c((PI * t.value()).cos().powi(2)))),
        ("trigpoly8", Box::new(move |t| p.eval(t))),
    ]
}

fn dynsys_suite(ctx: &Ctx) -> Result<Vec<CheckRecord>> {
    let sys = &ctx.sys;
    let n = ctx.cfg.n;
    let mut out = Vec::new();
    for (name, f) in test_functions(&mut ctx.rng(1)) {
        let lhs = sys.integrate_mu(|t| f(t))?.value;
        let rhs = sys
            .integrate_mu(|x| dynsys::preimages_circle(n, x).map(|y| f(y)).sum::<Complex64>() / n as f64)?
            .value;
        out.push(CheckRecord::at_most(format!("strong_invariance.{name}"), (lhs - rhs).norm(), 1e-10));
    }
    let mut worst: f64 = 0.0;
    let mut bad_count = 0;
    for i in 0..1024 {
        let x = sys.sample_mu(ctx.seed(2), i)?;
        let pre = sys.preimages(Point::Angle(x))?;
        bad_count += usize::from(pre.len() != n as usize);
        for y in pre {
            let back = sys.apply_r(y)?.angle().expect("circle");
            worst = worst.max(back.distance(x));
        }
    }
    out.push(CheckRecord::at_most("preimage_consistency", worst, dynsys::POINT_TOL));
    out.push(CheckRecord::at_most("preimage_count", bad_count as f64, 0.0));
    Ok(out)
}

fn filter_suite(ctx: &Ctx) -> Result<Vec<CheckRecord>> {
    let (sys, f) = (&ctx.sys, &ctx.filter);
    let mut out = vec![CheckRecord::at_most("qmf_residual", filter::qmf_residual(f, filter::QMF_GRID), 1e-12)];

    let mut pou: f64 = 0.0;
    for i in 0..1024 {
        let x = sys.sample_mu(ctx.seed(3), i)?;
        let total: f64 = dynsys::preimages_circle(ctx.cfg.n, x).map(|y| f.w(y)).sum();
        pou = pou.max((total - 1.0).abs());
    }
    out.push(CheckRecord::at_most("partition_of_unity", pou, 1e-10));

    let mean = sys.integrate_mu(|t| c(f.m0_abs2(t)))?.value;
    out.push(CheckRecord::at_most("mean_one", (mean - 1.0).norm(), 1e-10));

    let walk = ctx.walk()?;
    let mut law: f64 = 0.0;
    for i in 0..100 {
        let z = solenoid::sample_mu_inf(&walk, 8, 8, ctx.seed(4), i)?;
        for a in -2..=2i64 {
            for b in -2..=2i64 {
                let whole = z.cocycle_mod2(f, a + b)?;
                let split = z.cocycle_mod2(f, a)? * z.shift(a)?.cocycle_mod2(f, b)?;
                law = law.max((whole - split).abs() / whole.abs().max(1.0));
            }
        }
    }
    out.push(CheckRecord::at_most("cocycle_law", law, 1e-10));

    let one = TrigPoly::constant(c(1.0));
    let truncation = filter::minimal_truncation(f).unwrap_or(0);
    let image = filter::transfer_apply_coeffs(f, &one, truncation)?;
    let deviation = (0..=image.degree() as i64)
        .flat_map(|j| [j, -j])
        .map(|j| (image.get(j) - one.get(j)).norm())
        .fold(0.0, f64::max);
    // the coefficients of |m₀|² carry one rounding each
    out.push(CheckRecord::at_most("transfer_preserves_constants", deviation, 8.0 * f64::EPSILON));

    let lyap = filter::lyapunov(f, sys)?;
    if f.has_constant_modulus() {
        out.push(CheckRecord::at_most("lyapunov_constant_modulus", lyap.value.abs(), 0.0));
    } else {
        out.push(CheckRecord::at_most("jensen_gap", lyap.value, -1e-6));
    }
    if f.name() == "haar" {
        out.push(CheckRecord::at_most("lyapunov_haar", (lyap.value + LN_2).abs(), 1e-4));
    }
    let basis = filter::rw_harmonic_solve(f, truncation.max(1))?;
    out.push(CheckRecord::at_least("rw_harmonic_dimension", basis.basis.len() as f64, 1.0));
    out.push(CheckRecord::at_most(
        "rw_harmonic_constant",
        filter::harmonic_residual(f, &one, filter::QMF_GRID)?,
        1e-12,
    ));
    Ok(out)
}

/// Σ_{n ≤ depth} Pⁿ for the node-indexed one-step matrix of a tree.
pub fn green_oracle(tree: &Tree) -> DMatrix<f64> {
    let size = tree.len();
    let mut p = DMatrix::<f64>::zeros(size, size);
    for (y, node) in tree.nodes().iter().enumerate() {
        if let Some(x) = node.parent {
            p[(x, y)] = node.w;
        }
    }
    let mut power = DMatrix::<f64>::identity(size, size);
    let mut sum = power.clone();
    for _ in 0..tree.depth() {
        power = &power * &p;
        sum += &power;
    }
    sum
}

fn tree_suite(ctx: &Ctx) -> Result<Vec<CheckRecord>> {
    let depth = ctx.cfg.depth;
    let trees = ctx.trees(depth)?;
    let (mut green, mut constancy, mut normal, mut stochastic) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut pairs = 0usize;
    for t in &trees {
        let oracle = green_oracle(t);
        for x in 0..t.len() {
            let cx = t.nodes()[x].martin_constant();
            for y in 0..t.len() {
                let g = t.green(x, y)?;
                green = green.max((g - oracle[(x, y)]).abs());
                let k = t.martin_kernel(x, y)?;
                let expect = if t.in_subtree(x, y) { cx } else { 0.0 };
                constancy = constancy.max((k - expect).abs());
                let g0 = t.green(0, y)?;
                if g0 != 0.0 {
                    normal = normal.max((k - g / g0).abs() / k.abs().max(1.0));
                }
                pairs += 1;
            }
        }
        for x in t.internal_nodes() {
            let s: f64 = t.nodes()[x].children.iter().map(|&y| t.transition_pn(x, y, 1)).sum::<Result<f64>>()?;
            stochastic = stochastic.max((s - 1.0).abs());
        }
    }
    let mut out = vec![
        CheckRecord::at_most("green_oracle", green, 1e-12),
        CheckRecord::at_least("green_oracle_pairs", pairs as f64, 1.0),
        CheckRecord::at_most("kernel_constancy", constancy, 0.0),
        CheckRecord::at_most("kernel_normalization", normal, 1e-12),
        CheckRecord::at_most("row_stochastic", stochastic, 1e-10),
    ];
    let small = ctx.trees(3.min(ctx.metric_depth()))?;
    let mut triangle: f64 = 0.0;
    for t in &small {
        let size = t.len();
        let mut rho = vec![0.0; size * size];
        for x in 0..size {
            for y in 0..size {
                rho[x * size + y] = t.martin_metric(x, y)?.0;
            }
        }
        for x in 0..size {
            for y in 0..size {
                for z in 0..size {
                    triangle = triangle.max(rho[x * size + z] - rho[x * size + y] - rho[y * size + z]);
                }
            }
        }
    }
    out.push(CheckRecord::at_most("metric_triangle", triangle, 1e-14));
    Ok(out)
}

/// A path from x₀ that agrees with `a` for n₀ − 1 steps and then leaves it.
pub fn diverging_path(walk: &CircleWalk, a: &PathPrefix, n0: usize, rng: &mut Rng) -> Result<PathPrefix> {
    let mut points = a.points()[..n0].to_vec();
    let parent = points[n0 - 1];
    let others: Vec<Point> = walk
        .system()
        .preimages(parent)?
        .into_iter()
        .filter(|&y| !walk.system().same_point(y, a.points()[n0]))
        .collect();
    let weights: Vec<f64> = others.iter().map(|&y| filter_w(walk, y)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeightStep { step: n0 - 1 });
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = *others.last().expect("N ≥ 2");
    for (&y, &w) in others.iter().zip(&weights) {
        acc += w;
        if u < acc {
            pick = y;
            break;
        }
    }
    points.push(pick);
    let rest = boundary::sample_path_with(walk, pick, a.steps() - n0, rng)?;
    points.extend_from_slice(&rest.points()[1..]);
    PathPrefix::new(walk, points)
}

fn filter_w(walk: &CircleWalk, y: Point) -> f64 {
    walk.filter().w(y.angle().expect("circle"))
}

fn boundary_suite(ctx: &Ctx) -> Result<Vec<CheckRecord>> {
    let walk = ctx.walk()?;
    let depth = ctx.metric_depth();
    let trees = ctx.trees(depth)?;
    let mut out = Vec::new();

    let mut consistency: f64 = 0.0;
    for t in &trees {
        for x in t.internal_nodes() {
            let here = boundary::cylinder_measure(&walk, &PathPrefix::to_node(t, x)?)?;
            let split: f64 = t.nodes()[x]
                .children
                .iter()
                .map(|&y| boundary::cylinder_measure(&walk, &PathPrefix::to_node(t, y)?))
                .sum::<Result<f64>>()?;
            consistency = consistency.max((here - split).abs());
        }
    }
    out.push(CheckRecord::at_most("cylinder_consistency", consistency, 1e-12));

    let t = &trees[0];
    let x0 = t.nodes()[0].point;
    let mut reciprocity: f64 = 0.0;
    let mut collapsed = 0usize;
    let mut separation: f64 = f64::NEG_INFINITY;
    let mut r = ctx.rng(5);
    for i in 0..100 {
        let a = boundary::sample_path(&walk, x0, depth, ctx.seed(6) ^ i)?;
        let visited = boundary::locate(t, &a)?;
        for (k, &node) in visited.iter().enumerate() {
            let kernel = boundary::boundary_kernel(t, node, &a)?;
            let measure = boundary::cylinder_measure(&walk, &a.truncate(k))?;
            reciprocity = reciprocity.max((kernel * measure - 1.0).abs());
        }
        let b = boundary::sample_path(&walk, x0, depth, ctx.seed(7) ^ i)?;
        if boundary::divergence_depth(&walk, &a, &b).is_some() && boundary::boundary_distance(t, &a, &b)?.0 <= 0.0 {
            collapsed += 1;
        }
        let n0 = 1 + (i as usize % 4.min(depth));
        let b = diverging_path(&walk, &a, n0, &mut r)?;
        let (rho, _) = boundary::boundary_distance(t, &a, &b)?;
        let bound = t.separation_bound(visited[n0])?;
        separation = separation.max(bound - rho);
    }
    out.push(CheckRecord::at_most("kernel_reciprocity", reciprocity, 1e-12));
    out.push(CheckRecord::at_most("injectivity", collapsed as f64, 0.0));
    out.push(CheckRecord::at_most("separation_bound", separation, 1e-14));

    let count = ctx.cfg.samples;
    let paths = boundary::sample_paths(&walk, x0, 3, count, ctx.seed(8))?;
    let small = Tree::build(&walk, x0, 3)?;
    let mut hits = vec![0usize; small.len()];
    for p in &paths {
        hits[*boundary::locate(&small, p)?.last().expect("nonempty")] += 1;
    }
    let mut worst: f64 = 0.0;
    for (id, node) in small.nodes().iter().enumerate().filter(|(_, n)| n.depth == 3) {
        let p = node.wn;
        let sigma = (p * (1.0 - p) / count as f64).sqrt();
        let diff = (hits[id] as f64 / count as f64 - p).abs();
        worst = worst.max(if diff == 0.0 { 0.0 } else { diff / sigma });
    }
    out.push(CheckRecord::at_most("walk_law_sigma", worst, 5.0));
    Ok(out)
}

fn harmonic_suite(ctx: &Ctx) -> Result<Vec<CheckRecord>> {
    let depth = ctx.cfg.depth;
    let trees = ctx.trees(depth)?;
    let mut r = ctx.rng(9);
    let (mut ah, mut aw, mut martin, mut quotient) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
    for t in &trees {
        let nu0 = harmonic::nu0(t);
        for _ in 0..100 {
            let mass = r.random_range(0.5..4.0);
            let nu = harmonic::random_additive(t, &mut r, mass)?;
            let u = harmonic::additive_to_harmonic(t, &nu)?;
            let back = harmonic::harmonic_to_additive(t, &u)?;
            ah = nu.values.iter().zip(&back.values).map(|(a, b)| rel(*a, *b)).fold(ah, f64::max);

            let w = harmonic::additive_to_weight(t, &nu)?;
            let again = harmonic::weight_to_additive(t, &w, mass)?;
            aw = nu.values.iter().zip(&again.values).map(|(a, b)| rel(*a, *b)).fold(aw, f64::max);
            let w2 = harmonic::additive_to_weight(t, &again)?;
            aw = w.values.iter().zip(&w2.values).map(|(a, b)| rel(*a, *b)).fold(aw, f64::max);

            let m = harmonic::martin_represent(t, &nu)?;
            martin = u.values.iter().zip(&m.values).map(|(a, b)| (a - b).abs()).fold(martin, f64::max);

            let product = NodeFunction {
                values: u.values.iter().zip(&nu0.values).map(|(a, b)| a * b).collect(),
                role: Role::Additive,
            };
            quotient = quotient.max(harmonic::max_residual(t, &product).0);
        }
    }
    let mut out = vec![
        CheckRecord::at_most("additive_harmonic_round_trip", ah, 1e-12),
        CheckRecord::at_most("additive_weight_round_trip", aw, 1e-12),
        CheckRecord::at_most("martin_equals_direct", martin, 0.0),
        CheckRecord::at_most("quotient_additive", quotient, 1e-10),
    ];

    let walk = ctx.walk()?;
    let mut roots = vec![Angle::new(ctx.cfg.roots[0])?];
    for _ in 0..4 {
        let last = *roots.last().expect("nonempty");
        roots.push(dynsys::r_circle(ctx.cfg.n, last));
    }
    let fam = harmonic::rw_harmonic_family(&walk, &|_| 1.0, &roots, depth)?;
    out.push(CheckRecord::at_most("family_additivity", fam.additivity_residual, 1e-12));
    out.push(CheckRecord::at_most("family_compatibility", fam.compatibility_residual.unwrap_or(f64::NAN), 1e-12));
    out.push(CheckRecord::at_most(
        "family_reconstruction",
        fam.reconstruction_residual.unwrap_or(f64::NAN),
        1e-12,
    ));
    let bad = harmonic::rw_harmonic_family(&walk, &|t: Angle| (2.0 * PI * t.value()).cos(), &roots, depth)?;
    out.push(CheckRecord::at_least("family_flags_nonharmonic", bad.additivity_residual, 0.01));
    Ok(out)
}

/// A depth-2 cylinder whose arcs keep θ₀ and θ₁ = r(θ₀) away from 1/2.
pub fn lemma_cylinder() -> CylinderIndicator {
    CylinderIndicator::new(vec![
        ArcSet::new(vec![(0.05, 0.2)]).expect("valid"),
        ArcSet::new(vec![(0.0, 0.3), (0.6, 0.9)]).expect("valid"),
    ])
}

fn solenoid_suite(ctx: &Ctx) -> Result<Vec<CheckRecord>> {
    let walk = ctx.walk()?;
    let f = &ctx.filter;
    let (len, fwd) = (ctx.cfg.length, solenoid::DEFAULT_FORWARD);
    let pointwise = 10_000.min(ctx.cfg.samples);
    let zs = solenoid::sample_many(&walk, len, fwd, pointwise, ctx.seed(10))?;
    let one = |_: &SolenoidSample| Ok(c(1.0));
    let cyl = lemma_cylinder();
    let xi = cyl.as_fn();
    let n = ctx.cfg.n;
    let tests: Vec<(&str, Box<dyn Fn(Angle) -> Complex64 + Sync>)> = vec![
        ("character", Box::new(|t: Angle| t.character())),
        ("character_minus2", Box::new(|t: Angle| Complex64::from_polar(1.0, -2.0 * PI * 2.0 * t.value()))),
        ("cos2", Box::new(|t: Angle| c((PI * t.value()).cos().powi(2)))),
        ("sawtooth", Box::new(|t: Angle| c(t.value() - 0.5))),
    ];

    let (mut scaling, mut inverse, mut fwd_cocycle, mut mult) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut covariance = vec![0.0f64; tests.len()];
    for z in &zs {
        let u_phi = solenoid::apply_u(f, &one, z)?;
        let pi_phi = solenoid::apply_pi(&|t| f.m0(t), &one, z)?;
        scaling = scaling.max((u_phi - pi_phi).norm());

        let u_xi = |w: &SolenoidSample| solenoid::apply_u(f, &xi, w);
        inverse = inverse.max((solenoid::apply_u_inv(f, &u_xi, z)? - xi(z)?).norm());

        let u2 = solenoid::apply_u(f, &|w: &SolenoidSample| solenoid::apply_u(f, &one, w), z)?;
        fwd_cocycle = fwd_cocycle.max((u2.norm_sqr() - z.cocycle_mod2(f, 2)?).abs());

        let (g, h) = (&tests[0].1, &tests[2].1);
        let lhs = solenoid::apply_pi(&|t| g(t) * h(t), &xi, z)?;
        let rhs = solenoid::apply_pi(g, &|w: &SolenoidSample| solenoid::apply_pi(h, &xi, w), z)?;
        mult = mult.max((lhs - rhs).norm());

        for (k, (_, g)) in tests.iter().enumerate() {
            let inner = |w: &SolenoidSample| solenoid::apply_u_inv(f, &xi, w);
            let pi_inner = |w: &SolenoidSample| solenoid::apply_pi(g, &inner, w);
            let lhs = solenoid::apply_u(f, &pi_inner, z)?;
            let rhs = solenoid::apply_pi(&|t: Angle| g(dynsys::r_circle(n, t)), &xi, z)?;
            covariance[k] = covariance[k].max((lhs - rhs).norm());
        }
    }
    let mut out = vec![
        CheckRecord::at_most("scaling_equation", scaling, 0.0),
        CheckRecord::at_most("u_inverse", inverse, 1e-12),
        CheckRecord::at_most("forward_cocycle", fwd_cocycle, 1e-12),
        CheckRecord::at_most("pi_multiplicative", mult, 0.0),
    ];
    for ((name, _), res) in tests.iter().zip(covariance) {
        out.push(CheckRecord::at_most(format!("covariance.{name}"), res, 1e-12));
    }

    let count = ctx.cfg.samples;
    let ortho: Vec<(&str, Box<dyn Fn(Angle) -> Complex64 + Sync>, Complex64)> = vec![
        ("character", Box::new(|t: Angle| t.character()), c(0.0)),
        ("cos2", Box::new(|t: Angle| c((PI * t.value()).cos().powi(2))), c(0.5)),
        ("character3", Box::new(|t: Angle| Complex64::from_polar(1.0, 6.0 * PI * t.value())), c(0.0)),
    ];
    for (k, (name, g, exact)) in ortho.iter().enumerate() {
        let e = solenoid::mc_expectation(&walk, len, fwd, count, ctx.seed(20 + k as u64), &|z: &SolenoidSample| {
            Ok(g(z.theta(0)?))
        })?;
        out.push(CheckRecord::at_most(format!("orthogonality.{name}"), e.z_to(*exact), 4.0));
    }

    for (k, shift) in [-2i64, -1, 1, 2].into_iter().enumerate() {
        let (lhs, rhs) = solenoid::shift_change_of_measure(&walk, &xi, shift, len, fwd, count, ctx.seed(30 + k as u64))?;
        out.push(CheckRecord::at_most(format!("isometry_identity.n{shift}"), lhs.z_score(&rhs), 4.0));
    }

    for m in 0..=3usize {
        let e = solenoid::mc_expectation(&walk, len, fwd, count, ctx.seed(40 + m as u64), &|z: &SolenoidSample| {
            Ok(z.theta(m)?.character())
        })?;
        let exact = theta_marginal_moment(&ctx.sys, &ctx.filter, m)?;
        out.push(CheckRecord::at_most(format!("theta_marginal.m{m}"), e.z_to(exact), 4.0));
    }
    Ok(out)
}

/// E[e^{2πiθ_m}] under μ∞: θ_m has density |m₀(x)m₀(r x)⋯m₀(r^{m−1}x)|²
/// with respect to μ.
pub fn theta_marginal_moment(sys: &SystemSpec, f: &FilterSpec, m: usize) -> Result<Complex64> {
    let n = sys.branching()?;
    let g = |t: f64| {
        let x0 = Angle::new(t).expect("finite");
        let mut x = x0;
        let mut density = 1.0;
        for _ in 0..m {
            density *= f.m0_abs2(x);
            x = dynsys::r_circle(n, x);
        }
        x0.character() * density
    };
    let panels = sys.panels.max(8 * (n as usize).pow(m as u32));
    Ok(quadrature::composite_intervals(&g, &[(0.0, 1.0)], panels)?.value)
}

fn decomp_suite(ctx: &Ctx) -> Result<Vec<CheckRecord>> {
    let walk = ctx.walk()?;
    let (sys, f) = (&ctx.sys, &ctx.filter);
    let n = ctx.cfg.n;
    let mut r = ctx.rng(50);
    let mut out = Vec::new();

    let (mut norm, mut cov, mut cs) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut delta_ok = true;
    let bases = solenoid::sample_many(&walk, 12, 8, 100, ctx.seed(51))?;
    for z in &bases {
        let (lo, hi) = (-(z.backward_len() as i64), z.forward_len() as i64);
        let random_entries = |r: &mut Rng| -> Vec<Complex64> {
            (lo..=hi).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect()
        };
        let mut v = FiberVector::new(f, z.clone(), lo, random_entries(&mut r))?;
        v.set(lo, c(0.0))?;
        let uv = decomp::fiber_u(f, &v)?;
        norm = norm.max((uv.norm_sqr() - v.norm_sqr()).abs() / v.norm_sqr().max(1.0));

        let g = |t: Angle| t.character();
        let g_r = |t: Angle| dynsys::r_circle(n, t).character();
        let lhs = decomp::fiber_u(f, &decomp::fiber_pi(&g, &decomp::fiber_u_inv(f, &v)?)?)?;
        let rhs = decomp::fiber_pi(&g_r, &v)?;
        for k in lo + 1..hi {
            cov = cov.max((lhs.get(k).expect("interior") - rhs.get(k).expect("interior")).norm());
        }

        let w = FiberVector::new(f, z.clone(), lo, random_entries(&mut r))?;
        let vw = decomp::fiber_inner(&v, &w)?.norm_sqr();
        let bound = decomp::fiber_inner(&v, &v)?.re * decomp::fiber_inner(&w, &w)?.re;
        cs = cs.max(vw - bound * (1.0 + 1e-12));

        let mut d0 = FiberVector::zeros(f, z.clone(), lo, hi)?;
        d0.set(0, c(1.0))?;
        delta_ok &= decomp::fiber_inner(&d0, &d0)?.re == 1.0;
    }
    out.push(CheckRecord::at_most("fiber_norm", norm, 1e-12));
    out.push(CheckRecord::at_most("fiber_covariance", cov, 1e-12));
    out.push(CheckRecord::at_most("cauchy_schwarz", cs, 0.0));
    out.push(CheckRecord::flag("delta_zero_unit", delta_ok));
    out.push(CheckRecord::at_most("non_periodic_bases", decomp::periodic_fraction(&bases, 8), 0.0));

    let lyap = filter::lyapunov(f, sys)?.value;
    let sums = |len: usize, salt: u64| -> Result<Vec<f64>> {
        (0..100).map(|i| decomp::birkhoff_random(f, len, ctx.seed(salt), i)).collect()
    };
    let long = sums(1 << 14, 52)?;
    let short = sums(1 << 8, 53)?;
    let mean = long.iter().sum::<f64>() / long.len() as f64;
    out.push(CheckRecord::at_most("birkhoff_mean", (mean - lyap).abs(), 0.02));
    let std = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let (s_long, s_short) = (std(&long), std(&short));
    if f.has_constant_modulus() {
        out.push(CheckRecord::at_most("birkhoff_concentration", s_long.max(s_short), 0.0));
    } else {
        out.push(CheckRecord::at_most("birkhoff_concentration", s_long - s_short, -f64::MIN_POSITIVE));
    }

    let mut whole: f64 = 0.0;
    for m in 1..=3 {
        whole = whole.max((decomp::visit_probability(sys, f, &ArcSet::whole(), m)?.value - 1.0).abs());
    }
    out.push(CheckRecord::at_most("visit_whole_circle", whole, 1e-10));
    let a0 = ArcSet::new(vec![(0.4, 0.6)])?;
    let ms: Vec<usize> = (3..=10).collect();
    let report = decomp::decay_report(sys, f, &a0, &ms)?;
    if f.has_constant_modulus() {
        let dev = report.probabilities.iter().map(|p| (p.1 - a0.measure()).abs()).fold(0.0, f64::max);
        out.push(CheckRecord::at_most("visit_no_decay", dev, 1e-10));
    } else {
        out.push(CheckRecord::flag("visit_strictly_decreasing", report.strictly_decreasing));
        out.push(CheckRecord::at_most("visit_fitted_rate", report.fitted_rate, 0.95));
    }

    let all = decomp::domain_shift_stat(&walk, &ArcSet::whole(), 1000, 16, ctx.seed(54))?;
    out.push(CheckRecord::at_most(
        "domain_shift_whole",
        (all.total - all.counts.get(&0).copied().unwrap_or(0)) as f64,
        0.0,
    ));
    let b0 = ArcSet::new(vec![(0.0, 0.45), (0.55, 1.0)])?;
    let a_small = b0.complement();
    let count = ctx.cfg.samples.min(20_000);
    let flat = f.has_constant_modulus();
    // undecided ⇔ θ_L ∈ A₀, whose probability is the visit probability
    let p16 = if flat { a_small.measure() } else { decomp::visit_probability(sys, f, &a_small, 16)?.value };
    let mut fractions = Vec::new();
    for (k, len) in [16usize, 64].into_iter().enumerate() {
        let h = decomp::domain_shift_stat(&walk, &b0, count, len, ctx.seed(55 + k as u64))?;
        let frac = h.undecided as f64 / h.total as f64;
        let se = (p16 * (1.0 - p16) / count as f64).sqrt().max(1.0 / count as f64);
        // past L = 16 the non-flat probability is only bounded above by p16
        let stat = if len == 16 || flat { (frac - p16).abs() / se } else { (frac - p16) / se };
        out.push(CheckRecord::at_most(format!("domain_shift_undecided.L{len}"), stat, 4.0));
        fractions.push(frac);
    }
    if flat {
        let se = (2.0 * p16 * (1.0 - p16) / count as f64).sqrt();
        out.push(CheckRecord::at_most("domain_shift_undecided_flat", (fractions[1] - fractions[0]).abs() / se, 4.0));
    } else {
        out.push(CheckRecord::at_most("domain_shift_undecided_decreasing", fractions[1] - fractions[0], 0.0));
    }

    let domain = FundamentalDomain { b0, depth: 6 };
    let cyl = lemma_cylinder();
    let report = decomp::isometry_check(
        &walk,
        &cyl.as_fn(),
        &domain,
        -2..=2,
        ctx.cfg.length.max(12),
        8,
        ctx.cfg.samples,
        ctx.seed(57),
    )?;
    out.push(CheckRecord::at_most("psi_isometry_window", report.max_z(), 4.0));
    Ok(out)
}
