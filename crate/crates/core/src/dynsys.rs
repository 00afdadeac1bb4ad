//! The dynamical system (X, r, μ).
//!
//! Two realizations: the circle [0, 1) with r(t) = N·t mod 1 under Haar
//! measure, and an explicitly stored weighted tree for which only the tree,
//! boundary and harmonic calculus apply.

use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::quadrature::{self, Quadrature};
use crate::rng;

/// Circular distance below which two angles are the same point.
///
/// (t + k)/N rounds whenever t has more significant bits than t + k can
/// hold, so even power-of-two preimages map back only to within a few ulps.
pub const POINT_TOL: f64 = 1e-12;

pub const DEFAULT_PANELS: usize = 4096;

/// A point of the circle, stored as an angle reduced into [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::InvalidPoint(format!("angle {t} is not finite")));
        }
        Ok(Angle::reduce(t))
    }

    fn reduce(t: f64) -> Self {
        let r = t - t.floor();
        // t slightly below an integer can round up to exactly 1.0
        Angle(if r >= 1.0 { 0.0 } else { r })
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Distance on the circle R/Z.
    pub fn distance(self, other: Angle) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(1.0 - d)
    }

    pub fn approx_eq(self, other: Angle) -> bool {
        self == other || self.distance(other) <= POINT_TOL
    }

    /// e^{2πit}
    pub fn character(self) -> Complex64 {
        Complex64::from_polar(1.0, std::f64::consts::TAU * self.0)
    }
}

impl std::fmt::Display for Angle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of X: a circle angle or a node label of an abstract tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Angle(Angle),
    Label(usize),
}

impl Point {
    pub fn angle(self) -> Option<Angle> {
        match self {
            Point::Angle(a) => Some(a),
            Point::Label(_) => None,
        }
    }

    /// Numeric value used in tables: the angle, or the label.
    pub fn coordinate(self) -> f64 {
        match self {
            Point::Angle(a) => a.value(),
            Point::Label(l) => l as f64,
        }
    }
}

impl From<Angle> for Point {
    fn from(a: Angle) -> Self {
        Point::Angle(a)
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Point::Angle(a) => write!(f, "{a}"),
            Point::Label(l) => write!(f, "#{l}"),
        }
    }
}

/// An explicitly stored weighted tree. Node 0 is the root; `weights[y]` is
/// the transition probability from the parent of `y` to `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractTree {
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    weights: Vec<f64>,
}

impl AbstractTree {
    pub fn new(children: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        let n = children.len();
        if n == 0 {
            return Err(Error::InvalidSystem("abstract tree has no nodes".into()));
        }
        if weights.len() != n {
            return Err(Error::InvalidSystem(format!(
                "abstract tree has {n} nodes but {} weights",
                weights.len()
            )));
        }
        let mut parent = vec![None; n];
        for (p, kids) in children.iter().enumerate() {
            for &c in kids {
                if c >= n || c == 0 {
                    return Err(Error::InvalidSystem(format!("invalid child {c} of node {p}")));
                }
                if parent[c].is_some() {
                    return Err(Error::InvalidSystem(format!("node {c} has two parents")));
                }
                parent[c] = Some(p);
            }
        }
        if let Some(orphan) = (1..n).find(|&i| parent[i].is_none()) {
            return Err(Error::InvalidSystem(format!("node {orphan} is unreachable from the root")));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSystem(format!("weight {w} of node {i} is not a probability")));
        }
        Ok(AbstractTree { children, parent, weights })
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn children(&self, label: usize) -> Result<&[usize]> {
        self.children
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidPoint(format!("label {label} not in tree")))
    }

    pub fn parent(&self, label: usize) -> Result<Option<usize>> {
        self.parent
            .get(label)
            .copied()
            .ok_or_else(|| Error::InvalidPoint(format!("label {label} not in tree")))
    }

    pub fn weight(&self, label: usize) -> Result<f64> {
        self.weights
            .get(label)
            .copied()
            .ok_or_else(|| Error::InvalidPoint(format!("label {label} not in tree")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    /// r(t) = N·t mod 1 with Haar measure.
    Circle { n: u32 },
    AbstractTree(AbstractTree),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub kind: SystemKind,
    /// Panel count for μ-integrals.
    pub panels: usize,
}

impl SystemSpec {
    /// N = 1 is accepted but [`SystemSpec::degenerate`] reports it.
    pub fn circle(n: u32) -> Result<Self> {
        Self::circle_with_panels(n, DEFAULT_PANELS)
    }

    pub fn circle_with_panels(n: u32, panels: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSystem("branching N must be at least 1".into()));
        }
        if panels == 0 {
            return Err(Error::InvalidSystem("panel count must be positive".into()));
        }
        Ok(SystemSpec { kind: SystemKind::Circle { n }, panels })
    }

    pub fn abstract_tree(tree: AbstractTree) -> Self {
        SystemSpec { kind: SystemKind::AbstractTree(tree), panels: DEFAULT_PANELS }
    }

    /// Branching N of a circle system.
    pub fn branching(&self) -> Result<u32> {
        match self.kind {
            SystemKind::Circle { n } => Ok(n),
            SystemKind::AbstractTree(_) => Err(Error::NotCircle),
        }
    }

    /// A warning for bijective r, where the QMF condition forces |m₀| ≡ 1.
    pub fn degenerate(&self) -> Option<&'static str> {
        match self.kind {
            SystemKind::Circle { n: 1 } => Some("degenerate: W ≡ |m₀|², deterministic walk"),
            _ => None,
        }
    }

    pub fn is_power_of_two(&self) -> bool {
        matches!(self.kind, SystemKind::Circle { n } if n.is_power_of_two())
    }

    pub fn apply_r(&self, x: Point) -> Result<Point> {
        match (&self.kind, x) {
            (SystemKind::Circle { n }, Point::Angle(a)) => Ok(Point::Angle(r_circle(*n, a))),
            (SystemKind::AbstractTree(tree), Point::Label(l)) => {
                tree.parent(l)?.map(Point::Label).ok_or(Error::RootHasNoImage)
            }
            _ => Err(Error::InvalidPoint(format!("{x} does not belong to this system"))),
        }
    }

    /// All y with r(y) = x, in ascending angle order (circle) or declared
    /// child order (abstract tree).
    pub fn preimages(&self, x: Point) -> Result<Vec<Point>> {
        match (&self.kind, x) {
            (SystemKind::Circle { n }, Point::Angle(a)) => {
                Ok(preimages_circle(*n, a).map(Point::Angle).collect())
            }
            (SystemKind::AbstractTree(tree), Point::Label(l)) => {
                Ok(tree.children(l)?.iter().map(|&c| Point::Label(c)).collect())
            }
            _ => Err(Error::InvalidPoint(format!("{x} does not belong to this system"))),
        }
    }

    /// Point equality: exact for labels, within [`POINT_TOL`] for angles.
    pub fn same_point(&self, a: Point, b: Point) -> bool {
        match (a, b) {
            (Point::Angle(x), Point::Angle(y)) => x.approx_eq(y),
            (Point::Label(x), Point::Label(y)) => x == y,
            _ => false,
        }
    }

    /// ∫ f dμ by composite Gauss–Legendre over the configured panels.
    pub fn integrate_mu<F>(&self, f: F) -> Result<Quadrature<Complex64>>
    where
        F: Fn(Angle) -> Complex64,
    {
        self.branching()?;
        quadrature::composite_intervals(&|t: f64| f(Angle::reduce(t)), &[(0.0, 1.0)], self.panels)
    }

    /// Draw `index` of the uniform sampler under `seed`.
    pub fn sample_mu(&self, seed: u64, index: u64) -> Result<Angle> {
        self.branching()?;
        Ok(sample_uniform(&mut rng::substream(seed, index)))
    }
}

pub(crate) fn r_circle(n: u32, a: Angle) -> Angle {
    Angle::reduce(a.0 * n as f64)
}

pub(crate) fn preimages_circle(n: u32, a: Angle) -> impl Iterator<Item = Angle> {
    let nf = n as f64;
    (0..n).map(move |k| Angle::reduce((a.0 + k as f64) / nf))
}

pub(crate) fn sample_uniform(rng: &mut rng::Rng) -> Angle {
    Angle::reduce(rng.random::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ang(t: f64) -> Point {
        Point::Angle(Angle::new(t).unwrap())
    }

    fn angles(ps: &[Point]) -> Vec<f64> {
        ps.iter().map(|p| p.coordinate()).collect()
    }

    #[test]
    fn apply_r_examples() {
        let s2 = SystemSpec::circle(2).unwrap();
        let s3 = SystemSpec::circle(3).unwrap();
        let third = s2.apply_r(ang(2.0 / 3.0)).unwrap().coordinate();
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s2.apply_r(ang(0.0)).unwrap(), ang(0.0));
        assert_eq!(s3.apply_r(ang(0.5)).unwrap(), ang(0.5));
    }

    #[test]
    fn preimage_examples() {
        let s2 = SystemSpec::circle(2).unwrap();
        let p = angles(&s2.preimages(ang(1.0 / 3.0)).unwrap());
        assert!((p[0] - 1.0 / 6.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(angles(&s2.preimages(ang(0.0)).unwrap()), vec![0.0, 0.5]);
        let s3 = SystemSpec::circle(3).unwrap();
        let p = angles(&s3.preimages(ang(0.0)).unwrap());
        assert_eq!(p.len(), 3);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15 && (p[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn preimages_map_back() {
        for n in [2u32, 3, 4, 5] {
            let s = SystemSpec::circle(n).unwrap();
            for i in 0..200 {
                let x = s.sample_mu(11, i).unwrap();
                let pre = s.preimages(Point::Angle(x)).unwrap();
                assert_eq!(pre.len(), n as usize);
                for y in pre {
                    let back = s.apply_r(y).unwrap().angle().unwrap();
                    assert!(back.distance(x) <= POINT_TOL);
                }
            }
        }
    }

    #[test]
    fn dyadic_preimages_are_exact() {
        let s = SystemSpec::circle(2).unwrap();
        let x = Point::Angle(Angle::new(0.375).unwrap());
        for y in s.preimages(x).unwrap() {
            assert_eq!(s.apply_r(y).unwrap(), x);
        }
    }

    #[test]
    fn angle_reduction() {
        assert_eq!(Angle::new(1.25).unwrap().value(), 0.25);
        assert_eq!(Angle::new(-0.25).unwrap().value(), 0.75);
        assert_eq!(Angle::new(-1e-20).unwrap().value(), 0.0);
        assert!(Angle::new(f64::NAN).is_err());
    }

    #[test]
    fn integrate_mu_examples() {
        let s = SystemSpec::circle(2).unwrap();
        let one = s.integrate_mu(|_| Complex64::new(1.0, 0.0)).unwrap();
        assert!((one.value.re - 1.0).abs() < 1e-14);
        let e = s.integrate_mu(|t| t.character()).unwrap();
        assert!(e.value.norm() < 1e-12);
        let c = s.integrate_mu(|t| Complex64::new((PI * t.value()).cos().powi(2), 0.0)).unwrap();
        assert!((c.value.re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integrate_mu_rejects_abstract_and_non_finite() {
        let tree = AbstractTree::new(vec![vec![]], vec![1.0]).unwrap();
        let s = SystemSpec::abstract_tree(tree);
        assert_eq!(s.integrate_mu(|_| Complex64::new(1.0, 0.0)).unwrap_err(), Error::NotCircle);
        let c = SystemSpec::circle(2).unwrap();
        assert!(matches!(
            c.integrate_mu(|_| Complex64::new(f64::INFINITY, 0.0)),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn sample_mu_is_deterministic_and_uniform() {
        let s = SystemSpec::circle(2).unwrap();
        assert_eq!(s.sample_mu(5, 0).unwrap(), s.sample_mu(5, 0).unwrap());
        let n = 100_000u64;
        let mut mean = Complex64::new(0.0, 0.0);
        let mut quarter = 0u64;
        for i in 0..n {
            let t = s.sample_mu(5, i).unwrap();
            mean += t.character();
            if t.value() < 0.25 {
                quarter += 1;
            }
        }
        mean /= n as f64;
        assert!(mean.norm() < 4.0 / (n as f64).sqrt());
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        assert!((quarter as f64 / n as f64 - 0.25).abs() < 4.0 * sigma);
    }

    #[test]
    fn abstract_tree_navigation() {
        let tree = AbstractTree::new(vec![vec![1, 2], vec![], vec![]], vec![1.0, 0.3, 0.7]).unwrap();
        let s = SystemSpec::abstract_tree(tree);
        assert_eq!(s.apply_r(Point::Label(0)).unwrap_err(), Error::RootHasNoImage);
        assert_eq!(s.apply_r(Point::Label(2)).unwrap(), Point::Label(0));
        assert_eq!(s.preimages(Point::Label(0)).unwrap(), vec![Point::Label(1), Point::Label(2)]);
        assert!(AbstractTree::new(vec![vec![1], vec![1]], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn degenerate_branching_is_flagged() {
        assert!(SystemSpec::circle(1).unwrap().degenerate().is_some());
        assert!(SystemSpec::circle(2).unwrap().degenerate().is_none());
        assert!(SystemSpec::circle(0).is_err());
    }
}
