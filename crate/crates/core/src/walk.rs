//! Sources of the backward random walk: each point steps to one of its
//! preimages y with probability W(y).

use crate::dynsys::{self, AbstractTree, Point, SystemSpec};
use crate::error::{Error, Result};
use crate::filter::FilterSpec;

pub trait WeightedPreimages {
    /// Preimages in canonical order.
    fn preimages(&self, x: Point) -> Result<Vec<Point>>;

    fn image(&self, x: Point) -> Result<Point>;

    /// Transition probability W(y) from r(y) to y.
    fn weight(&self, y: Point) -> Result<f64>;

    fn same_point(&self, a: Point, b: Point) -> bool;
}

/// The circle walk driven by a QMF filter.
#[derive(Debug, Clone, Copy)]
pub struct CircleWalk<'a> {
    sys: &'a SystemSpec,
    filter: &'a FilterSpec,
}

impl<'a> CircleWalk<'a> {
    pub fn new(sys: &'a SystemSpec, filter: &'a FilterSpec) -> Result<Self> {
        let n = sys.branching()?;
        if n != filter.branching() {
            return Err(Error::InvalidFilter(format!(
                "filter `{}` was built for N = {}, system has N = {n}",
                filter.name(),
                filter.branching()
            )));
        }
        filter.require_qmf()?;
        Ok(CircleWalk { sys, filter })
    }

    pub fn system(&self) -> &'a SystemSpec {
        self.sys
    }

    pub fn filter(&self) -> &'a FilterSpec {
        self.filter
    }
}

impl WeightedPreimages for CircleWalk<'_> {
    fn preimages(&self, x: Point) -> Result<Vec<Point>> {
        self.sys.preimages(x)
    }

    fn image(&self, x: Point) -> Result<Point> {
        self.sys.apply_r(x)
    }

    fn weight(&self, y: Point) -> Result<f64> {
        match y {
            Point::Angle(a) => Ok(self.filter.w(a)),
            Point::Label(_) => Err(Error::InvalidPoint(format!("{y} is not a circle point"))),
        }
    }

    fn same_point(&self, a: Point, b: Point) -> bool {
        self.sys.same_point(a, b)
    }
}

impl WeightedPreimages for AbstractTree {
    fn preimages(&self, x: Point) -> Result<Vec<Point>> {
        match x {
            Point::Label(l) => Ok(self.children(l)?.iter().map(|&c| Point::Label(c)).collect()),
            Point::Angle(_) => Err(Error::InvalidPoint(format!("{x} is not a tree label"))),
        }
    }

    fn image(&self, x: Point) -> Result<Point> {
        match x {
            Point::Label(l) => self.parent(l)?.map(Point::Label).ok_or(Error::RootHasNoImage),
            Point::Angle(_) => Err(Error::InvalidPoint(format!("{x} is not a tree label"))),
        }
    }

    fn weight(&self, y: Point) -> Result<f64> {
        match y {
            Point::Label(l) => AbstractTree::weight(self, l),
            Point::Angle(_) => Err(Error::InvalidPoint(format!("{y} is not a tree label"))),
        }
    }

    fn same_point(&self, a: Point, b: Point) -> bool {
        a == b
    }
}

/// The walk of a system: the circle walk for circle systems (which needs a
/// filter) or the stored tree.
pub fn walk_for<'a>(
    sys: &'a SystemSpec,
    filter: Option<&'a FilterSpec>,
) -> Result<Box<dyn WeightedPreimages + 'a>> {
    match &sys.kind {
        dynsys::SystemKind::AbstractTree(tree) => Ok(Box::new(tree.clone())),
        dynsys::SystemKind::Circle { .. } => {
            let filter = filter.ok_or_else(|| Error::InvalidFilter("circle walk needs a filter".into()))?;
            Ok(Box::new(CircleWalk::new(sys, filter)?))
        }
    }
}
