//! Functions on a truncated tree: p-harmonic functions, additive functions
//! (finite measures on the boundary), QMF-weights, and the maps between them.
//!
//! All identities are checked at internal nodes only. Residuals are relative
//! to max(1, |value|).

use rand::Rng as _;
use rand_distr::Exp1;

use crate::boundary::{self, PathPrefix};
use crate::dynsys::{Angle, Point};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tree::{NodeId, Tree};
use crate::walk::CircleWalk;

pub const VALIDATION_TOL: f64 = 1e-10;
/// Values at or below this are not treated as positive.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// u(x) = Σ_{r(y)=x} W(y) u(y)
    PHarmonic,
    /// ν ≥ 0 and ν(x) = Σ_{r(y)=x} ν(y)
    Additive,
    /// U ≥ 0 and Σ_{r(y)=x} U(y) = 1
    QmfWeight,
    Generic,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::PHarmonic => "p-harmonic",
            Role::Additive => "additive",
            Role::QmfWeight => "qmf-weight",
            Role::Generic => "generic",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p-harmonic" | "harmonic" => Ok(Role::PHarmonic),
            "additive" => Ok(Role::Additive),
            "qmf-weight" | "weight" => Ok(Role::QmfWeight),
            "generic" => Ok(Role::Generic),
            _ => Err(Error::InvalidArgument(format!("unknown role `{s}`"))),
        }
    }
}

/// Values indexed by [`NodeId`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFunction {
    pub values: Vec<f64>,
    pub role: Role,
}

impl NodeFunction {
    pub fn new(tree: &Tree, values: Vec<f64>, role: Role) -> Result<Self> {
        if values.len() != tree.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a tree of {} nodes",
                values.len(),
                tree.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(NodeFunction { values, role })
    }
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(1.0)
}

/// Residual of the role's identity at an internal node; `None` at leaves
/// and for [`Role::Generic`].
pub fn local_residual(tree: &Tree, f: &NodeFunction, x: NodeId) -> Option<f64> {
    if !tree.is_internal(x) {
        return None;
    }
    let nodes = tree.nodes();
    let children = &nodes[x].children;
    let v = &f.values;
    match f.role {
        Role::PHarmonic => Some(relative(v[x], children.iter().map(|&y| nodes[y].w * v[y]).sum())),
        Role::Additive => Some(relative(v[x], children.iter().map(|&y| v[y]).sum())),
        Role::QmfWeight => Some(relative(1.0, children.iter().map(|&y| v[y]).sum())),
        Role::Generic => None,
    }
}

/// Largest local residual and the node attaining it.
pub fn max_residual(tree: &Tree, f: &NodeFunction) -> (f64, NodeId) {
    tree.internal_nodes()
        .filter_map(|x| local_residual(tree, f, x).map(|r| (r, x)))
        .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// Checks sign constraints and the role's identity; returns the largest
/// residual.
pub fn validate(tree: &Tree, f: &NodeFunction) -> Result<f64> {
    if f.values.len() != tree.len() {
        return Err(Error::InvalidArgument("function does not match the tree".into()));
    }
    if matches!(f.role, Role::Additive | Role::QmfWeight) {
        // the root value of a QMF-weight is a convention and not checked
        let skip = usize::from(f.role == Role::QmfWeight);
        if let Some(node) = f.values.iter().skip(skip).position(|&v| v < 0.0) {
            return Err(Error::Negative { node: node + skip });
        }
    }
    let (residual, node) = max_residual(tree, f);
    if residual > VALIDATION_TOL {
        return Err(Error::Validation { role: f.role.name(), node, residual });
    }
    Ok(residual)
}

fn expect_role(f: &NodeFunction, role: Role) -> Result<()> {
    if f.role != role {
        return Err(Error::InvalidArgument(format!("expected a {} function, got {}", role.name(), f.role.name())));
    }
    Ok(())
}

fn check_wn(tree: &Tree) -> Result<()> {
    match tree.nodes().iter().position(|n| n.wn <= POSITIVITY_FLOOR) {
        Some(node) => Err(Error::Underflow { node }),
        None => Ok(()),
    }
}

/// u(x) = ν(x)/W^(n(x))(x).
pub fn additive_to_harmonic(tree: &Tree, nu: &NodeFunction) -> Result<NodeFunction> {
    expect_role(nu, Role::Additive)?;
    tree.require_regular()?;
    validate(tree, nu)?;
    check_wn(tree)?;
    let values = tree.nodes().iter().zip(&nu.values).map(|(n, v)| v * n.martin_constant()).collect();
    let u = NodeFunction { values, role: Role::PHarmonic };
    validate(tree, &u)?;
    Ok(u)
}

/// ν(x) = u(x)·W^(n(x))(x); u must be non-negative.
pub fn harmonic_to_additive(tree: &Tree, u: &NodeFunction) -> Result<NodeFunction> {
    expect_role(u, Role::PHarmonic)?;
    tree.require_regular()?;
    if let Some(node) = u.values.iter().position(|&v| v < 0.0) {
        return Err(Error::Negative { node });
    }
    validate(tree, u)?;
    let values = tree.nodes().iter().zip(&u.values).map(|(n, v)| v * n.wn).collect();
    let nu = NodeFunction { values, role: Role::Additive };
    validate(tree, &nu)?;
    Ok(nu)
}

/// U(x) = ν(x)/ν(r(x)); the root gets 1.
pub fn additive_to_weight(tree: &Tree, nu: &NodeFunction) -> Result<NodeFunction> {
    expect_role(nu, Role::Additive)?;
    validate(tree, nu)?;
    if let Some(node) = nu.values.iter().position(|&v| v <= POSITIVITY_FLOOR) {
        return Err(Error::NotPositive { node });
    }
    let values = tree
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| n.parent.map_or(1.0, |p| nu.values[i] / nu.values[p]))
        .collect();
    let w = NodeFunction { values, role: Role::QmfWeight };
    validate(tree, &w)?;
    Ok(w)
}

/// ν(x) = ν(x₀)·U(x)U(r(x))⋯U(r^{n(x)−1}(x)).
pub fn weight_to_additive(tree: &Tree, weight: &NodeFunction, root_mass: f64) -> Result<NodeFunction> {
    expect_role(weight, Role::QmfWeight)?;
    if !(root_mass >= 0.0 && root_mass.is_finite()) {
        return Err(Error::InvalidArgument(format!("root mass {root_mass} must be finite and non-negative")));
    }
    validate(tree, weight)?;
    let mut values = vec![0.0; tree.len()];
    for (i, n) in tree.nodes().iter().enumerate() {
        // breadth-first order: parents come first
        values[i] = match n.parent {
            None => root_mass,
            Some(p) => values[p] * weight.values[i],
        };
    }
    let nu = NodeFunction { values, role: Role::Additive };
    validate(tree, &nu)?;
    Ok(nu)
}

/// u(x) = ∫_{∂T} K(x, ω) dν(ω), evaluated through cylinder sets: a path
/// through x gives the boundary kernel, and the set of such paths has
/// ν-mass ν(x).
pub fn martin_represent(tree: &Tree, nu: &NodeFunction) -> Result<NodeFunction> {
    expect_role(nu, Role::Additive)?;
    tree.require_regular()?;
    validate(tree, nu)?;
    check_wn(tree)?;
    let mut values = vec![0.0; tree.len()];
    for (x, value) in values.iter_mut().enumerate() {
        let prefix = PathPrefix::to_node(tree, x)?;
        let cylinder = *boundary::locate(tree, &prefix)?.last().expect("nonempty");
        *value = nu.values[cylinder] * boundary::boundary_kernel(tree, x, &prefix)?;
    }
    Ok(NodeFunction { values, role: Role::PHarmonic })
}

/// The additive function ν₀ = W^(n(x))(x) of the constant harmonic function 1.
pub fn nu0(tree: &Tree) -> NodeFunction {
    NodeFunction { values: tree.nodes().iter().map(|n| n.wn).collect(), role: Role::Additive }
}

/// A QMF-weight whose values on each sibling set are Dirichlet(1, …, 1).
pub fn random_qmf_weight(tree: &Tree, rng: &mut Rng) -> NodeFunction {
    let mut values = vec![0.0; tree.len()];
    values[0] = 1.0;
    for x in tree.internal_nodes() {
        let children = &tree.nodes()[x].children;
        let draws: Vec<f64> = children.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        for (&c, d) in children.iter().zip(draws) {
            values[c] = d / total;
        }
    }
    NodeFunction { values, role: Role::QmfWeight }
}

/// A strictly positive additive function with the given root mass.
pub fn random_additive(tree: &Tree, rng: &mut Rng, root_mass: f64) -> Result<NodeFunction> {
    weight_to_additive(tree, &random_qmf_weight(tree, rng), root_mass)
}

/// The compatible family ν_{x₀}(x) = h(x)·W^(n(x))(x) on T(x₀) built from
/// an R_W-harmonic function h, for several roots at once.
#[derive(Debug, Clone)]
pub struct HarmonicFamily {
    pub trees: Vec<Tree>,
    pub measures: Vec<NodeFunction>,
    /// Largest additivity residual over all trees.
    pub additivity_residual: f64,
    /// Largest |ν_{r(a)}(x) − W(a)ν_a(x)| over nested pairs, on T(a) down to
    /// depth − 1; `None` when no root is the image of another.
    pub compatibility_residual: Option<f64>,
    /// Largest |h(a) − ν_{r(a)}(a)/W(a)| over nested pairs.
    pub reconstruction_residual: Option<f64>,
    /// Number of nested pairs (a, r(a)) among the roots.
    pub nested_pairs: usize,
}

pub fn rw_harmonic_family<H>(walk: &CircleWalk, h: &H, roots: &[Angle], depth: usize) -> Result<HarmonicFamily>
where
    H: Fn(Angle) -> f64 + ?Sized,
{
    if depth == 0 {
        return Err(Error::InvalidArgument("family needs depth ≥ 1".into()));
    }
    let mut trees = Vec::with_capacity(roots.len());
    let mut measures = Vec::with_capacity(roots.len());
    let mut additivity_residual: f64 = 0.0;
    for &root in roots {
        let tree = Tree::build(walk, Point::Angle(root), depth)?;
        if let Some(w) = &tree.regularity().witness {
            return Err(Error::NotRegular(format!("root {root}: {w}")));
        }
        let values = tree
            .nodes()
            .iter()
            .map(|n| h(n.point.angle().expect("circle tree")) * n.wn)
            .collect::<Vec<_>>();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("h is not finite at node {i} of root {root}")));
        }
        let nu = NodeFunction { values, role: Role::Additive };
        additivity_residual = additivity_residual.max(max_residual(&tree, &nu).0);
        trees.push(tree);
        measures.push(nu);
    }

    let mut nested_pairs = 0;
    let mut compat: f64 = 0.0;
    let mut recon: f64 = 0.0;
    for (ia, ta) in trees.iter().enumerate() {
        let a = ta.nodes()[0].point;
        let image = walk.system().apply_r(a)?;
        for (ib, tb) in trees.iter().enumerate() {
            if ia == ib || !walk.system().same_point(image, tb.nodes()[0].point) {
                continue;
            }
            let Some(&a_in_b) = tb.nodes()[0].children.iter().find(|&&c| walk.system().same_point(tb.nodes()[c].point, a))
            else {
                continue;
            };
            nested_pairs += 1;
            let (nu_a, nu_b) = (&measures[ia], &measures[ib]);
            let w_a = tb.nodes()[a_in_b].w;
            // T(a) sits inside T(b) one level down; both are built in
            // breadth-first order, so the embedding follows child indices.
            let mut map = vec![0usize; ta.len()];
            map[0] = a_in_b;
            for (x, node) in ta.nodes().iter().enumerate() {
                if node.depth + 1 >= depth {
                    continue;
                }
                for (k, &c) in node.children.iter().enumerate() {
                    map[c] = tb.nodes()[map[x]].children[k];
                }
            }
            for (x, node) in ta.nodes().iter().enumerate() {
                if node.depth < depth {
                    compat = compat.max(relative(nu_b.values[map[x]], w_a * nu_a.values[x]));
                }
            }
            recon = recon.max(relative(nu_a.values[0], nu_b.values[a_in_b] / w_a));
        }
    }
    let nested = nested_pairs > 0;
    Ok(HarmonicFamily {
        trees,
        measures,
        additivity_residual,
        compatibility_residual: nested.then_some(compat),
        reconstruction_residual: nested.then_some(recon),
        nested_pairs,
    })
}
