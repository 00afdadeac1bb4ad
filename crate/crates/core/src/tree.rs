//! Depth-truncated preimage trees T(x₀) and the potential theory of the
//! backward walk on them: transition kernels, Green function, Martin kernel
//! and the Martin metric ρ.
//!
//! Nodes are enumerated breadth first, children in canonical preimage order.
//! Node `i` carries the metric weight D(qᵢ) = 2^{-(i+1)}, so the weights sum
//! to less than one and the mass beyond any truncation is known exactly.

use crate::dynsys::{Angle, Point};
use crate::error::{Error, Result};
use crate::walk::WeightedPreimages;

pub type NodeId = usize;

/// W at or below this counts as a zero of W on the tree.
pub const ZERO_WEIGHT_TOL: f64 = 1e-14;

/// Largest node count whose metric weights 2^{-(i+1)} stay representable.
pub const MAX_METRIC_NODES: usize = 1073;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub point: Point,
    pub parent: Option<NodeId>,
    pub depth: usize,
    /// W(x)
    pub w: f64,
    /// W^(n(x))(x) = W(x)·W(r(x))⋯W(r^{n(x)−1}(x)); 1 at the root.
    pub wn: f64,
    /// D(q)
    pub metric_weight: f64,
    pub children: Vec<NodeId>,
}

impl Node {
    /// C_x = 1/W^(n(x))(x).
    pub fn martin_constant(&self) -> f64 {
        1.0 / self.wn
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// r^period(x₀) = x₀.
    Periodic { period: usize },
    ZeroWeight { node: NodeId, point: Point, weight: f64 },
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Witness::Periodic { period } => write!(f, "root is periodic with period {period}"),
            Witness::ZeroWeight { node, point, weight } => {
                write!(f, "W({point}) = {weight:e} vanishes at node {node}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub regular: bool,
    /// Depth up to which the conditions were verified.
    pub checked_depth: usize,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    depth: usize,
    regularity: RegularityReport,
}

impl Tree {
    /// Builds T(x₀) down to `depth`. A regularity failure does not abort
    /// construction; it is recorded and kernel operations then refuse.
    pub fn build(walk: &dyn WeightedPreimages, root: Point, depth: usize) -> Result<Tree> {
        let root_w = walk.weight(root)?;
        let mut nodes = vec![Node {
            point: root,
            parent: None,
            depth: 0,
            w: root_w,
            wn: 1.0,
            metric_weight: 0.5,
            children: Vec::new(),
        }];
        let mut head = 0;
        while head < nodes.len() {
            if nodes[head].depth < depth {
                for point in walk.preimages(nodes[head].point)? {
                    let w = walk.weight(point)?;
                    let id = nodes.len();
                    nodes.push(Node {
                        point,
                        parent: Some(head),
                        depth: nodes[head].depth + 1,
                        w,
                        wn: w * nodes[head].wn,
                        metric_weight: metric_weight(id),
                        children: Vec::new(),
                    });
                    nodes[head].children.push(id);
                }
            }
            head += 1;
        }
        let regularity = regularity(walk, &nodes, depth);
        Ok(Tree { nodes, depth, regularity })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id).ok_or(Error::NoSuchNode(id))
    }

    pub fn regularity(&self) -> &RegularityReport {
        &self.regularity
    }

    pub fn require_regular(&self) -> Result<()> {
        if self.regularity.regular {
            Ok(())
        } else {
            let why = self
                .regularity
                .witness
                .as_ref()
                .map(ToString::to_string)
                .unwrap_or_else(|| "unknown".into());
            Err(Error::NotRegular(why))
        }
    }

    /// Nodes whose children are inside the truncation.
    pub fn is_internal(&self, id: NodeId) -> bool {
        self.nodes[id].depth < self.depth
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.is_internal(i))
    }

    /// First node whose point equals `p` (angles within [`crate::dynsys::POINT_TOL`]).
    pub fn find(&self, p: Point) -> Option<NodeId> {
        self.nodes.iter().position(|n| match (n.point, p) {
            (Point::Angle(a), Point::Angle(b)) => a.approx_eq(b),
            (a, b) => a == b,
        })
    }

    /// Node ids from the root down to `id`.
    pub fn path_from_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// The ancestor of `id` at `depth`, if `depth` ≤ depth of `id`.
    pub fn ancestor_at(&self, id: NodeId, depth: usize) -> Option<NodeId> {
        let mut cur = id;
        if self.nodes[cur].depth < depth {
            return None;
        }
        while self.nodes[cur].depth > depth {
            cur = self.nodes[cur].parent?;
        }
        Some(cur)
    }

    /// y ∈ T(x), including y = x.
    pub fn in_subtree(&self, x: NodeId, y: NodeId) -> bool {
        self.ancestor_at(y, self.nodes[x].depth) == Some(x)
    }

    fn check(&self, id: NodeId) -> Result<&Node> {
        self.node(id)
    }

    /// p_n(x, y): W(y)W(r(y))⋯W(r^{n−1}(y)) when r^n(y) = x, else 0.
    pub fn transition_pn(&self, x: NodeId, y: NodeId, n: usize) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        if n > self.depth {
            return Err(Error::DepthExceeded { requested: n, depth: self.depth });
        }
        if n == 0 {
            return Ok(if x == y { 1.0 } else { 0.0 });
        }
        let mut cur = y;
        let mut prod = 1.0;
        for _ in 0..n {
            prod *= self.nodes[cur].w;
            match self.nodes[cur].parent {
                Some(p) => cur = p,
                None => return Ok(0.0),
            }
        }
        Ok(if cur == x { prod } else { 0.0 })
    }

    /// Green function g(x, y); only the term with r^n(y) = x survives.
    pub fn green(&self, x: NodeId, y: NodeId) -> Result<f64> {
        self.require_regular()?;
        let (dx, dy) = (self.check(x)?.depth, self.check(y)?.depth);
        if dy < dx || !self.in_subtree(x, y) {
            return Ok(0.0);
        }
        self.transition_pn(x, y, dy - dx)
    }

    /// K(x, y) = C_x on T(x), 0 elsewhere.
    pub fn martin_kernel(&self, x: NodeId, y: NodeId) -> Result<f64> {
        self.require_regular()?;
        let node = self.check(x)?;
        self.check(y)?;
        Ok(if self.in_subtree(x, y) { node.martin_constant() } else { 0.0 })
    }

    /// 2 Σ_{q beyond truncation} D(q).
    pub fn metric_tail(&self) -> f64 {
        2.0 * metric_weight(self.nodes.len() - 1)
    }

    pub(crate) fn require_metric(&self) -> Result<()> {
        self.require_regular()?;
        if self.nodes.len() > MAX_METRIC_NODES {
            return Err(Error::MetricUnderflow { max: MAX_METRIC_NODES });
        }
        Ok(())
    }

    /// Martin metric ρ(x, y) summed over the truncation, with the bound on
    /// the omitted terms.
    pub fn martin_metric(&self, x: NodeId, y: NodeId) -> Result<(f64, f64)> {
        self.require_metric()?;
        self.check(x)?;
        self.check(y)?;
        let mut rho = 0.0;
        for (q, node) in self.nodes.iter().enumerate() {
            let c = node.martin_constant();
            let kx = if self.in_subtree(q, x) { c } else { 0.0 };
            let ky = if self.in_subtree(q, y) { c } else { 0.0 };
            let delta = ((q == x) as i32 - (q == y) as i32).abs() as f64;
            rho += node.metric_weight * ((kx - ky).abs() + delta) / (c + 1.0);
        }
        Ok((rho, self.metric_tail()))
    }

    /// D(q)·C_q/(C_q + 1), the single-term lower bound on the distance of
    /// two points separated at q.
    pub fn separation_bound(&self, q: NodeId) -> Result<f64> {
        let node = self.check(q)?;
        let c = node.martin_constant();
        Ok(node.metric_weight * c / (c + 1.0))
    }
}

/// D(qᵢ) = 2^{-(i+1)}.
pub fn metric_weight(index: usize) -> f64 {
    // exact: powers of two down to the subnormal range
    0.5f64.powi(index as i32 + 1)
}

fn regularity(walk: &dyn WeightedPreimages, nodes: &[Node], depth: usize) -> RegularityReport {
    let horizon = depth.max(1);
    let root = nodes[0].point;
    let mut x = root;
    for period in 1..=horizon {
        match walk.image(x) {
            Ok(next) => x = next,
            // the root of a stored tree has no image; it cannot be periodic
            Err(_) => break,
        }
        if walk.same_point(x, root) {
            return RegularityReport {
                regular: false,
                checked_depth: horizon,
                witness: Some(Witness::Periodic { period }),
            };
        }
    }
    for (id, node) in nodes.iter().enumerate() {
        if node.w <= ZERO_WEIGHT_TOL {
            return RegularityReport {
                regular: false,
                checked_depth: horizon,
                witness: Some(Witness::ZeroWeight { node: id, point: node.point, weight: node.w }),
            };
        }
    }
    RegularityReport { regular: true, checked_depth: horizon, witness: None }
}


/// Regularity of x₀ up to `depth`: non-periodicity and W ≠ 0 on T(x₀).
pub fn check_regular(walk: &dyn WeightedPreimages, root: Point, depth: usize) -> Result<RegularityReport> {
    if depth == 0 {
        return Err(Error::InvalidArgument("regularity check needs depth ≥ 1".into()));
    }
    Ok(Tree::build(walk, root, depth)?.regularity)
}

/// Convenience for circle roots given as angles.
pub fn angle_point(t: f64) -> Result<Point> {
    Ok(Point::Angle(Angle::new(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{AbstractTree, SystemSpec};
    use crate::filter::FilterSpec;
    use crate::walk::CircleWalk;

    fn haar_tree(root: f64, depth: usize) -> Tree {
        let s = SystemSpec::circle(2).unwrap();
        let f = FilterSpec::haar(&s).unwrap();
        Tree::build(&CircleWalk::new(&s, &f).unwrap(), angle_point(root).unwrap(), depth).unwrap()
    }

    fn id(t: &Tree, x: f64) -> NodeId {
        t.find(angle_point(x).unwrap()).unwrap()
    }

    const GENERIC: f64 = 0.1234477851;

    #[test]
    fn build_examples() {
        let t = haar_tree(1.0 / 3.0, 2);
        assert_eq!(t.len(), 7);
        let d1: Vec<f64> = t.nodes()[1..3].iter().map(|n| n.point.coordinate()).collect();
        assert!((d1[0] - 1.0 / 6.0).abs() < 1e-15 && (d1[1] - 2.0 / 3.0).abs() < 1e-15);
        let kids: Vec<f64> =
            t.nodes()[1].children.iter().map(|&c| t.nodes()[c].point.coordinate()).collect();
        assert!((kids[0] - 1.0 / 12.0).abs() < 1e-15 && (kids[1] - 7.0 / 12.0).abs() < 1e-15);

        let t0 = haar_tree(GENERIC, 0);
        assert_eq!(t0.len(), 1);
        assert_eq!(t0.nodes()[0].wn, 1.0);

        let s = SystemSpec::circle(2).unwrap();
        let c = FilterSpec::constant(&s).unwrap();
        let t = Tree::build(&CircleWalk::new(&s, &c).unwrap(), angle_point(GENERIC).unwrap(), 3).unwrap();
        assert_eq!(t.len(), 15);
        for n in &t.nodes()[1..] {
            assert_eq!(n.w, 0.5);
            assert_eq!(n.wn, 0.5f64.powi(n.depth as i32));
        }
    }

    #[test]
    fn tree_invariants() {
        let t = haar_tree(GENERIC, 6);
        let mut dsum = 0.0;
        for (i, n) in t.nodes().iter().enumerate() {
            dsum += n.metric_weight;
            if let Some(p) = n.parent {
                assert_eq!(n.wn, n.w * t.nodes()[p].wn);
                let s = SystemSpec::circle(2).unwrap();
                assert!(s.same_point(s.apply_r(n.point).unwrap(), t.nodes()[p].point));
            }
            if t.is_internal(i) {
                let s: f64 = n.children.iter().map(|&c| t.nodes()[c].w).sum();
                assert!((s - 1.0).abs() < 1e-10);
            }
        }
        assert!(dsum <= 1.0);
    }

    #[test]
    fn regularity_examples() {
        let s = SystemSpec::circle(2).unwrap();
        let f = FilterSpec::haar(&s).unwrap();
        let w = CircleWalk::new(&s, &f).unwrap();
        let r = check_regular(&w, angle_point(1.0 / 3.0).unwrap(), 6).unwrap();
        assert!(!r.regular);
        assert_eq!(r.witness, Some(Witness::Periodic { period: 2 }));
        assert!(check_regular(&w, angle_point(GENERIC).unwrap(), 10).unwrap().regular);
        let fixed = check_regular(&w, angle_point(1.0).unwrap(), 4).unwrap();
        assert_eq!(fixed.witness, Some(Witness::Periodic { period: 1 }));
        // 1/4 → 1/2 → 0: the tree of 0 contains the zero 1/2 of W, but 0 is caught as fixed first
        let r = check_regular(&w, angle_point(0.75).unwrap(), 3).unwrap();
        assert!(r.regular);
    }

    #[test]
    fn zero_weight_witness() {
        let tree = AbstractTree::new(vec![vec![1, 2], vec![], vec![]], vec![1.0, 1.0, 0.0]).unwrap();
        let r = check_regular(&tree, Point::Label(0), 1).unwrap();
        assert!(matches!(r.witness, Some(Witness::ZeroWeight { node: 2, .. })));
    }

    #[test]
    fn kernels_refuse_non_regular_trees() {
        let t = haar_tree(1.0 / 3.0, 3);
        assert!(matches!(t.green(0, 1), Err(Error::NotRegular(_))));
        assert!(matches!(t.martin_kernel(0, 1), Err(Error::NotRegular(_))));
        assert!(matches!(t.martin_metric(0, 1), Err(Error::NotRegular(_))));
        // transition kernels do not need regularity
        assert!((t.transition_pn(0, 1, 1).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn transition_examples() {
        let t = haar_tree(1.0 / 3.0, 3);
        let (a, b, c) = (id(&t, 1.0 / 3.0), id(&t, 1.0 / 6.0), id(&t, 1.0 / 12.0));
        assert!((t.transition_pn(a, b, 1).unwrap() - 0.75).abs() < 1e-15);
        let p2 = t.transition_pn(a, c, 2).unwrap();
        assert!((p2 - 0.699_759_526_419_164_1).abs() < 1e-12, "{p2}");
        assert_eq!(t.transition_pn(b, id(&t, 2.0 / 3.0), 1).unwrap(), 0.0);
        assert_eq!(t.transition_pn(a, a, 0).unwrap(), 1.0);
        assert!(matches!(t.transition_pn(a, c, 4), Err(Error::DepthExceeded { .. })));
    }

    #[test]
    fn green_and_kernel_examples() {
        // regular root whose depth-1 and depth-2 nodes sit near the same angles as the 1/3 tree
        let t = haar_tree(GENERIC, 4);
        for i in 0..t.len() {
            assert_eq!(t.green(i, i).unwrap(), 1.0);
            assert_eq!(t.martin_kernel(0, i).unwrap(), 1.0);
        }
        let x1 = t.nodes()[0].children[0];
        let x2 = t.nodes()[x1].children[0];
        let other = t.nodes()[0].children[1];
        let w1 = t.nodes()[x1].w;
        let w2 = t.nodes()[x2].w;
        assert_eq!(t.green(0, x2).unwrap(), w2 * w1);
        assert_eq!(t.green(x1, other).unwrap(), 0.0);
        assert_eq!(t.martin_kernel(x1, x2).unwrap(), 1.0 / w1);
        assert_eq!(t.martin_kernel(other, x2).unwrap(), 0.0);
    }

    #[test]
    fn metric_basics() {
        let t = haar_tree(GENERIC, 4);
        let (v, tail) = t.martin_metric(3, 3).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(tail, 2.0 * 0.5f64.powi(31));
        for x in 0..t.len() {
            for y in 0..t.len() {
                assert_eq!(t.martin_metric(x, y).unwrap().0, t.martin_metric(y, x).unwrap().0);
            }
        }
    }

    #[test]
    fn metric_refuses_underflowing_trees() {
        let t = haar_tree(GENERIC, 10);
        assert_eq!(t.martin_metric(0, 1), Err(Error::MetricUnderflow { max: MAX_METRIC_NODES }));
    }
}
