//! Path space Ω_{x₀}, cylinder measures P_{x₀}, the W-driven random walk, and
//! the boundary identification Φ: Ω_{x₀} → ∂T(x₀).
//!
//! A boundary point is represented by any finite prefix of a path. Boundary
//! quantities are computed over the tree truncation and carry an explicit
//! bound on the omitted terms.

use rand::Rng as _;
use rayon::prelude::*;

use crate::dynsys::Point;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tree::{NodeId, Tree};
use crate::walk::WeightedPreimages;

/// A finite walk (x₀, x₁, …, x_L) with r(x_{k+1}) = x_k.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPrefix {
    points: Vec<Point>,
}

impl PathPrefix {
    pub fn new(walk: &dyn WeightedPreimages, points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidPrefix("a prefix needs at least x₀".into()));
        }
        for (k, pair) in points.windows(2).enumerate() {
            let image = walk.image(pair[1])?;
            if !walk.same_point(image, pair[0]) {
                return Err(Error::InvalidPrefix(format!(
                    "r(x_{}) = {image} differs from x_{k} = {}",
                    k + 1,
                    pair[0]
                )));
            }
        }
        Ok(PathPrefix { points })
    }

    /// The prefix running from the root of `tree` to `node`.
    pub fn to_node(tree: &Tree, node: NodeId) -> Result<Self> {
        tree.node(node)?;
        let points = tree.path_from_root(node).into_iter().map(|i| tree.nodes()[i].point).collect();
        Ok(PathPrefix { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn root(&self) -> Point {
        self.points[0]
    }

    /// Number of steps L.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    /// The first `steps` steps.
    pub fn truncate(&self, steps: usize) -> PathPrefix {
        PathPrefix { points: self.points[..=steps.min(self.steps())].to_vec() }
    }
}

/// P_{x₀}(V_{x₀,…,x_L}) = W(x₁)⋯W(x_L).
pub fn cylinder_measure(walk: &dyn WeightedPreimages, prefix: &PathPrefix) -> Result<f64> {
    prefix.points[1..].iter().try_fold(1.0, |acc, &y| Ok(acc * walk.weight(y)?))
}

/// One step of the walk: inverse CDF over the canonically ordered preimages.
pub fn step(walk: &dyn WeightedPreimages, x: Point, rng: &mut Rng, index: usize) -> Result<Point> {
    let children = walk.preimages(x)?;
    let weights = children.iter().map(|&y| walk.weight(y)).collect::<Result<Vec<_>>>()?;
    let total: f64 = weights.iter().sum();
    if !(total > crate::tree::ZERO_WEIGHT_TOL) {
        return Err(Error::ZeroWeightStep { step: index });
    }
    let u = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    for (&y, &w) in children.iter().zip(&weights) {
        cumulative += w;
        if u < cumulative {
            return Ok(y);
        }
    }
    // u landed in the rounding gap at the top; take the last charged child
    let last = weights.iter().rposition(|&w| w > 0.0).expect("total weight is positive");
    Ok(children[last])
}

pub fn sample_path_with(
    walk: &dyn WeightedPreimages,
    x0: Point,
    length: usize,
    rng: &mut Rng,
) -> Result<PathPrefix> {
    let mut points = Vec::with_capacity(length + 1);
    points.push(x0);
    for k in 0..length {
        let next = step(walk, points[k], rng, k)?;
        points.push(next);
    }
    Ok(PathPrefix { points })
}

/// A length-`length` walk from x₀; identical for identical seeds.
pub fn sample_path(walk: &dyn WeightedPreimages, x0: Point, length: usize, seed: u64) -> Result<PathPrefix> {
    sample_path_with(walk, x0, length, &mut rng::substream(seed, 0))
}

/// `count` independent walks; walk i uses stream i of `seed`.
pub fn sample_paths<W>(walk: &W, x0: Point, length: usize, count: usize, seed: u64) -> Result<Vec<PathPrefix>>
where
    W: WeightedPreimages + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| sample_path_with(walk, x0, length, &mut rng::substream(seed, i as u64)))
        .collect()
}

/// Tree nodes visited by the prefix, from the root down to the tree depth or
/// the end of the prefix.
pub fn locate(tree: &Tree, prefix: &PathPrefix) -> Result<Vec<NodeId>> {
    let nodes = tree.nodes();
    if !same(nodes[0].point, prefix.root()) {
        return Err(Error::InvalidPrefix(format!(
            "prefix starts at {} but the tree root is {}",
            prefix.root(),
            nodes[0].point
        )));
    }
    let mut out = vec![0];
    for &p in prefix.points.iter().skip(1).take(tree.depth()) {
        let cur = *out.last().expect("nonempty");
        let next = nodes[cur]
            .children
            .iter()
            .copied()
            .find(|&c| same(nodes[c].point, p))
            .ok_or_else(|| Error::InvalidPrefix(format!("{p} is not a child of {}", nodes[cur].point)))?;
        out.push(next);
    }
    Ok(out)
}

fn same(a: Point, b: Point) -> bool {
    match (a, b) {
        (Point::Angle(x), Point::Angle(y)) => x.approx_eq(y),
        _ => a == b,
    }
}

/// K(x, Φ(path)) = 1/(W(x₁)⋯W(x_n)) when the path passes through x at
/// depth n = n(x), else 0.
pub fn boundary_kernel(tree: &Tree, x: NodeId, prefix: &PathPrefix) -> Result<f64> {
    tree.require_regular()?;
    let node = tree.node(x)?;
    if prefix.steps() < node.depth {
        return Err(Error::Undetermined(format!(
            "node at depth {} needs a prefix of at least {} steps, got {}",
            node.depth,
            node.depth,
            prefix.steps()
        )));
    }
    let visited = locate(tree, prefix)?;
    Ok(if visited[node.depth] == x { node.martin_constant() } else { 0.0 })
}

/// Distance of Φ(A) and Φ(B) in the extended Martin metric, summed over the
/// truncation, with the bound 2 Σ_{q beyond} D(q) on the rest. Boundary
/// points contribute no δ-terms.
pub fn boundary_distance(tree: &Tree, a: &PathPrefix, b: &PathPrefix) -> Result<(f64, f64)> {
    tree.require_metric()?;
    for p in [a, b] {
        if p.steps() < tree.depth() {
            return Err(Error::Undetermined(format!(
                "prefix of {} steps is shorter than the tree depth {}",
                p.steps(),
                tree.depth()
            )));
        }
    }
    let va = locate(tree, a)?;
    let vb = locate(tree, b)?;
    let mut rho = 0.0;
    for (q, node) in tree.nodes().iter().enumerate() {
        let c = node.martin_constant();
        let ka = if va[node.depth] == q { c } else { 0.0 };
        let kb = if vb[node.depth] == q { c } else { 0.0 };
        rho += node.metric_weight * (ka - kb).abs() / (c + 1.0);
    }
    Ok((rho, tree.metric_tail()))
}

/// Depth of the first step where two prefixes from the same root differ.
pub fn divergence_depth(walk: &dyn WeightedPreimages, a: &PathPrefix, b: &PathPrefix) -> Option<usize> {
    a.points
        .iter()
        .zip(&b.points)
        .position(|(&x, &y)| !walk.same_point(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{Angle, SystemSpec};
    use crate::filter::FilterSpec;
    use crate::tree::angle_point;
    use crate::walk::CircleWalk;

    fn setup() -> (SystemSpec, FilterSpec) {
        let s = SystemSpec::circle(2).unwrap();
        let f = FilterSpec::haar(&s).unwrap();
        (s, f)
    }

    fn pts(ts: &[f64]) -> Vec<Point> {
        ts.iter().map(|&t| Point::Angle(Angle::new(t).unwrap())).collect()
    }

    const P2: f64 = 0.699_759_526_419_164_1; // 0.75·cos²(π/12)

    #[test]
    fn cylinder_examples() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let p0 = PathPrefix::new(&w, pts(&[1.0 / 3.0])).unwrap();
        assert_eq!(cylinder_measure(&w, &p0).unwrap(), 1.0);
        let p1 = PathPrefix::new(&w, pts(&[1.0 / 3.0, 1.0 / 6.0])).unwrap();
        assert!((cylinder_measure(&w, &p1).unwrap() - 0.75).abs() < 1e-15);
        let p2 = PathPrefix::new(&w, pts(&[1.0 / 3.0, 1.0 / 6.0, 1.0 / 12.0])).unwrap();
        assert!((cylinder_measure(&w, &p2).unwrap() - P2).abs() < 1e-12);
    }

    #[test]
    fn prefix_validation() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        assert!(matches!(
            PathPrefix::new(&w, pts(&[1.0 / 3.0, 0.2])),
            Err(Error::InvalidPrefix(_))
        ));
        assert!(PathPrefix::new(&w, vec![]).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let x0 = angle_point(1.0 / 3.0).unwrap();
        assert_eq!(sample_path(&w, x0, 20, 9).unwrap(), sample_path(&w, x0, 20, 9).unwrap());
    }

    #[test]
    fn first_step_frequencies() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let x0 = angle_point(1.0 / 3.0).unwrap();
        let n = 100_000;
        let paths = sample_paths(&w, x0, 1, n, 4).unwrap();
        let hits = paths.iter().filter(|p| same(p.points()[1], angle_point(1.0 / 6.0).unwrap())).count();
        let sigma = (0.75 * 0.25 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.75).abs() < 4.0 * sigma);

        let c = FilterSpec::constant(&s).unwrap();
        let wc = CircleWalk::new(&s, &c).unwrap();
        let paths = sample_paths(&wc, x0, 1, n, 4).unwrap();
        let hits = paths.iter().filter(|p| same(p.points()[1], angle_point(1.0 / 6.0).unwrap())).count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 4.0 * sigma);
    }

    #[test]
    fn boundary_kernel_examples() {
        // the kernel needs a regular tree; 1/3 is periodic, so the values are
        // checked on the cylinder measure they invert and on a regular root
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let p = PathPrefix::new(&w, pts(&[1.0 / 3.0, 1.0 / 6.0, 1.0 / 12.0])).unwrap();
        assert!((1.0 / cylinder_measure(&w, &p).unwrap() - 1.429_062_359_632_655).abs() < 1e-12);

        let root = 0.1234477851;
        let tree = Tree::build(&w, angle_point(root).unwrap(), 3).unwrap();
        let path = sample_path(&w, angle_point(root).unwrap(), 3, 1).unwrap();
        let visited = locate(&tree, &path).unwrap();
        assert_eq!(boundary_kernel(&tree, 0, &path).unwrap(), 1.0);
        let x2 = visited[2];
        let expect = 1.0 / cylinder_measure(&w, &path.truncate(2)).unwrap();
        assert!((boundary_kernel(&tree, x2, &path).unwrap() - expect).abs() < 1e-12);
        let off = tree.nodes()[0].children.iter().copied().find(|&c| c != visited[1]).unwrap();
        assert_eq!(boundary_kernel(&tree, off, &path).unwrap(), 0.0);
        assert!(matches!(boundary_kernel(&tree, x2, &path.truncate(1)), Err(Error::Undetermined(_))));
    }

    #[test]
    fn boundary_distance_basics() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let x0 = angle_point(0.1234477851).unwrap();
        let tree = Tree::build(&w, x0, 4).unwrap();
        let a = sample_path(&w, x0, 6, 1).unwrap();
        assert_eq!(boundary_distance(&tree, &a, &a).unwrap().0, 0.0);
        assert!(matches!(boundary_distance(&tree, &a, &a.truncate(2)), Err(Error::Undetermined(_))));
    }
}
