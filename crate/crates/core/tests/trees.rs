use nalgebra::DMatrix;
use solharm_core::harmonic::{self, Role};
use solharm_core::rng::substream;
use solharm_core::tree::angle_point;
use solharm_core::{CircleWalk, FilterSpec, NodeFunction, SystemSpec, Tree};

const ROOTS: [f64; 3] = [0.123_447_785_1, 0.381_966_011_3, 0.707_106_781_2];

fn trees(name: &str, depth: usize) -> Vec<Tree> {
    let sys = SystemSpec::circle(2).unwrap();
    let f = FilterSpec::by_name(name, &sys).unwrap();
    let walk = CircleWalk::new(&sys, &f).unwrap();
    ROOTS.iter().map(|&t| Tree::build(&walk, angle_point(t).unwrap(), depth).unwrap()).collect()
}

/// (I − P)⁻¹ = Σ Pⁿ, the walk being nilpotent on a finite tree.
fn resolvent(tree: &Tree) -> DMatrix<f64> {
    let n = tree.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for (x, node) in tree.nodes().iter().enumerate() {
        for &y in &node.children {
            a[(x, y)] -= tree.nodes()[y].w;
        }
    }
    a.try_inverse().expect("unipotent")
}

#[test]
fn green_and_kernel_match_resolvent() {
    for name in ["haar", "d4", "constant"] {
        for tree in trees(name, 5) {
            let g = resolvent(&tree);
            let root = tree.root();
            for x in 0..tree.len() {
                for y in 0..tree.len() {
                    let green = tree.green(x, y).unwrap();
                    assert!((green - g[(x, y)]).abs() < 1e-12, "{name} g({x},{y})");
                    let k = tree.martin_kernel(x, y).unwrap();
                    assert!((k - g[(x, y)] / g[(root, y)]).abs() < 1e-12 * k.max(1.0), "{name} K({x},{y})");
                }
            }
        }
    }
}

#[test]
fn kernel_is_constant_on_subtrees() {
    for tree in trees("haar", 6) {
        for (x, node) in tree.nodes().iter().enumerate() {
            let c = 1.0 / node.wn;
            for y in 0..tree.len() {
                let k = tree.martin_kernel(x, y).unwrap();
                let expect = if tree.in_subtree(x, y) { c } else { 0.0 };
                assert!((k - expect).abs() <= 1e-12 * c, "K({x},{y}) = {k}, expected {expect}");
            }
        }
    }
}

#[test]
fn harmonic_round_trips() {
    for tree in trees("haar", 6) {
        let mut rng = substream(3, 0);
        for _ in 0..20 {
            let nu = harmonic::random_additive(&tree, &mut rng, 1.0).unwrap();
            let u = harmonic::additive_to_harmonic(&tree, &nu).unwrap();
            assert!(harmonic::validate(&tree, &u).unwrap() < 1e-12);
            let back = harmonic::harmonic_to_additive(&tree, &u).unwrap();
            let w = harmonic::additive_to_weight(&tree, &nu).unwrap();
            let again = harmonic::weight_to_additive(&tree, &w, nu.values[0]).unwrap();
            let m = harmonic::martin_represent(&tree, &nu).unwrap();
            for i in 0..tree.len() {
                assert!((back.values[i] - nu.values[i]).abs() < 1e-12);
                assert!((again.values[i] - nu.values[i]).abs() < 1e-12);
                assert!((m.values[i] - u.values[i]).abs() <= 1e-12 * u.values[i].max(1.0));
            }
        }
    }
}

#[test]
fn harmonic_validation_rejects_broken_functions() {
    let tree = &trees("haar", 3)[0];
    let mut values = vec![1.0; tree.len()];
    values[0] = 2.0;
    let broken = NodeFunction::new(tree, values, Role::PHarmonic).unwrap();
    assert!(harmonic::validate(tree, &broken).is_err());
}
