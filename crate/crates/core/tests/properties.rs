use num_complex::Complex64;
use proptest::prelude::*;
use solharm_core::checks::random_trig_poly;
use solharm_core::rng::substream;
use solharm_core::solenoid::{sample_mu_inf, DEFAULT_FORWARD};
use solharm_core::{filter, Angle, CircleWalk, FilterSpec, Point, SystemSpec};

fn filter_for(name: &str, n: u32) -> (SystemSpec, FilterSpec) {
    let sys = SystemSpec::circle(n).unwrap();
    let f = FilterSpec::by_name(name, &sys).unwrap();
    (sys, f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn haar_measure_is_strongly_invariant(n in 2u32..6, degree in 0usize..9, seed in any::<u64>()) {
        let sys = SystemSpec::circle(n).unwrap();
        let p = random_trig_poly(degree, &mut substream(seed, 0));
        let lhs = sys.integrate_mu(|t| p.eval(t)).unwrap().value;
        let rhs = sys
            .integrate_mu(|t| {
                let pre = sys.preimages(Point::Angle(t)).unwrap();
                pre.iter().map(|y| p.eval(y.angle().unwrap())).sum::<Complex64>() / n as f64
            })
            .unwrap()
            .value;
        prop_assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
        // the integral picks out the constant coefficient
        prop_assert!((lhs - p.get(0)).norm() < 1e-12);
    }

    #[test]
    fn preimages_map_back(n in 2u32..8, t in 0.0f64..1.0) {
        let sys = SystemSpec::circle(n).unwrap();
        let x = Point::Angle(Angle::new(t).unwrap());
        let pre = sys.preimages(x).unwrap();
        prop_assert_eq!(pre.len(), n as usize);
        for y in pre {
            prop_assert!(sys.same_point(sys.apply_r(y).unwrap(), x));
        }
    }

    #[test]
    fn weights_sum_to_one_over_fibers(t in 0.0f64..1.0, which in 0usize..3) {
        let (name, n) = [("haar", 3), ("d4", 2), ("constant", 5)][which];
        let (sys, f) = filter_for(name, n);
        let total: f64 = sys
            .preimages(Point::Angle(Angle::new(t).unwrap()))
            .unwrap()
            .iter()
            .map(|y| f.eval_w(y.angle().unwrap()).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cocycle_is_multiplicative(index in 0u64..10_000, n in -3i64..4, k in -3i64..4) {
        let (sys, f) = filter_for("haar", 2);
        let walk = CircleWalk::new(&sys, &f).unwrap();
        let z = sample_mu_inf(&walk, 16, DEFAULT_FORWARD, 99, index).unwrap();
        let whole = z.cocycle_mod2(&f, n + k).unwrap();
        let split = z.cocycle_mod2(&f, n).unwrap() * z.shift(n).unwrap().cocycle_mod2(&f, k).unwrap();
        prop_assert!((whole - split).abs() <= 1e-10 * whole.max(1.0), "{whole} vs {split}");
    }

    #[test]
    fn shift_round_trip(index in 0u64..10_000, k in 1i64..6) {
        let (sys, f) = filter_for("d4", 2);
        let walk = CircleWalk::new(&sys, &f).unwrap();
        let z = sample_mu_inf(&walk, 12, DEFAULT_FORWARD, 5, index).unwrap();
        let back = z.shift(k).unwrap().shift(-k).unwrap();
        for j in -2..=6 {
            prop_assert!(back.coordinate(j).unwrap().approx_eq(z.coordinate(j).unwrap()));
        }
    }
}

#[test]
fn lyapunov_matches_jensen_formula() {
    // ∫ log|p(e^{2πit})|² = 2 log|a_K| + 2 Σ log max(1, |z_j|) with p = a_K Π (z − z_j)
    let sys = SystemSpec::circle(2).unwrap();
    let roots = [Complex64::new(-1.0, 0.0), Complex64::new(2.0, 0.5)];
    let a = 0.7;
    // m₀ = a (z − z₀)(z − z₁), not a QMF, but the integral only needs m₀
    let c0 = roots[0] * roots[1] * a;
    let c1 = -(roots[0] + roots[1]) * a;
    let f = FilterSpec::new("jensen", vec![c0, c1, Complex64::new(a, 0.0)], &sys).unwrap();
    let exact = 2.0 * (a.ln() + roots.iter().map(|z| z.norm().max(1.0).ln()).sum::<f64>());
    let got = filter::lyapunov(&f, &sys).unwrap();
    assert!((got.value - exact).abs() < 1e-9, "{} vs {exact}", got.value);
}

#[test]
fn transfer_fixes_constants_for_bundled_filters() {
    for (name, n) in [("haar", 2), ("haar", 4), ("d4", 2), ("constant", 3)] {
        let (_, f) = filter_for(name, n);
        let one = |_: Angle| Complex64::new(1.0, 0.0);
        let out = filter::transfer_apply_grid(&f, &one, 257).unwrap();
        let dev = out.iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-14, "{name} N={n}: {dev:e}");
    }
}
