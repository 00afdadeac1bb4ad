//! The solenoid Sol_N, its invertible shift r∞, the measure μ∞ (sampled via
//! the W-walk) and the covariant operators on L²(Sol, μ∞).
//!
//! A sample stores a finite backward prefix (x₀, …, x_L) together with a
//! cache of forward images r(x₀), …, r^F(x₀). Shifting consumes one end and
//! extends the other, so every sample supports at most L backward and F
//! forward shifts.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arcs::ArcSet;
use crate::boundary;
use crate::dynsys::{self, Angle, Point};
use crate::error::{Error, Result};
use crate::filter::{FilterSpec, ZERO_TOL};
use crate::rng::{self, Rng};
use crate::walk::CircleWalk;

pub const DEFAULT_FORWARD: usize = 8;
pub const DEFAULT_LENGTH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidSample {
    n: u32,
    /// x₀, x₁, …, x_L
    path: Vec<Angle>,
    /// r(x₀), …, r^F(x₀)
    forward: Vec<Angle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// r∞
    Forward,
    /// r∞⁻¹
    Backward,
}

impl SolenoidSample {
    /// Validates r(x_{k+1}) = x_k and caches `forward` images of x₀.
    pub fn new(n: u32, path: Vec<Angle>, forward: usize) -> Result<Self> {
        if path.is_empty() {
            return Err(Error::InvalidPrefix("a solenoid sample needs x₀".into()));
        }
        if n < 2 {
            return Err(Error::InvalidSystem(format!("solenoid needs N ≥ 2, got {n}")));
        }
        for (k, pair) in path.windows(2).enumerate() {
            if !dynsys::r_circle(n, pair[1]).approx_eq(pair[0]) {
                return Err(Error::InvalidPrefix(format!("r(x_{}) ≠ x_{k}", k + 1)));
            }
        }
        let mut cache = Vec::with_capacity(forward);
        let mut x = path[0];
        for _ in 0..forward {
            x = dynsys::r_circle(n, x);
            cache.push(x);
        }
        Ok(SolenoidSample { n, path, forward: cache })
    }

    pub fn branching(&self) -> u32 {
        self.n
    }

    pub fn path(&self) -> &[Angle] {
        &self.path
    }

    pub fn forward_cache(&self) -> &[Angle] {
        &self.forward
    }

    /// Available backward coordinates L.
    pub fn backward_len(&self) -> usize {
        self.path.len() - 1
    }

    /// Remaining forward budget F.
    pub fn forward_len(&self) -> usize {
        self.forward.len()
    }

    /// θ_m(z) = x_m.
    pub fn theta(&self, m: usize) -> Result<Angle> {
        self.path
            .get(m)
            .copied()
            .ok_or(Error::InsufficientBackward { needed: m, available: self.backward_len() })
    }

    /// x_j for j ≥ 0 and r^{|j|}(x₀) for j < 0; equivalently θ₀(r∞^{−j} z).
    pub fn coordinate(&self, j: i64) -> Result<Angle> {
        if j >= 0 {
            self.theta(j as usize)
        } else {
            let k = j.unsigned_abs() as usize;
            self.forward.get(k - 1).copied().ok_or_else(|| {
                Error::TruncationExhausted(format!("forward image {k} requested, {} cached", self.forward.len()))
            })
        }
    }

    pub fn r_inf(&self, direction: Direction) -> Result<SolenoidSample> {
        match direction {
            Direction::Forward => {
                let (&head, rest) = self.forward.split_first().ok_or_else(|| {
                    Error::TruncationExhausted("forward cache is empty".into())
                })?;
                let mut path = Vec::with_capacity(self.path.len() + 1);
                path.push(head);
                path.extend_from_slice(&self.path);
                Ok(SolenoidSample { n: self.n, path, forward: rest.to_vec() })
            }
            Direction::Backward => {
                if self.path.len() < 2 {
                    return Err(Error::InsufficientBackward { needed: 1, available: 0 });
                }
                let mut forward = Vec::with_capacity(self.forward.len() + 1);
                forward.push(self.path[0]);
                forward.extend_from_slice(&self.forward);
                Ok(SolenoidSample { n: self.n, path: self.path[1..].to_vec(), forward })
            }
        }
    }

    /// r∞^k.
    pub fn shift(&self, k: i64) -> Result<SolenoidSample> {
        let k_abs = k.unsigned_abs() as usize;
        if k >= 0 {
            if k_abs > self.forward.len() {
                return Err(Error::TruncationExhausted(format!(
                    "shift by {k} exceeds the forward budget {}",
                    self.forward.len()
                )));
            }
            let mut path: Vec<Angle> = self.forward[..k_abs].iter().rev().copied().collect();
            path.extend_from_slice(&self.path);
            Ok(SolenoidSample { n: self.n, path, forward: self.forward[k_abs..].to_vec() })
        } else {
            if k_abs > self.backward_len() {
                return Err(Error::InsufficientBackward { needed: k_abs, available: self.backward_len() });
            }
            let mut forward: Vec<Angle> = self.path[..k_abs].iter().rev().copied().collect();
            forward.extend_from_slice(&self.forward);
            Ok(SolenoidSample { n: self.n, path: self.path[k_abs..].to_vec(), forward })
        }
    }

    /// |m̃_n(z)|², taking forward images from the cache.
    pub fn cocycle_mod2(&self, filter: &FilterSpec, n: i64) -> Result<f64> {
        let factor = |x: Angle| {
            let v = filter.m0_abs2(x);
            if v.sqrt() <= ZERO_TOL {
                Err(Error::CocycleUndefined { at: x.value() })
            } else {
                Ok(v)
            }
        };
        let mut prod = 1.0;
        if n > 0 {
            for j in 0..n {
                prod *= factor(self.coordinate(-j)?)?;
            }
            Ok(prod)
        } else {
            for j in 1..=n.unsigned_abs() as i64 {
                prod *= factor(self.coordinate(j)?)?;
            }
            Ok(1.0 / prod)
        }
    }

    /// r∞^n(z) = z for some 0 < |n| ≤ horizon, judged on θ₀.
    pub fn is_periodic_within(&self, horizon: usize) -> bool {
        let x0 = self.path[0];
        (1..=horizon.min(self.forward.len())).any(|k| self.forward[k - 1].approx_eq(x0))
    }
}

/// Draws z ~ μ∞: x₀ ~ μ, then x₁, x₂, … by the W-walk.
pub fn sample_mu_inf_with(walk: &CircleWalk, length: usize, forward: usize, rng: &mut Rng) -> Result<SolenoidSample> {
    let n = walk.system().branching()?;
    let x0 = dynsys::sample_uniform(rng);
    let prefix = boundary::sample_path_with(walk, Point::Angle(x0), length, rng)?;
    let path = prefix.points().iter().map(|p| p.angle().expect("circle walk")).collect();
    SolenoidSample::new(n, path, forward)
}

/// Sample `index` of the stream seeded by `seed`.
pub fn sample_mu_inf(walk: &CircleWalk, length: usize, forward: usize, seed: u64, index: u64) -> Result<SolenoidSample> {
    sample_mu_inf_with(walk, length, forward, &mut rng::substream(seed, index))
}

pub fn sample_many(walk: &CircleWalk, length: usize, forward: usize, count: usize, seed: u64) -> Result<Vec<SolenoidSample>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_mu_inf(walk, length, forward, seed, i as u64))
        .collect()
}

/// (Uξ)(z) = m₀(θ₀(z))·ξ(r∞(z)).
pub fn apply_u<X>(filter: &FilterSpec, xi: &X, z: &SolenoidSample) -> Result<Complex64>
where
    X: Fn(&SolenoidSample) -> Result<Complex64> + ?Sized,
{
    Ok(filter.m0(z.theta(0)?) * xi(&z.r_inf(Direction::Forward)?)?)
}

/// (U⁻¹ξ)(z) = ξ(r∞⁻¹(z))/m₀(θ₁(z)).
pub fn apply_u_inv<X>(filter: &FilterSpec, xi: &X, z: &SolenoidSample) -> Result<Complex64>
where
    X: Fn(&SolenoidSample) -> Result<Complex64> + ?Sized,
{
    let x1 = z.theta(1)?;
    let m = filter.m0(x1);
    if m.norm() < ZERO_TOL {
        return Err(Error::FilterZeroOnOrbit { at: x1.value() });
    }
    Ok(xi(&z.r_inf(Direction::Backward)?)? / m)
}

/// (π(f)ξ)(z) = f(θ₀(z))·ξ(z).
pub fn apply_pi<F, X>(f: &F, xi: &X, z: &SolenoidSample) -> Result<Complex64>
where
    F: Fn(Angle) -> Complex64 + ?Sized,
    X: Fn(&SolenoidSample) -> Result<Complex64> + ?Sized,
{
    Ok(f(z.theta(0)?) * xi(z)?)
}

/// Indicator of {z : θ_k(z) ∈ A_k for k < len}.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderIndicator {
    pub arcs: Vec<ArcSet>,
}

impl CylinderIndicator {
    pub fn new(arcs: Vec<ArcSet>) -> Self {
        CylinderIndicator { arcs }
    }

    pub fn eval(&self, z: &SolenoidSample) -> Result<f64> {
        for (k, arcs) in self.arcs.iter().enumerate() {
            if !arcs.contains(z.theta(k)?) {
                return Ok(0.0);
            }
        }
        Ok(1.0)
    }

    pub fn as_fn(&self) -> impl Fn(&SolenoidSample) -> Result<Complex64> + Sync + '_ {
        move |z| Ok(Complex64::new(self.eval(z)?, 0.0))
    }
}

/// f∘θ_m as a function on the solenoid.
pub fn theta_fn<F>(f: F, m: usize) -> impl Fn(&SolenoidSample) -> Result<Complex64> + Sync
where
    F: Fn(Angle) -> Complex64 + Sync,
{
    move |z| Ok(f(z.theta(m)?))
}

/// Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: Complex64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_values(values: &[Complex64]) -> Estimate {
        let n = values.len();
        let mean = values.iter().sum::<Complex64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Estimate { mean, std_error: (var / n as f64).sqrt(), samples: n }
    }

    /// |a − b| in units of the combined standard error of two independent
    /// estimates; 0 when both are exact and equal.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = (self.mean - other.mean).norm();
        let se = self.std_error.hypot(other.std_error);
        if diff == 0.0 {
            0.0
        } else {
            diff / se
        }
    }

    /// Distance to a known value in standard errors.
    pub fn z_to(&self, value: Complex64) -> f64 {
        let diff = (self.mean - value).norm();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// `f` on `count` draws from μ∞, in index order; draw i uses stream i.
pub fn mc_map<T, G>(walk: &CircleWalk, length: usize, forward: usize, count: usize, seed: u64, f: &G) -> Result<Vec<T>>
where
    T: Send,
    G: Fn(usize, &SolenoidSample) -> Result<T> + Sync + ?Sized,
{
    if count == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    (0..count)
        .into_par_iter()
        .map(|i| f(i, &sample_mu_inf(walk, length, forward, seed, i as u64)?))
        .collect()
}

/// Per-sample values of `integrand`, in index order.
pub fn mc_values<I>(
    walk: &CircleWalk,
    length: usize,
    forward: usize,
    count: usize,
    seed: u64,
    integrand: &I,
) -> Result<Vec<Complex64>>
where
    I: Fn(&SolenoidSample) -> Result<Complex64> + Sync + ?Sized,
{
    mc_map(walk, length, forward, count, seed, &|i, z: &SolenoidSample| {
        let v = integrand(z)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample { index: i })
        }
    })
}

/// ∫ integrand dμ∞ by Monte Carlo.
pub fn mc_expectation<I>(
    walk: &CircleWalk,
    length: usize,
    forward: usize,
    count: usize,
    seed: u64,
    integrand: &I,
) -> Result<Estimate>
where
    I: Fn(&SolenoidSample) -> Result<Complex64> + Sync + ?Sized,
{
    Ok(Estimate::from_values(&mc_values(walk, length, forward, count, seed, integrand)?))
}

/// Both sides of ∫ ξ dμ∞ = ∫ |m̃_n|² · ξ∘r∞ⁿ dμ∞, from independent seeds.
pub fn shift_change_of_measure<X>(
    walk: &CircleWalk,
    xi: &X,
    n: i64,
    length: usize,
    forward: usize,
    count: usize,
    seed: u64,
) -> Result<(Estimate, Estimate)>
where
    X: Fn(&SolenoidSample) -> Result<Complex64> + Sync + ?Sized,
{
    let filter = walk.filter();
    let lhs = mc_expectation(walk, length, forward, count, rng::derive_seed(seed, 1), xi)?;
    let rhs_fn = |z: &SolenoidSample| Ok(z.cocycle_mod2(filter, n)? * xi(&z.shift(n)?)?);
    let rhs = mc_expectation(walk, length, forward, count, rng::derive_seed(seed, 2), &rhs_fn)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::SystemSpec;
    use crate::filter;

    fn setup() -> (SystemSpec, FilterSpec) {
        let s = SystemSpec::circle(2).unwrap();
        let f = FilterSpec::haar(&s).unwrap();
        (s, f)
    }

    #[test]
    fn shifts_round_trip() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let z = sample_mu_inf(&w, 10, 4, 1, 0).unwrap();
        let fwd = z.r_inf(Direction::Forward).unwrap();
        assert_eq!(fwd.theta(1).unwrap(), z.theta(0).unwrap());
        assert_eq!(fwd.r_inf(Direction::Backward).unwrap(), z);
        assert_eq!(z.r_inf(Direction::Backward).unwrap().r_inf(Direction::Forward).unwrap(), z);
        assert_eq!(z.shift(3).unwrap().shift(-3).unwrap(), z);
        assert_eq!(z.shift(-2).unwrap(), z.r_inf(Direction::Backward).unwrap().r_inf(Direction::Backward).unwrap());
        assert!(matches!(z.shift(5), Err(Error::TruncationExhausted(_))));
        assert!(matches!(z.shift(-11), Err(Error::InsufficientBackward { .. })));
    }

    #[test]
    fn cocycle_matches_prefix_form() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let z = sample_mu_inf(&w, 10, 4, 2, 0).unwrap();
        for n in -4..=4 {
            let a = z.cocycle_mod2(&f, n).unwrap();
            let b = filter::cocycle_mod2(&f, z.path(), n).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "n = {n}");
        }
    }

    #[test]
    fn constant_integrates_exactly() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let e = mc_expectation(&w, 8, 2, 1000, 3, &|_: &SolenoidSample| Ok(Complex64::new(1.0, 0.0))).unwrap();
        assert_eq!(e.mean, Complex64::new(1.0, 0.0));
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn u_inverts() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let xi = theta_fn(|t: Angle| t.character(), 2);
        let z = sample_mu_inf(&w, 10, 4, 4, 0).unwrap();
        let uinv = |z: &SolenoidSample| apply_u_inv(&f, &xi, z);
        let v = apply_u(&f, &uinv, &z).unwrap();
        assert!((v - xi(&z).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn non_finite_is_reported() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let bad = |z: &SolenoidSample| {
            Ok(if z.theta(0)?.value() < 0.5 { Complex64::new(f64::NAN, 0.0) } else { Complex64::new(1.0, 0.0) })
        };
        assert!(matches!(mc_expectation(&w, 2, 1, 100, 1, &bad), Err(Error::NonFiniteSample { .. })));
    }
}
