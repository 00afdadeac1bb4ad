//! The direct-integral picture: fibers ℓ²(ℤ, |m̃_n(z)|²) over a
//! fundamental domain, the fiberwise operators, and the quantities that
//! govern the choice of fundamental domain (Birkhoff averages, visit
//! probabilities, domain-shift statistics).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng as _;

use crate::arcs::ArcSet;
use crate::dynsys::{Angle, SystemSpec};
use crate::error::{Error, Result};
use crate::filter::{FilterSpec, ZERO_TOL};
use crate::quadrature::{self, Quadrature};
use crate::rng::{self, Rng};
use crate::solenoid::{self, Estimate, SolenoidSample};
use crate::walk::CircleWalk;

/// A vector in the fiber over `base`, supported on indices lo..=hi.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberVector {
    base: SolenoidSample,
    lo: i64,
    entries: Vec<Complex64>,
    weights: Vec<f64>,
}

/// θ₀(r∞ⁿ z).
fn orbit_point(base: &SolenoidSample, n: i64) -> Result<Angle> {
    base.coordinate(-n)
}

impl FiberVector {
    /// Entries for indices lo, lo+1, …; the range must lie inside
    /// [−L, F] of the base sample.
    pub fn new(filter: &FilterSpec, base: SolenoidSample, lo: i64, entries: Vec<Complex64>) -> Result<Self> {
        let hi = lo + entries.len() as i64 - 1;
        let (min, max) = (-(base.backward_len() as i64), base.forward_len() as i64);
        if entries.is_empty() || lo < min || hi > max {
            return Err(Error::FiberMismatch(format!("range {lo}..={hi} is outside {min}..={max}")));
        }
        let weights = (lo..=hi).map(|n| base.cocycle_mod2(filter, n)).collect::<Result<Vec<_>>>()?;
        Ok(FiberVector { base, lo, entries, weights })
    }

    pub fn zeros(filter: &FilterSpec, base: SolenoidSample, lo: i64, hi: i64) -> Result<Self> {
        let len = (hi - lo + 1).max(0) as usize;
        FiberVector::new(filter, base, lo, vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn base(&self) -> &SolenoidSample {
        &self.base
    }

    pub fn range(&self) -> (i64, i64) {
        (self.lo, self.lo + self.entries.len() as i64 - 1)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, n: i64) -> Option<Complex64> {
        usize::try_from(n - self.lo).ok().and_then(|i| self.entries.get(i).copied())
    }

    pub fn set(&mut self, n: i64, v: Complex64) -> Result<()> {
        let (lo, hi) = self.range();
        let slot = usize::try_from(n - self.lo)
            .ok()
            .and_then(|i| self.entries.get_mut(i))
            .ok_or_else(|| Error::FiberMismatch(format!("index {n} outside {lo}..={hi}")))?;
        *slot = v;
        Ok(())
    }

    /// |m̃_n(z)|² for n in range.
    pub fn weight(&self, n: i64) -> Option<f64> {
        usize::try_from(n - self.lo).ok().and_then(|i| self.weights.get(i).copied())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().zip(&self.weights).map(|(e, w)| e.norm_sqr() * w).sum()
    }

    /// The same vector restricted to lo..=hi.
    pub fn restrict(&self, lo: i64, hi: i64) -> Result<FiberVector> {
        let (a, b) = self.range();
        if lo < a || hi > b || hi < lo {
            return Err(Error::FiberMismatch(format!("{lo}..={hi} is not inside {a}..={b}")));
        }
        let (i, j) = ((lo - a) as usize, (hi - a) as usize);
        Ok(FiberVector {
            base: self.base.clone(),
            lo,
            entries: self.entries[i..=j].to_vec(),
            weights: self.weights[i..=j].to_vec(),
        })
    }
}

/// ⟨ξ, η⟩ = Σ ξ_n conj(η_n) |m̃_n(z)|².
pub fn fiber_inner(a: &FiberVector, b: &FiberVector) -> Result<Complex64> {
    if a.base != b.base {
        return Err(Error::FiberMismatch("vectors live over different base points".into()));
    }
    if a.range() != b.range() {
        return Err(Error::FiberMismatch(format!("ranges {:?} and {:?} differ", a.range(), b.range())));
    }
    Ok(a.entries
        .iter()
        .zip(&b.entries)
        .zip(&a.weights)
        .map(|((x, y), w)| x * y.conj() * w)
        .sum())
}

/// (Uξ)_n = m₀(θ₀ r∞ⁿ z)·ξ_{n+1}; the output range loses its top index.
pub fn fiber_u(filter: &FilterSpec, v: &FiberVector) -> Result<FiberVector> {
    let (lo, hi) = v.range();
    if hi <= lo {
        return Err(Error::FiberMismatch("range too short to shift".into()));
    }
    let entries = (lo..hi)
        .map(|n| Ok(filter.m0(orbit_point(&v.base, n)?) * v.get(n + 1).expect("in range")))
        .collect::<Result<Vec<_>>>()?;
    Ok(FiberVector { base: v.base.clone(), lo, entries, weights: v.weights[..v.weights.len() - 1].to_vec() })
}

/// (U⁻¹ξ)_n = ξ_{n−1}/m₀(θ₀ r∞^{n−1} z); the output range loses its bottom
/// index.
pub fn fiber_u_inv(filter: &FilterSpec, v: &FiberVector) -> Result<FiberVector> {
    let (lo, hi) = v.range();
    if hi <= lo {
        return Err(Error::FiberMismatch("range too short to shift".into()));
    }
    let entries = (lo + 1..=hi)
        .map(|n| {
            let x = orbit_point(&v.base, n - 1)?;
            let m = filter.m0(x);
            if m.norm() < ZERO_TOL {
                return Err(Error::FilterZeroOnOrbit { at: x.value() });
            }
            Ok(v.get(n - 1).expect("in range") / m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiberVector { base: v.base.clone(), lo: lo + 1, entries, weights: v.weights[1..].to_vec() })
}

/// (π(f)ξ)_n = f(θ₀ r∞ⁿ z)·ξ_n.
pub fn fiber_pi<F>(f: &F, v: &FiberVector) -> Result<FiberVector>
where
    F: Fn(Angle) -> Complex64 + ?Sized,
{
    let (lo, hi) = v.range();
    let entries = (lo..=hi)
        .map(|n| Ok(f(orbit_point(&v.base, n)?) * v.get(n).expect("in range")))
        .collect::<Result<Vec<_>>>()?;
    Ok(FiberVector { entries, ..v.clone() })
}

/// A point of the circle given by its base-N digits, x = Σ d_k N^{−(k+1)}.
///
/// Floating-point orbits under t ↦ Nt collapse after about 53/log₂N steps;
/// shifting the digit string instead keeps r^k(x) accurate for every k
/// below the string length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitPoint {
    base: u32,
    digits: Vec<u32>,
}

impl DigitPoint {
    pub fn new(base: u32, digits: Vec<u32>) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidSystem(format!("digit expansions need N ≥ 2, got {base}")));
        }
        if digits.iter().any(|&d| d >= base) {
            return Err(Error::InvalidArgument(format!("digit out of range for base {base}")));
        }
        Ok(DigitPoint { base, digits })
    }

    /// Uniformly random digits: a μ-distributed point.
    pub fn random(base: u32, len: usize, rng: &mut Rng) -> Result<Self> {
        DigitPoint::new(base, (0..len).map(|_| rng.random_range(0..base.max(1))).collect())
    }

    /// Digits of an angle as far as they are exactly representable.
    pub fn from_angle(base: u32, t: Angle, len: usize) -> Result<Self> {
        let mut digits = Vec::with_capacity(len);
        let mut x = t.value();
        for _ in 0..len {
            let y = x * base as f64;
            let d = (y.floor() as u32).min(base - 1);
            digits.push(d);
            x = y - d as f64;
        }
        DigitPoint::new(base, digits)
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// r^k(x), accurate to double precision while k + 64/log₂N ≤ len.
    pub fn shifted(&self, k: usize) -> Angle {
        let precision = (64.0 / (self.base as f64).log2()).ceil() as usize;
        let end = (k + precision).min(self.digits.len());
        let mut v = 0.0;
        for &d in self.digits.get(k..end).unwrap_or(&[]).iter().rev() {
            v = (v + d as f64) / self.base as f64;
        }
        Angle::new(v).expect("finite")
    }
}

/// (1/n) Σ_{k<n} log|m₀(r^k x)|².
pub fn birkhoff_sum(filter: &FilterSpec, x: &DigitPoint, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("Birkhoff average needs n ≥ 1".into()));
    }
    if x.base != filter.branching() {
        return Err(Error::InvalidArgument("digit base differs from the filter's N".into()));
    }
    let mut sum = 0.0;
    for k in 0..n {
        let t = x.shifted(k);
        let a = filter.m0_abs2(t);
        if a.sqrt() <= ZERO_TOL {
            return Err(Error::FilterZeroOnOrbit { at: t.value() });
        }
        sum += a.ln();
    }
    Ok(sum / n as f64)
}

/// The Birkhoff average at n for a μ-random starting point.
pub fn birkhoff_random(filter: &FilterSpec, n: usize, seed: u64, index: u64) -> Result<f64> {
    let mut r = rng::substream(seed, index);
    let x = DigitPoint::random(filter.branching(), n + 64, &mut r)?;
    birkhoff_sum(filter, &x, n)
}

pub const VISIT_TOL: f64 = 1e-10;
pub const MAX_VISIT_PANELS: usize = 1 << 20;

/// P(θ_m ∈ A₀) = ∫_{A₀} |m₀(x)|²|m₀(r x)|²⋯|m₀(r^{m−1} x)|² dμ(x).
pub fn visit_probability(sys: &SystemSpec, filter: &FilterSpec, a0: &ArcSet, m: usize) -> Result<Quadrature<f64>> {
    let n = sys.branching()?;
    if n != filter.branching() {
        return Err(Error::InvalidFilter("filter and system disagree on N".into()));
    }
    let f = |t: f64| {
        let mut x = t;
        let mut prod = 1.0;
        for _ in 0..m {
            prod *= filter.m0_abs2(Angle::new(x).expect("finite"));
            x = (x * n as f64).fract();
        }
        Complex64::new(prod, 0.0)
    };
    let intervals = a0.arcs();
    // the integrand oscillates at frequency ~N^m
    let mut panels = sys.panels.max(4 * (n as usize).saturating_pow(m as u32)).min(MAX_VISIT_PANELS);
    loop {
        let q = quadrature::composite_intervals(&f, intervals, panels)?;
        if q.error <= VISIT_TOL {
            return Ok(Quadrature { value: q.value.re, error: q.error });
        }
        if panels >= MAX_VISIT_PANELS {
            return Err(Error::Quadrature(format!(
                "visit probability for m = {m} not resolved with {panels} panels (error {:e})",
                q.error
            )));
        }
        panels *= 2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// (m, P_m, quadrature error)
    pub probabilities: Vec<(usize, f64, f64)>,
    pub strictly_decreasing: bool,
    /// Least-squares slope of log P_m against m; the fitted rate is its
    /// exponential.
    pub fitted_rate: f64,
    pub sum: f64,
}

pub fn decay_report(sys: &SystemSpec, filter: &FilterSpec, a0: &ArcSet, ms: &[usize]) -> Result<DecayReport> {
    let probabilities = ms
        .iter()
        .map(|&m| visit_probability(sys, filter, a0, m).map(|q| (m, q.value, q.error)))
        .collect::<Result<Vec<_>>>()?;
    let strictly_decreasing = probabilities.windows(2).all(|w| w[1].1 < w[0].1);
    let pts: Vec<(f64, f64)> = probabilities
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0 as f64, p.1.ln()))
        .collect();
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    Ok(DecayReport {
        sum: probabilities.iter().map(|p| p.1).sum(),
        probabilities,
        strictly_decreasing,
        fitted_rate: slope.exp(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftHistogram {
    /// k ↦ number of samples whose smallest k has x_k, …, x_L ∈ B₀.
    pub counts: BTreeMap<usize, usize>,
    /// Samples with x_L ∉ B₀; they cannot be placed at this length.
    pub undecided: usize,
    pub total: usize,
}

/// Smallest k ≤ L with x_k, …, x_L ∈ B₀, or `None` when x_L ∉ B₀.
pub fn domain_shift(z: &SolenoidSample, b0: &ArcSet) -> Option<usize> {
    let path = z.path();
    let mut k = path.len();
    while k > 0 && b0.contains(path[k - 1]) {
        k -= 1;
    }
    (k < path.len()).then_some(k)
}

pub fn domain_shift_stat(walk: &CircleWalk, b0: &ArcSet, samples: usize, length: usize, seed: u64) -> Result<ShiftHistogram> {
    let zs = solenoid::sample_many(walk, length, 0, samples, seed)?;
    let mut counts = BTreeMap::new();
    let mut undecided = 0;
    for z in &zs {
        match domain_shift(z, b0) {
            Some(k) => *counts.entry(k).or_insert(0) += 1,
            None => undecided += 1,
        }
    }
    Ok(ShiftHistogram { counts, undecided, total: samples })
}

/// χ_F for the fundamental domain F = {θ₀ ∉ B₀, θ₁, …, θ_M ∈ B₀}.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDomain {
    pub b0: ArcSet,
    pub depth: usize,
}

impl FundamentalDomain {
    pub fn contains(&self, z: &SolenoidSample) -> Result<bool> {
        if self.b0.contains(z.theta(0)?) {
            return Ok(false);
        }
        for k in 1..=self.depth {
            if !self.b0.contains(z.theta(k)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Both sides of ‖ξ‖² = Σ_n ∫_F |m̃_n|²|ξ∘r∞ⁿ|² dμ∞ restricted to a window
/// of n, estimated term by term from independent streams.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryReport {
    /// (n, ∫ |ξ|² χ_F∘r∞^{−n}, ∫_F |m̃_n|²|ξ∘r∞ⁿ|²)
    pub terms: Vec<(i64, Estimate, Estimate)>,
    pub lhs_total: Estimate,
    pub rhs_total: Estimate,
    pub norm_sqr: Estimate,
}

impl IsometryReport {
    pub fn max_z(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, a, b)| a.z_score(b))
            .chain(std::iter::once(self.lhs_total.z_score(&self.rhs_total)))
            .fold(0.0, f64::max)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn isometry_check<X>(
    walk: &CircleWalk,
    xi: &X,
    domain: &FundamentalDomain,
    window: std::ops::RangeInclusive<i64>,
    length: usize,
    forward: usize,
    count: usize,
    seed: u64,
) -> Result<IsometryReport>
where
    X: Fn(&SolenoidSample) -> Result<Complex64> + Sync + ?Sized,
{
    let filter = walk.filter();
    let ns: Vec<i64> = window.collect();
    let finite = |i: usize, row: Vec<f64>| {
        if row.iter().all(|v| v.is_finite()) {
            Ok(row)
        } else {
            Err(Error::NonFiniteSample { index: i })
        }
    };
    // row layout: one entry per n, then |ξ(z)|² on the left-hand side
    let lhs = solenoid::mc_map(walk, length, forward, count, rng::derive_seed(seed, 11), &|i, z: &SolenoidSample| {
        let x = xi(z)?.norm_sqr();
        let mut row = Vec::with_capacity(ns.len() + 1);
        for &n in &ns {
            row.push(if domain.contains(&z.shift(-n)?)? { x } else { 0.0 });
        }
        row.push(x);
        finite(i, row)
    })?;
    let rhs = solenoid::mc_map(walk, length, forward, count, rng::derive_seed(seed, 12), &|i, z: &SolenoidSample| {
        let inside = domain.contains(z)?;
        let mut row = Vec::with_capacity(ns.len());
        for &n in &ns {
            row.push(if inside { z.cocycle_mod2(filter, n)? * xi(&z.shift(n)?)?.norm_sqr() } else { 0.0 });
        }
        finite(i, row)
    })?;
    let column = |rows: &[Vec<f64>], j: usize| {
        Estimate::from_values(&rows.iter().map(|r| Complex64::new(r[j], 0.0)).collect::<Vec<_>>())
    };
    let total = |rows: &[Vec<f64>]| {
        Estimate::from_values(&rows.iter().map(|r| Complex64::new(r[..ns.len()].iter().sum(), 0.0)).collect::<Vec<_>>())
    };
    Ok(IsometryReport {
        terms: ns.iter().enumerate().map(|(j, &n)| (n, column(&lhs, j), column(&rhs, j))).collect(),
        lhs_total: total(&lhs),
        rhs_total: total(&rhs),
        norm_sqr: column(&lhs, ns.len()),
    })
}

/// Fraction of samples whose base point returns to itself within `horizon`
/// forward steps.
pub fn periodic_fraction(samples: &[SolenoidSample], horizon: usize) -> f64 {
    let hits = samples.iter().filter(|z| z.is_periodic_within(horizon)).count();
    hits as f64 / samples.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SystemSpec, FilterSpec) {
        let s = SystemSpec::circle(2).unwrap();
        let f = FilterSpec::haar(&s).unwrap();
        (s, f)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fiber_operators() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let z = solenoid::sample_mu_inf(&w, 12, 6, 3, 0).unwrap();
        let entries: Vec<Complex64> = (0..11).map(|k| c(k as f64 * 0.3 - 1.0, 0.5 / (k as f64 + 1.0))).collect();
        let mut v = FiberVector::new(&f, z.clone(), -5, entries).unwrap();
        v.set(-5, c(0.0, 0.0)).unwrap();
        let uv = fiber_u(&f, &v).unwrap();
        assert_eq!(uv.range(), (-5, 4));
        assert!((uv.norm_sqr() - v.restrict(-4, 5).unwrap().norm_sqr()).abs() < 1e-12 * v.norm_sqr());
        let back = fiber_u(&f, &fiber_u_inv(&f, &v).unwrap()).unwrap();
        for n in -4..=4 {
            assert!((back.get(n).unwrap() - v.get(n).unwrap()).norm() < 1e-12);
        }

        let g = |t: Angle| t.character();
        let g_r = |t: Angle| Angle::new(2.0 * t.value()).unwrap().character();
        let lhs = fiber_u(&f, &fiber_pi(&g, &fiber_u_inv(&f, &v).unwrap()).unwrap()).unwrap();
        let rhs = fiber_pi(&g_r, &v).unwrap();
        for n in -4..=4 {
            assert!((lhs.get(n).unwrap() - rhs.get(n).unwrap()).norm() < 1e-12, "n = {n}");
        }

        let other = solenoid::sample_mu_inf(&w, 12, 6, 3, 1).unwrap();
        let v2 = FiberVector::zeros(&f, other, -5, 5).unwrap();
        assert!(matches!(fiber_inner(&v, &v2), Err(Error::FiberMismatch(_))));
        assert!(matches!(fiber_inner(&v, &v.restrict(-4, 5).unwrap()), Err(Error::FiberMismatch(_))));
        assert!((fiber_inner(&v, &v).unwrap().re - v.norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn digit_orbit() {
        let x = DigitPoint::new(2, vec![1, 0, 1, 1]).unwrap();
        assert_eq!(x.shifted(0).value(), 0.6875);
        assert_eq!(x.shifted(1).value(), 0.375);
        assert_eq!(x.shifted(4).value(), 0.0);
        let t = Angle::new(0.3).unwrap();
        let d = DigitPoint::from_angle(2, t, 80).unwrap();
        assert_eq!(d.shifted(0), t);
        assert!(DigitPoint::new(2, vec![2]).is_err());
    }

    #[test]
    fn birkhoff_constant_and_haar() {
        let s = SystemSpec::circle(2).unwrap();
        let c = FilterSpec::constant(&s).unwrap();
        assert_eq!(birkhoff_random(&c, 100, 1, 0).unwrap(), 0.0);
        let h = FilterSpec::haar(&s).unwrap();
        let x = DigitPoint::from_angle(2, Angle::new(0.25).unwrap(), 10).unwrap();
        assert!(matches!(birkhoff_sum(&h, &x, 5), Err(Error::FilterZeroOnOrbit { .. })));
    }

    #[test]
    fn visit_whole_circle_is_one() {
        let (s, f) = setup();
        for m in 1..=3 {
            let q = visit_probability(&s, &f, &ArcSet::whole(), m).unwrap();
            assert!((q.value - 1.0).abs() < 1e-10);
        }
        let c = FilterSpec::constant(&s).unwrap();
        let a0 = ArcSet::new(vec![(0.4, 0.6)]).unwrap();
        let q = visit_probability(&s, &c, &a0, 4).unwrap();
        assert!((q.value - 0.2).abs() < 1e-10);
    }

    #[test]
    fn whole_b0_shifts_are_zero() {
        let (s, f) = setup();
        let w = CircleWalk::new(&s, &f).unwrap();
        let h = domain_shift_stat(&w, &ArcSet::whole(), 200, 16, 1).unwrap();
        assert_eq!(h.counts.get(&0), Some(&200));
        assert_eq!(h.undecided, 0);
    }
}
