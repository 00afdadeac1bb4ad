//! Composite Gauss–Legendre quadrature on [0, 1).
//!
//! Smooth integrands use a fixed panel grid and estimate their error by
//! comparing against the grid with half as many panels. Integrands with
//! integrable singularities (the logarithm of a filter with zeros) go through
//! [`adaptive`], which bisects panels until the 8-point rule agrees with its
//! two halves.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes of the 8-point Gauss–Legendre rule on [-1, 1].
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

pub const NODES_PER_PANEL: usize = GL8_NODES.len();

/// Result of a quadrature together with its refinement error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: f64,
}

/// 8-point rule on one panel [a, b].
pub fn panel<F>(f: &F, a: f64, b: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        let t = mid + half * x;
        let v = f(t);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite { at: t });
        }
        acc += v * *w;
    }
    Ok(acc * half)
}

/// Sum of the 8-point rule over `panels` equal panels of [a, b].
pub fn composite_on<F>(f: &F, a: f64, b: f64, panels: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = if i + 1 == panels { b } else { a + h * (i + 1) as f64 };
        acc += panel(f, lo, hi)?;
    }
    Ok(acc)
}

/// Integrates `f` over a union of intervals, splitting the `panels` budget in
/// proportion to length. Each interval gets at least one panel.
pub fn composite_intervals<F>(
    f: &F,
    intervals: &[(f64, f64)],
    panels: usize,
) -> Result<Quadrature<Complex64>>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let fine = sum_intervals(f, intervals, panels.max(2))?;
    let coarse = sum_intervals(f, intervals, (panels / 2).max(1))?;
    Ok(Quadrature { value: fine, error: (fine - coarse).norm() })
}

fn sum_intervals<F>(f: &F, intervals: &[(f64, f64)], panels: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    let mut acc = Complex64::new(0.0, 0.0);
    for &(a, b) in intervals {
        if b <= a {
            continue;
        }
        let share = ((b - a) / total * panels as f64).ceil() as usize;
        acc += composite_on(f, a, b, share.max(1))?;
    }
    Ok(acc)
}

/// Adaptive bisection for real integrands with integrable singularities.
///
/// Starts from `panels` equal panels on [0, 1]. Each panel carries the
/// disagreement between its 8-point value and the sum over its halves; the
/// worst panel is bisected until the total disagreement is at most `tol`.
/// Panels at `max_depth` are not split further. If the total is still above
/// `tol` once nothing can be split, it is accepted when below `cap_tol` and
/// declared divergent otherwise.
///
/// Rounding noise near a zero of the integrand's argument never resolves
/// panel by panel, so the target is global rather than per panel.
pub fn adaptive<F>(
    f: &F,
    panels: usize,
    tol: f64,
    max_depth: u32,
    cap_tol: f64,
) -> Result<Quadrature<f64>>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let g = |t: f64| Complex64::new(f(t), 0.0);
    let split = |a: f64, b: f64, whole: f64, depth: u32| -> Result<Piece> {
        let m = 0.5 * (a + b);
        let left = panel(&g, a, m)?.re;
        let right = panel(&g, m, b)?.re;
        Ok(Piece { diff: (left + right - whole).abs(), a, b, left, right, depth })
    };
    let h = 1.0 / panels.max(1) as f64;
    let mut heap = BinaryHeap::new();
    let mut frozen = Vec::new();
    for i in 0..panels.max(1) {
        let a = h * i as f64;
        let b = if i + 1 == panels.max(1) { 1.0 } else { h * (i + 1) as f64 };
        heap.push(split(a, b, panel(&g, a, b)?.re, 0)?);
    }
    let mut total: f64 = heap.iter().map(|p| p.diff).sum();
    while total > tol {
        let Some(worst) = heap.pop() else { break };
        if worst.depth >= max_depth || worst.b - worst.a <= f64::EPSILON * worst.b.abs().max(1.0) {
            frozen.push(worst);
            continue;
        }
        let m = 0.5 * (worst.a + worst.b);
        let l = split(worst.a, m, worst.left, worst.depth + 1)?;
        let r = split(m, worst.b, worst.right, worst.depth + 1)?;
        total += l.diff + r.diff - worst.diff;
        heap.push(l);
        heap.push(r);
    }
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.extend(frozen);
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = pieces.iter().map(|p| p.left + p.right).sum();
    let error: f64 = pieces.iter().map(|p| p.diff).sum();
    if error > tol && error > cap_tol {
        return Err(Error::Quadrature(format!("divergent refinement (disagreement {error:e})")));
    }
    Ok(Quadrature { value, error })
}

struct Piece {
    diff: f64,
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.diff.total_cmp(&other.diff).then(other.a.total_cmp(&self.a))
    }
}
