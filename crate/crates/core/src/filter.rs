//! Quadrature mirror filters and the objects derived from them: the
//! transition weight W = |m₀|²/N, the transfer operator R_W, its fixed
//! vectors, the Lyapunov integral ∫ log|m₀|² dμ, and the squared cocycle
//! |m̃_n|².

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynsys::{self, Angle, SystemSpec};
use crate::error::{Error, Result};
use crate::quadrature::{self, Quadrature};
use crate::trig::TrigPoly;

/// Grid size used to validate the QMF identity at construction.
pub const QMF_GRID: usize = 4096;
/// Maximum residual of the QMF identity for a filter to be accepted.
pub const QMF_TOL: f64 = 1e-9;
/// Singular-value threshold for detecting eigenvalue 1.
pub const EIGEN_TOL: f64 = 1e-9;
/// |m₀| at or below this is treated as a zero of the filter.
pub const ZERO_TOL: f64 = 1e-14;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// A filter m₀(t) = Σ_k h_k e^{2πikt} bound to a circle system of branching N.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    name: String,
    m0: TrigPoly,
    branching: u32,
    residual: f64,
}

impl FilterSpec {
    /// Builds the filter and measures its QMF residual on a 4096-grid.
    /// Non-QMF filters are constructed but refused by weight operations.
    pub fn new(name: impl Into<String>, coeffs: Vec<Complex64>, sys: &SystemSpec) -> Result<Self> {
        let name = name.into();
        if coeffs.is_empty() {
            return Err(Error::InvalidFilter(format!("filter `{name}` has no coefficients")));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidFilter(format!("filter `{name}` has non-finite coefficients")));
        }
        if coeffs.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::InvalidFilter(format!("filter `{name}` is identically zero")));
        }
        let branching = sys.branching()?;
        let mut filter = FilterSpec { name, m0: TrigPoly::from_causal(&coeffs), branching, residual: 0.0 };
        filter.residual = qmf_residual(&filter, QMF_GRID);
        Ok(filter)
    }

    pub fn haar(sys: &SystemSpec) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new("haar", vec![Complex64::new(h, 0.0); 2], sys)
    }

    /// m₀ ≡ 1.
    pub fn constant(sys: &SystemSpec) -> Result<Self> {
        Self::new("constant", vec![Complex64::new(1.0, 0.0)], sys)
    }

    /// Daubechies-4, normalized so that m₀(0) = √2.
    pub fn d4(sys: &SystemSpec) -> Result<Self> {
        let s = 4.0 * std::f64::consts::SQRT_2;
        let h = [(1.0 + SQRT3) / s, (3.0 + SQRT3) / s, (3.0 - SQRT3) / s, (1.0 - SQRT3) / s];
        Self::new("d4", h.iter().map(|&x| Complex64::new(x, 0.0)).collect(), sys)
    }

    pub fn by_name(name: &str, sys: &SystemSpec) -> Result<Self> {
        match name {
            "haar" => Self::haar(sys),
            "constant" => Self::constant(sys),
            "d4" => Self::d4(sys),
            other => Err(Error::InvalidFilter(format!("unknown bundled filter `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    /// h_0, …, h_K.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let d = self.m0.degree() as i64;
        (0..=d).map(|k| self.m0.get(k)).collect()
    }

    /// K, the highest frequency of m₀.
    pub fn order(&self) -> usize {
        self.m0.degree()
    }

    pub fn polynomial(&self) -> &TrigPoly {
        &self.m0
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_qmf(&self) -> bool {
        self.residual < QMF_TOL
    }

    pub fn require_qmf(&self) -> Result<()> {
        if self.is_qmf() {
            Ok(())
        } else {
            Err(Error::NonQmf { name: self.name.clone(), residual: self.residual })
        }
    }

    /// True when |m₀| is constant, in which case the walk is uniform and the
    /// Lyapunov integral vanishes.
    pub fn has_constant_modulus(&self) -> bool {
        let m2 = self.m0.modulus_squared();
        let d = m2.degree() as i64;
        (1..=d).all(|j| m2.get(j).norm() <= 1e-14)
    }

    pub fn m0(&self, t: Angle) -> Complex64 {
        self.m0.eval(t)
    }

    pub fn m0_abs2(&self, t: Angle) -> f64 {
        self.m0.eval(t).norm_sqr()
    }

    /// W(t) = |m₀(t)|²/N. Unchecked; see [`FilterSpec::eval_w`].
    pub(crate) fn w(&self, t: Angle) -> f64 {
        self.m0_abs2(t) / self.branching as f64
    }

    pub fn eval_w(&self, x: Angle) -> Result<f64> {
        self.require_qmf()?;
        Ok(self.w(x))
    }

    /// Coefficients of |m₀|², indices -K..=K.
    pub fn modulus_squared(&self) -> TrigPoly {
        self.m0.modulus_squared()
    }
}

/// max over the grid of |(1/N) Σ_{r(y)=x} |m₀(y)|² − 1|.
pub fn qmf_residual(filter: &FilterSpec, grid: usize) -> f64 {
    let n = filter.branching;
    let grid = grid.max(1);
    (0..grid)
        .map(|j| {
            let x = Angle::new(j as f64 / grid as f64).expect("grid point is finite");
            let s: f64 = dynsys::preimages_circle(n, x).map(|y| filter.m0_abs2(y)).sum();
            (s / n as f64 - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// (R_W g)(x) = Σ_{r(y)=x} W(y) g(y) at a single point.
pub fn transfer_at<G>(filter: &FilterSpec, g: &G, x: Angle) -> Result<Complex64>
where
    G: Fn(Angle) -> Complex64 + ?Sized,
{
    filter.require_qmf()?;
    Ok(dynsys::preimages_circle(filter.branching, x).map(|y| g(y) * filter.w(y)).sum())
}

/// R_W g evaluated on the uniform grid j/grid, j < grid.
pub fn transfer_apply_grid<G>(filter: &FilterSpec, g: &G, grid: usize) -> Result<Vec<Complex64>>
where
    G: Fn(Angle) -> Complex64 + ?Sized,
{
    filter.require_qmf()?;
    (0..grid)
        .map(|j| transfer_at(filter, g, Angle::new(j as f64 / grid as f64)?))
        .collect()
}

/// Output degree bound ⌊(D + K)/N⌋ of R_W on degree-D polynomials.
pub fn transfer_output_degree(filter: &FilterSpec, input_degree: usize) -> usize {
    (input_degree + filter.order()) / filter.branching as usize
}

/// Smallest truncation D with R_W mapping degree ≤ D into degree ≤ D.
pub fn minimal_truncation(filter: &FilterSpec) -> Option<usize> {
    let n = filter.branching as usize;
    let k = filter.order();
    if n == 1 {
        return (k == 0).then_some(0);
    }
    Some(k.div_ceil(n - 1))
}

/// Exact action of R_W on coefficients: (R_W g)_l = c_{Nl}, where c are the
/// coefficients of |m₀|²·g. The 1/N in W is absorbed by the sum over the N
/// preimages, which keeps only frequencies divisible by N.
pub fn transfer_apply_coeffs(filter: &FilterSpec, g: &TrigPoly, truncation: usize) -> Result<TrigPoly> {
    filter.require_qmf()?;
    let input = g.effective_degree();
    if input > truncation {
        return Err(Error::DegreeOverflow { truncation, required: input });
    }
    let out_degree = transfer_output_degree(filter, input);
    if out_degree > truncation {
        return Err(Error::DegreeOverflow { truncation, required: out_degree });
    }
    let product = filter.modulus_squared().mul(g);
    let n = filter.branching as i64;
    let mut out = TrigPoly::zero(out_degree);
    for l in -(out_degree as i64)..=out_degree as i64 {
        out.set(l, product.get(n * l));
    }
    Ok(out)
}

/// Matrix of R_W on the coefficient space of degree ≤ `truncation`,
/// indexed by frequency + truncation.
pub fn transfer_matrix(filter: &FilterSpec, truncation: usize) -> Result<DMatrix<Complex64>> {
    filter.require_qmf()?;
    let required = minimal_truncation(filter).ok_or(Error::DegreeOverflow {
        truncation,
        required: usize::MAX,
    })?;
    if truncation < required {
        return Err(Error::DegreeOverflow { truncation, required });
    }
    let a = filter.modulus_squared();
    let n = filter.branching as i64;
    let d = truncation as i64;
    let size = 2 * truncation + 1;
    Ok(DMatrix::from_fn(size, size, |row, col| {
        let l = row as i64 - d;
        let j = col as i64 - d;
        a.get(n * l - j)
    }))
}

/// Fixed vectors of R_W among trigonometric polynomials of degree ≤ D.
#[derive(Debug, Clone)]
pub struct RwHarmonicBasis {
    /// Orthonormal basis of the eigenvalue-1 space (coefficient 2-norm).
    pub basis: Vec<TrigPoly>,
    /// Eigenvalues of the truncated operator within [`EIGEN_TOL`]·10³ of 1,
    /// from the Schur form; reported for diagnostics.
    pub eigenvalues_near_one: Vec<Complex64>,
}

/// Eigenvalue-1 space of R_W restricted to degree ≤ `truncation`.
///
/// The truncated space is invariant once `truncation` ≥ K/(N−1), so the
/// matrix is exact. The fixed space is the null space of (M − I), read off
/// the singular value decomposition below [`EIGEN_TOL`].
pub fn rw_harmonic_solve(filter: &FilterSpec, truncation: usize) -> Result<RwHarmonicBasis> {
    let m = transfer_matrix(filter, truncation)?;
    let size = m.nrows();
    let shifted = &m - DMatrix::<Complex64>::identity(size, size);
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^H");
    let mut basis = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < EIGEN_TOL {
            let mut coeffs: Vec<Complex64> = v_t.row(i).iter().map(|c| c.conj()).collect();
            normalize_phase(&mut coeffs);
            basis.push(TrigPoly::from_symmetric(coeffs));
        }
    }
    basis.sort_by(|a, b| b.get(0).norm().total_cmp(&a.get(0).norm()));
    let eigenvalues_near_one = m
        .schur()
        .eigenvalues()
        .map(|ev| {
            ev.iter()
                .copied()
                .filter(|z| (z - Complex64::new(1.0, 0.0)).norm() < EIGEN_TOL * 1e3)
                .collect()
        })
        .unwrap_or_default();
    Ok(RwHarmonicBasis { basis, eigenvalues_near_one })
}

fn normalize_phase(v: &mut [Complex64]) {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        for c in v.iter_mut() {
            *c *= phase;
        }
    }
}

/// max over a uniform grid of |R_W h − h|.
pub fn harmonic_residual(filter: &FilterSpec, h: &TrigPoly, grid: usize) -> Result<f64> {
    let g = |t: Angle| h.eval(t);
    let rh = transfer_apply_grid(filter, &g, grid)?;
    Ok(rh
        .iter()
        .enumerate()
        .map(|(j, v)| (v - h.eval(Angle::new(j as f64 / grid as f64).expect("finite"))).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lyapunov {
    /// a = ∫ log|m₀|² dμ
    pub value: f64,
    pub error: f64,
    /// Jensen's bound a ≤ 0.
    pub jensen_ok: bool,
}

/// ∫ log|m₀|² dμ with adaptive panel bisection around the filter's zeros.
pub fn lyapunov(filter: &FilterSpec, sys: &SystemSpec) -> Result<Lyapunov> {
    sys.branching()?;
    let (lead, roots) = root_factors(filter.polynomial())?;
    // log|m₀|² from the factored form; direct evaluation cancels to 0 near multiple zeros.
    let f = |t: f64| {
        let z = Complex64::from_polar(1.0, std::f64::consts::TAU * t);
        2.0 * (lead.ln() + roots.iter().map(|&w| (z - w).norm().max(f64::MIN_POSITIVE).ln()).sum::<f64>())
    };
    let Quadrature { value, error } = quadrature::adaptive(&f, sys.panels, 1e-13, 60, 1e-8)?;
    Ok(Lyapunov { value, error, jensen_ok: value <= error })
}

/// |leading coefficient| and roots of z^D m₀ viewed as a polynomial in z = e^{2πit}.
/// Monomial factors are dropped since |z| = 1 on the circle.
fn root_factors(m0: &TrigPoly) -> Result<(f64, Vec<Complex64>)> {
    let c = m0.coeffs();
    let lo = c.iter().position(|v| v.norm() > 0.0);
    let hi = c.iter().rposition(|v| v.norm() > 0.0);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(Error::InvalidFilter("m0 is identically zero".into()));
    };
    let p = &c[lo..=hi];
    let n = p.len() - 1;
    let lead = p[n];
    if n == 0 {
        return Ok((lead.norm(), Vec::new()));
    }
    let mut comp = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        comp[(i, n - 1)] = -p[i] / lead;
    }
    let roots = nalgebra::Schur::new(comp)
        .eigenvalues()
        .ok_or_else(|| Error::Quadrature("root finding for m0 did not converge".into()))?;
    Ok((lead.norm(), roots.iter().copied().collect()))
}

/// |m̃_n(z)|² for a solenoid prefix z = (x₀, x₁, …).
///
/// n ≥ 1 uses the forward orbit r^k(x₀), n ≤ −1 the backward coordinates.
pub fn cocycle_mod2(filter: &FilterSpec, prefix: &[Angle], n: i64) -> Result<f64> {
    let x0 = *prefix.first().ok_or(Error::InsufficientBackward { needed: 0, available: 0 })?;
    let factor = |x: Angle| {
        let v = filter.m0_abs2(x);
        if v.sqrt() <= ZERO_TOL {
            Err(Error::CocycleUndefined { at: x.value() })
        } else {
            Ok(v)
        }
    };
    if n == 0 {
        return Ok(1.0);
    }
    if n > 0 {
        let mut x = x0;
        let mut prod = 1.0;
        for _ in 0..n {
            prod *= factor(x)?;
            x = dynsys::r_circle(filter.branching, x);
        }
        return Ok(prod);
    }
    let steps = n.unsigned_abs() as usize;
    let available = prefix.len() - 1;
    if steps > available {
        return Err(Error::InsufficientBackward { needed: steps, available });
    }
    let mut prod = 1.0;
    for x in &prefix[1..=steps] {
        prod *= factor(*x)?;
    }
    Ok(1.0 / prod)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys2() -> SystemSpec {
        SystemSpec::circle(2).unwrap()
    }

    fn a(t: f64) -> Angle {
        Angle::new(t).unwrap()
    }

    #[test]
    fn eval_w_examples() {
        let s = sys2();
        let haar = FilterSpec::haar(&s).unwrap();
        assert!((haar.eval_w(a(1.0 / 6.0)).unwrap() - 0.75).abs() < 1e-15);
        assert!(haar.eval_w(a(0.5)).unwrap() < 1e-30);
        let c = FilterSpec::constant(&s).unwrap();
        assert_eq!(c.eval_w(a(0.123)).unwrap(), 0.5);
    }

    #[test]
    fn qmf_residual_examples() {
        let s = sys2();
        assert!(FilterSpec::haar(&s).unwrap().residual() < 1e-12);
        assert_eq!(FilterSpec::constant(&s).unwrap().residual(), 0.0);
        assert!(FilterSpec::d4(&s).unwrap().residual() < 1e-12);
        let shift = FilterSpec::new("shift", vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], &s).unwrap();
        assert!(shift.residual() < 1e-12);
    }

    #[test]
    fn non_qmf_is_refused() {
        let s = sys2();
        let bad = FilterSpec::new("bad", vec![Complex64::new(2.0, 0.0)], &s).unwrap();
        assert!(!bad.is_qmf());
        assert!(matches!(bad.eval_w(a(0.1)), Err(Error::NonQmf { .. })));
        assert!(matches!(rw_harmonic_solve(&bad, 4), Err(Error::NonQmf { .. })));
        // haar is a QMF for every N, d4 only for N = 2
        assert!(FilterSpec::haar(&SystemSpec::circle(3).unwrap()).unwrap().is_qmf());
        assert!(!FilterSpec::d4(&SystemSpec::circle(3).unwrap()).unwrap().is_qmf());
    }

    #[test]
    fn transfer_examples() {
        let s = sys2();
        let haar = FilterSpec::haar(&s).unwrap();
        let one = TrigPoly::constant(Complex64::new(1.0, 0.0));
        let r1 = transfer_apply_coeffs(&haar, &one, 4).unwrap();
        assert!((r1.get(0) - 1.0).norm() < 1e-15);
        let c = FilterSpec::constant(&s).unwrap();
        assert_eq!(transfer_apply_coeffs(&c, &one, 4).unwrap(), one);

        // R_W e^{2πit} = (1 + e^{2πit})/2 for haar
        let mut e1 = TrigPoly::zero(1);
        e1.set(1, Complex64::new(1.0, 0.0));
        let r = transfer_apply_coeffs(&haar, &e1, 4).unwrap();
        for i in 0..64 {
            let t = a(i as f64 / 64.0);
            let expect = (Complex64::new(1.0, 0.0) + t.character()) / 2.0;
            assert!((r.eval(t) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn transfer_degree_overflow_names_truncation() {
        let s = sys2();
        let haar = FilterSpec::haar(&s).unwrap();
        let g = TrigPoly::zero(6);
        let mut g = g;
        g.set(6, Complex64::new(1.0, 0.0));
        assert_eq!(
            transfer_apply_coeffs(&haar, &g, 3),
            Err(Error::DegreeOverflow { truncation: 3, required: 6 })
        );
        assert!(matches!(transfer_matrix(&FilterSpec::d4(&s).unwrap(), 2), Err(Error::DegreeOverflow { required: 3, .. })));
    }

    #[test]
    fn fixed_space_of_haar_is_constants() {
        let s = sys2();
        let haar = FilterSpec::haar(&s).unwrap();
        let sol = rw_harmonic_solve(&haar, 8).unwrap();
        assert_eq!(sol.basis.len(), 1);
        let h = &sol.basis[0];
        assert!((h.get(0).norm() - 1.0).abs() < 1e-9);
        assert!(harmonic_residual(&haar, h, 1024).unwrap() < 1e-9);
    }

    #[test]
    fn fixed_space_of_constant_filter_contains_constants() {
        let s = sys2();
        let c = FilterSpec::constant(&s).unwrap();
        let sol = rw_harmonic_solve(&c, 8).unwrap();
        assert!(!sol.basis.is_empty());
        assert!(sol.basis.iter().any(|h| (h.get(0).norm() - 1.0).abs() < 1e-9));
        for h in &sol.basis {
            assert!(harmonic_residual(&c, h, 1024).unwrap() < 1e-9);
        }
    }

    #[test]
    fn lyapunov_examples() {
        let s = sys2();
        let l = lyapunov(&FilterSpec::haar(&s).unwrap(), &s).unwrap();
        assert!((l.value + 2f64.ln()).abs() < 1e-4, "{}", l.value);
        assert!(l.jensen_ok);
        assert_eq!(lyapunov(&FilterSpec::constant(&s).unwrap(), &s).unwrap().value, 0.0);
        let d4 = lyapunov(&FilterSpec::d4(&s).unwrap(), &s).unwrap();
        // |m₀|² = 2cos⁴(πt)(2 − cos 2πt)
        let exact = -3.0 * 2f64.ln() + ((2.0 + SQRT3) / 2.0).ln();
        assert!((d4.value - exact).abs() < 1e-9, "{} vs {exact}", d4.value);
    }

    #[test]
    fn cocycle_examples() {
        let s = sys2();
        let haar = FilterSpec::haar(&s).unwrap();
        let z = [a(1.0 / 3.0), a(1.0 / 6.0)];
        assert_eq!(cocycle_mod2(&haar, &z, 0).unwrap(), 1.0);
        assert!((cocycle_mod2(&haar, &z, 1).unwrap() - 0.5).abs() < 1e-14);
        assert!((cocycle_mod2(&haar, &z, -1).unwrap() - 1.0 / 1.5).abs() < 1e-14);
        assert_eq!(
            cocycle_mod2(&haar, &z, -2),
            Err(Error::InsufficientBackward { needed: 2, available: 1 })
        );
        let hits_zero = [a(0.25), a(0.5)];
        assert!(matches!(cocycle_mod2(&haar, &hits_zero, 1), Ok(_)));
        assert!(matches!(cocycle_mod2(&haar, &hits_zero, 2), Err(Error::CocycleUndefined { .. })));
        assert!(matches!(cocycle_mod2(&haar, &hits_zero, -1), Err(Error::CocycleUndefined { .. })));
    }

    #[test]
    fn mean_one_and_partition_of_unity() {
        let s = sys2();
        for f in [FilterSpec::haar(&s).unwrap(), FilterSpec::d4(&s).unwrap()] {
            let m = s.integrate_mu(|t| Complex64::new(f.m0_abs2(t), 0.0)).unwrap();
            assert!((m.value.re - 1.0).abs() < 1e-10);
            for i in 0..1024 {
                let x = s.sample_mu(3, i).unwrap();
                let sum: f64 = dynsys::preimages_circle(2, x).map(|y| f.eval_w(y).unwrap()).sum();
                assert!((sum - 1.0).abs() < 1e-10);
            }
        }
    }
}
