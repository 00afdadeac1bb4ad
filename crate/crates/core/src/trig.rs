use num_complex::Complex64;

use crate::dynsys::Angle;

/// A trigonometric polynomial Σ_{|j|≤D} c_j e^{2πijt}, stored with a
/// symmetric index range.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    pub fn zero(degree: usize) -> Self {
        TrigPoly { degree, coeffs: vec![Complex64::new(0.0, 0.0); 2 * degree + 1] }
    }

    pub fn constant(c: Complex64) -> Self {
        TrigPoly { degree: 0, coeffs: vec![c] }
    }

    /// Builds from coefficients c_{-D}, …, c_D.
    ///
    /// # Panics
    /// If `coeffs` has even length.
    pub fn from_symmetric(coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "symmetric coefficient vector must have odd length");
        TrigPoly { degree: coeffs.len() / 2, coeffs }
    }

    /// Builds Σ_{k=0}^{K} h_k e^{2πikt}.
    pub fn from_causal(h: &[Complex64]) -> Self {
        let degree = h.len().saturating_sub(1);
        let mut p = TrigPoly::zero(degree);
        for (k, c) in h.iter().enumerate() {
            p.coeffs[degree + k] = *c;
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Index of the highest nonzero frequency in absolute value.
    pub fn effective_degree(&self) -> usize {
        (0..=self.degree)
            .rev()
            .find(|&j| self.get(j as i64).norm() > 0.0 || self.get(-(j as i64)).norm() > 0.0)
            .unwrap_or(0)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, j: i64) -> Complex64 {
        if j.unsigned_abs() as usize > self.degree {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(j + self.degree as i64) as usize]
    }

    pub fn set(&mut self, j: i64, c: Complex64) {
        let idx = (j + self.degree as i64) as usize;
        self.coeffs[idx] = c;
    }

    pub fn eval(&self, t: Angle) -> Complex64 {
        let z = t.character();
        let zinv = z.conj();
        // Horner on the non-negative and negative halves separately.
        let d = self.degree;
        let mut pos = Complex64::new(0.0, 0.0);
        for k in (0..=d).rev() {
            pos = pos * z + self.coeffs[d + k];
        }
        let mut neg = Complex64::new(0.0, 0.0);
        for k in (1..=d).rev() {
            neg = neg * zinv + self.coeffs[d - k];
        }
        pos + neg * zinv
    }

    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = TrigPoly::zero(self.degree + other.degree);
        let (da, db) = (self.degree as i64, other.degree as i64);
        for i in -da..=da {
            let a = self.get(i);
            if a.norm() == 0.0 {
                continue;
            }
            for j in -db..=db {
                let idx = i + j;
                let cur = out.get(idx);
                out.set(idx, cur + a * other.get(j));
            }
        }
        out
    }

    /// |p|² as a trigonometric polynomial.
    pub fn modulus_squared(&self) -> TrigPoly {
        self.mul(&self.conj_reflect())
    }

    /// t ↦ conj(p(t)), whose coefficients are conj(c_{-j}).
    pub fn conj_reflect(&self) -> TrigPoly {
        let mut out = TrigPoly::zero(self.degree);
        let d = self.degree as i64;
        for j in -d..=d {
            out.set(j, self.get(-j).conj());
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}
