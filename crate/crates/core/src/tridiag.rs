//! Complex tridiagonal matrices with a Thomas solve.

use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct TriDiagonal {
    /// lower[i] sits in row i+1, column i
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    /// upper[i] sits in row i, column i+1
    pub upper: Vec<Complex64>,
}

impl TriDiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// Thomas solve without pivoting. All matrices in this crate are either
    /// negative definite (Helmholtz with Dirichlet walls) or strictly
    /// diagonally dominant (Crank-Nicolson left-hand sides), so a vanishing
    /// pivot signals genuine breakdown.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        assert_eq!(rhs.len(), n);
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = self.diag[0];
        if pivot.norm_sqr() == 0.0 {
            return Err(Error::NumericalBreakdown("zero pivot in Thomas solve".into()));
        }
        x[0] = rhs[0] / pivot;
        for i in 1..n {
            c[i - 1] = self.upper[i - 1] / pivot;
            pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if pivot.norm_sqr() == 0.0 {
                return Err(Error::NumericalBreakdown(format!(
                    "zero pivot in Thomas solve at row {i}"
                )));
            }
            x[i] = (rhs[i] - self.lower[i - 1] * x[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            let t = c[i] * x[i + 1];
            x[i] -= t;
        }
        Ok(x)
    }

    /// Precompute the LU factorization for repeated solves against the same
    /// matrix. No pivoting, like `solve`.
    pub fn factor(&self) -> Result<TriFactor> {
        let n = self.n();
        let mut low = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_diag = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = self.diag[0];
        if pivot.norm_sqr() == 0.0 {
            return Err(Error::NumericalBreakdown("zero pivot in factorization".into()));
        }
        inv_diag[0] = pivot.inv();
        for i in 1..n {
            let l = self.lower[i - 1] * inv_diag[i - 1];
            low[i] = l;
            pivot = self.diag[i] - l * self.upper[i - 1];
            if pivot.norm_sqr() == 0.0 {
                return Err(Error::NumericalBreakdown(format!(
                    "zero pivot in factorization at row {i}"
                )));
            }
            inv_diag[i] = pivot.inv();
        }
        Ok(TriFactor {
            low,
            inv_diag,
            upper: self.upper.clone(),
        })
    }

    /// a + b * self, entrywise on the three diagonals (a on the main diagonal).
    pub fn affine(&self, a: Complex64, b: Complex64) -> TriDiagonal {
        TriDiagonal {
            lower: self.lower.iter().map(|&v| b * v).collect(),
            diag: self.diag.iter().map(|&v| a + b * v).collect(),
            upper: self.upper.iter().map(|&v| b * v).collect(),
        }
    }

    /// Add a complex value to diagonal entry i.
    pub fn add_diag(&mut self, i: usize, v: Complex64) {
        self.diag[i] += v;
    }
}

/// LU factors of a tridiagonal matrix; solves are division-free.
#[derive(Debug, Clone)]
pub struct TriFactor {
    low: Vec<Complex64>,
    inv_diag: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl TriFactor {
    pub fn n(&self) -> usize {
        self.inv_diag.len()
    }

    pub fn solve_into(&self, rhs: &[Complex64], x: &mut Vec<Complex64>) {
        let n = self.n();
        debug_assert_eq!(rhs.len(), n);
        x.clear();
        x.extend_from_slice(rhs);
        for i in 1..n {
            let t = self.low[i] * x[i - 1];
            x[i] -= t;
        }
        x[n - 1] *= self.inv_diag[n - 1];
        for i in (0..n - 1).rev() {
            let t = x[i] - self.upper[i] * x[i + 1];
            x[i] = t * self.inv_diag[i];
        }
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut x = Vec::with_capacity(rhs.len());
        self.solve_into(rhs, &mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn solve_then_apply_roundtrip() {
        let n = 50;
        let m = TriDiagonal {
            lower: (0..n - 1).map(|i| c(0.3 + 0.01 * i as f64, -0.2)).collect(),
            diag: (0..n).map(|i| c(2.0 + 0.05 * i as f64, 0.7)).collect(),
            upper: (0..n - 1).map(|i| c(-0.4, 0.1 * (i % 3) as f64)).collect(),
        };
        let rhs: Vec<C> = (0..n)
            .map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()))
            .collect();
        let x = m.solve(&rhs).unwrap();
        let back = m.apply(&x);
        let err: f64 = back
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "residual {err}");
    }

    #[test]
    fn factored_solve_matches_thomas() {
        let n = 40;
        let m = TriDiagonal {
            lower: (0..n - 1).map(|i| c(0.2, -0.1 * (i % 5) as f64)).collect(),
            diag: (0..n).map(|i| c(3.0 + 0.01 * i as f64, 0.5)).collect(),
            upper: (0..n - 1).map(|_| c(-0.7, 0.2)).collect(),
        };
        let rhs: Vec<C> = (0..n).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let a = m.solve(&rhs).unwrap();
        let b = m.factor().unwrap().solve(&rhs);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = TriDiagonal {
            lower: vec![c(1.0, 0.0); 2],
            diag: vec![c(0.0, 0.0); 3],
            upper: vec![c(1.0, 0.0); 2],
        };
        assert!(m.solve(&[c(1.0, 0.0); 3]).is_err());
    }
}
