//! Dense complex matrices and a scaling-and-squaring matrix exponential.
//!
//! Order-13 Pade approximant throughout; this code is a validation oracle
//! for the time steppers, not a performance path.

use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.data[i * n + l];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let row = &other.data[l * n..(l + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    dst[j] += a * row[j];
                }
            }
        }
        out
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// self += c * other
    pub fn axpy(&mut self, c: Complex64, other: &CMatrix) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Solve self * X = B by LU with partial pivoting (in-place on copies).
    pub fn solve_matrix(&self, b: &CMatrix) -> Result<CMatrix> {
        assert_eq!(self.n, b.n);
        let n = self.n;
        let mut lu = self.data.clone();
        let mut x = b.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut best = col;
            let mut best_mag = lu[piv[col] * n + col].norm_sqr();
            for r in col + 1..n {
                let mag = lu[piv[r] * n + col].norm_sqr();
                if mag > best_mag {
                    best_mag = mag;
                    best = r;
                }
            }
            if best_mag == 0.0 {
                return Err(Error::NumericalBreakdown("singular matrix in LU solve".into()));
            }
            piv.swap(col, best);
            let prow = piv[col];
            let pivot = lu[prow * n + col];
            for r in col + 1..n {
                let row = piv[r];
                let factor = lu[row * n + col] / pivot;
                lu[row * n + col] = factor;
                for j in col + 1..n {
                    let v = lu[prow * n + j];
                    lu[row * n + j] -= factor * v;
                }
                for j in 0..n {
                    let v = x.data[prow * n + j];
                    x.data[row * n + j] -= factor * v;
                }
            }
        }
        // back substitution, row order given by piv
        let mut out = CMatrix::zeros(n);
        for j in 0..n {
            for r in (0..n).rev() {
                let row = piv[r];
                let mut acc = x.data[row * n + j];
                for c2 in r + 1..n {
                    acc -= lu[row * n + c2] * out.data[c2 * n + j];
                }
                out.data[r * n + j] = acc / lu[row * n + r];
            }
        }
        Ok(out)
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// exp(A) by order-13 Pade with scaling and squaring.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.n();
    let norm = a.one_norm();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let mut a_s = a.clone();
    a_s.scale(Complex64::new(1.0 / 2f64.powi(s as i32), 0.0));

    let a2 = a_s.matmul(&a_s);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let id = CMatrix::identity(n);
    let re = |x: f64| Complex64::new(x, 0.0);

    // U = A [ A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I ]
    let mut inner = CMatrix::zeros(n);
    inner.axpy(re(PADE13[13]), &a6);
    inner.axpy(re(PADE13[11]), &a4);
    inner.axpy(re(PADE13[9]), &a2);
    let mut u = a6.matmul(&inner);
    u.axpy(re(PADE13[7]), &a6);
    u.axpy(re(PADE13[5]), &a4);
    u.axpy(re(PADE13[3]), &a2);
    u.axpy(re(PADE13[1]), &id);
    let u = a_s.matmul(&u);

    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let mut inner = CMatrix::zeros(n);
    inner.axpy(re(PADE13[12]), &a6);
    inner.axpy(re(PADE13[10]), &a4);
    inner.axpy(re(PADE13[8]), &a2);
    let mut v = a6.matmul(&inner);
    v.axpy(re(PADE13[6]), &a6);
    v.axpy(re(PADE13[4]), &a4);
    v.axpy(re(PADE13[2]), &a2);
    v.axpy(re(PADE13[0]), &id);

    // (V - U)^{-1} (V + U)
    let mut vm = v.clone();
    vm.axpy(re(-1.0), &u);
    let mut vp = v;
    vp.axpy(re(1.0), &u);
    let mut r = vm.solve_matrix(&vp)?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}
