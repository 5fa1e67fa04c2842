//! Per-mode differential and elliptic operators.
//!
//! Everything acts on interior values with implicit Dirichlet zeros at both
//! walls. The projected Laplacian for band k is the centered second
//! difference shifted by -k^2, which keeps every solve tridiagonal.

use crate::error::{Error, Result};
use crate::field::ModeField;
use crate::grid::Grid;
use crate::tridiag::TriDiagonal;
use num_complex::Complex64;
use std::sync::Arc;

/// Second-order matrix for d^2/dy^2 - k^2 on the interior grid. The entries
/// never depend on the viscosity; that stays a property of the evolution.
pub fn laplacian(grid: &Grid, k: usize) -> TriDiagonal {
    let n = grid.ny();
    let inv = 1.0 / (grid.dy() * grid.dy());
    let off = Complex64::new(inv, 0.0);
    let main = Complex64::new(-2.0 * inv - (k * k) as f64, 0.0);
    TriDiagonal {
        lower: vec![off; n - 1],
        diag: vec![main; n],
        upper: vec![off; n - 1],
    }
}

/// Stream function of one band: solves (d^2/dy^2 - k^2) psi = omega with
/// Dirichlet walls. Rejected for k = 0, where the inverse is not what the
/// dynamics needs (see the shear velocity in the nonlinear module).
pub fn poisson_solve(omega: &ModeField) -> Result<ModeField> {
    if omega.k() == 0 {
        return Err(Error::ZeroModePoisson);
    }
    let lap = laplacian(omega.grid(), omega.k());
    let psi = lap.solve(omega.values())?;
    ModeField::from_values(Arc::clone(omega.grid()), omega.k(), psi)
}

/// Centered first difference with ghost zeros at the walls.
pub fn dy_centered(f: &ModeField) -> ModeField {
    let v = f.values();
    let n = v.len();
    let half = 0.5 / f.grid().dy();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let up = if j + 1 < n { v[j + 1] } else { Complex64::new(0.0, 0.0) };
        let dn = if j > 0 { v[j - 1] } else { Complex64::new(0.0, 0.0) };
        out[j] = (up - dn) * half;
    }
    ModeField::from_values(Arc::clone(f.grid()), f.k(), out).expect("same grid")
}

/// Apply the band Laplacian (with its implicit Dirichlet ghosts).
pub fn apply_laplacian(f: &ModeField) -> ModeField {
    let lap = laplacian(f.grid(), f.k());
    ModeField::from_values(Arc::clone(f.grid()), f.k(), lap.apply(f.values())).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{l2_norm, l2_norm_sq};
    use num_complex::Complex64 as C;
    use std::f64::consts::PI;

    fn grid(ly: f64, ny: usize) -> Arc<Grid> {
        Arc::new(Grid::new(ly, ny, 4).unwrap())
    }

    /// Sampled sine is an exact eigenvector of the discrete Dirichlet
    /// Laplacian; the eigenvalue has the closed form below.
    pub fn dirichlet_eigenvector(g: &Arc<Grid>, m: usize) -> ModeField {
        let ly = g.ly();
        ModeField::from_fn(Arc::clone(g), 0, |y| {
            C::new((m as f64 * PI * (y + ly) / (2.0 * ly)).sin(), 0.0)
        })
    }

    pub fn dirichlet_eigenvalue(g: &Grid, m: usize) -> f64 {
        let dy = g.dy();
        (2.0 / (dy * dy)) * ((m as f64 * PI * dy / (2.0 * g.ly())).cos() - 1.0)
    }

    #[test]
    fn stencil_rows_ny3() {
        // dy = 1 when ly = 2 and ny = 3
        let g = Grid::new(2.0, 3, 1).unwrap();
        assert!((g.dy() - 1.0).abs() < 1e-15);
        let m = laplacian(&g, 0);
        assert_eq!(m.diag, vec![C::new(-2.0, 0.0); 3]);
        assert_eq!(m.lower, vec![C::new(1.0, 0.0); 2]);
        assert_eq!(m.upper, vec![C::new(1.0, 0.0); 2]);
        // -k^2 shifts the main diagonal only
        let m2 = laplacian(&g, 2);
        assert_eq!(m2.diag, vec![C::new(-6.0, 0.0); 3]);
        assert_eq!(m2.lower, vec![C::new(1.0, 0.0); 2]);
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        let g = grid(PI, 127);
        for m in 1..=3 {
            let v = dirichlet_eigenvector(&g, m);
            let lv = apply_laplacian(&v);
            // Rayleigh quotient against the exact discrete eigenvalue
            let num: f64 = lv
                .values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| (a * b.conj()).re)
                .sum();
            let den: f64 = v.values().iter().map(|a| a.norm_sqr()).sum();
            let lam = num / den;
            let exact = dirichlet_eigenvalue(&g, m);
            assert!((lam - exact).abs() < 1e-10 * exact.abs());
            // and the discrete value sits within 1% of the continuum one
            let continuum = -(m as f64 * PI / (2.0 * g.ly())).powi(2);
            assert!(
                (exact - continuum).abs() < 0.01 * continuum.abs(),
                "m={m}: {exact} vs {continuum}"
            );
        }
    }

    #[test]
    fn poisson_zero_gives_zero() {
        let g = grid(5.0, 64);
        let w = ModeField::zero(Arc::clone(&g), 1);
        let psi = poisson_solve(&w).unwrap();
        assert_eq!(l2_norm(&psi), 0.0);
    }

    #[test]
    fn poisson_eigenvector_algebra() {
        // omega = -2 s_m  =>  psi = -2 s_m / (lambda_m - k^2)
        let g = grid(4.0, 101);
        let k = 1usize;
        let m = 2usize;
        let s = dirichlet_eigenvector(&g, m);
        let lam = dirichlet_eigenvalue(&g, m);
        let mut w = ModeField::from_values(Arc::clone(&g), k, s.values().to_vec()).unwrap();
        w.scale(-2.0);
        let psi = poisson_solve(&w).unwrap();
        let factor = -2.0 / (lam - (k * k) as f64);
        for (p, sv) in psi.values().iter().zip(s.values()) {
            assert!((p - sv * factor).norm() < 1e-10);
        }
    }

    #[test]
    fn poisson_roundtrip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = grid(6.0, 200);
        let w = ModeField::from_fn(Arc::clone(&g), 3, |_| {
            C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let psi = poisson_solve(&w).unwrap();
        let back = apply_laplacian(&psi);
        let mut diff = 0.0f64;
        for (a, b) in back.values().iter().zip(w.values()) {
            diff = diff.max((a - b).norm());
        }
        assert!(diff < 1e-10 * l2_norm(&w));
        // residual in norm terms
        let mut r = w.clone();
        for (rv, bv) in r.values_mut().iter_mut().zip(back.values()) {
            *rv -= bv;
        }
        assert!(l2_norm_sq(&r).sqrt() <= 1e-10 * l2_norm(&w));
    }

    #[test]
    fn poisson_rejects_zero_mode() {
        let g = grid(5.0, 32);
        let w = ModeField::zero(g, 0);
        assert!(matches!(poisson_solve(&w), Err(Error::ZeroModePoisson)));
    }
}
