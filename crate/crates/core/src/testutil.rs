//! Shared helpers for unit tests.

use crate::field::ModeField;
use crate::grid::Grid;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;
use std::sync::Arc;

/// Sampled sine: exact eigenvector of the discrete Dirichlet Laplacian.
pub fn dirichlet_eigenvector(g: &Arc<Grid>, k: usize, m: usize) -> ModeField {
    let ly = g.ly();
    ModeField::from_fn(Arc::clone(g), k, |y| {
        C::new((m as f64 * PI * (y + ly) / (2.0 * ly)).sin(), 0.0)
    })
}

/// Eigenvalue of the discrete d^2/dy^2 for mode m (k^2 not included).
pub fn dirichlet_eigenvalue(g: &Grid, m: usize) -> f64 {
    let dy = g.dy();
    (2.0 / (dy * dy)) * ((m as f64 * PI * dy / (2.0 * g.ly())).cos() - 1.0)
}

pub fn random_field(g: &Arc<Grid>, k: usize, seed: u64) -> ModeField {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    ModeField::from_fn(Arc::clone(g), k, |_| {
        C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// Smooth localized random field: random low-frequency cosine mix under a
/// Gaussian envelope.
pub fn random_smooth_field(g: &Arc<Grid>, k: usize, seed: u64) -> ModeField {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                2.0 * rng.random::<f64>(),
            )
        })
        .collect();
    ModeField::from_fn(Arc::clone(g), k, |y| {
        let mut v = C::new(0.0, 0.0);
        for &(re, im, q) in &coeffs {
            v += C::new(re * (q * y).cos(), im * (q * y).sin());
        }
        v * (-y * y).exp()
    })
}

pub fn gaussian_band(g: &Arc<Grid>, k: usize, amp: f64) -> ModeField {
    ModeField::from_fn(Arc::clone(g), k, |y| C::new(amp * (-y * y).exp(), 0.0))
}
