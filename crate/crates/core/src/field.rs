//! Per-band complex fields and the full perturbation state.
//!
//! A `ModeField` holds the coefficient a_k(y) of the e^{+ikx} mode on the
//! interior y-grid; the -k coefficient is its conjugate and is never stored,
//! so the reconstructed physical field is real by construction.

use crate::error::{Error, Result};
use crate::grid::Grid;
use num_complex::Complex64;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct ModeField {
    grid: Arc<Grid>,
    k: usize,
    values: Vec<Complex64>,
}

impl ModeField {
    pub fn zero(grid: Arc<Grid>, k: usize) -> Self {
        let n = grid.ny();
        ModeField {
            grid,
            k,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, k: usize, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let values = grid.y().iter().map(|&y| f(y)).collect();
        ModeField { grid, k, values }
    }

    pub fn from_values(grid: Arc<Grid>, k: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.ny() {
            return Err(Error::GridMismatch);
        }
        Ok(ModeField { grid, k, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// Largest imaginary magnitude; a k = 0 band built from real data must
    /// keep this at round-off level under the heat flow.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn check_compatible(&self, other: &ModeField) -> Result<()> {
        if !self.grid.same_as(other.grid()) {
            return Err(Error::GridMismatch);
        }
        if self.k != other.k {
            return Err(Error::WavenumberMismatch {
                left: self.k,
                right: other.k,
            });
        }
        Ok(())
    }
}

/// Full perturbation: one band per k = 0..=kmax, advancing together in time.
#[derive(Debug, Clone)]
pub struct PerturbationState {
    pub modes: Vec<ModeField>,
    pub time: f64,
}

impl PerturbationState {
    pub fn zero(grid: &Arc<Grid>) -> Self {
        let modes = (0..=grid.kmax())
            .map(|k| ModeField::zero(Arc::clone(grid), k))
            .collect();
        PerturbationState { modes, time: 0.0 }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.modes[0].grid()
    }

    pub fn kmax(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn scale(&mut self, c: f64) {
        for m in &mut self.modes {
            m.scale(c);
        }
    }
}
