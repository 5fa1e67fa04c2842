//! Truncated y-domain grid.
//!
//! The y-line is truncated to [-Ly, Ly] with homogeneous Dirichlet values at
//! both ends standing in for decay at infinity. Only the Ny interior nodes are
//! stored; the boundary values are implicit zeros everywhere in the crate.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hard floor for the three-point stencil. Experiment configs enforce the
/// stricter `ny >= 8`; the lower floor here keeps tiny grids available to
/// closed-form tests.
pub const MIN_NY: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    ly: f64,
    ny: usize,
    kmax: usize,
    dy: f64,
    #[serde(skip, default)]
    y: Vec<f64>,
}

impl Grid {
    /// Uniform interior grid y_j = -Ly + j dy, j = 1..=Ny, dy = 2 Ly / (Ny + 1).
    pub fn new(ly: f64, ny: usize, kmax: usize) -> Result<Self> {
        if !(ly > 0.0) || !ly.is_finite() {
            return Err(Error::GridParameter(format!("ly must be positive, got {ly}")));
        }
        if ny < MIN_NY {
            return Err(Error::GridTooSmall { ny, min: MIN_NY });
        }
        if kmax < 1 {
            return Err(Error::GridParameter("kmax must be at least 1".into()));
        }
        let dy = 2.0 * ly / (ny + 1) as f64;
        let y = (1..=ny).map(|j| -ly + j as f64 * dy).collect();
        Ok(Grid { ly, ny, kmax, dy, y })
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Interior nodes, strictly increasing, symmetric about 0.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Two grids are compatible when they discretize the same domain.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.ny == other.ny && self.ly == other.ly
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_spans_domain_exactly() {
        let g = Grid::new(10.0, 511, 4).unwrap();
        assert!((g.dy() * (g.ny() + 1) as f64 - 2.0 * g.ly()).abs() < 1e-12);
    }

    #[test]
    fn nodes_increasing_and_symmetric() {
        let g = Grid::new(3.0, 17, 1).unwrap();
        let y = g.y();
        for w in y.windows(2) {
            assert!(w[1] > w[0]);
        }
        for j in 0..y.len() {
            assert!((y[j] + y[y.len() - 1 - j]).abs() < 1e-13);
        }
        // odd ny: exact center node
        assert!(y[y.len() / 2].abs() < 1e-13);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(matches!(
            Grid::new(1.0, 2, 1),
            Err(Error::GridTooSmall { .. })
        ));
        assert!(Grid::new(0.0, 16, 1).is_err());
        assert!(Grid::new(1.0, 16, 0).is_err());
    }
}
