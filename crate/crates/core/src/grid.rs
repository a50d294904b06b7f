//! Paired uniform x- and k-grids.
//!
//! The x-grid is `x_i = -X + i h` with `h = 2X/N`. The k-grid is the dual,
//! half-shifted lattice `k_j = (j - N/2 + 1/2) dk` with `dk = pi/X`, so it is
//! symmetric about 0 and never contains `k = 0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_half_width: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_half_width: f64, n: usize) -> Result<Self> {
        if !(x_half_width.is_finite() && x_half_width > 0.0) {
            return Err(Error::config(format!(
                "grid.x_half_width must be positive, got {x_half_width}"
            )));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::config(format!(
                "grid.n_x must be even and at least 4, got {n}"
            )));
        }
        Ok(Grid { x_half_width, n })
    }

    /// Static default: `[-40, 40]` with 2048 points.
    pub fn default_static() -> Self {
        Grid {
            x_half_width: 40.0,
            n: 2048,
        }
    }

    /// Box used for long-time evolution: `[-400, 400]` with 2048 points.
    pub fn default_evolution() -> Self {
        Grid {
            x_half_width: 400.0,
            n: 2048,
        }
    }

    pub fn x_half_width(&self) -> f64 {
        self.x_half_width
    }

    pub fn n_x(&self) -> usize {
        self.n
    }

    pub fn n_k(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        2.0 * self.x_half_width / self.n as f64
    }

    pub fn dk(&self) -> f64 {
        PI / self.x_half_width
    }

    pub fn k_half_width(&self) -> f64 {
        0.5 * self.n as f64 * self.dk()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.x_half_width + i as f64 * self.h()
    }

    pub fn k(&self, j: usize) -> f64 {
        (j as f64 - 0.5 * self.n as f64 + 0.5) * self.dk()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.k(j)).collect()
    }

    /// Index of `-k_j`.
    pub fn mirror(&self, j: usize) -> usize {
        self.n - 1 - j
    }

    /// Same box, twice the points (halves `h`, doubles the k band).
    pub fn refined(&self) -> Grid {
        Grid {
            x_half_width: self.x_half_width,
            n: 2 * self.n,
        }
    }

    /// Indices of k-nodes with `k > 0`, increasing.
    pub fn positive_k(&self) -> std::ops::Range<usize> {
        self.n / 2..self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_grid_is_symmetric_and_excludes_zero() {
        let g = Grid::new(10.0, 64).unwrap();
        for j in 0..g.n_k() {
            assert_eq!(g.k(g.mirror(j)), -g.k(j));
            assert!(g.k(j) != 0.0);
        }
        assert!((g.k(g.n_k() / 2) - 0.5 * g.dk()).abs() < 1e-15);
    }

    #[test]
    fn dual_spacing() {
        let g = Grid::default_static();
        assert!((g.h() * g.dk() * g.n_x() as f64 - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(10.0, 0).is_err());
        assert!(Grid::new(10.0, 7).is_err());
        assert!(Grid::new(-1.0, 8).is_err());
    }
}
