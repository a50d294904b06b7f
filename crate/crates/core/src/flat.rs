//! Unitary flat Fourier transform between the x-grid and the half-shifted
//! k-grid, `F f(k_j) = (2π)^{-1/2} Σ_i h e^{-i x_i k_j} f_i`, via FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;
use crate::C;

pub struct FlatTransform {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `e^{-iπ i/N}` applied before the forward FFT.
    pre: Vec<C>,
    /// `h/√(2π) e^{iX k_j}` applied after it.
    post: Vec<C>,
}

impl FlatTransform {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n_x();
        let mut planner = FftPlanner::new();
        let pre = (0..n)
            .map(|i| C::from_polar(1.0, -PI * i as f64 / n as f64))
            .collect();
        let scale = grid.h() / (2.0 * PI).sqrt();
        let post = (0..n)
            .map(|j| C::from_polar(scale, grid.x_half_width() * grid.k(j)))
            .collect();
        FlatTransform {
            grid: *grid,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            pre,
            post,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn forward(&self, f: &[C]) -> Vec<C> {
        let n = self.grid.n_x();
        assert_eq!(f.len(), n, "flat transform length");
        let mut buf: Vec<C> = f.iter().zip(&self.pre).map(|(a, b)| a * b).collect();
        self.fwd.process(&mut buf);
        // Output index m of the FFT corresponds to j - N/2 ≡ m (mod N).
        (0..n)
            .map(|j| buf[(j + n / 2) % n] * self.post[j])
            .collect()
    }

    pub fn inverse(&self, g: &[C]) -> Vec<C> {
        let n = self.grid.n_x();
        assert_eq!(g.len(), n, "flat transform length");
        let mut buf = vec![C::default(); n];
        for j in 0..n {
            buf[(j + n / 2) % n] = g[j] * self.post[j].conj();
        }
        self.inv.process(&mut buf);
        let dk = self.grid.dk();
        let h = self.grid.h();
        // post carries h; the inverse weight is Δk.
        buf.iter()
            .zip(&self.pre)
            .map(|(a, b)| a * b.conj() * (dk / h))
            .collect()
    }

    /// `∂_x f` by multiplying with `ik` on the dual grid.
    pub fn derivative(&self, f: &[C]) -> Vec<C> {
        let mut g = self.forward(f);
        for (j, v) in g.iter_mut().enumerate() {
            *v *= C::new(0.0, self.grid.k(j));
        }
        self.inverse(&g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let g = Grid::new(5.0, 64).unwrap();
        let t = FlatTransform::new(&g);
        let f: Vec<C> = g.xs().iter().map(|&x| C::new((-x * x).exp(), x * (-x * x).exp())).collect();
        let out = t.forward(&f);
        for j in [0, 17, 32, 63] {
            let k = g.k(j);
            let direct: C = g
                .xs()
                .iter()
                .zip(&f)
                .map(|(&x, v)| C::from_polar(g.h(), -x * k) * v)
                .sum::<C>()
                / (2.0 * PI).sqrt();
            assert!((out[j] - direct).norm() < 1e-13);
        }
        let back = t.inverse(&out);
        assert!(back.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn gaussian_is_fixed_and_derivative_is_spectral() {
        let g = Grid::new(20.0, 256).unwrap();
        let t = FlatTransform::new(&g);
        let f: Vec<C> = g.xs().iter().map(|&x| C::new((-x * x / 2.0).exp(), 0.0)).collect();
        let out = t.forward(&f);
        for j in 0..g.n_k() {
            let k = g.k(j);
            assert!((out[j] - (-k * k / 2.0).exp()).norm() < 1e-13);
        }
        let d = t.derivative(&f);
        for (i, x) in g.xs().iter().enumerate() {
            assert!((d[i] + x * f[i]).norm() < 1e-12);
        }
    }
}
