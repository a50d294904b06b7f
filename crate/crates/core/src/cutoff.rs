//! Smooth partition of unity `χ_+ + χ_- = 1` and the pieces of `φ_± = χ_±⁴`
//! that enter the singular part of the spectral measure.
//!
//! `Φ` is even, equals 1 on `[-1/4, 1/4]`, vanishes outside `[-3/4, 3/4]`,
//! is `C^∞` and has unit integral. `χ_+(x) = ∫_{-∞}^x Φ`.
//! With `ρ = ∂_x φ_+`, `ζ` is the even part of `ρ` and
//! `ϖ = φ_+ - ∫_{-∞}^x ζ = (φ_+(x) + φ_+(-x) - 1)/2`, which is even and
//! supported in `[-3/4, 3/4]`. Then `φ̂_+ = √(π/2) δ + ζ̂/(ip) + ϖ̂` in the
//! unitary convention `f̂(p) = (2π)^{-1/2} ∫ e^{-ixp} f(x) dx`.

use std::f64::consts::PI;

use crate::quad;
use crate::Side;

const INNER: f64 = 0.25;
const OUTER: f64 = 0.75;

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step from 0 at `t ≤ 0` to 1 at `t ≥ 1`, with `step(t) + step(1-t) = 1`.
fn step(t: f64) -> f64 {
    let a = bump(t);
    let b = bump(1.0 - t);
    a / (a + b)
}

pub fn phi(x: f64) -> f64 {
    let a = x.abs();
    if a <= INNER {
        1.0
    } else if a >= OUTER {
        0.0
    } else {
        1.0 - step((a - INNER) / (OUTER - INNER))
    }
}

pub fn chi_plus(x: f64) -> f64 {
    if x <= -OUTER {
        0.0
    } else if x >= OUTER {
        1.0
    } else if x > 0.0 {
        1.0 - chi_plus(-x)
    } else {
        // Φ ≡ 1 on [-1/4, 0]; the transition is integrated to rounding.
        let lo = x.min(-INNER);
        let tail = quad::integrate(phi, -OUTER, lo, 8, 20);
        tail + (x - lo)
    }
}

pub fn chi_minus(x: f64) -> f64 {
    chi_plus(-x)
}

pub fn chi(side: Side, x: f64) -> f64 {
    match side {
        Side::Plus => chi_plus(x),
        Side::Minus => chi_minus(x),
    }
}

pub fn phi_plus(x: f64) -> f64 {
    chi_plus(x).powi(4)
}

pub fn phi_minus(x: f64) -> f64 {
    chi_minus(x).powi(4)
}

pub fn phi_side(side: Side, x: f64) -> f64 {
    chi(side, x).powi(4)
}

/// `ρ = ∂_x φ_+ = 4 χ_+³ Φ`.
pub fn rho(x: f64) -> f64 {
    4.0 * chi_plus(x).powi(3) * phi(x)
}

pub fn zeta(x: f64) -> f64 {
    let c = chi_plus(x);
    2.0 * (c.powi(3) + (1.0 - c).powi(3)) * phi(x)
}

pub fn varpi(x: f64) -> f64 {
    0.5 * (phi_plus(x) + phi_minus(x) - 1.0)
}

/// Fourier transforms of `ζ` and `ϖ` from Gauss-Legendre tables on their support.
#[derive(Clone, Debug)]
pub struct CutoffTransforms {
    nodes: Vec<f64>,
    zeta_w: Vec<f64>,
    varpi_w: Vec<f64>,
}

impl Default for CutoffTransforms {
    fn default() -> Self {
        Self::new()
    }
}

impl CutoffTransforms {
    pub fn new() -> Self {
        let (z, w) = quad::gauss_legendre(24);
        let panels = 64;
        let width = 2.0 * OUTER / panels as f64;
        let (mut nodes, mut zeta_w, mut varpi_w) = (Vec::new(), Vec::new(), Vec::new());
        for p in 0..panels {
            let mid = -OUTER + (p as f64 + 0.5) * width;
            for (zi, wi) in z.iter().zip(&w) {
                let x = mid + 0.5 * width * zi;
                let ww = 0.5 * width * wi / (2.0 * PI).sqrt();
                nodes.push(x);
                zeta_w.push(ww * zeta(x));
                varpi_w.push(ww * varpi(x));
            }
        }
        CutoffTransforms {
            nodes,
            zeta_w,
            varpi_w,
        }
    }

    fn cosine(&self, w: &[f64], p: f64) -> f64 {
        self.nodes.iter().zip(w).map(|(x, c)| c * (p * x).cos()).sum()
    }

    /// `ζ̂(p)`, real and even; `ζ̂(0) = (2π)^{-1/2}`.
    pub fn zeta_hat(&self, p: f64) -> f64 {
        self.cosine(&self.zeta_w, p)
    }

    /// `ϖ̂(p)`, real and even.
    pub fn varpi_hat(&self, p: f64) -> f64 {
        self.cosine(&self.varpi_w, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_shape() {
        assert_eq!(phi(0.1), 1.0);
        assert_eq!(phi(0.8), 0.0);
        assert!((phi(0.5) - 0.5).abs() < 1e-15);
        for x in [0.3, 0.41, 0.6, 0.74] {
            assert_eq!(phi(x), phi(-x));
        }
        let total = quad::integrate(phi, -1.0, 1.0, 40, 20);
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn partition_of_unity() {
        for i in 0..=200 {
            let x = -1.0 + 0.01 * i as f64;
            assert!((chi_plus(x) + chi_minus(x) - 1.0).abs() < 1e-14);
            assert!((0.0..=1.0).contains(&chi_plus(x)));
        }
        assert!((chi_plus(0.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn chi_derivative_is_phi() {
        let d = 1e-5;
        for x in [-0.6, -0.3, 0.0, 0.45, 0.7] {
            let fd = (chi_plus(x + d) - chi_plus(x - d)) / (2.0 * d);
            assert!((fd - phi(x)).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn rho_is_derivative_of_phi_plus() {
        let d = 1e-5;
        for x in [-0.5, -0.2, 0.1, 0.6] {
            let fd = (phi_plus(x + d) - phi_plus(x - d)) / (2.0 * d);
            assert!((fd - rho(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn zeta_and_varpi() {
        let iz = quad::integrate(zeta, -1.0, 1.0, 40, 20);
        assert!((iz - 1.0).abs() < 1e-13);
        for x in [0.1, 0.3, 0.55, 0.7] {
            assert!((zeta(x) - zeta(-x)).abs() < 1e-14);
            assert!((varpi(x) - varpi(-x)).abs() < 1e-14);
            let even_rho = 0.5 * (rho(x) + rho(-x));
            assert!((zeta(x) - even_rho).abs() < 1e-14);
        }
        assert_eq!(varpi(0.8), 0.0);
        // ϖ = φ_+ - ∫ζ, checked by direct integration.
        let x = 0.2;
        let direct = phi_plus(x) - quad::integrate(zeta, -1.0, x, 40, 20);
        assert!((varpi(x) - direct).abs() < 1e-13);
    }

    #[test]
    fn transforms() {
        let t = CutoffTransforms::new();
        assert!((t.zeta_hat(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
        let p = 3.7;
        let direct = quad::integrate(|x| zeta(x) * (p * x).cos(), -1.0, 1.0, 80, 20) / (2.0 * PI).sqrt();
        assert!((t.zeta_hat(p) - direct).abs() < 1e-13);
        let direct = quad::integrate(|x| varpi(x) * (p * x).cos(), -1.0, 1.0, 80, 20) / (2.0 * PI).sqrt();
        assert!((t.varpi_hat(p) - direct).abs() < 1e-13);
        // smooth compactly supported functions have rapidly decaying transforms
        assert!(t.zeta_hat(100.0).abs() < 1e-5 && t.zeta_hat(200.0).abs() < 1e-7);
    }
}
