//! Distorted Fourier basis `K(x,k)` of `H = -∂_xx + V`, its singular/regular
//! split and the quadrature transforms
//!
//! ```text
//! f̃(k) = ∫ conj K(x,k) f(x) dx,      f(x) = ∫ K(x,k) f̃(k) dk.
//! ```
//!
//! With `χ_+ + χ_- = 1` from [`crate::cutoff`],
//!
//! ```text
//! k ≥ 0:  √(2π) K = χ_+ T(k) m_+(x,k) e^{ikx}
//!                 + χ_- [m_-(x,-k) e^{ikx} + R_-(k) m_-(x,k) e^{-ikx}]
//! k < 0:  √(2π) K = χ_- T(-k) m_-(x,-k) e^{ikx}
//!                 + χ_+ [m_+(x,k) e^{ikx} + R_+(-k) m_+(x,-k) e^{-ikx}]
//! ```
//!
//! `K_S = χ_+ K_+ + χ_- K_-` keeps the plane waves (`m ≡ 1`),
//! `K_± = a^+_±(k) e^{ikx} + a^-_±(k) e^{-ikx}`, and `K_R` collects the
//! `(m - 1)` terms, so `√(2π) K = K_S + K_R`.

use faer::Mat;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::cutoff;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::jost::{jost_column, JostField};
use crate::potentials::CellModel;
use crate::scattering::ScatteringData;
use crate::{Side, C};

/// Plane-wave coefficients `a^ε_side(k)` of the singular part.
#[derive(Clone, Debug)]
pub struct ACoeff {
    /// `a^+_+ = 1_+ T + 1_-`
    pub plus_plus: Vec<C>,
    /// `a^-_+ = 1_- R_+(-k)`
    pub minus_plus: Vec<C>,
    /// `a^+_- = 1_+ + 1_- T(-k)`
    pub plus_minus: Vec<C>,
    /// `a^-_- = 1_+ R_-(k)`
    pub minus_minus: Vec<C>,
}

impl ACoeff {
    /// `a^ε_side` with `eps = ±1`.
    pub fn get(&self, side: Side, eps: i8) -> &[C] {
        match (side, eps > 0) {
            (Side::Plus, true) => &self.plus_plus,
            (Side::Plus, false) => &self.minus_plus,
            (Side::Minus, true) => &self.plus_minus,
            (Side::Minus, false) => &self.minus_minus,
        }
    }

    fn build(s: &ScatteringData, grid: &Grid) -> Self {
        let n = grid.n_k();
        let one = C::new(1.0, 0.0);
        let zero = C::default();
        let mut a = ACoeff {
            plus_plus: vec![zero; n],
            minus_plus: vec![zero; n],
            plus_minus: vec![zero; n],
            minus_minus: vec![zero; n],
        };
        for j in 0..n {
            let m = grid.mirror(j);
            if grid.k(j) >= 0.0 {
                a.plus_plus[j] = s.t[j];
                a.plus_minus[j] = one;
                a.minus_minus[j] = s.r_minus[j];
            } else {
                a.plus_plus[j] = one;
                a.minus_plus[j] = s.r_plus[m];
                a.plus_minus[j] = s.t[m];
            }
        }
        a
    }

    /// `max_k |a^ε_±(k)| - 1`; non-positive since `|T|, |R_±| ≤ 1`.
    pub fn bound_excess(&self) -> f64 {
        [&self.plus_plus, &self.minus_plus, &self.plus_minus, &self.minus_minus]
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.norm() - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which piece of the basis a projection uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Component {
    Full,
    Singular,
    Regular,
}

pub struct DistortedBasis {
    grid: Grid,
    /// `K(x_i, k_j)`.
    pub k: Mat<C>,
    /// `K_S` and `K_R` (without the `1/√(2π)`).
    pub k_s: Mat<C>,
    pub k_r: Mat<C>,
    pub chi_plus: Vec<f64>,
    pub chi_minus: Vec<f64>,
    pub a: ACoeff,
    pub scattering: ScatteringData,
}

/// `√(2π) K`, `K_S`, `K_R` at one frequency from the Jost data at `±k`.
struct Pieces {
    full: Vec<C>,
    sing: Vec<C>,
    reg: Vec<C>,
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    xs: &[f64],
    chi_p: &[f64],
    chi_m: &[f64],
    k: f64,
    m_plus_k: &[C],
    m_plus_mk: &[C],
    m_minus_k: &[C],
    m_minus_mk: &[C],
    coef: (C, C, C, C),
) -> Pieces {
    let (app, amp, apm, amm) = coef;
    let n = xs.len();
    let one = C::new(1.0, 0.0);
    let mut p = Pieces {
        full: vec![C::default(); n],
        sing: vec![C::default(); n],
        reg: vec![C::default(); n],
    };
    for i in 0..n {
        let ep = C::from_polar(1.0, k * xs[i]);
        let em = ep.conj();
        let (cp, cm) = (chi_p[i], chi_m[i]);
        let sing = cp * (app * ep + amp * em) + cm * (apm * ep + amm * em);
        let reg = if k >= 0.0 {
            cp * app * (m_plus_k[i] - one) * ep
                + cm * ((m_minus_mk[i] - one) * ep + amm * (m_minus_k[i] - one) * em)
        } else {
            cm * apm * (m_minus_mk[i] - one) * ep
                + cp * ((m_plus_k[i] - one) * ep + amp * (m_plus_mk[i] - one) * em)
        };
        let full = if k >= 0.0 {
            cp * app * m_plus_k[i] * ep + cm * (m_minus_mk[i] * ep + amm * m_minus_k[i] * em)
        } else {
            cm * apm * m_minus_mk[i] * ep + cp * (m_plus_k[i] * ep + amp * m_plus_mk[i] * em)
        };
        p.full[i] = full;
        p.sing[i] = sing;
        p.reg[i] = reg;
    }
    p
}

fn cutoffs(xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let cp: Vec<f64> = xs.iter().map(|&x| cutoff::chi_plus(x)).collect();
    let cm = cp.iter().map(|c| 1.0 - c).collect();
    (cp, cm)
}

pub fn build_basis(j: &JostField, s: &ScatteringData, grid: &Grid) -> Result<DistortedBasis> {
    if j.grid() != grid || s.ks.len() != grid.n_k() {
        return Err(Error::contract("Jost field, scattering data and grid disagree"));
    }
    let xs = grid.xs();
    let (chi_plus, chi_minus) = cutoffs(&xs);
    let a = ACoeff::build(s, grid);
    let (n, nk) = (grid.n_x(), grid.n_k());
    let mut basis = DistortedBasis {
        grid: *grid,
        k: Mat::zeros(n, nk),
        k_s: Mat::zeros(n, nk),
        k_r: Mat::zeros(n, nk),
        chi_plus,
        chi_minus,
        a,
        scattering: s.clone(),
    };
    let norm = 1.0 / (2.0 * PI).sqrt();
    let cols: Vec<Pieces> = (0..nk)
        .into_par_iter()
        .map(|jk| {
            let m = grid.mirror(jk);
            assemble(
                &xs,
                &basis.chi_plus,
                &basis.chi_minus,
                grid.k(jk),
                j.m_plus.col_as_slice(jk),
                j.m_plus.col_as_slice(m),
                j.m_minus.col_as_slice(jk),
                j.m_minus.col_as_slice(m),
                (
                    basis.a.plus_plus[jk],
                    basis.a.minus_plus[jk],
                    basis.a.plus_minus[jk],
                    basis.a.minus_minus[jk],
                ),
            )
        })
        .collect();
    for (jk, p) in cols.into_iter().enumerate() {
        for (dst, v) in basis.k.col_as_slice_mut(jk).iter_mut().zip(&p.full) {
            *dst = v * norm;
        }
        basis.k_s.col_as_slice_mut(jk).copy_from_slice(&p.sing);
        basis.k_r.col_as_slice_mut(jk).copy_from_slice(&p.reg);
    }
    Ok(basis)
}

/// `K(x, k)` on the x-grid at an arbitrary frequency `k ≠ 0`, from fresh
/// Jost columns at `±k`.
pub fn kernel_column(cells: &CellModel, grid: &Grid, k: f64) -> Vec<C> {
    let xs = grid.xs();
    let (cp, cm) = cutoffs(&xs);
    let pos = jost_column(cells, k);
    let neg = jost_column(cells, -k);
    let (x0, x1) = (grid.x(0), grid.x(grid.n_x() - 1));
    let one = C::new(1.0, 0.0);
    let coef = if k >= 0.0 {
        let (t, _, rm) = crate::scattering::coefficients_from_column(&pos, x0, x1);
        (t, C::default(), one, rm)
    } else {
        let (t, rp, _) = crate::scattering::coefficients_from_column(&neg, x0, x1);
        (one, rp, t, C::default())
    };
    let p = assemble(
        &xs,
        &cp,
        &cm,
        k,
        &pos.m_plus,
        &neg.m_plus,
        &pos.m_minus,
        &neg.m_minus,
        coef,
    );
    p.full.iter().map(|v| v / (2.0 * PI).sqrt()).collect()
}

impl DistortedBasis {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `f̃(k_j) = Σ_i conj K(x_i,k_j) f(x_i) h`.
    pub fn forward(&self, f: &[C]) -> Vec<C> {
        let h = self.grid.h();
        (0..self.grid.n_k())
            .into_par_iter()
            .map(|j| {
                let col = self.k.col_as_slice(j);
                col.iter().zip(f).map(|(kv, fv)| kv.conj() * fv).sum::<C>() * h
            })
            .collect()
    }

    /// `f(x_i) = Σ_j K(x_i,k_j) g(k_j) Δk`.
    pub fn inverse(&self, g: &[C]) -> Vec<C> {
        self.synthesize(&self.k, g, self.grid.dk())
    }

    fn synthesize(&self, m: &Mat<C>, g: &[C], w: f64) -> Vec<C> {
        let n = self.grid.n_x();
        let mut out = vec![C::default(); n];
        for (j, gj) in g.iter().enumerate() {
            if *gj == C::default() {
                continue;
            }
            let c = gj * w;
            for (o, kv) in out.iter_mut().zip(m.col_as_slice(j)) {
                *o += kv * c;
            }
        }
        out
    }

    /// `inverse(m · forward(f))`.
    pub fn multiplier(&self, m: &[C], f: &[C]) -> Vec<C> {
        let mut g = self.forward(f);
        for (a, b) in g.iter_mut().zip(m) {
            *a *= b;
        }
        self.inverse(&g)
    }

    /// `φ_*(x) = (2π)^{-1/2} ∫ K_*(x,k) g(k) dk`.
    pub fn component_project(&self, g: &[C], which: Component) -> Vec<C> {
        let w = self.grid.dk() / (2.0 * PI).sqrt();
        match which {
            Component::Full => self.inverse(g),
            Component::Singular => self.synthesize(&self.k_s, g, w),
            Component::Regular => self.synthesize(&self.k_r, g, w),
        }
    }

    /// `max |√(2π) K - K_S - K_R|`.
    pub fn split_defect(&self) -> f64 {
        let s = (2.0 * PI).sqrt();
        let mut worst: f64 = 0.0;
        for j in 0..self.grid.n_k() {
            let (a, b, c) = (
                self.k.col_as_slice(j),
                self.k_s.col_as_slice(j),
                self.k_r.col_as_slice(j),
            );
            for i in 0..self.grid.n_x() {
                worst = worst.max((a[i] * s - b[i] - c[i]).norm());
            }
        }
        worst
    }

    /// The plain two-branch form `T(k) ψ_+(x,k)` / `T(-k) ψ_-(x,-k)`,
    /// as a cross-check against the blended assembly.
    pub fn two_branch(j: &JostField, s: &ScatteringData) -> Mat<C> {
        let g = *j.grid();
        let norm = 1.0 / (2.0 * PI).sqrt();
        Mat::from_fn(g.n_x(), g.n_k(), |i, jk| {
            let k = g.k(jk);
            let e = C::from_polar(norm, k * g.x(i));
            if k >= 0.0 {
                s.t[jk] * j.m_plus[(i, jk)] * e
            } else {
                let m = g.mirror(jk);
                s.t[m] * j.m_minus[(i, m)] * e
            }
        })
    }

    /// `max_{x,k} <x> <k> |K_R(x,k)|`.
    pub fn regular_weighted_sup(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.grid.n_k() {
            let kw = (1.0 + self.grid.k(j).powi(2)).sqrt();
            for (i, v) in self.k_r.col_as_slice(j).iter().enumerate() {
                let xw = (1.0 + self.grid.x(i).powi(2)).sqrt();
                worst = worst.max(xw * kw * v.norm());
            }
        }
        worst
    }
}

/// Relative `L²` norms: `‖f̃‖_{dk} / ‖f‖_{dx}`.
pub fn plancherel_ratio(b: &DistortedBasis, f: &[C]) -> f64 {
    let g = b.grid();
    let ft = b.forward(f);
    let nk: f64 = ft.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dk();
    let nx: f64 = f.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.h();
    (nk / nx).sqrt()
}

/// `‖forward(Hf) - k² forward(f)‖ / ‖f‖` with `Hf = -f'' + V f` supplied.
pub fn diagonalization_residual(b: &DistortedBasis, f: &[C], hf: &[C]) -> f64 {
    let g = b.grid();
    let a = b.forward(hf);
    let c = b.forward(f);
    let num: f64 = (0..g.n_k())
        .map(|j| (a[j] - g.k(j).powi(2) * c[j]).norm_sqr())
        .sum::<f64>()
        * g.dk();
    let den: f64 = f.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.h();
    (num / den).sqrt()
}
