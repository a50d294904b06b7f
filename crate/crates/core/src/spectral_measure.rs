//! Trilinear action of the nonlinear spectral distribution
//!
//! ```text
//! μ(k,ℓ,m,n) = ∫ conj K(x,k) K(x,ℓ) conj K(x,m) K(x,n) dx,
//! N[g1,g2,g3](k) = ∭ e^{it(-k²+ℓ²-m²+n²)} μ g1(ℓ) conj g2(m) g3(n),
//! ```
//!
//! its singular parts `N_±` (from `μ_± = ∫ φ_± conj K_± K_± conj K_± K_±`,
//! normalised by `(2π)^{-2}`) and the regular remainder, plus numerical
//! certificates for the two algebraic identities used to estimate them.
//!
//! On the half-shifted grid every `p = -ε0 k + ε1 ℓ - ε2 m + ε3 n` is an
//! integer multiple of `Δk`, and the box sum of `φ_+` against `e^{ixp}` is
//!
//! ```text
//! B_+(jΔk) = X δ_{j0} + [j odd] 2i √(2π) ζ̂(p)/p + √(2π) ϖ̂(p),
//! ```
//!
//! a delta, a symmetric principal value on the odd nodes and a smooth part.
//! `B_-(p) = B_+(-p)`. The singular actions are assembled from these three
//! pieces by signed lattice convolutions, independently of the physical
//! pairing with `φ_±` that serves as their oracle.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::cutoff::{self, CutoffTransforms};
use crate::dft::DistortedBasis;
use crate::error::{Error, Result};
use crate::{Side, C};

const I: C = C::new(0.0, 1.0);

/// Which piece of `φ̂_±` a kernel carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BKind {
    Delta,
    PrincipalValue,
    Smooth,
}

/// Sign tuple and kernel of a trilinear form.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrilinearSpec {
    pub eps: [i8; 3],
    pub b_kind: BKind,
    pub t: f64,
}

fn phase(ks: &[f64], t: f64, g: &[C], w: f64) -> Vec<C> {
    ks.iter()
        .zip(g)
        .map(|(k, v)| v * C::from_polar(w, k * k * t))
        .collect()
}

/// `N[g1,g2,g3](k)`: `u_j = inverse(e^{itk²} g_j)`, then
/// `e^{-itk²} forward(u1 conj(u2) u3)`.
pub fn trilinear_direct(b: &DistortedBasis, g1: &[C], g2: &[C], g3: &[C], t: f64) -> Vec<C> {
    let ks = b.grid().ks();
    let u: Vec<Vec<C>> = [g1, g2, g3]
        .iter()
        .map(|g| b.inverse(&phase(&ks, t, g, 1.0)))
        .collect();
    let prod: Vec<C> = (0..u[0].len())
        .map(|i| u[0][i] * u[1][i].conj() * u[2][i])
        .collect();
    phase(&ks, -t, &b.forward(&prod), 1.0)
}

/// Brute-force `Σ μ(k,ℓ,m,n) e^{it(...)} g1 conj g2 g3 Δk³` with `μ` summed
/// over x explicitly. `O(N_x N_k⁴)`; for grids with `N_k ≤ 32`.
pub fn trilinear_brute(b: &DistortedBasis, g1: &[C], g2: &[C], g3: &[C], t: f64) -> Result<Vec<C>> {
    let grid = *b.grid();
    let (nx, nk) = (grid.n_x(), grid.n_k());
    if nk > 32 {
        return Err(Error::contract("brute-force trilinear oracle limited to N_k <= 32"));
    }
    let (h, dk) = (grid.h(), grid.dk());
    let ks = grid.ks();
    let out = (0..nk)
        .into_par_iter()
        .map(|k| {
            let mut acc = C::default();
            for l in 0..nk {
                for m in 0..nk {
                    for n in 0..nk {
                        let mut mu = C::default();
                        for i in 0..nx {
                            mu += b.k[(i, k)].conj() * b.k[(i, l)] * b.k[(i, m)].conj() * b.k[(i, n)];
                        }
                        let ph = t * (-ks[k] * ks[k] + ks[l] * ks[l] - ks[m] * ks[m] + ks[n] * ks[n]);
                        acc += mu * h * C::from_polar(1.0, ph) * g1[l] * g2[m].conj() * g3[n];
                    }
                }
            }
            acc * dk.powi(3)
        })
        .collect();
    Ok(out)
}

fn reversed_if(v: Vec<C>, reverse: bool) -> Vec<C> {
    if reverse {
        v.into_iter().rev().collect()
    } else {
        v
    }
}

/// Full linear convolution.
pub fn convolve(a: &[C], b: &[C]) -> Vec<C> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C::default(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == C::default() {
            continue;
        }
        for (o, y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Box sum `B_side(jΔk) = Σ_x h φ_side(x) e^{ixjΔk}` from the delta,
/// principal-value and smooth pieces, for `|j| ≤ j_max`.
pub struct LatticeKernel {
    j_max: usize,
    values: Vec<C>,
}

impl LatticeKernel {
    pub fn new(side: Side, x_half_width: f64, dk: f64, j_max: usize, parts: &[BKind]) -> Self {
        let tr = CutoffTransforms::new();
        let s2pi = (2.0 * PI).sqrt();
        let sgn = match side {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        };
        let values = (0..=2 * j_max)
            .into_par_iter()
            .map(|idx| {
                let j = idx as i64 - j_max as i64;
                let p = j as f64 * dk;
                let mut v = C::default();
                if parts.contains(&BKind::Delta) && j == 0 {
                    v += x_half_width;
                }
                if parts.contains(&BKind::PrincipalValue) && j % 2 != 0 {
                    v += sgn * 2.0 * I * s2pi * tr.zeta_hat(p) / p;
                }
                if parts.contains(&BKind::Smooth) {
                    v += s2pi * tr.varpi_hat(p);
                }
                v
            })
            .collect();
        LatticeKernel { j_max, values }
    }

    pub fn at(&self, j: i64) -> C {
        let idx = j + self.j_max as i64;
        if idx < 0 || idx as usize >= self.values.len() {
            C::default()
        } else {
            self.values[idx as usize]
        }
    }
}

/// `N_side` assembled on the frequency lattice from the kernel pieces `parts`.
pub fn singular_action_parts(
    b: &DistortedBasis,
    g1: &[C],
    g2: &[C],
    g3: &[C],
    t: f64,
    side: Side,
    parts: &[BKind],
) -> Result<Vec<C>> {
    let grid = *b.grid();
    let n = grid.n_k();
    let ks = grid.ks();
    if (0..n).any(|j| ks[grid.mirror(j)] != -ks[j]) {
        return Err(Error::contract("principal-value quadrature needs a k-grid symmetric about 0"));
    }
    let kernel = LatticeKernel::new(side, grid.x_half_width(), grid.dk(), 2 * n, parts);
    let dk = grid.dk();
    let coeff = |eps: i8, g: &[C]| -> Vec<C> {
        let a = b.a.get(side, eps);
        (0..n)
            .map(|j| a[j] * g[j] * C::from_polar(dk, ks[j] * ks[j] * t))
            .collect()
    };
    let mut out = vec![C::default(); n];
    for e1 in [1i8, -1] {
        let a1 = reversed_if(coeff(e1, g1), e1 < 0);
        for e2 in [1i8, -1] {
            let a2: Vec<C> = coeff(e2, g2).iter().map(|z| z.conj()).collect();
            let a12 = convolve(&a1, &reversed_if(a2, e2 > 0));
            for e3 in [1i8, -1] {
                let a3 = reversed_if(coeff(e3, g3), e3 < 0);
                let c = convolve(&a12, &a3);
                for e0 in [1i8, -1] {
                    let a0 = b.a.get(side, e0);
                    let part: Vec<C> = (0..n)
                        .into_par_iter()
                        .map(|jk| {
                            let u0 = if e0 > 0 { jk } else { n - 1 - jk } as i64;
                            let shift = u0 + n as i64 - 1;
                            let s: C = c
                                .iter()
                                .enumerate()
                                .map(|(u, cu)| kernel.at(u as i64 - shift) * cu)
                                .sum();
                            a0[jk].conj() * s
                        })
                        .collect();
                    for (o, p) in out.iter_mut().zip(part) {
                        *o += p;
                    }
                }
            }
        }
    }
    let norm = 1.0 / (2.0 * PI).powi(2);
    Ok(out
        .iter()
        .zip(&ks)
        .map(|(v, k)| v * C::from_polar(norm, -k * k * t))
        .collect())
}

/// `N_side` with all three kernel pieces.
pub fn singular_action(b: &DistortedBasis, g1: &[C], g2: &[C], g3: &[C], t: f64, side: Side) -> Result<Vec<C>> {
    singular_action_parts(
        b,
        g1,
        g2,
        g3,
        t,
        side,
        &[BKind::Delta, BKind::PrincipalValue, BKind::Smooth],
    )
}

/// `K_side(x,ℓ) = a^+(ℓ) e^{iℓx} + a^-(ℓ) e^{-iℓx}` synthesised against `w(ℓ)`.
fn plane_synth(b: &DistortedBasis, side: Side, w: &[C]) -> Vec<C> {
    let grid = b.grid();
    let ks = grid.ks();
    let (ap, am) = (b.a.get(side, 1), b.a.get(side, -1));
    (0..grid.n_x())
        .into_par_iter()
        .map(|i| {
            let x = grid.x(i);
            (0..ks.len())
                .map(|j| {
                    let e = C::from_polar(1.0, ks[j] * x);
                    (ap[j] * e + am[j] * e.conj()) * w[j]
                })
                .sum()
        })
        .collect()
}

/// Oracle for [`singular_action`]: the physical pairing with `φ_side` on the box.
pub fn singular_action_physical(b: &DistortedBasis, g1: &[C], g2: &[C], g3: &[C], t: f64, side: Side) -> Vec<C> {
    let grid = *b.grid();
    let ks = grid.ks();
    let dk = grid.dk();
    let u: Vec<Vec<C>> = [g1, g2, g3]
        .iter()
        .map(|g| plane_synth(b, side, &phase(&ks, t, g, dk)))
        .collect();
    let h = grid.h();
    let weight: Vec<C> = (0..grid.n_x())
        .map(|i| u[0][i] * u[1][i].conj() * u[2][i] * cutoff::phi_side(side, grid.x(i)) * h)
        .collect();
    let (ap, am) = (b.a.get(side, 1), b.a.get(side, -1));
    let norm = 1.0 / (2.0 * PI).powi(2);
    (0..ks.len())
        .into_par_iter()
        .map(|j| {
            let s: C = (0..grid.n_x())
                .map(|i| {
                    let e = C::from_polar(1.0, ks[j] * grid.x(i));
                    (ap[j] * e + am[j] * e.conj()).conj() * weight[i]
                })
                .sum();
            s * C::from_polar(norm, -ks[j] * ks[j] * t)
        })
        .collect()
}

/// Regular part as the complement `N - N_+ - N_-`.
pub fn regular_action(b: &DistortedBasis, g1: &[C], g2: &[C], g3: &[C], t: f64) -> Result<Vec<C>> {
    let d = trilinear_direct(b, g1, g2, g3, t);
    let p = singular_action(b, g1, g2, g3, t, Side::Plus)?;
    let m = singular_action(b, g1, g2, g3, t, Side::Minus)?;
    Ok((0..d.len()).map(|j| d[j] - p[j] - m[j]).collect())
}

/// Regular part assembled from `K_S + K_R` pairings minus the physical
/// singular pairings; independent of the lattice assembly and of `K` itself.
pub fn regular_action_physical(b: &DistortedBasis, g1: &[C], g2: &[C], g3: &[C], t: f64) -> Vec<C> {
    let grid = *b.grid();
    let ks = grid.ks();
    let (nx, nk) = (grid.n_x(), grid.n_k());
    let dk = grid.dk();
    let split = |i: usize, j: usize| b.k_s[(i, j)] + b.k_r[(i, j)];
    let synth = |g: &[C]| -> Vec<C> {
        let w = phase(&ks, t, g, dk);
        let mut out = vec![C::default(); nx];
        for (j, wj) in w.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += split(i, j) * wj;
            }
        }
        out
    };
    let w: Vec<Vec<C>> = [g1, g2, g3].iter().map(|g| synth(g)).collect();
    let h = grid.h();
    let prod: Vec<C> = (0..nx).map(|i| w[0][i] * w[1][i].conj() * w[2][i] * h).collect();
    let norm = 1.0 / (2.0 * PI).powi(2);
    let full: Vec<C> = (0..nk)
        .into_par_iter()
        .map(|j| {
            let s: C = (0..nx).map(|i| split(i, j).conj() * prod[i]).sum();
            s * C::from_polar(norm, -ks[j] * ks[j] * t)
        })
        .collect();
    let p = singular_action_physical(b, g1, g2, g3, t, Side::Plus);
    let m = singular_action_physical(b, g1, g2, g3, t, Side::Minus);
    (0..nk).map(|j| full[j] - p[j] - m[j]).collect()
}

fn sup(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sup_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Relative discrepancies of the decomposition `N = N_+ + N_- + N_R`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosureReport {
    /// `‖N_+^{lattice} + N_-^{lattice} + N_R^{physical} - N‖_∞ / ‖N‖_∞`.
    pub independent: f64,
    /// Same with the complement-defined regular part (exact by construction).
    pub complement: f64,
    /// `‖N_±^{lattice} - N_±^{physical}‖_∞ / ‖N‖_∞`.
    pub singular_plus_vs_physical: f64,
    pub singular_minus_vs_physical: f64,
    pub direct_sup: f64,
}

pub fn closure_report(b: &DistortedBasis, g1: &[C], g2: &[C], g3: &[C], t: f64) -> Result<ClosureReport> {
    let d = trilinear_direct(b, g1, g2, g3, t);
    let lp = singular_action(b, g1, g2, g3, t, Side::Plus)?;
    let lm = singular_action(b, g1, g2, g3, t, Side::Minus)?;
    let pp = singular_action_physical(b, g1, g2, g3, t, Side::Plus);
    let pm = singular_action_physical(b, g1, g2, g3, t, Side::Minus);
    let rp = regular_action_physical(b, g1, g2, g3, t);
    let rc: Vec<C> = (0..d.len()).map(|j| d[j] - lp[j] - lm[j]).collect();
    let scale = sup(&d).max(f64::MIN_POSITIVE);
    let sum = |r: &[C]| -> Vec<C> { (0..d.len()).map(|j| lp[j] + lm[j] + r[j]).collect() };
    Ok(ClosureReport {
        independent: sup_diff(&sum(&rp), &d) / scale,
        complement: sup_diff(&sum(&rc), &d) / scale,
        singular_plus_vs_physical: sup_diff(&lp, &pp) / scale,
        singular_minus_vs_physical: sup_diff(&lm, &pm) / scale,
        direct_sup: sup(&d),
    })
}

/// A symmetric integer lattice `jΔ`, `|j| ≤ m`, for flat trilinear forms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlatLattice {
    pub step: f64,
    /// Half-width of the `ℓ, m, n` lattice.
    pub half_width: f64,
    /// Half-width of the output `k` lattice.
    pub out_half_width: f64,
}

impl FlatLattice {
    fn m(&self) -> usize {
        (self.half_width / self.step).round() as usize
    }

    fn mk(&self) -> usize {
        (self.out_half_width / self.step).round() as usize
    }

    pub fn inputs(&self) -> Vec<f64> {
        let m = self.m() as i64;
        (-m..=m).map(|j| j as f64 * self.step).collect()
    }

    pub fn outputs(&self) -> Vec<f64> {
        let m = self.mk() as i64;
        (-m..=m).map(|j| j as f64 * self.step).collect()
    }
}

/// `T_b(f1,f2,f3)(k) = ∭ e^{it(-k²+ℓ²-m²+n²)} f1(ℓ) conj f2(m) f3(n) b(k+ε1ℓ+ε2m+ε3n)`
/// by lattice quadrature; `f_j` sampled on [`FlatLattice::inputs`].
pub fn flat_trilinear(
    lat: &FlatLattice,
    f: [&[C]; 3],
    eps: [i8; 3],
    b: &(dyn Fn(f64) -> C + Sync),
    t: f64,
) -> Vec<C> {
    let d = lat.step;
    let ls = lat.inputs();
    let m = lat.m() as i64;
    let slot = |j: usize, conj: bool| -> Vec<C> {
        let v: Vec<C> = ls
            .iter()
            .zip(f[j])
            .map(|(l, v)| {
                let z = v * C::from_polar(d, l * l * t);
                if conj {
                    z.conj()
                } else {
                    z
                }
            })
            .collect();
        reversed_if(v, eps[j] < 0)
    };
    let c = convolve(&convolve(&slot(0, false), &slot(1, true)), &slot(2, false));
    lat.outputs()
        .par_iter()
        .map(|&k| {
            let s: C = c
                .iter()
                .enumerate()
                .map(|(u, cu)| b(k + (u as i64 - 3 * m) as f64 * d) * cu)
                .sum();
            s * C::from_polar(1.0, -k * k * t)
        })
        .collect()
}

/// Gaussian test profile `e^{-w(ℓ-c)² + iθℓ}` and its derivative.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussProfile {
    pub center: f64,
    pub width: f64,
    pub tilt: f64,
}

impl GaussProfile {
    pub fn value(&self, l: f64) -> C {
        C::from_polar((-self.width * (l - self.center).powi(2)).exp(), self.tilt * l)
    }

    pub fn derivative(&self, l: f64) -> C {
        self.value(l) * C::new(-2.0 * self.width * (l - self.center), self.tilt)
    }
}

/// Setup for the two identity checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityProblem {
    pub lattice: FlatLattice,
    pub profiles: [GaussProfile; 3],
    /// `b(p) = e^{-b_width p²}`.
    pub b_width: f64,
    pub eps: [i8; 3],
    pub t: f64,
}

impl IdentityProblem {
    pub fn standard(step: f64, t: f64, eps: [i8; 3]) -> Self {
        IdentityProblem {
            lattice: FlatLattice {
                step,
                half_width: 7.0,
                out_half_width: 12.0,
            },
            profiles: [
                GaussProfile { center: 0.3, width: 1.0, tilt: 0.4 },
                GaussProfile { center: -0.2, width: 1.5, tilt: -0.3 },
                GaussProfile { center: 0.1, width: 0.8, tilt: 0.2 },
            ],
            b_width: 1.0,
            eps,
            t,
        }
    }

    fn sample(&self, deriv: Option<usize>) -> [Vec<C>; 3] {
        let ls = self.lattice.inputs();
        std::array::from_fn(|j| {
            let p = self.profiles[j];
            ls.iter()
                .map(|&l| if deriv == Some(j) { p.derivative(l) } else { p.value(l) })
                .collect()
        })
    }
}

/// Relative sup-norm residual of
/// `∂_k T_b = -ε1 T_b(∂f1,·,·) + ε2 T_b(·,∂f2,·) - ε3 T_b(·,·,∂f3) - 2it T_{yb}`
/// with `∂_k` by centered differences on the output lattice.
pub fn commutator_residual(p: &IdentityProblem) -> f64 {
    let bw = p.b_width;
    let b = move |x: f64| C::new((-bw * x * x).exp(), 0.0);
    let yb = move |x: f64| C::new(x * (-bw * x * x).exp(), 0.0);
    let run = |fs: &[Vec<C>; 3], kern: &(dyn Fn(f64) -> C + Sync)| {
        flat_trilinear(&p.lattice, [&fs[0], &fs[1], &fs[2]], p.eps, kern, p.t)
    };
    let base = p.sample(None);
    let tb = run(&base, &b);
    let d1 = run(&p.sample(Some(0)), &b);
    let d2 = run(&p.sample(Some(1)), &b);
    let d3 = run(&p.sample(Some(2)), &b);
    let ty = run(&base, &yb);
    let [e1, e2, e3] = p.eps.map(|e| e as f64);
    let h = p.lattice.step;
    let n = tb.len();
    let (mut num, mut den): (f64, f64) = (0.0, 0.0);
    for j in 1..n - 1 {
        let fd = (tb[j + 1] - tb[j - 1]) / (2.0 * h);
        let rhs = -e1 * d1[j] + e2 * d2[j] - e3 * d3[j] - 2.0 * I * p.t * ty[j];
        num = num.max((fd - rhs).norm());
        den = den.max(fd.norm());
    }
    num / den
}

/// Relative `L²` mismatch of
/// `F^{-1}[e^{itk²} T_b](x) = (2π)^{3/2} F^{-1}[b](x) u1(-ε1x) conj u2(ε2x) u3(-ε3x)`,
/// `u_j = F^{-1}[e^{itk²} f_j]`, on `|x| ≤ x_max`.
pub fn inverse_fd_map(p: &IdentityProblem, x_max: f64, n_x: usize) -> f64 {
    let bw = p.b_width;
    let b = move |x: f64| C::new((-bw * x * x).exp(), 0.0);
    let base = p.sample(None);
    let tb = flat_trilinear(&p.lattice, [&base[0], &base[1], &base[2]], p.eps, &b, p.t);
    let ks = p.lattice.outputs();
    let ls = p.lattice.inputs();
    let d = p.lattice.step;
    let s2pi = (2.0 * PI).sqrt();
    let inv = |grid: &[f64], vals: &[C], x: f64| -> C {
        grid.iter()
            .zip(vals)
            .map(|(k, v)| v * C::from_polar(d, k * x + k * k * p.t))
            .sum::<C>()
            / s2pi
    };
    let xs: Vec<f64> = (0..n_x)
        .map(|i| -x_max + 2.0 * x_max * i as f64 / (n_x - 1) as f64)
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for &x in &xs {
        let lhs = inv(&ks, &tb, x);
        let bcheck = (-x * x / (4.0 * bw)).exp() / (2.0 * bw).sqrt();
        let [e1, e2, e3] = p.eps.map(|e| e as f64);
        let u1 = inv(&ls, &base[0], -e1 * x);
        let u2 = inv(&ls, &base[1], e2 * x);
        let u3 = inv(&ls, &base[2], -e3 * x);
        let rhs = (2.0 * PI).powf(1.5) * bcheck * u1 * u2.conj() * u3;
        num += (lhs - rhs).norm_sqr();
        den += rhs.norm_sqr();
    }
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::build_basis;
    use crate::grid::Grid;
    use crate::jost::solve_jost;
    use crate::potentials::Potential;
    use crate::scattering::coefficients;

    fn basis(v: &Potential, g: &Grid) -> DistortedBasis {
        let j = solve_jost(v, g).unwrap();
        let s = coefficients(&j, v).unwrap();
        build_basis(&j, &s, g).unwrap()
    }

    fn bump(g: &Grid, width: f64, shift: f64, tilt: f64) -> Vec<C> {
        g.ks()
            .iter()
            .map(|&k| C::from_polar((-((k - shift) / width).powi(2)).exp(), tilt * k))
            .collect()
    }

    #[test]
    fn direct_matches_brute_force_on_tiny_grid() {
        let g = Grid::new(4.0, 32).unwrap();
        for v in [Potential::zero(&g), Potential::barrier(1.0, 1.0, &g).unwrap()] {
            let b = basis(&v, &g);
            let (g1, g2, g3) = (bump(&g, 3.0, 0.5, 0.1), bump(&g, 2.5, -0.3, 0.0), bump(&g, 3.5, 0.0, -0.2));
            let d = trilinear_direct(&b, &g1, &g2, &g3, 0.3);
            let o = trilinear_brute(&b, &g1, &g2, &g3, 0.3).unwrap();
            assert!(sup_diff(&d, &o) < 1e-12 * sup(&o).max(1.0), "{}", sup_diff(&d, &o));
        }
        let zero = vec![C::default(); 32];
        let b = basis(&Potential::zero(&g), &g);
        let one = bump(&g, 3.0, 0.0, 0.0);
        assert!(sup(&trilinear_direct(&b, &one, &zero, &one, 1.0)) == 0.0);
    }

    #[test]
    fn lattice_kernel_matches_box_sum() {
        let g = Grid::new(10.0, 256).unwrap();
        let all = [BKind::Delta, BKind::PrincipalValue, BKind::Smooth];
        for side in [Side::Plus, Side::Minus] {
            let kern = LatticeKernel::new(side, g.x_half_width(), g.dk(), 300, &all);
            for j in [-40i64, -7, -1, 0, 1, 2, 3, 50] {
                let p = j as f64 * g.dk();
                let direct: C = g
                    .xs()
                    .iter()
                    .map(|&x| C::from_polar(g.h() * cutoff::phi_side(side, x), x * p))
                    .sum();
                // The box step jumps at ±X; its transform alternates in j and
                // only sees data at the box edge.
                let sgn = if side == Side::Plus { 1.0 } else { -1.0 };
                let edge = if j == 0 {
                    C::default()
                } else {
                    let tr = CutoffTransforms::new();
                    let alt = if j % 2 == 0 { -1.0 } else { 1.0 };
                    sgn * alt * I / p * (1.0 - (2.0 * PI).sqrt() * tr.zeta_hat(p))
                };
                let err = (kern.at(j) + edge - direct).norm();
                assert!(err < g.h(), "{side:?} {j} {err}");
            }
        }
    }

    #[test]
    fn free_closure_and_physical_oracle() {
        let g = Grid::new(20.0, 512).unwrap();
        let b = basis(&Potential::zero(&g), &g);
        let (g1, g2, g3) = (bump(&g, 1.0, 0.3, 0.5), bump(&g, 0.8, -0.2, 0.0), bump(&g, 1.2, 0.0, -0.4));
        let r = closure_report(&b, &g1, &g2, &g3, 0.5).unwrap();
        assert!(r.complement < 1e-12);
        // The box pairing aliases the cutoff transform at p ± 2π/h.
        assert!(r.independent < 2e-4, "{r:?}");
    }

    #[test]
    fn barrier_closure() {
        let g = Grid::new(20.0, 512).unwrap();
        let b = basis(&Potential::barrier(1.0, 1.0, &g).unwrap(), &g);
        let (g1, g2, g3) = (bump(&g, 1.0, 0.3, 0.5), bump(&g, 0.8, -0.2, 0.0), bump(&g, 1.2, 0.0, -0.4));
        let r = closure_report(&b, &g1, &g2, &g3, 0.5).unwrap();
        assert!(r.independent < 1e-3 && r.singular_plus_vs_physical < 1e-3, "{r:?}");
    }

    #[test]
    fn commutator_identity_converges_at_second_order() {
        let coarse = commutator_residual(&IdentityProblem::standard(0.02, 1.0, [1, -1, 1]));
        let fine = commutator_residual(&IdentityProblem::standard(0.01, 1.0, [1, -1, 1]));
        assert!(fine < 1e-3, "{coarse} {fine}");
        assert!(coarse / fine > 3.5, "{coarse} {fine}");
        let t0 = commutator_residual(&IdentityProblem::standard(0.01, 0.0, [-1, 1, 1]));
        assert!(t0 < 1e-3);
    }

    #[test]
    fn inverse_fd_product_formula() {
        for eps in [[1, 1, 1], [-1, 1, 1], [1, -1, -1]] {
            let m = inverse_fd_map(&IdentityProblem::standard(0.05, 0.5, eps), 8.0, 161);
            assert!(m < 1e-4, "{eps:?} {m}");
        }
    }
}
