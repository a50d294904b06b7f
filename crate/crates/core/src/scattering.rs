//! Transmission and reflection coefficients, genericity and low-frequency
//! behaviour, plus two independent closed forms used as oracles.
//!
//! Conventions: `ψ_+ ~ e^{ikx}` at `+∞` and `ψ_+ ~ (1/T) e^{ikx} + (R_-/T) e^{-ikx}`
//! at `-∞`; symmetrically for `ψ_-`. The scattering matrix is
//! `S(k) = [[T, R_+], [R_-, T]]`.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fit;
use crate::jost::{JostColumn, JostField};
use crate::potentials::Potential;
use crate::runstore::fmt_f64;
use crate::C;

const I: C = C::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct ScatteringData {
    pub ks: Vec<f64>,
    pub t: Vec<C>,
    pub r_plus: Vec<C>,
    pub r_minus: Vec<C>,
    pub generic: bool,
    /// `lim T(k)/k` as `k → 0+`, when generic.
    pub alpha_slope: Option<C>,
    /// `k → 0` limits of `T`, `R_+`, `R_-` (the k-grid has no zero node).
    pub zero_limit: [C; 3],
}

/// Maximal violations of the algebraic scattering identities.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct IdentityDefects {
    pub unitarity_plus: f64,
    pub unitarity_minus: f64,
    pub t_conj: f64,
    pub r_plus_conj: f64,
    pub r_minus_conj: f64,
    pub cross: f64,
}

impl IdentityDefects {
    pub fn max(&self) -> f64 {
        [
            self.unitarity_plus,
            self.unitarity_minus,
            self.t_conj,
            self.r_plus_conj,
            self.r_minus_conj,
            self.cross,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `(T, R_+, R_-)` from the boundary values of one Jost column.
///
/// On each constant-V segment `V ∫ e^{βy} ψ dy` is a boundary term, so the
/// defining integrals `1 - (1/2ik)∫ V m_+`, `(1/2ik)∫ e^{-2ikx} V m_-` and
/// `(1/2ik)∫ e^{2ikx} V m_+` reduce exactly to endpoint data.
pub fn coefficients_from_column(col: &JostColumn, x_min: f64, x_max: f64) -> (C, C, C) {
    let k = col.k;
    let n = col.m_plus.len();
    let tik = 2.0 * I * k;
    let inv_t = col.m_plus[0] + col.dx_m_plus[0] / tik;
    let rm_over_t = -C::from_polar(1.0, 2.0 * k * x_min) * col.dx_m_plus[0] / tik;
    let rp_over_t = C::from_polar(1.0, -2.0 * k * x_max) * col.dx_m_minus[n - 1] / tik;
    let t = 1.0 / inv_t;
    (t, rp_over_t * t, rm_over_t * t)
}

fn column_of(j: &JostField, jk: usize) -> JostColumn {
    let g = j.grid();
    JostColumn {
        k: g.k(jk),
        m_plus: j.m_plus.col_as_slice(jk).to_vec(),
        m_minus: j.m_minus.col_as_slice(jk).to_vec(),
        dk_m_plus: Vec::new(),
        dk_m_minus: Vec::new(),
        dx_m_plus: j.dx_m_plus.col_as_slice(jk).to_vec(),
        dx_m_minus: j.dx_m_minus.col_as_slice(jk).to_vec(),
        residual: 0.0,
    }
}

pub fn coefficients(j: &JostField, v: &Potential) -> Result<ScatteringData> {
    let g = *j.grid();
    let (x_min, x_max) = (g.x(0), g.x(g.n_x() - 1));
    let n = g.n_k();
    let (mut t, mut rp, mut rm) = (vec![C::default(); n], vec![C::default(); n], vec![C::default(); n]);
    for jk in 0..n {
        let col = column_of(j, jk);
        let k = col.k;
        let inv_t = col.m_plus[0] + col.dx_m_plus[0] / (2.0 * I * k);
        if inv_t.norm() < 1e-12 {
            return Err(Error::numerical(format!("|1/T| = {:.3e} at k = {k}", inv_t.norm())));
        }
        let (a, b, c) = coefficients_from_column(&col, x_min, x_max);
        t[jk] = a;
        rp[jk] = b;
        rm[jk] = c;
    }
    let generic = is_generic(j, v).generic;
    let mut s = ScatteringData {
        ks: g.ks(),
        t,
        r_plus: rp,
        r_minus: rm,
        generic,
        alpha_slope: None,
        zero_limit: [C::default(); 3],
    };
    s.fill_zero_limit();
    if generic {
        s.alpha_slope = Some(low_k_expansion(&s)?.alpha);
    }
    Ok(s)
}

/// The same coefficients by trapezoid quadrature of the defining integrals
/// over the grid samples (second order; kept as a cross-check).
pub fn coefficients_trapezoid(j: &JostField, v: &Potential) -> (Vec<C>, Vec<C>, Vec<C>) {
    let g = *j.grid();
    let h = g.h();
    let n = g.n_x();
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for jk in 0..g.n_k() {
        let k = g.k(jk);
        let (mut a, mut b, mut c) = (C::default(), C::default(), C::default());
        for i in 0..n {
            let vx = v.vs()[i] * w(i);
            if vx == 0.0 {
                continue;
            }
            let x = g.x(i);
            a += vx * j.m_plus[(i, jk)];
            b += vx * C::from_polar(1.0, -2.0 * k * x) * j.m_minus[(i, jk)];
            c += vx * C::from_polar(1.0, 2.0 * k * x) * j.m_plus[(i, jk)];
        }
        let tik = 2.0 * I * k;
        let t = 1.0 / (1.0 - a / tik);
        out.0.push(t);
        out.1.push(b / tik * t);
        out.2.push(c / tik * t);
    }
    out
}

impl ScatteringData {
    fn fill_zero_limit(&mut self) {
        if self.generic {
            self.zero_limit = [C::default(), C::new(-1.0, 0.0), C::new(-1.0, 0.0)];
            return;
        }
        // Linear extrapolation from the two smallest positive k.
        let mut pos: Vec<usize> = (0..self.ks.len()).filter(|&j| self.ks[j] > 0.0).collect();
        pos.sort_by(|&a, &b| self.ks[a].total_cmp(&self.ks[b]));
        if pos.len() < 2 {
            return;
        }
        let (a, b) = (pos[0], pos[1]);
        let lam = self.ks[a] / (self.ks[b] - self.ks[a]);
        let ex = |v: &[C]| v[a] + (v[a] - v[b]) * lam;
        self.zero_limit = [ex(&self.t), ex(&self.r_plus), ex(&self.r_minus)];
    }

    pub fn s_matrix(&self, j: usize) -> [[C; 2]; 2] {
        [[self.t[j], self.r_plus[j]], [self.r_minus[j], self.t[j]]]
    }

    /// Index of `-k_j`, if present.
    pub fn mirror(&self, j: usize) -> Option<usize> {
        let n = self.ks.len();
        let m = n - 1 - j;
        (self.ks[m] == -self.ks[j]).then_some(m)
    }

    pub fn identity_defects(&self) -> IdentityDefects {
        let mut d = IdentityDefects::default();
        for j in 0..self.ks.len() {
            let (t, rp, rm) = (self.t[j], self.r_plus[j], self.r_minus[j]);
            d.unitarity_plus = d.unitarity_plus.max((t.norm_sqr() + rp.norm_sqr() - 1.0).abs());
            d.unitarity_minus = d.unitarity_minus.max((t.norm_sqr() + rm.norm_sqr() - 1.0).abs());
            d.cross = d.cross.max((t * rm.conj() + t.conj() * rp).norm());
            if let Some(m) = self.mirror(j) {
                d.t_conj = d.t_conj.max((self.t[m] - t.conj()).norm());
                d.r_plus_conj = d.r_plus_conj.max((self.r_plus[m] - rp.conj()).norm());
                d.r_minus_conj = d.r_minus_conj.max((self.r_minus[m] - rm.conj()).norm());
            }
        }
        d
    }

    /// CSV `k,re_T,im_T,re_Rp,im_Rp,re_Rm,im_Rm,unitarity_defect`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("k,re_T,im_T,re_Rp,im_Rp,re_Rm,im_Rm,unitarity_defect\n");
        for j in 0..self.ks.len() {
            let (t, rp, rm) = (self.t[j], self.r_plus[j], self.r_minus[j]);
            let defect = (t.norm_sqr() + rp.norm_sqr() - 1.0)
                .abs()
                .max((t.norm_sqr() + rm.norm_sqr() - 1.0).abs());
            let row = [self.ks[j], t.re, t.im, rp.re, rp.im, rm.re, rm.im, defect];
            out.push_str(&row.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Coefficients of the point interaction `q δ_0`:
/// `T = 2ik/(2ik - q)`, `R_± = q/(2ik - q)`.
pub fn delta_closed_form(q: f64, ks: &[f64]) -> Result<ScatteringData> {
    if !(q > 0.0) {
        return Err(Error::contract(format!("delta strength must be positive, got {q}")));
    }
    let t: Vec<C> = ks.iter().map(|&k| 2.0 * I * k / (2.0 * I * k - q)).collect();
    let r: Vec<C> = ks.iter().map(|&k| q / (2.0 * I * k - q)).collect();
    Ok(ScatteringData {
        ks: ks.to_vec(),
        t,
        r_plus: r.clone(),
        r_minus: r,
        generic: true,
        alpha_slope: Some(C::new(0.0, -2.0 / q)),
        zero_limit: [C::default(), C::new(-1.0, 0.0), C::new(-1.0, 0.0)],
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GenericityCheck {
    pub generic: bool,
    /// `∫ V m_+(x, 0) dx`.
    pub value: f64,
    pub threshold: f64,
    pub near_threshold: bool,
}

/// Classify by `|∫ V m_+(x,0) dx| > 1e-8 ‖V‖_{L¹}`.
pub fn is_generic(j: &JostField, v: &Potential) -> GenericityCheck {
    // ∫ V ψ_+(·,0) = ψ_+'(x_max) - ψ_+'(x_min) = -ψ_+'(x_min), exact on the cell model.
    let value = -j.zero.dx_m_plus[0];
    let threshold = 1e-8 * v.weighted_l1_norm(0.0);
    let generic = value.abs() > threshold;
    let near_threshold = generic && (value.abs() < 100.0 * threshold || value.abs() < 1e-6);
    if near_threshold {
        log::warn!("genericity value {value:.3e} is close to the threshold {threshold:.3e}");
    }
    GenericityCheck {
        generic,
        value,
        threshold,
        near_threshold,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LowK {
    /// `lim T(k)/k`.
    pub alpha: C,
    /// `lim (1 + R_±(k))/k`.
    pub alpha_plus: C,
    pub alpha_minus: C,
    /// Largest `|T(k) - α k|/|k|` over the fit window.
    pub window_defect: f64,
}

/// Intercepts of cubic least-squares fits of `T/k` and `(1 + R_±)/k` over the
/// eight smallest positive frequencies.
pub fn low_k_expansion(s: &ScatteringData) -> Result<LowK> {
    if !s.generic {
        return Err(Error::contract("low-frequency expansion needs a generic potential"));
    }
    let mut pos: Vec<usize> = (0..s.ks.len()).filter(|&j| s.ks[j] > 0.0).collect();
    pos.sort_by(|&a, &b| s.ks[a].total_cmp(&s.ks[b]));
    pos.truncate(8);
    if pos.len() < 5 {
        return Err(Error::contract("need at least five positive frequencies"));
    }
    let ks: Vec<f64> = pos.iter().map(|&j| s.ks[j]).collect();
    let fit0 = |f: &dyn Fn(usize) -> C| -> C {
        let ys: Vec<C> = pos.iter().map(|&j| f(j) / s.ks[j]).collect();
        fit::polyfit_complex(&ks, &ys, 3)[0]
    };
    let alpha = fit0(&|j| s.t[j]);
    let alpha_plus = fit0(&|j| 1.0 + s.r_plus[j]);
    let alpha_minus = fit0(&|j| 1.0 + s.r_minus[j]);
    let window_defect = pos
        .iter()
        .map(|&j| (s.t[j] - alpha * s.ks[j]).norm() / s.ks[j])
        .fold(0.0, f64::max);
    Ok(LowK {
        alpha,
        alpha_plus,
        alpha_minus,
        window_defect,
    })
}

/// Closed-form scattering for the square barrier `K·1_{[-L,L]}` by plane-wave
/// transfer matrices. Shares no code with the Jost solver.
pub mod oracle {
    use crate::C;

    type M2 = [[C; 2]; 2];

    fn mul(a: M2, b: M2) -> M2 {
        let mut c = [[C::default(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    }

    fn inv(a: M2) -> M2 {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
    }

    /// Maps amplitudes `(A, B)` of `A e^{iκx} + B e^{-iκx}` to `(ψ, ψ')` at `x = c`.
    fn plane(kappa: C, c: f64) -> M2 {
        let i = C::new(0.0, 1.0);
        let ep = (i * kappa * c).exp();
        let em = (-i * kappa * c).exp();
        [[ep, em], [i * kappa * ep, -i * kappa * em]]
    }

    /// `(T, R_+, R_-)` at frequency `k ≠ 0`, `k² ≠ K`.
    pub fn square_barrier(height: f64, half_width: f64, k: f64) -> (C, C, C) {
        let kk = C::new(k, 0.0);
        let kappa = C::new(k * k - height, 0.0).sqrt();
        let l = half_width;
        // left amplitudes -> right amplitudes
        let m = mul(
            inv(plane(kk, l)),
            mul(plane(kappa, l), mul(inv(plane(kappa, -l)), plane(kk, -l))),
        );
        let n = inv(m);
        let t = 1.0 / n[0][0];
        let r_minus = n[1][0] * t;
        let r_plus = m[0][1] / m[1][1];
        (t, r_plus, r_minus)
    }

    /// `T` from the textbook formula `e^{-2ikL}/(cos 2κL - i (k²+κ²)/(2kκ) sin 2κL)`.
    pub fn square_barrier_t(height: f64, half_width: f64, k: f64) -> C {
        let i = C::new(0.0, 1.0);
        let kappa = C::new(k * k - height, 0.0).sqrt();
        let a = 2.0 * half_width;
        let den = (kappa * a).cos() - i * (k * k + kappa * kappa) / (2.0 * k * kappa) * (kappa * a).sin();
        C::from_polar(1.0, -k * a) / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::jost::{jost_column, solve_jost};

    fn barrier_data(g: &Grid) -> (Potential, JostField, ScatteringData) {
        let v = Potential::barrier(1.0, 1.0, g).unwrap();
        let j = solve_jost(&v, g).unwrap();
        let s = coefficients(&j, &v).unwrap();
        (v, j, s)
    }

    #[test]
    fn zero_potential_is_transparent() {
        let g = Grid::new(10.0, 64).unwrap();
        let v = Potential::zero(&g);
        let j = solve_jost(&v, &g).unwrap();
        let s = coefficients(&j, &v).unwrap();
        assert!(s.t.iter().all(|&t| t == C::new(1.0, 0.0)));
        assert!(s.r_plus.iter().chain(&s.r_minus).all(|&r| r == C::default()));
        assert!(!s.generic);
    }

    #[test]
    fn barrier_identities_and_oracle() {
        let g = Grid::new(20.0, 512).unwrap();
        let (_, _, s) = barrier_data(&g);
        assert!(s.identity_defects().max() < 1e-10, "{:?}", s.identity_defects());
        for j in (0..g.n_k()).step_by(5) {
            let k = g.k(j);
            let (t, rp, rm) = oracle::square_barrier(1.0, 1.0, k);
            assert!((s.t[j] - t).norm() / t.norm() < 1e-10);
            assert!((s.r_plus[j] - rp).norm() < 1e-10);
            assert!((s.r_minus[j] - rm).norm() < 1e-10);
            let tt = oracle::square_barrier_t(1.0, 1.0, k);
            assert!((t - tt).norm() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_cross_check_is_second_order() {
        let errs: Vec<f64> = [256usize, 512]
            .iter()
            .map(|&n| {
                let g = Grid::new(8.0, n).unwrap();
                let v = Potential::gaussian(1.0, 1.0, &g).unwrap();
                let j = solve_jost(&v, &g).unwrap();
                let s = coefficients(&j, &v).unwrap();
                let (t, _, _) = coefficients_trapezoid(&j, &v);
                (0..g.n_k())
                    .filter(|&jk| g.k(jk).abs() < 4.0)
                    .map(|jk| (t[jk] - s.t[jk]).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 1e-2 && errs[1] < errs[0] / 3.0, "{errs:?}");
    }

    #[test]
    fn two_routes_to_one_over_t_agree() {
        let g = Grid::new(10.0, 256).unwrap();
        let v = Potential::gaussian(2.0, 0.8, &g).unwrap();
        let cells = v.cells();
        let xmax = g.x(g.n_x() - 1);
        for k in [0.05, 0.7, 3.0] {
            let c = jost_column(&cells, k);
            let n = c.m_minus.len();
            let a = c.m_plus[0] + c.dx_m_plus[0] / (2.0 * I * k);
            let b = c.m_minus[n - 1] - c.dx_m_minus[n - 1] / (2.0 * I * k);
            assert!((a - b).norm() < 1e-11 * a.norm(), "{xmax}");
        }
    }

    #[test]
    fn delta_closed_form_values() {
        let s = delta_closed_form(2.0, &[1.0, 1e6]).unwrap();
        assert!((s.t[0] - C::new(0.5, -0.5)).norm() < 1e-15);
        assert!((s.t[0].norm_sqr() - 0.5).abs() < 1e-15);
        assert!((s.t[1] - 1.0).norm() < 1e-5);
        assert!(s.identity_defects().unitarity_plus < 1e-15);
        assert!(delta_closed_form(0.0, &[1.0]).is_err());
    }

    #[test]
    fn delta_oracle_matches_jump_condition() {
        // ψ = e^{ikx}/T... solved directly: continuity + ψ'(0+) - ψ'(0-) = q ψ(0).
        let (q, k) = (2.0, 1.0);
        let t = delta_closed_form(q, &[k]).unwrap().t[0];
        let r = delta_closed_form(q, &[k]).unwrap().r_minus[0];
        // left: (e^{ikx} + r e^{-ikx})/t... use ψ_+ normalised: right e^{ikx}, left (e^{ikx} + r e^{-ikx})/t
        let left0 = (1.0 + r) / t;
        let left_d = I * k * (1.0 - r) / t;
        assert!((left0 - 1.0).norm() < 1e-14);
        assert!((I * k - left_d - q * 1.0).norm() < 1e-14);
    }

    #[test]
    fn genericity() {
        let g = Grid::new(10.0, 256).unwrap();
        let (v, j, s) = barrier_data(&g);
        let gc = is_generic(&j, &v);
        assert!(gc.generic && gc.value > 0.0 && s.generic);
        let z = Potential::zero(&g);
        let gz = is_generic(&solve_jost(&z, &g).unwrap(), &z);
        assert!(!gz.generic && gz.value == 0.0);
        let tiny = Potential::barrier(1e-6, 1e-3, &g).unwrap();
        let gt = is_generic(&solve_jost(&tiny, &g).unwrap(), &tiny);
        assert!(gt.near_threshold);
        assert!((gt.value - 2e-9).abs() < 1e-15);
    }

    #[test]
    fn generic_low_k_limits() {
        let g = Grid::new(40.0, 1024).unwrap();
        let (_, _, s) = barrier_data(&g);
        let lk = low_k_expansion(&s).unwrap();
        assert!(lk.alpha.norm() > 0.1);
        let j0 = g.n_k() / 2;
        assert!(s.t[j0].norm() < 0.1);
        assert!((s.r_plus[j0] + 1.0).norm() < 0.1);
        // α matches a direct evaluation at a much smaller frequency.
        let v = Potential::barrier(1.0, 1.0, &g).unwrap();
        let k = 1e-5;
        let (t, _, _) = coefficients_from_column(&jost_column(&v.cells(), k), g.x(0), g.x(g.n_x() - 1));
        assert!((t / k - lk.alpha).norm() < 1e-3 * lk.alpha.norm(), "{} {}", t / k, lk.alpha);
    }

    #[test]
    fn delta_low_k_slope_matches_series() {
        let ks: Vec<f64> = (0..16).map(|j| (j as f64 - 7.5) * 1e-3).collect();
        let s = delta_closed_form(2.0, &ks).unwrap();
        let lk = low_k_expansion(&s).unwrap();
        assert!((lk.alpha - C::new(0.0, -1.0)).norm() < 1e-9);
    }

    #[test]
    fn non_generic_expansion_is_a_contract_error() {
        let g = Grid::new(10.0, 64).unwrap();
        let z = Potential::zero(&g);
        let s = coefficients(&solve_jost(&z, &g).unwrap(), &z).unwrap();
        assert!(matches!(low_k_expansion(&s), Err(Error::Contract(_))));
    }
}
