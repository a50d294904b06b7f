//! Modified scattering diagnostics.
//!
//! With `i u_t - u_xx + V u + σ|u|²u = 0` the profile obeys, for `|k| ≳ t^{-3α}`,
//!
//! ```text
//! i ∂_t f̃(t,k) = -σ (1/2t) |f̃(t,k)|² f̃(t,k) + O(t^{-1-ρ}),
//! ```
//!
//! so `w = exp(-iσ/2 ∫_0^t |f̃|² ds/(1+s)) f̃` converges to some `W_{+∞}`, and
//!
//! ```text
//! u(t,x) ≈ e^{-ix²/4t} / √(-2it) · exp(iσ/2 |W|² log t) W(-x/2t).
//! ```

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::dft::DistortedBasis;
use crate::error::{Error, Result};
use crate::evolve::{Profile, Sign, Trajectory};
use crate::fit::loglog_slope;
use crate::quad::gauss_legendre;
use crate::C;

/// Low-frequency exclusion exponent: residuals use `|k| ≥ t^{-3α}`.
pub const ALPHA: f64 = 0.05;

/// `per_decade` log-spaced times on `[t_min, t_max]`, both ends included.
pub fn log_times(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t_max / t_min).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|i| t_min * (t_max / t_min).powf(i as f64 / n as f64))
        .collect()
}

/// `times` plus `t ± delta` around each, sorted and deduplicated.
pub fn with_neighbours(times: &[f64], delta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = times
        .iter()
        .flat_map(|&t| [t - delta, t, t + delta])
        .filter(|&t| t >= 0.0)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyGap {
    pub t1: f64,
    pub t2: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModScatReport {
    pub ks_probe: Vec<f64>,
    pub ts: Vec<f64>,
    /// Row `n` is `w(t_n, ·)` on `ks_probe`.
    pub w_snapshots: Vec<Vec<C>>,
    /// `(t, ‖r(t,·)‖_∞)` on `|k| ≥ t^{-3α}`.
    pub ode_residual_norms: Vec<(f64, f64)>,
    /// Number of probe frequencies excluded by the low-k cut at each residual time.
    pub excluded_low_k: Vec<usize>,
    pub cauchy_gaps: Vec<CauchyGap>,
    pub w_inf_estimate: Vec<C>,
    /// Slope of `log ‖r‖_∞` against `log t`.
    pub residual_slope: Option<f64>,
    /// `-1 - residual_slope`.
    pub fitted_rho: Option<f64>,
    /// `max |(|w| - |f̃|)|`.
    pub modulus_defect: f64,
}

/// `w(t_n,k) = exp(-iσ/2 ∫_0^{t_n} |f̃|² ds/(1+s)) f̃(t_n,k)`, trapezoid in `s`
/// over the snapshots (the first snapshot is taken as the lower limit).
pub fn modified_profile(p: &Profile, sign: Sign) -> Vec<Vec<C>> {
    let sigma = sign.sigma();
    let nk = p.ks.len();
    let mut phase = vec![0.0; nk];
    let mut out = Vec::with_capacity(p.ts.len());
    for n in 0..p.ts.len() {
        if n > 0 {
            let (s0, s1) = (p.ts[n - 1], p.ts[n]);
            for (j, ph) in phase.iter_mut().enumerate() {
                let a = p.f_tilde[n - 1][j].norm_sqr() / (1.0 + s0);
                let b = p.f_tilde[n][j].norm_sqr() / (1.0 + s1);
                *ph += 0.5 * (s1 - s0) * (a + b);
            }
        }
        out.push(
            p.f_tilde[n]
                .iter()
                .zip(&phase)
                .map(|(f, ph)| f * C::from_polar(1.0, -0.5 * sigma * ph))
                .collect(),
        );
    }
    out
}

fn nearest(ts: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, s) in ts.iter().enumerate() {
        if (s - t).abs() < (ts[best] - t).abs() {
            best = i;
        }
    }
    best
}

/// `|i ∂_t f̃ + σ (1/2t)|f̃|² f̃|` at snapshot time `t` (three-point difference
/// with the neighbouring snapshots), and the number of frequencies with
/// `|k| < t^{-3α}` (set to zero in the output).
pub fn ode_residual(p: &Profile, t: f64, sign: Sign, alpha: f64) -> Result<(Vec<f64>, usize)> {
    let n = nearest(&p.ts, t);
    if (p.ts[n] - t).abs() > 1e-6 || n == 0 || n + 1 >= p.ts.len() {
        return Err(Error::contract(format!(
            "ode_residual needs a snapshot at t = {t} with neighbours on both sides"
        )));
    }
    let (t0, t1, t2) = (p.ts[n - 1], p.ts[n], p.ts[n + 1]);
    let (a, b) = (t1 - t0, t2 - t1);
    // Nonuniform three-point first derivative.
    let (w0, w1, w2) = (-b / (a * (a + b)), (b - a) / (a * b), a / (b * (a + b)));
    let cut = t1.powf(-3.0 * alpha);
    let sigma = sign.sigma();
    let mut excluded = 0;
    let r = (0..p.ks.len())
        .map(|j| {
            if p.ks[j].abs() < cut {
                excluded += 1;
                return 0.0;
            }
            let d = p.f_tilde[n - 1][j] * w0 + p.f_tilde[n][j] * w1 + p.f_tilde[n + 1][j] * w2;
            let f = p.f_tilde[n][j];
            (C::new(0.0, 1.0) * d + f * (sigma * f.norm_sqr() / (2.0 * t1))).norm()
        })
        .collect();
    Ok((r, excluded))
}

/// Full report: `w` on all snapshots, residual norms at `residual_times`,
/// gaps between consecutive `dyadic_times`.
pub fn mod_scat_report(
    p: &Profile,
    sign: Sign,
    residual_times: &[f64],
    dyadic_times: &[f64],
    fit_window: (f64, f64),
) -> Result<ModScatReport> {
    if p.ts.is_empty() {
        return Err(Error::contract("empty profile"));
    }
    let w = modified_profile(p, sign);
    let mut modulus_defect: f64 = 0.0;
    for (wn, fnn) in w.iter().zip(&p.f_tilde) {
        for (a, b) in wn.iter().zip(fnn) {
            modulus_defect = modulus_defect.max((a.norm() - b.norm()).abs());
        }
    }
    let mut ode = Vec::new();
    let mut excluded_low_k = Vec::new();
    for &t in residual_times {
        let (r, ex) = ode_residual(p, t, sign, ALPHA)?;
        ode.push((t, r.iter().cloned().fold(0.0, f64::max)));
        excluded_low_k.push(ex);
    }
    let cauchy_gaps = dyadic_times
        .windows(2)
        .map(|pair| {
            let (i, j) = (nearest(&p.ts, pair[0]), nearest(&p.ts, pair[1]));
            let gap = w[i]
                .iter()
                .zip(&w[j])
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            CauchyGap {
                t1: p.ts[i],
                t2: p.ts[j],
                gap,
            }
        })
        .collect();
    let (tx, ty): (Vec<f64>, Vec<f64>) = ode
        .iter()
        .filter(|(t, r)| *t >= fit_window.0 && *t <= fit_window.1 && *r > 0.0)
        .cloned()
        .unzip();
    let residual_slope = if tx.len() >= 3 {
        Some(loglog_slope(&tx, &ty)?.0)
    } else {
        None
    };
    Ok(ModScatReport {
        ks_probe: p.ks.clone(),
        ts: p.ts.clone(),
        w_inf_estimate: w.last().cloned().unwrap_or_default(),
        w_snapshots: w,
        ode_residual_norms: ode,
        excluded_low_k,
        cauchy_gaps,
        residual_slope,
        fitted_rho: residual_slope.map(|s| -1.0 - s),
        modulus_defect,
    })
}

/// Four-point Lagrange interpolation on a uniform grid.
fn cubic_interp(xs: &[f64], ys: &[C], x: f64) -> Option<C> {
    let n = xs.len();
    if n < 4 {
        return None;
    }
    let h = xs[1] - xs[0];
    let s = (x - xs[0]) / h;
    if s < 1.0 || s > (n - 2) as f64 {
        return None;
    }
    let i = (s.floor() as usize).clamp(1, n - 3);
    let u = s - i as f64;
    let w = [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ];
    Some((0..4).map(|m| ys[i - 1 + m] * w[m]).sum())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhysicalCompare {
    pub t: f64,
    /// `√t ‖u - e^{-ix²/4t} f̃(t,-x/2t)/√(-2it)‖_∞`.
    pub lin_err: f64,
    /// Same against the `W_{+∞}` form with the logarithmic phase.
    pub mod_err: Option<f64>,
    /// `√t ‖u‖_∞` on the compared window, for scale.
    pub scale: f64,
    pub excluded: usize,
}

/// Compare `u(t)` from a trajectory snapshot with the asymptotic formulas,
/// over `|x| ≤ min(t k_max, X)` with `-x/2t` inside the k-grid.
pub fn physical_compare(traj: &Trajectory, ks: &[f64], xs: &[f64], t: f64, w_inf: Option<&[C]>) -> Result<PhysicalCompare> {
    let i = nearest(&traj.states.iter().map(|s| s.t).collect::<Vec<_>>(), t);
    let st = traj
        .states
        .get(i)
        .ok_or_else(|| Error::contract("trajectory has no snapshots"))?;
    if (st.t - t).abs() > 1e-6 || t < 10.0 {
        return Err(Error::contract(format!("physical_compare needs a snapshot at t = {t} >= 10")));
    }
    let sigma = st.sign.sigma();
    let k_max = ks.last().copied().unwrap_or(0.0);
    let pre = C::new(0.0, -2.0 * t).sqrt().inv();
    let (mut lin, mut modf, mut scale): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut excluded = 0;
    for (xi, &x) in xs.iter().enumerate() {
        if x.abs() > t * k_max {
            continue;
        }
        let k = -x / (2.0 * t);
        let ph = C::from_polar(1.0, -x * x / (4.0 * t));
        let Some(f) = cubic_interp(ks, &st.f_tilde, k) else {
            excluded += 1;
            continue;
        };
        let u = st.u[xi];
        scale = scale.max(u.norm());
        lin = lin.max((u - ph * pre * f).norm());
        if let Some(w) = w_inf {
            if let Some(wv) = cubic_interp(ks, w, k) {
                let corr = C::from_polar(1.0, 0.5 * sigma * wv.norm_sqr() * t.ln());
                modf = modf.max((u - ph * pre * corr * wv).norm());
            }
        }
    }
    let st_ = t.sqrt();
    Ok(PhysicalCompare {
        t,
        lin_err: lin * st_,
        mod_err: w_inf.map(|_| modf * st_),
        scale: scale * st_,
        excluded,
    })
}

/// `F̃[conj f]` from the scattering matrix: for `κ > 0`,
///
/// ```text
/// F̃[f̄](κ)  = conj R_-(κ) conj f̃(κ) + conj T(κ) conj f̃(-κ),
/// F̃[f̄](-κ) = conj T(κ)   conj f̃(κ) + conj R_+(κ) conj f̃(-κ).
/// ```
pub fn conjugate_via_scattering(b: &DistortedBasis, ft: &[C]) -> Vec<C> {
    let g = *b.grid();
    let s = &b.scattering;
    let mut out = vec![C::default(); g.n_k()];
    for j in g.positive_k() {
        let m = g.mirror(j);
        let (t, rp, rm) = (s.t[j].conj(), s.r_plus[j].conj(), s.r_minus[j].conj());
        let (fp, fm) = (ft[j].conj(), ft[m].conj());
        out[j] = rm * fp + t * fm;
        out[m] = t * fp + rp * fm;
    }
    out
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NegativeTimeCheck {
    /// `‖direct - formula‖₂ / ‖direct‖₂`.
    pub mismatch: f64,
    /// `|‖F̃[f̄]‖₂ / ‖f̃‖₂ - 1|`.
    pub norm_defect: f64,
}

/// Compare `forward(conj f)` with [`conjugate_via_scattering`].
pub fn negative_time_map(b: &DistortedBasis, f: &[C]) -> NegativeTimeCheck {
    let ft = b.forward(f);
    let fc: Vec<C> = f.iter().map(|z| z.conj()).collect();
    let direct = b.forward(&fc);
    let formula = conjugate_via_scattering(b, &ft);
    let l2 = |v: &[C]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let diff: Vec<C> = direct.iter().zip(&formula).map(|(a, c)| a - c).collect();
    NegativeTimeCheck {
        mismatch: l2(&diff) / l2(&direct),
        norm_defect: (l2(&direct) / l2(&ft) - 1.0).abs(),
    }
}

/// Frozen even cutoff `ψ(s) = e^{-s²/2}/√(2π)`.
pub fn psi(s: f64) -> f64 {
    (-0.5 * s * s).exp() / (2.0 * PI).sqrt()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StationaryPhase {
    pub t: f64,
    pub k: f64,
    /// `e^{itK²} i √(π/2) sign(tK) g(K)`.
    pub leading: C,
    /// `p.v. ∫ e^{itq²} g(q) ψ(q-K)/(q-K) dq`.
    pub quadrature: C,
}

impl StationaryPhase {
    pub fn relative_error(&self) -> f64 {
        (self.quadrature - self.leading).norm() / self.leading.norm()
    }
}

/// Symmetrised principal value `∫_0^S [F(K+s) - F(K-s)]/s ds` by composite
/// Gauss-Legendre with panels resolving the `e^{itq²}` oscillation.
pub fn stationary_phase_oracle(g: &(dyn Fn(f64) -> f64 + Sync), t: f64, k: f64) -> Result<StationaryPhase> {
    if !(k.abs() > t.abs().powf(-3.0 * ALPHA)) {
        return Err(Error::contract(format!(
            "|K| = {} must exceed t^(-3α) = {} for the stationary-phase regime",
            k.abs(),
            t.abs().powf(-3.0 * ALPHA)
        )));
    }
    let s_max = 9.0;
    let f = |q: f64| C::from_polar(g(q) * psi(q - k), t * q * q);
    let max_freq = 2.0 * t.abs() * (k.abs() + s_max);
    let panels = ((max_freq * s_max / (2.0 * PI)) * 2.0).ceil().max(64.0) as usize;
    let (nodes, weights) = gauss_legendre(16);
    let width = s_max / panels as f64;
    // Collected before summing so the reduction order is fixed.
    let parts: Vec<C> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let a = p as f64 * width;
            nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| {
                    let s = a + 0.5 * width * (x + 1.0);
                    (f(k + s) - f(k - s)) / s * (0.5 * width * w)
                })
                .sum::<C>()
        })
        .collect();
    let quadrature: C = parts.iter().sum();
    let sign = (t * k).signum();
    let leading = C::from_polar(1.0, t * k * k) * C::new(0.0, (PI / 2.0).sqrt() * sign * g(k));
    Ok(StationaryPhase {
        t,
        k,
        leading,
        quadrature,
    })
}

/// Plateau amplitude `g(q) = 0.25 Φ(q/8)`: equal to `1/4` on `|q| ≤ 2`, zero
/// beyond `|q| = 6`, so `‖g‖_∞ + ‖g'‖₂ ≤ 1`.
pub fn plateau(q: f64) -> f64 {
    0.25 * crate::cutoff::phi(q / 8.0) / crate::cutoff::phi(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::build_basis;
    use crate::grid::Grid;
    use crate::jost::solve_jost;
    use crate::potentials::Potential;
    use crate::scattering::coefficients;

    #[test]
    fn schedule_helpers() {
        let t = log_times(1.0, 100.0, 10);
        assert_eq!(t.len(), 21);
        assert!((t[20] - 100.0).abs() < 1e-12 && (t[10] - 10.0).abs() < 1e-9);
        let n = with_neighbours(&[0.0, 5.0], 0.5);
        assert_eq!(n, vec![0.0, 0.5, 4.5, 5.0, 5.5]);
    }

    fn synthetic(ts: &[f64], ks: &[f64], sign: Sign, eta: f64) -> Profile {
        // Exact solution of i f_t = -σ |f|²/(2(1+t)) f, close to the 1/2t law.
        let sigma = sign.sigma();
        let f0: Vec<C> = ks.iter().map(|&k| C::new(eta * (-k * k).exp(), 0.3 * eta * k)).collect();
        Profile {
            ts: ts.to_vec(),
            ks: ks.to_vec(),
            f_tilde: ts
                .iter()
                .map(|&t| {
                    f0.iter()
                        .map(|f| f * C::from_polar(1.0, 0.5 * sigma * f.norm_sqr() * (1.0 + t).ln()))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn modified_profile_removes_the_log_phase() {
        let mut base = log_times(1.0, 200.0, 40);
        base.extend([20.0, 25.0, 50.0, 100.0]);
        let ts = with_neighbours(&base, 0.01);
        let ts: Vec<f64> = std::iter::once(0.0).chain(ts).collect();
        let ks: Vec<f64> = (-20..20).map(|j| (j as f64 + 0.5) * 0.1).collect();
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let p = synthetic(&ts, &ks, sign, 0.5);
            let r = mod_scat_report(&p, sign, &[20.0, 50.0, 100.0], &[25.0, 50.0, 100.0, 200.0], (20.0, 200.0)).unwrap();
            assert!(r.modulus_defect < 1e-15);
            // w is constant up to the trapezoid error of the phase integral.
            for gap in &r.cauchy_gaps {
                assert!(gap.gap < 1e-4, "{gap:?}");
            }
            // The 1/(1+t) law differs from 1/2t at order t^-2.
            assert!(r.residual_slope.unwrap() < -1.5, "{:?}", r.residual_slope);
        }
    }

    #[test]
    fn linear_profile_has_zero_residual() {
        let ts = vec![9.0, 10.0, 11.0];
        let ks = vec![-0.5, 0.5, 1.5];
        let p = Profile {
            ts,
            ks,
            f_tilde: vec![vec![C::new(1e-9, 0.0); 3]; 3],
        };
        let (r, ex) = ode_residual(&p, 10.0, Sign::Defocusing, ALPHA).unwrap();
        assert_eq!(ex, 2);
        assert!(r.iter().all(|v| *v < 1e-27));
        assert!(ode_residual(&p, 9.0, Sign::Defocusing, ALPHA).is_err());
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<C> = xs.iter().map(|x| C::new(x * x * x - 2.0 * x, x * x)).collect();
        let v = cubic_interp(&xs, &ys, 2.3).unwrap();
        assert!((v - C::new(2.3f64.powi(3) - 4.6, 2.3 * 2.3)).norm() < 1e-12);
        assert!(cubic_interp(&xs, &ys, 0.2).is_none());
    }

    #[test]
    fn negative_time_identity() {
        let g = Grid::new(20.0, 512).unwrap();
        let f: Vec<C> = g
            .xs()
            .iter()
            .map(|&x| C::from_polar((-(x - 1.0) * (x - 1.0) / 2.0).exp(), 0.7 * x))
            .collect();
        for (v, tol) in [
            (Potential::zero(&g), 1e-10),
            (Potential::barrier(1.0, 1.0, &g).unwrap(), 1e-3),
        ] {
            let j = solve_jost(&v, &g).unwrap();
            let s = coefficients(&j, &v).unwrap();
            let b = build_basis(&j, &s, &g).unwrap();
            let c = negative_time_map(&b, &f);
            assert!(c.mismatch < tol && c.norm_defect < 1e-3, "{c:?}");
        }
    }

    #[test]
    fn stationary_phase_leading_term() {
        let a = stationary_phase_oracle(&plateau, 400.0, 1.0).unwrap();
        assert!(a.relative_error() < 0.15, "{a:?}");
        let b = stationary_phase_oracle(&plateau, 1600.0, 1.0).unwrap();
        assert!(b.relative_error() < a.relative_error());
        let m = stationary_phase_oracle(&plateau, 400.0, -1.0).unwrap();
        assert!((m.leading + a.leading).norm() < 1e-12);
        assert!(m.relative_error() < 0.15);
        assert!(stationary_phase_oracle(&plateau, 400.0, 0.5).is_ok());
        assert!(stationary_phase_oracle(&plateau, 400.0, 0.1).is_err());
    }
}
