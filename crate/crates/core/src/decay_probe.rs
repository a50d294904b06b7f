//! Decay-rate measurements for the linear flow `e^{itH}` and operator-norm
//! probes for the Jost symbols.

use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::dft::{Component, DistortedBasis};
use crate::error::{Error, Result};
use crate::evolve::Propagator;
use crate::fit::linear_fit;
use crate::flat::FlatTransform;
use crate::jost::JostField;
use crate::runstore::fmt_f64;
use crate::C;

/// Fits use `t ≥ T_FIT_MIN`.
pub const T_FIT_MIN: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NormKind {
    /// `‖u‖_∞`.
    Sup,
    /// `‖⟨x⟩^{-β} u‖_∞`.
    WeightedSup { beta: f64 },
    /// `‖⟨x⟩^{-β} ∂_x u‖_2`.
    WeightedDxL2 { beta: f64 },
    /// `‖∂_k f̃‖_2` of the profile (constant for the linear flow).
    ProfileH1,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySeries {
    pub ts: Vec<f64>,
    pub norms: Vec<f64>,
    pub norm_kind: NormKind,
    pub component: Component,
    pub t_fit_min: f64,
    pub fitted_slope: f64,
    /// `slope ± 1.96 SE`.
    pub slope_ci: (f64, f64),
}

impl DecaySeries {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("t,norm\n");
        for (t, n) in self.ts.iter().zip(&self.norms) {
            s.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*n)));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// OLS slope of `(log t, log norm)` over `t ≥ t_min`, with `ci = 1.96 SE`.
pub fn fit_decay_rate(ts: &[f64], norms: &[f64], t_min: f64) -> Result<(f64, f64)> {
    if ts.len() != norms.len() {
        return Err(Error::contract("time and norm arrays differ in length"));
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&t, &n) in ts.iter().zip(norms) {
        if t < t_min {
            continue;
        }
        if !(n > 0.0) || !(t > 0.0) {
            return Err(Error::contract(format!("non-positive value in decay fit (t = {t}, norm = {n})")));
        }
        lx.push(t.ln());
        ly.push(n.ln());
    }
    if lx.len() < 5 {
        return Err(Error::contract(format!(
            "decay fit needs at least 5 points in the window, got {}",
            lx.len()
        )));
    }
    let (slope, se, _) = linear_fit(&lx, &ly)?;
    Ok((slope, 1.96 * se))
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

fn norm_of(kind: NormKind, u: &[C], flat: &FlatTransform) -> f64 {
    let g = flat.grid();
    match kind {
        NormKind::Sup => u.iter().map(|z| z.norm()).fold(0.0, f64::max),
        NormKind::WeightedSup { beta } => u
            .iter()
            .enumerate()
            .map(|(i, z)| z.norm() * japanese(g.x(i)).powf(-beta))
            .fold(0.0, f64::max),
        NormKind::WeightedDxL2 { beta } => {
            let d = flat.derivative(u);
            (d.iter()
                .enumerate()
                .map(|(i, z)| z.norm_sqr() * japanese(g.x(i)).powf(-2.0 * beta))
                .sum::<f64>()
                * g.h())
            .sqrt()
        }
        NormKind::ProfileH1 => unreachable!("profile norm is taken on the spectral side"),
    }
}

/// `h̃(0)` estimated from the two nodes nearest zero, relative to `‖h̃‖_∞`.
pub fn zero_mode_ratio(c: &[C], prop: &Propagator) -> f64 {
    let g = prop.grid();
    let j = g.n_k() / 2;
    let mid = 0.5 * (c[j] + c[g.mirror(j)]);
    let sup = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if sup == 0.0 {
        0.0
    } else {
        mid.norm() / sup
    }
}

/// Threshold for the `h̃(0) = 0` hypothesis.
pub const ZERO_MODE_TOL: f64 = 1e-2;

/// Linear evolution of `h` to each time, projected to `component`, measured
/// in `kind`; slope fitted on `t ≥ T_FIT_MIN`. With `need_zero_mode` the data
/// must satisfy `h̃(0) ≈ 0`.
pub fn norm_series(
    prop: &Propagator,
    b: &DistortedBasis,
    h: &[C],
    times: &[f64],
    kind: NormKind,
    component: Component,
    need_zero_mode: bool,
) -> Result<DecaySeries> {
    let g = *prop.grid();
    let c = prop.analyze(h);
    if need_zero_mode {
        let r = zero_mode_ratio(&c, prop);
        if r > ZERO_MODE_TOL {
            return Err(Error::contract(format!(
                "hypothesis h~(0) = 0 violated: |h~(0)|/‖h~‖_∞ = {r:.3e}"
            )));
        }
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::contract("times must be strictly increasing"));
    }
    let flat = FlatTransform::new(&g);
    let ks = g.ks();
    let norms: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            if kind == NormKind::ProfileH1 {
                let d: f64 = c
                    .windows(2)
                    .map(|w| ((w[1] - w[0]) / g.dk()).norm_sqr())
                    .sum::<f64>()
                    * g.dk();
                return d.sqrt();
            }
            let ct: Vec<C> = c
                .iter()
                .zip(&ks)
                .map(|(z, k)| z * C::from_polar(1.0, k * k * t))
                .collect();
            let u = match component {
                Component::Full => prop.synthesize(&ct),
                _ => b.component_project(&ct, component),
            };
            norm_of(kind, &u, &flat)
        })
        .collect();
    let (slope, ci) = fit_decay_rate(times, &norms, T_FIT_MIN)?;
    Ok(DecaySeries {
        ts: times.to_vec(),
        norms,
        norm_kind: kind,
        component,
        t_fit_min: T_FIT_MIN,
        fitted_slope: slope,
        slope_ci: (slope - ci, slope + ci),
    })
}

/// `‖⟨x⟩^{-β} ∂_x (e^{itH} h)_A‖_2` series.
pub fn smoothing_series(
    prop: &Propagator,
    b: &DistortedBasis,
    h: &[C],
    times: &[f64],
    beta: f64,
    component: Component,
    need_zero_mode: bool,
) -> Result<DecaySeries> {
    norm_series(
        prop,
        b,
        h,
        times,
        NormKind::WeightedDxL2 { beta },
        component,
        need_zero_mode,
    )
}

/// Symbols of the pseudo-differential operators `∫ e^{iλx} s(x,λ) g(λ) dλ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    /// `m_+(x,λ) - 1`.
    MMinus1,
    /// `∂_x m_+(x,λ)`.
    DxM,
    /// `∂_λ m_+(x,λ)`.
    DkM,
}

impl std::str::FromStr for SymbolKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m_minus_1" => Ok(SymbolKind::MMinus1),
            "dx_m" => Ok(SymbolKind::DxM),
            "dk_m" => Ok(SymbolKind::DkM),
            _ => Err(Error::config(format!(
                "unknown symbol kind {s:?} (expected m_minus_1, dx_m or dk_m)"
            ))),
        }
    }
}

/// Largest singular value of `M` by power iteration on `M* M`.
pub fn largest_singular_value(m: &faer::Mat<C>) -> Result<f64> {
    let (nr, nc) = (m.nrows(), m.ncols());
    if nr == 0 || nc == 0 {
        return Ok(0.0);
    }
    let mut v: Vec<C> = (0..nc).map(|j| C::new(1.0 + 0.01 * j as f64, 0.0)).collect();
    let mut sigma = 0.0;
    for _ in 0..5000 {
        let mv: Vec<C> = (0..nr)
            .into_par_iter()
            .map(|i| (0..nc).map(|j| m[(i, j)] * v[j]).sum())
            .collect();
        let w: Vec<C> = (0..nc)
            .into_par_iter()
            .map(|j| (0..nr).map(|i| m[(i, j)].conj() * mv[i]).sum())
            .collect();
        let nw = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nw == 0.0 {
            return Ok(0.0);
        }
        let next = nw.sqrt();
        v = w.iter().map(|z| z / nw).collect();
        if (next - sigma).abs() <= 1e-12 * next {
            return Ok(next);
        }
        sigma = next;
    }
    Err(Error::numerical("power iteration did not converge in 5000 iterations"))
}

/// `L²_λ → L²_x` norm of `1_{x≥-1} ⟨x⟩^β ∫ e^{iλx} s(x,λ) g(λ) dλ` discretised
/// on the Jost grid (`√(h Δλ)`-scaled matrix).
pub fn pdo_norm(j: &JostField, kind: SymbolKind, beta: f64) -> Result<f64> {
    let g = *j.grid();
    let rows: Vec<usize> = (0..g.n_x()).filter(|&i| g.x(i) >= -1.0).collect();
    let scale = (g.h() * g.dk()).sqrt();
    let m = faer::Mat::from_fn(rows.len(), g.n_k(), |r, c| {
        let i = rows[r];
        let (x, k) = (g.x(i), g.k(c));
        let s = match kind {
            SymbolKind::MMinus1 => j.m_plus[(i, c)] - 1.0,
            SymbolKind::DxM => j.dx_m_plus[(i, c)],
            SymbolKind::DkM => j.dk_m_plus[(i, c)],
        };
        s * C::from_polar(scale * japanese(x).powf(beta), k * x)
    });
    largest_singular_value(&m)
}

#[derive(Clone, Debug, Serialize)]
pub struct PdoProbe {
    pub symbol: SymbolKind,
    pub beta: f64,
    pub n_x: Vec<usize>,
    pub norms: Vec<f64>,
    /// `norms[last] / norms[last-1]`.
    pub last_ratio: f64,
    pub bounded: bool,
}

/// Operator norms over `refinements` doublings of `N` (box fixed), using
/// `jost_at(grid)` to build the Jost data on each grid.
pub fn pdo_norm_probe(
    kind: SymbolKind,
    beta: f64,
    base: crate::Grid,
    refinements: usize,
    jost_at: &dyn Fn(&crate::Grid) -> Result<JostField>,
) -> Result<PdoProbe> {
    let mut grid = base;
    let mut n_x = Vec::new();
    let mut norms = Vec::new();
    for level in 0..=refinements {
        if level > 0 {
            grid = grid.refined();
        }
        let j = jost_at(&grid)?;
        n_x.push(grid.n_x());
        norms.push(pdo_norm(&j, kind, beta)?);
    }
    let n = norms.len();
    let last_ratio = if n >= 2 && norms[n - 2] > 0.0 {
        norms[n - 1] / norms[n - 2]
    } else if n >= 2 && norms[n - 1] == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(PdoProbe {
        symbol: kind,
        beta,
        n_x,
        norms,
        last_ratio,
        bounded: last_ratio < 1.1,
    })
}
