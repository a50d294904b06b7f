//! Admissible potentials, their weighted L¹ norms and tail weights.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quad;

/// Weights for which norms are precomputed at construction.
pub const STANDARD_GAMMAS: [f64; 5] = [0.0, 1.0, 2.0, 2.51, 3.51];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Barrier { height: f64, half_width: f64 },
    Sampled,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct Potential {
    xs: Vec<f64>,
    vs: Vec<f64>,
    kind: PotentialKind,
    gamma_norms: Vec<(f64, f64)>,
    allow_signed: bool,
}

/// `W_±^s(x_i)`: tail integrals of `<y>^s |V(y)|` to the right (+) or left (-).
#[derive(Clone, Debug)]
pub struct TailWeight {
    pub s: f64,
    pub direction: Side,
    pub values: Vec<f64>,
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `∫_a^b <y>^γ dy`, in closed form for γ = 0, 1 and even integers.
fn weight_integral(a: f64, b: f64, gamma: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if gamma == 0.0 {
        return b - a;
    }
    if gamma == 1.0 {
        let prim = |y: f64| 0.5 * (y * japanese(y) + y.asinh());
        return prim(b) - prim(a);
    }
    if gamma.fract() == 0.0 && (gamma as i64) % 2 == 0 && gamma <= 16.0 {
        // (1 + y²)^m = Σ C(m, j) y^{2j}
        let m = (gamma / 2.0) as u32;
        let mut total = 0.0;
        let mut binom = 1.0;
        for j in 0..=m {
            let p = 2 * j + 1;
            total += binom * (b.powi(p as i32) - a.powi(p as i32)) / p as f64;
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
        return total;
    }
    let panels = (((b - a) * 4.0).ceil() as usize).clamp(4, 4096);
    quad::integrate(|y| (1.0 + y * y).powf(0.5 * gamma), a, b, panels, 20)
}

impl Potential {
    /// Square barrier `K·1_{[-L, L]}` sampled on `grid`.
    pub fn barrier(height: f64, half_width: f64, grid: &Grid) -> Result<Self> {
        if !(height >= 0.0 && height.is_finite()) {
            return Err(Error::contract(format!(
                "barrier height must be non-negative, got {height}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(Error::contract(format!(
                "barrier half width must be positive, got {half_width}"
            )));
        }
        let xs = grid.xs();
        if half_width >= grid.x_half_width() - grid.h() {
            return Err(Error::contract(format!(
                "barrier half width {half_width} does not fit inside the grid"
            )));
        }
        if height == 0.0 {
            return Ok(Self::zero(grid));
        }
        let vs = xs
            .iter()
            .map(|&x| if x.abs() <= half_width { height } else { 0.0 })
            .collect();
        let mut v = Potential {
            xs,
            vs,
            kind: PotentialKind::Barrier { height, half_width },
            gamma_norms: Vec::new(),
            allow_signed: false,
        };
        v.fill_standard_norms();
        Ok(v)
    }

    pub fn zero(grid: &Grid) -> Self {
        let xs = grid.xs();
        let n = xs.len();
        let mut v = Potential {
            xs,
            vs: vec![0.0; n],
            kind: PotentialKind::Zero,
            gamma_norms: Vec::new(),
            allow_signed: false,
        };
        v.fill_standard_norms();
        v
    }

    /// Potential from samples on a uniform increasing grid.
    pub fn sampled(xs: Vec<f64>, vs: Vec<f64>, allow_signed: bool) -> Result<Self> {
        if xs.len() != vs.len() {
            return Err(Error::contract(format!(
                "xs has {} entries but vs has {}",
                xs.len(),
                vs.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::contract("a sampled potential needs at least 2 points"));
        }
        let h = xs[1] - xs[0];
        if !(h > 0.0) {
            return Err(Error::contract("xs must be strictly increasing"));
        }
        let tol = 1e-9 * h.max(1.0);
        for (i, w) in xs.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > tol {
                return Err(Error::contract(format!(
                    "xs is not uniform at index {}: spacing {} vs {}",
                    i + 1,
                    w[1] - w[0],
                    h
                )));
            }
        }
        if let Some(bad) = vs.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite potential value at index {bad}")));
        }
        if !allow_signed {
            if let Some(bad) = vs.iter().position(|&v| v < 0.0) {
                return Err(Error::contract(format!(
                    "negative potential value {} at x = {} (set allow_signed to assert absence of bound states)",
                    vs[bad], xs[bad]
                )));
            }
        }
        let mut v = Potential {
            xs,
            vs,
            kind: PotentialKind::Sampled,
            gamma_norms: Vec::new(),
            allow_signed,
        };
        v.fill_standard_norms();
        Ok(v)
    }

    /// `A·exp(-x²/w²)` sampled on `grid`; the default smooth test potential.
    pub fn gaussian(amplitude: f64, width: f64, grid: &Grid) -> Result<Self> {
        let xs = grid.xs();
        let vs = xs.iter().map(|x| amplitude * (-(x / width).powi(2)).exp()).collect();
        Self::sampled(xs, vs, false)
    }

    fn fill_standard_norms(&mut self) {
        self.gamma_norms = STANDARD_GAMMAS
            .iter()
            .map(|&g| (g, self.weighted_l1_norm(g)))
            .collect();
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn vs(&self) -> &[f64] {
        &self.vs
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn allow_signed(&self) -> bool {
        self.allow_signed
    }

    pub fn h(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// Cached `‖<x>^γ V‖_{L¹}` for the standard weights.
    pub fn gamma_norms(&self) -> &[(f64, f64)] {
        &self.gamma_norms
    }

    /// True when the samples sit on the nodes of `grid`.
    pub fn matches(&self, grid: &Grid) -> bool {
        self.xs.len() == grid.n_x()
            && (self.xs[0] - grid.x(0)).abs() <= 1e-12 * grid.x_half_width()
            && (self.h() - grid.h()).abs() <= 1e-12 * grid.h()
    }

    /// `‖<x>^γ V‖_{L¹}`: exact for the barrier, trapezoid for samples.
    pub fn weighted_l1_norm(&self, gamma: f64) -> f64 {
        assert!(gamma >= 0.0, "gamma must be non-negative");
        if let Some(&(_, n)) = self.gamma_norms.iter().find(|(g, _)| *g == gamma) {
            return n;
        }
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Barrier { height, half_width } => {
                height * weight_integral(-half_width, half_width, gamma)
            }
            PotentialKind::Sampled => {
                let f: Vec<f64> = self
                    .xs
                    .iter()
                    .zip(&self.vs)
                    .map(|(x, v)| (1.0 + x * x).powf(0.5 * gamma) * v.abs())
                    .collect();
                quad::trapezoid(&f, self.h())
            }
        }
    }

    pub fn tail_weight(&self, s: f64, direction: Side) -> TailWeight {
        assert!(s >= 0.0, "s must be non-negative");
        let n = self.xs.len();
        let values = match self.kind {
            PotentialKind::Zero => vec![0.0; n],
            PotentialKind::Barrier { height, half_width } => self
                .xs
                .iter()
                .map(|&x| {
                    let (a, b) = match direction {
                        Side::Plus => (x.max(-half_width), half_width),
                        Side::Minus => (-half_width, x.min(half_width)),
                    };
                    height * weight_integral(a, b, s)
                })
                .collect(),
            PotentialKind::Sampled => {
                let h = self.h();
                let f: Vec<f64> = self
                    .xs
                    .iter()
                    .zip(&self.vs)
                    .map(|(x, v)| (1.0 + x * x).powf(0.5 * s) * v.abs())
                    .collect();
                let mut w = vec![0.0; n];
                match direction {
                    Side::Plus => {
                        for i in (0..n - 1).rev() {
                            w[i] = w[i + 1] + 0.5 * h * (f[i] + f[i + 1]);
                        }
                    }
                    Side::Minus => {
                        for i in 1..n {
                            w[i] = w[i - 1] + 0.5 * h * (f[i] + f[i - 1]);
                        }
                    }
                }
                w
            }
        };
        TailWeight {
            s,
            direction,
            values,
        }
    }

    /// Piecewise-constant cell model used by the Jost solver.
    pub fn cells(&self) -> CellModel {
        CellModel::new(self)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,v\n");
        for (x, v) in self.xs.iter().zip(&self.vs) {
            out.push_str(&format!("{},{}\n", crate::runstore::fmt_f64(*x), crate::runstore::fmt_f64(*v)));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, allow_signed: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("x,v") => {}
            other => {
                return Err(Error::config(format!(
                    "{}: expected header `x,v`, found {:?}",
                    path.display(),
                    other
                )))
            }
        }
        let (mut xs, mut vs) = (Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |p: Option<&str>| -> Result<f64> {
                p.and_then(|s| s.trim().parse().ok()).ok_or_else(|| {
                    Error::config(format!("{}: bad row {}: {line}", path.display(), lineno + 2))
                })
            };
            xs.push(parse(parts.next())?);
            vs.push(parse(parts.next())?);
        }
        Self::sampled(xs, vs, allow_signed)
    }
}

/// The potential as a piecewise constant function on each grid cell
/// `[x_i, x_{i+1}]`, possibly split into several segments.
///
/// Sampled potentials use the cell average `(v_i + v_{i+1})/2`. The barrier
/// is split exactly at `±L`, so sub-cell barriers are represented without
/// error.
#[derive(Clone, Debug)]
pub struct CellModel {
    pub xs: Vec<f64>,
    seg_start: Vec<usize>,
    seg_len: Vec<f64>,
    seg_v: Vec<f64>,
    /// First and last cell carrying a nonzero segment.
    support: Option<(usize, usize)>,
}

impl CellModel {
    fn new(v: &Potential) -> Self {
        let xs = v.xs.clone();
        let n = xs.len();
        let mut seg_start = Vec::with_capacity(n);
        let mut seg_len = Vec::with_capacity(n + 4);
        let mut seg_v = Vec::with_capacity(n + 4);
        for i in 0..n - 1 {
            seg_start.push(seg_len.len());
            let (a, b) = (xs[i], xs[i + 1]);
            match v.kind {
                PotentialKind::Zero => {
                    seg_len.push(b - a);
                    seg_v.push(0.0);
                }
                PotentialKind::Sampled => {
                    seg_len.push(b - a);
                    seg_v.push(0.5 * (v.vs[i] + v.vs[i + 1]));
                }
                PotentialKind::Barrier { height, half_width } => {
                    let mut cuts = vec![a];
                    for c in [-half_width, half_width] {
                        if c > a && c < b {
                            cuts.push(c);
                        }
                    }
                    cuts.push(b);
                    for w in cuts.windows(2) {
                        let mid = 0.5 * (w[0] + w[1]);
                        seg_len.push(w[1] - w[0]);
                        seg_v.push(if mid.abs() <= half_width { height } else { 0.0 });
                    }
                }
            }
        }
        seg_start.push(seg_len.len());
        let mut support = None;
        for c in 0..n - 1 {
            let nz = seg_v[seg_start[c]..seg_start[c + 1]].iter().any(|&v| v != 0.0);
            if nz {
                support = Some(match support {
                    None => (c, c),
                    Some((lo, _)) => (lo, c),
                });
            }
        }
        CellModel {
            xs,
            seg_start,
            seg_len,
            seg_v,
            support,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.xs.len() - 1
    }

    /// Segments `(length, V)` of cell `c`, left to right.
    pub fn segments(&self, c: usize) -> impl DoubleEndedIterator<Item = (f64, f64)> + '_ {
        let r = self.seg_start[c]..self.seg_start[c + 1];
        self.seg_len[r.clone()]
            .iter()
            .copied()
            .zip(self.seg_v[r].iter().copied())
    }

    pub fn support(&self) -> Option<(usize, usize)> {
        self.support
    }

    /// `∫ V dx` of the cell model.
    pub fn integral(&self) -> f64 {
        self.seg_len.iter().zip(&self.seg_v).map(|(l, v)| l * v).sum()
    }
}
