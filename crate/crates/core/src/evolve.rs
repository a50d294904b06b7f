//! Linear flow `e^{itH}` through the distorted transform and the cubic NLS
//!
//! ```text
//! i u_t - u_xx + V u + σ a(x) |u|² u = 0
//! ```
//!
//! by Strang splitting: half a gauge rotation `u ← u e^{iσ a|u|² dt/2}`, one
//! exact linear step, half a rotation.
//!
//! The linear step uses the synthesis matrix `A = K Δk` (so `u = A c`) and its
//! exact inverse: `P(dt) = A diag(e^{ik² dt}) A^{-1}`. The quadrature pair
//! `forward`/`inverse` of [`DistortedBasis`] is not an exact inverse pair on a
//! finite box, and iterating it thousands of times amplifies that defect.

use faer::col::ColRef;
use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use serde::Serialize;

use crate::dft::DistortedBasis;
use crate::error::{Error, Result};
use crate::flat::FlatTransform;
use crate::grid::Grid;
use crate::potentials::Potential;
use crate::C;

/// `σ = +1` defocusing, `σ = -1` focusing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Defocusing,
    Focusing,
}

impl Sign {
    pub fn sigma(self) -> f64 {
        match self {
            Sign::Defocusing => 1.0,
            Sign::Focusing => -1.0,
        }
    }
}

fn matvec(m: &Mat<C>, v: &[C]) -> Vec<C> {
    let out = m * ColRef::from_slice(v);
    (0..out.nrows()).map(|i| out[i]).collect()
}

/// Exact synthesis/analysis pair and cached step matrices.
pub struct Propagator {
    grid: Grid,
    synth: Mat<C>,
    analysis: Mat<C>,
    /// `‖A A^{-1} - I‖_max`, recorded at construction.
    pub inverse_defect: f64,
}

impl Propagator {
    pub fn new(b: &DistortedBasis) -> Result<Self> {
        faer::set_global_parallelism(faer::Par::Seq);
        let g = *b.grid();
        let dk = g.dk();
        let synth = Mat::from_fn(g.n_x(), g.n_k(), |i, j| b.k[(i, j)] * dk);
        let analysis = synth.partial_piv_lu().inverse();
        let prod = &synth * &analysis;
        let mut defect: f64 = 0.0;
        for j in 0..g.n_k() {
            for i in 0..g.n_x() {
                let e = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((prod[(i, j)] - e).norm());
            }
        }
        if !(defect < 1e-6) {
            return Err(Error::numerical(format!("synthesis matrix inverse defect {defect:.3e}")));
        }
        Ok(Propagator {
            grid: g,
            synth,
            analysis,
            inverse_defect: defect,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Distorted coefficients `c` with `u = A c`.
    pub fn analyze(&self, u: &[C]) -> Vec<C> {
        matvec(&self.analysis, u)
    }

    pub fn synthesize(&self, c: &[C]) -> Vec<C> {
        matvec(&self.synth, c)
    }

    fn phases(&self, t: f64) -> Vec<C> {
        self.grid
            .ks()
            .iter()
            .map(|k| C::from_polar(1.0, k * k * t))
            .collect()
    }

    /// `A (e^{ik²t} c)`.
    pub fn evolve_spectral(&self, c: &[C], t: f64) -> Vec<C> {
        let e: Vec<C> = c.iter().zip(self.phases(t)).map(|(a, b)| a * b).collect();
        self.synthesize(&e)
    }

    /// `e^{itH} u`.
    pub fn evolve(&self, u: &[C], t: f64) -> Vec<C> {
        self.evolve_spectral(&self.analyze(u), t)
    }

    /// `P(dt) = A diag(e^{ik² dt}) A^{-1}`.
    pub fn step_matrix(&self, dt: f64) -> Mat<C> {
        let ph = self.phases(dt);
        let ad = Mat::from_fn(self.grid.n_x(), self.grid.n_k(), |i, j| self.synth[(i, j)] * ph[j]);
        &ad * &self.analysis
    }
}

/// Quadrature flow `inverse(e^{ik²t} forward(f0))`.
pub fn linear_evolve(b: &DistortedBasis, f0: &[C], t: f64) -> Vec<C> {
    let m: Vec<C> = b
        .grid()
        .ks()
        .iter()
        .map(|k| C::from_polar(1.0, k * k * t))
        .collect();
    b.multiplier(&m, f0)
}

#[derive(Clone, Debug)]
pub struct SolutionState {
    pub t: f64,
    pub u: Vec<C>,
    /// `f̃(t,k) = e^{-itk²} c(t,k)`.
    pub f_tilde: Vec<C>,
    pub sign: Sign,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvariantRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub mass_spectral: f64,
    pub energy_spectral: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<SolutionState>,
    pub invariants: Vec<InvariantRecord>,
    pub dt: f64,
}

impl Trajectory {
    /// Largest relative drift of `(M, H)` on the spectral side.
    pub fn spectral_drift(&self) -> (f64, f64) {
        drift(&self.invariants, |r| (r.mass_spectral, r.energy_spectral))
    }

    /// Largest relative drift of the x-quadrature `(M, H)`.
    pub fn physical_drift(&self) -> (f64, f64) {
        drift(&self.invariants, |r| (r.mass, r.energy))
    }

    pub fn final_state(&self) -> &SolutionState {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

fn drift(rs: &[InvariantRecord], f: impl Fn(&InvariantRecord) -> (f64, f64)) -> (f64, f64) {
    let (m0, h0) = f(&rs[0]);
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() };
    rs.iter().fold((0.0, 0.0), |(dm, dh), r| {
        let (m, h) = f(r);
        (f64::max(dm, rel(m, m0)), f64::max(dh, rel(h, h0)))
    })
}

#[derive(Clone, Debug)]
pub struct NlsOptions {
    pub t_end: f64,
    pub dt: f64,
    pub sign: Sign,
    /// Variable coefficient `a(x)` of the nonlinearity; `None` means `a ≡ 1`.
    pub a_coeff: Option<Vec<f64>>,
    /// Times at which full states are stored (rounded to the step grid).
    pub snapshots: Vec<f64>,
    /// Invariants are recorded every this many steps (and at snapshots).
    pub record_every: usize,
    /// Switch the nonlinearity off (linear flow through the same stepper).
    pub linear: bool,
}

impl NlsOptions {
    pub fn new(t_end: f64, dt: f64, sign: Sign) -> Self {
        NlsOptions {
            t_end,
            dt,
            sign,
            a_coeff: None,
            snapshots: vec![0.0, t_end],
            record_every: 50,
            linear: false,
        }
    }
}

/// `M = ∫|u|²` and `H = ∫|u_x|² + V|u|² + (σ/2) a |u|⁴` by trapezoid sums,
/// `u_x` by the flat spectral derivative.
pub fn invariants_mh(
    u: &[C],
    v: &Potential,
    sign: Sign,
    a: Option<&[f64]>,
    flat: &FlatTransform,
) -> (f64, f64) {
    let h = flat.grid().h();
    let ux = flat.derivative(u);
    let trap = |vals: Vec<f64>| crate::quad::trapezoid(&vals, h);
    let m = trap(u.iter().map(|z| z.norm_sqr()).collect());
    let kin = trap(ux.iter().map(|z| z.norm_sqr()).collect());
    let pot = trap(u.iter().zip(v.vs()).map(|(z, vv)| vv * z.norm_sqr()).collect());
    let quart = trap(
        u.iter()
            .enumerate()
            .map(|(i, z)| a.map_or(1.0, |a| a[i]) * z.norm_sqr().powi(2))
            .collect(),
    );
    (m, kin + pot + 0.5 * sign.sigma() * quart)
}

/// `M = Σ|c|² Δk` and `H = Σ k²|c|² Δk + (σ/2) ∫ a|u|⁴` with `c = A^{-1} u`.
pub fn spectral_invariants(
    prop: &Propagator,
    u: &[C],
    sign: Sign,
    a: Option<&[f64]>,
) -> (f64, f64) {
    let g = prop.grid();
    let c = prop.analyze(u);
    let m: f64 = c.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dk();
    let kin: f64 = c
        .iter()
        .zip(g.ks())
        .map(|(z, k)| k * k * z.norm_sqr())
        .sum::<f64>()
        * g.dk();
    let quart: f64 = u
        .iter()
        .enumerate()
        .map(|(i, z)| a.map_or(1.0, |a| a[i]) * z.norm_sqr().powi(2))
        .sum::<f64>()
        * g.h();
    (m, kin + 0.5 * sign.sigma() * quart)
}

fn rotate(u: &mut [C], sigma: f64, a: Option<&[f64]>, tau: f64) {
    for (i, z) in u.iter_mut().enumerate() {
        let ai = a.map_or(1.0, |a| a[i]);
        *z *= C::from_polar(1.0, sigma * ai * z.norm_sqr() * tau);
    }
}

fn sup(u: &[C]) -> f64 {
    u.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Fraction of the mass within `width` of either box end.
pub fn boundary_mass_fraction(u: &[C], grid: &Grid, width: f64) -> f64 {
    let x_half = grid.x_half_width();
    let (mut edge, mut total) = (0.0, 0.0);
    for (i, z) in u.iter().enumerate() {
        let m = z.norm_sqr();
        total += m;
        if grid.x(i).abs() > x_half - width {
            edge += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}

pub fn nls_solve(prop: &Propagator, v: &Potential, u0: &[C], opts: &NlsOptions) -> Result<Trajectory> {
    let g = *prop.grid();
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) {
        return Err(Error::contract(format!(
            "need dt > 0 and t_end >= 0 (dt = {}, t_end = {})",
            opts.dt, opts.t_end
        )));
    }
    if u0.len() != g.n_x() || !v.matches(&g) {
        return Err(Error::contract("initial data or potential not on the propagator grid"));
    }
    if let Some(a) = &opts.a_coeff {
        if a.len() != g.n_x() {
            return Err(Error::contract("a(x) must be sampled on the x-grid"));
        }
    }
    let a = opts.a_coeff.as_deref();
    let sigma = if opts.linear { 0.0 } else { opts.sign.sigma() };
    let steps = (opts.t_end / opts.dt).round() as usize;
    let mut snap_steps: Vec<usize> = opts
        .snapshots
        .iter()
        .map(|t| (t / opts.dt).round() as usize)
        .filter(|&s| s <= steps)
        .collect();
    snap_steps.sort_unstable();
    snap_steps.dedup();
    let flat = FlatTransform::new(&g);
    let p = prop.step_matrix(opts.dt);
    let ks = g.ks();

    let mut u = u0.to_vec();
    let sup0 = sup(&u);
    let mut traj = Trajectory {
        states: Vec::new(),
        invariants: Vec::new(),
        dt: opts.dt,
    };
    let mut next_snap = 0;
    let mut warned = false;
    for n in 0..=steps {
        let t = n as f64 * opts.dt;
        let is_snap = next_snap < snap_steps.len() && snap_steps[next_snap] == n;
        if is_snap || n % opts.record_every.max(1) == 0 || n == steps {
            let (mass, energy) = invariants_mh(&u, v, opts.sign, a, &flat);
            let (ms, es) = spectral_invariants(prop, &u, opts.sign, a);
            traj.invariants.push(InvariantRecord {
                t,
                mass,
                energy,
                mass_spectral: ms,
                energy_spectral: es,
            });
            if !warned && boundary_mass_fraction(&u, &g, 0.05 * g.x_half_width()) > 1e-8 {
                log::warn!("mass near the box boundary exceeds 1e-8 at t = {t}");
                warned = true;
            }
        }
        if is_snap {
            let c = prop.analyze(&u);
            let f_tilde = c
                .iter()
                .zip(&ks)
                .map(|(z, k)| z * C::from_polar(1.0, -k * k * t))
                .collect();
            traj.states.push(SolutionState {
                t,
                u: u.clone(),
                f_tilde,
                sign: opts.sign,
            });
            next_snap += 1;
        }
        if n == steps {
            break;
        }
        rotate(&mut u, sigma, a, 0.5 * opts.dt);
        u = matvec(&p, &u);
        rotate(&mut u, sigma, a, 0.5 * opts.dt);
        let s = sup(&u);
        if !s.is_finite() || (sup0 > 0.0 && s > 10.0 * sup0) {
            return Err(Error::numerical(format!(
                "blow-up guard: ‖u‖_∞ = {s:.3e} at t = {:.4} (initial {sup0:.3e})",
                t + opts.dt
            )));
        }
    }
    Ok(traj)
}

/// Profile snapshots `f̃(t_n, k_j)`.
#[derive(Clone, Debug)]
pub struct Profile {
    pub ts: Vec<f64>,
    pub ks: Vec<f64>,
    /// Row `n` is `f̃(t_n, ·)`.
    pub f_tilde: Vec<Vec<C>>,
}

pub fn extract_profile(traj: &Trajectory, grid: &Grid) -> Profile {
    Profile {
        ts: traj.states.iter().map(|s| s.t).collect(),
        ks: grid.ks(),
        f_tilde: traj.states.iter().map(|s| s.f_tilde.clone()).collect(),
    }
}

/// Shapes of initial data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataShape {
    /// `f̃_0(k) ∝ k exp(-1/(1 - (k/κ)²))` on `|k| < κ`, synthesized exactly.
    BandLimited { kappa: f64 },
    /// `u_0 ∝ e^{-x²}`.
    Gaussian,
    /// `u_0 ∝ x e^{-x²}`.
    OddGaussian,
}

/// `‖u‖_{H^{1,1}} = (‖⟨x⟩u‖² + ‖u_x‖²)^{1/2}`.
pub fn h11_norm(u: &[C], flat: &FlatTransform) -> f64 {
    let g = flat.grid();
    let ux = flat.derivative(u);
    let w: f64 = u
        .iter()
        .enumerate()
        .map(|(i, z)| (1.0 + g.x(i).powi(2)) * z.norm_sqr())
        .sum::<f64>();
    let d: f64 = ux.iter().map(|z| z.norm_sqr()).sum();
    ((w + d) * g.h()).sqrt()
}

/// Initial data of the given shape with `‖u_0‖_{H^{1,1}} = eta`.
pub fn initial_data(prop: &Propagator, shape: DataShape, eta: f64) -> Result<Vec<C>> {
    if !(eta >= 0.0) {
        return Err(Error::config(format!("evolution.eta must be non-negative, got {eta}")));
    }
    let g = *prop.grid();
    let raw: Vec<C> = match shape {
        DataShape::BandLimited { kappa } => {
            if !(kappa > 0.0 && kappa < g.k_half_width()) {
                return Err(Error::config(format!(
                    "evolution.kappa must lie in (0, {:.3}), got {kappa}",
                    g.k_half_width()
                )));
            }
            let c: Vec<C> = g
                .ks()
                .iter()
                .map(|&k| {
                    let r = k / kappa;
                    if r.abs() < 1.0 {
                        C::new(k * (-1.0 / (1.0 - r * r)).exp(), 0.0)
                    } else {
                        C::default()
                    }
                })
                .collect();
            prop.synthesize(&c)
        }
        DataShape::Gaussian => g.xs().iter().map(|&x| C::new((-x * x).exp(), 0.0)).collect(),
        DataShape::OddGaussian => g.xs().iter().map(|&x| C::new(x * (-x * x).exp(), 0.0)).collect(),
    };
    let flat = FlatTransform::new(&g);
    let n = h11_norm(&raw, &flat);
    Ok(raw.iter().map(|z| z * (eta / n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::build_basis;
    use crate::jost::solve_jost;
    use crate::scattering::coefficients;

    fn setup(v: &Potential, g: &Grid) -> (DistortedBasis, Propagator) {
        let j = solve_jost(v, g).unwrap();
        let s = coefficients(&j, v).unwrap();
        let b = build_basis(&j, &s, g).unwrap();
        let p = Propagator::new(&b).unwrap();
        (b, p)
    }

    fn rel_l2(a: &[C], b: &[C]) -> f64 {
        let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let d: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (n / d).sqrt()
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let g = Grid::new(40.0, 512).unwrap();
        let (b, p) = setup(&Potential::zero(&g), &g);
        let s = 1.0;
        let u0: Vec<C> = g.xs().iter().map(|&x| C::new((-x * x / (2.0 * s)).exp(), 0.0)).collect();
        let t = 3.0;
        let a = C::new(s, -2.0 * t);
        let exact: Vec<C> = g
            .xs()
            .iter()
            .map(|&x| (C::new(s, 0.0) / a).sqrt() * (-x * x / (2.0 * a)).exp())
            .collect();
        assert!(rel_l2(&linear_evolve(&b, &u0, t), &exact) < 1e-4);
        assert!(rel_l2(&p.evolve(&u0, t), &exact) < 1e-4);
    }

    #[test]
    fn group_law_and_unitarity_on_barrier() {
        let g = Grid::new(20.0, 256).unwrap();
        let (b, p) = setup(&Potential::barrier(1.0, 1.0, &g).unwrap(), &g);
        let u0: Vec<C> = g.xs().iter().map(|&x| C::new((-x * x).exp(), 0.0)).collect();
        let a = p.evolve(&p.evolve(&u0, 0.4), 0.6);
        let c = p.evolve(&u0, 1.0);
        assert!(rel_l2(&a, &c) < 1e-6);
        let n0: f64 = u0.iter().map(|z| z.norm_sqr()).sum();
        let n1: f64 = linear_evolve(&b, &u0, 1.0).iter().map(|z| z.norm_sqr()).sum();
        assert!((n1 / n0 - 1.0).abs() < 1e-3);
        assert!(rel_l2(&linear_evolve(&b, &u0, 0.0), &u0) < 1e-3);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(10.0, 64).unwrap();
        let v = Potential::barrier(1.0, 1.0, &g).unwrap();
        let (_, p) = setup(&v, &g);
        let tr = nls_solve(&p, &v, &vec![C::default(); 64], &NlsOptions::new(1.0, 0.1, Sign::Defocusing)).unwrap();
        assert!(tr.final_state().u.iter().all(|z| *z == C::default()));
    }

    #[test]
    fn gaussian_invariants_closed_form() {
        let g = Grid::new(20.0, 512).unwrap();
        let v = Potential::zero(&g);
        let flat = FlatTransform::new(&g);
        let amp = 0.3;
        let u: Vec<C> = g.xs().iter().map(|&x| C::new(amp * (-x * x).exp(), 0.0)).collect();
        let (m, h) = invariants_mh(&u, &v, Sign::Defocusing, None, &flat);
        let pi = std::f64::consts::PI;
        // ∫e^{-2x²} = √(π/2); ∫|∂_x e^{-x²}|² = √(π/2); ∫e^{-4x²} = √π/2
        let m_exact = amp * amp * (pi / 2.0).sqrt();
        let h_exact = amp * amp * (pi / 2.0).sqrt() + 0.5 * amp.powi(4) * pi.sqrt() / 2.0;
        assert!((m - m_exact).abs() < 1e-8 * m_exact);
        assert!((h - h_exact).abs() < 1e-8 * h_exact);
        assert_eq!(invariants_mh(&vec![C::default(); 512], &v, Sign::Focusing, None, &flat), (0.0, 0.0));
    }

    #[test]
    fn gauge_step_preserves_modulus() {
        let mut u: Vec<C> = (0..32).map(|i| C::new(i as f64 * 0.1, 0.3)).collect();
        let before: Vec<f64> = u.iter().map(|z| z.norm()).collect();
        rotate(&mut u, 1.0, None, 0.7);
        assert!(u.iter().zip(&before).all(|(z, b)| (z.norm() - b).abs() < 1e-15));
    }

    #[test]
    fn conservation_and_time_reversal() {
        let g = Grid::new(20.0, 256).unwrap();
        let v = Potential::barrier(1.0, 1.0, &g).unwrap();
        let (_, p) = setup(&v, &g);
        let u0: Vec<C> = g.xs().iter().map(|&x| C::new(0.5 * (-x * x).exp(), 0.0)).collect();
        let opts = NlsOptions::new(2.0, 0.01, Sign::Defocusing);
        let tr = nls_solve(&p, &v, &u0, &opts).unwrap();
        let (dm, dh) = tr.spectral_drift();
        assert!(dm < 1e-8 && dh < 1e-4, "{dm} {dh}");
        let back: Vec<C> = tr.final_state().u.iter().map(|z| z.conj()).collect();
        let tr2 = nls_solve(&p, &v, &back, &opts).unwrap();
        let rev: Vec<C> = tr2.final_state().u.iter().map(|z| z.conj()).collect();
        assert!(rel_l2(&rev, &u0) < 1e-8);
    }

    #[test]
    fn strang_is_second_order() {
        let g = Grid::new(20.0, 256).unwrap();
        let v = Potential::barrier(1.0, 1.0, &g).unwrap();
        let (_, p) = setup(&v, &g);
        let u0: Vec<C> = g.xs().iter().map(|&x| C::new(0.8 * (-x * x).exp(), 0.0)).collect();
        let run = |dt: f64| nls_solve(&p, &v, &u0, &NlsOptions::new(1.0, dt, Sign::Focusing)).unwrap().final_state().u.clone();
        let r = run(0.1 / 8.0);
        let e1 = rel_l2(&run(0.1), &r);
        let e2 = rel_l2(&run(0.05), &r);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "{order}");
    }

    #[test]
    fn linear_profile_is_frozen() {
        let g = Grid::new(20.0, 256).unwrap();
        let v = Potential::barrier(1.0, 1.0, &g).unwrap();
        let (_, p) = setup(&v, &g);
        let u0 = initial_data(&p, DataShape::BandLimited { kappa: 0.9 }, 0.08).unwrap();
        let mut opts = NlsOptions::new(2.0, 0.05, Sign::Defocusing);
        opts.linear = true;
        opts.snapshots = vec![0.0, 1.0, 2.0];
        let tr = nls_solve(&p, &v, &u0, &opts).unwrap();
        let prof = extract_profile(&tr, &g);
        assert_eq!(prof.ts.len(), 3);
        assert!(rel_l2(&prof.f_tilde[2], &prof.f_tilde[0]) < 1e-10);
        let flat = FlatTransform::new(&g);
        assert!((h11_norm(&u0, &flat) - 0.08).abs() < 1e-12);
    }

    #[test]
    fn blow_up_guard_and_contracts() {
        let g = Grid::new(10.0, 64).unwrap();
        let v = Potential::zero(&g);
        let (_, p) = setup(&v, &g);
        let u0 = vec![C::new(1.0, 0.0); 64];
        assert!(matches!(
            nls_solve(&p, &v, &u0, &NlsOptions::new(1.0, 0.0, Sign::Defocusing)),
            Err(Error::Contract(_))
        ));
    }
}
