//! Numerical laboratory for the 1d cubic Schrödinger equation with a potential,
//!
//! ```text
//! i u_t - u_xx + V u + σ |u|² u = 0,      σ = +1 defocusing, σ = -1 focusing,
//! ```
//!
//! built on the distorted Fourier transform of `H = -∂_xx + V`.
//!
//! The pipeline is: [`potentials`] → [`jost`] (Jost functions `m_±`) →
//! [`scattering`] (`T`, `R_±`) → [`dft`] (basis `K(x,k)` and its singular /
//! regular split) → [`evolve`] (linear flow and Strang splitting) →
//! [`asymptotics`], [`decay_probe`], [`spectral_measure`] (diagnostics).
//! [`runstore`] and [`cli`] turn experiments into reproducible artifacts.

// Guards of the form `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod cutoff;
pub mod decay_probe;
pub mod dft;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod flat;
pub mod grid;
pub mod jost;
pub mod potentials;
pub mod quad;
pub mod runstore;
pub mod scattering;
pub mod spectral_measure;

pub use error::{Error, Result};
pub use grid::Grid;
pub use potentials::{Potential, PotentialKind, Side};

/// Complex scalar used throughout.
pub type C = num_complex::Complex64;
