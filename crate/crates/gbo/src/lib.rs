//! Numerical laboratory for strongly interacting multi-solitons of the
//! generalized Benjamin-Ono equation
//!
//! ```text
//!     u_t + (-|D|u + |u|^{p-1} u)_x = 0,      |D| = Fourier multiplier |xi|
//! ```
//!
//! The crate is organized bottom-up:
//!
//! * [`fourier`] - periodic grid, transforms, nonlocal multiplier operators
//! * [`ground`] - solitary-wave profile Q, its tail coefficients and integrals
//! * [`linop`] - the linearization around Q: spectrum, inversion, correction profiles
//! * [`constants`] - interaction constants, asymptotic velocity system, matrix M
//! * [`reduced`] - the reduced ODE for soliton positions and its propagators
//! * [`sim`] - pseudo-spectral time integration of the full PDE
//! * [`diag`] - quantitative cross-checks (energy expansion, separation law, ODE vs PDE)

pub mod constants;
pub mod diag;
pub mod fourier;
pub mod ground;
pub mod linop;
pub mod reduced;
pub mod sim;
