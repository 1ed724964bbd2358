//! Positive periodic solutions of the indefinite Minkowski-curvature equation
//!
//! ```text
//! (φ(u'))' + λ a(t) g(u) = 0,    φ(ξ) = ξ / √(1 − ξ²)
//! ```
//!
//! with a sign-changing `T`-periodic weight `a` and a superlinear-at-zero,
//! sublinear-at-infinity nonlinearity `g`.
//!
//! Everything here works on the planar Hamiltonian form
//! `x1' = φ⁻¹(x2)`, `x2' = −f_λ(t, x1)`, where `f_λ` extends `λ a g` by `−u`
//! below zero. The crate is `no_std` and only needs `alloc`; file formats and
//! the command-line front end live in the `mincurv` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod continuation;
pub mod error;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod periodic;
pub mod quad;
pub mod spectrum;
pub mod subharmonic;

pub use error::{Error, Result};
pub use model::{
    phi, phi_inv, phi_inv_prime, phi_prime, CurvatureOperator, Nonlinearity, Problem, Weight,
    WeightForm,
};
pub use ode::{IntegratorConfig, PlanarState};
pub use periodic::{OrbitClass, PeriodicOrbit, SearchWindow, ShootingConfig};
