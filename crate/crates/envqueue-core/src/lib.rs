//! Simulation and numerical verification of single-server Markovian queues
//! whose arrival/service rates are modulated by a random environment that is
//! itself slowed down or sped up by the queue length.
//!
//! The joint process `(N, Z)` pairs a queue length `N` with an environment
//! state `Z` (a finite-state jump chain or a reflected diffusion). The
//! environment dynamics at queue level `n` run at speed `beta_n * rho(z)^-n`
//! where `rho(z) = lambda(z)/mu(z)` is the traffic intensity. That scaling
//! makes the stationary law weighted-geometric:
//!
//! ```text
//! pi({n}, dz) = rho(z)^n nu(dz) / Xi,    Xi = integral nu(dz) / (1 - rho(z))
//! ```
//!
//! The crate provides
//! - exact generator-level treatment of the discrete-environment chain
//!   (closed-form invariant vector, balance checks, uniformization,
//!   event-driven simulation),
//! - time-stepped simulation of reflected (jump-)diffusion environments with
//!   boundary local-time accounting, plus the threshold variant where the
//!   environment freezes outside a level-dependent sub-domain,
//! - closed-form stationary analytics (normalizer, layer densities,
//!   marginals) and empirical-vs-analytic comparison utilities,
//! - explicit exponential convergence-rate certificates obtained from
//!   coupling constants, with Monte Carlo harnesses that check every bound
//!   used along the way.

// Guards are written `!(x > 0.0)` on purpose: unlike `x <= 0.0` they also
// catch NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtins;
pub mod cert;
pub mod coupling;
pub mod density;
pub mod discrete;
pub mod emit;
pub mod env;
pub mod error;
pub mod fit;
pub mod joint;
pub mod quad;
pub mod rates;
pub mod sde;
pub mod seed;
pub mod stationary;

pub use error::{Error, Result};
