//! Numerical laboratory for the dissipative dynamics of 1D log-gases
//! (generalized Dyson Brownian motion).
//!
//! The crate is organized around four computational pillars:
//!
//! * [`sde`] — finite-N particle simulation of the coupled eigenvalue SDE
//!   with Monte Carlo fluctuation statistics;
//! * [`hydro`] + [`support`] — the hydrodynamic (McKean–Vlasov) limit via
//!   the moment hierarchy and complex-Burgers characteristics, plus
//!   tracking of the time-evolving support edges;
//! * [`fluctuation`] — Gaussian fluctuation covariance kernels: closed
//!   forms, the G-map/analytic-continuation path, and transport along
//!   characteristics, all cross-checked against each other;
//! * [`ou`] — the Ornstein–Uhlenbeck spectral representation of the
//!   stationary fluctuation field.
//!
//! [`potential`] and [`transforms`] hold the shared analytic toolbox
//! (potentials, equilibrium closed forms, Stieltjes/Hilbert transforms),
//! and [`verify`] bundles the cross-module consistency checks run by the
//! CLI `verify` subcommand.

pub mod error;
pub mod fluctuation;
pub mod hydro;
pub mod ou;
pub mod potential;
pub mod quad;
pub mod rk;
pub mod sde;
pub mod support;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
