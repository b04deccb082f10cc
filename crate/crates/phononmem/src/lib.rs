//! Simulation and analysis of a two-mode optical-phonon Raman quantum
//! memory modeled as a time-dependent depolarizing channel.
//!
//! The crate covers the full chain from the phenomenological memory model
//! to simulated photon-counting experiments and their reconstruction:
//!
//! - [`quantum`] — density matrices, process matrices and the small
//!   complex Hermitian linear algebra they need.
//! - [`memory`] — retrieval probability p(τ), the storage channel, Werner
//!   states, detected rates, the thermal/four-wave-mixing noise split and
//!   the cooling / pulse-energy prediction engine.
//! - [`tomography`] — six-state polarization measurements, Poisson count
//!   simulation, linear-inversion oracles, maximum-likelihood state and
//!   process reconstruction, Monte Carlo uncertainties.
//! - [`analysis`] — fidelities, concurrence and the exponential lifetime
//!   fit.
//! - [`harness`] — configuration, presets, counts files, end-to-end
//!   experiment drivers and persistent reports.
//!
//! Every stochastic step derives its stream from one master seed, so any
//! run is reproducible bit for bit; see the `examples/` directory for
//! runnable tours of each capability and the `phononmem` binary for the
//! command-line interface.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod memory;
pub mod quantum;
pub mod tol;
pub mod tomography;

pub use error::{Error, Result};
