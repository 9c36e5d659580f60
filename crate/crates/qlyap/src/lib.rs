//! Lyapunov feedback control of quantum density operators.
//!
//! The closed loop drives a state `rho(t)` toward a target `rho_d(t)` under
//! `drho/dt = -i[H0 + f(t) H1, rho]` with the feedback
//! `f = Tr([-iH1, rho] rho_d)`, which makes the squared Hilbert-Schmidt
//! distance `V = Tr[(rho - rho_d)^2] / 2` non-increasing. The crate provides
//! the generator algebra and Bloch coordinates, validated state types,
//! a verified adaptive integrator for the closed loop, stationary-state
//! stability analysis on isospectral orbits, and a batch experiment driver
//! with CSV/JSON output (also exposed as the `qlyap` binary).
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example basis_tour            # generator bases, Bloch maps
//! cargo run --example check_models          # regularity/connectivity checks
//! cargo run --example haar_sampling         # seeded isospectral sampling
//! cargo run --example simulate_qutrit       # batch runs, convergence vs stall
//! cargo run --example census_two_qubit      # stationary-state classification
//! cargo run --example stationary_landscape  # Hessian signatures on the orbit
//! cargo run --example invariant_set_probe   # endpoint structure of stalls
//! cargo run --example track_two_qubit       # tracking non-stationary targets
//! ```
//!
//! # Modules
//!
//! - [`algebra`]: orthonormal Hermitian generator basis, Bloch coordinate
//!   maps, commutators.
//! - [`state`]: density matrices, Hamiltonians, spectrum signatures,
//!   regularity/connectivity reports, Haar sampling, the exceptional
//!   pseudo-pure detector.
//! - [`dynamics`]: the control model, feedback law, extended and reduced
//!   systems, trajectory integration, invariant-set membership, run
//!   classification.
//! - [`stability`]: linearization, tangent frames, stationary-state census,
//!   Hessian signatures, invariant-set probing.
//! - [`integrate`]: the embedded Runge-Kutta pair with dense output that
//!   backs [`dynamics::integrate`].
//! - [`experiment`]: config files, presets, batch drivers, persistence.

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod integrate;
pub mod stability;
pub mod state;

pub use error::{Error, Result};
