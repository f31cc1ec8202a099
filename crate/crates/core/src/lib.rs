//! Classical field dynamics for the gauge theory of volume-preserving
//! diffeomorphisms of an inner Minkowski space.
//!
//! Gauge fields take values in the Lie algebra of divergence-free vector
//! fields on a four-dimensional inner space with metric
//! `eta = diag(-1,1,1,1)`. The inner space is represented purely spectrally:
//! every field carries, per spacetime grid point, one complex coefficient
//! per retained inner-momentum mode `K`. Products of fields are truncated
//! convolutions over the mode lattice, which makes retained coefficients
//! exact and lets the algebraic identities of the theory (bracket closure,
//! Bianchi, gauge covariance, constraint preservation) hold to rounding.
//!
//! Conventions: spacetime indices `mu, nu` and inner indices `alpha, beta`
//! both run over `0..4` and are raised/lowered with `eta = diag(-1,1,1,1)`.
//! `K_alpha` denotes lower-index inner momentum components; `-K^2 =
//! K_0^2 - |K_vec|^2` is positive on timelike modes.
//!
//! Module map:
//! - [`inner_space`]: mode lattice, spectral fields, dealiased products,
//!   the Lie bracket, divergence-free projection, scalar product.
//! - [`regulator`]: cone-cutoff integrals `Omega_n` and cone classification.
//! - [`gauge_kinematics`]: gauge field, field strength, gauge variations,
//!   covariant derivative, Bianchi identities, inner scale transformation.
//! - [`lagrangian`]: Lagrangian/action, field equations, self-coupling
//!   currents, stress tensors, four-momentum, the free-scalar Noether probe.
//! - [`hamiltonian`]: axial-gauge reduction, constraint solvers, mode
//!   kinetics `M(K)`/`C(K)`, the reduced Hamiltonian, time evolution.
//! - [`harness`]: run configuration, check suites, deterministic CSV/JSON
//!   emission, exit-code contract.

pub mod error;
pub mod grid;
pub mod inner_space;
pub mod regulator;
pub mod gauge_kinematics;
pub mod lagrangian;
pub mod matter;
pub mod hamiltonian;
pub mod harness;

pub use error::{Error, Result};

/// Minkowski metric diagonal, inner and spacetime alike.
pub const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

/// Artifact version reported by the CLI and embedded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
