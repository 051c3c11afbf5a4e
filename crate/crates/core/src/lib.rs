//! Numerical toolkit for the defocusing Ablowitz-Ladik hierarchy in its
//! CMV-matrix formulation.
//!
//! The crate builds CMV-type unitary matrices from Verblunsky coefficients
//! (finite, periodic, and truncated half-line sequences), evaluates the
//! conserved quantities `K_n` of the hierarchy, differentiates them with the
//! Wirtinger calculus that underlies the Poisson bracket on coefficient
//! space, and verifies every Lax-pair identity of the hierarchy as an
//! entrywise residual. A fixed-step integrator drives the Hamiltonian flows
//! and monitors spectral invariants along trajectories.
//!
//! Organization:
//! - [`coeffs`]: coefficient sequences, boundary conventions, validation.
//! - [`matrix`]: dense complex matrices (the only linear-algebra backend).
//! - [`cmv`]: Θ blocks, finite CMV, extended-CMV entry oracle, Floquet
//!   restrictions, plus-projection, band-shape predicates.
//! - [`poisson`]: Wirtinger gradients, the bracket, closed-form and
//!   finite-difference gradients of the `K_n`.
//! - [`hamiltonians`]: `K_n` in all three settings, `K_0`, the discriminant,
//!   and characteristic polynomials via Newton's identities.
//! - [`lax`]: residual verification of the Lax-pair identities and the
//!   structural (stair-shape) lemmas they rest on.
//! - [`flows`]: RK4 integration of the Hamiltonian flows with drift reports.
//! - [`opuc`]: Szegő recursion and transfer matrices as an independent
//!   cross-check path.

pub mod cmv;
pub mod coeffs;
pub mod flows;
pub mod hamiltonians;
pub mod lax;
pub mod matrix;
pub mod opuc;
pub mod poisson;
pub mod rng;

pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C64 = Complex64;

/// Absolute tolerance for entries that must vanish structurally.
pub const STRUCTURAL_ZERO_TOL: f64 = 1e-13;

/// Default residual threshold for identities checked with analytic gradients.
pub const ANALYTIC_TOL: f64 = 1e-10;

/// Default residual threshold for identities checked with finite differences.
pub const FD_TOL: f64 = 1e-5;

/// Default central-difference step for Wirtinger gradients.
pub const FD_STEP: f64 = 1e-6;
