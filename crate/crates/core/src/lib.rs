//! Multivariate theta sums over the integer lattice and their lattice
//! applications.
//!
//! The library computes sums of the form `Θ(B) = Σ_{x ∈ Zⁿ} exp(-⟨Bx, x⟩)`
//! (optionally with an oscillatory phase `cos⟨b, x⟩` or a shift `y`) for a
//! positive definite matrix `B`, by three routes:
//!
//! * an exact product identity turning the sum into the Gaussian expectation
//!   of an explicit log-concave integrand, estimated by seeded Monte Carlo
//!   ([`theta::theta_sum`]);
//! * the reciprocity relation exchanging `B` for `π²B⁻¹` times a determinant
//!   factor ([`theta::theta_shifted`]);
//! * deterministic enumeration of a small ball when `B` dominates
//!   `(γ ln n)·I` ([`theta::theta_smooth`]).
//!
//! On top of these sit three applications: detecting short integer vectors in
//! the kernel of an integer matrix ([`lattice::short_vector_test`]), certified
//! distance intervals to lattices containing `Zⁿ`
//! ([`lattice::distance_interval`]), and exact-law sampling from the discrete
//! Gaussian distribution on a lattice ([`sampler::sample`]).
//!
//! Everything randomized is seeded and reproducible; brute-force oracles for
//! desk-scale cross-checking live in [`oracle`].

// Index loops mirror the matrix formulas they implement, and `!(x > 0.0)`
// deliberately treats NaN as a failed precondition.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod integrand;
pub mod integrator;
pub mod jacobi;
pub mod lattice;
pub mod linalg;
pub mod oracle;
pub mod sampler;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
pub use integrator::{Backend, Estimate};
pub use linalg::{RectMatrix, SpectralBounds, SymMatrix};
pub use theta::{Regime, RegimeReport, ThetaInstance, ThetaResult};
