//! Numerical laboratory for Bernstein-type gradient estimates of coupled
//! weighted heat systems
//!
//! ```text
//! u_t = χ² Δ_f u - v          u_t = χ² Δ_f u + a e^v
//! v_t = χ² Δ_f v - u          v_t = χ² Δ_f v + b e^u
//! ```
//!
//! on discrete weighted surfaces, static or evolving under the local Ricci
//! flow `∂_t g = -2 χ² Ric`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of immutable snapshots; IO, scenario files and the CLI live in
//! the `bernlab` crate.
//!
//! Module map:
//! - [`manifold`]: grids and weighted graphs, weights `f`, cutoffs `χ`,
//!   curvature certificates, metric flow.
//! - [`calculus`]: gradient, Hessian, drift Laplacian, identity residuals and
//!   the pointwise inequalities used by the estimates.
//! - [`constants`]: Φ/Ψ/Λ/Γ fields and the bound constants with their gates.
//! - [`dynamics`]: time integration and trajectories.
//! - [`verify`]: bound checks, maximum-principle checks, refinement studies.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments, clippy::large_enum_variant)]

extern crate alloc;

pub mod calculus;
pub mod constants;
pub mod dynamics;
mod error;
pub mod linsolve;
pub mod manifold;
pub mod math;
pub mod verify;

pub use error::{Error, Result};
