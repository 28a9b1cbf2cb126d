//! Pseudospectral solver for Navier–Stokes type equations generated by the
//! Dolbeault complex on the flat torus `T^{2n} ≅ ℂⁿ / (2πℤ)^{2n}`.
//!
//! Unknowns are (0,q)-forms `u` (velocity) and (0,q−1)-forms `p` (pressure)
//! satisfying
//!
//! ```text
//! ∂_t u + μ Δ^q u + N^q u + ∂̄^{q−1} p = f,   (∂̄^{q−1})* u = 0,   (∂̄^{q−2})* p = 0,
//! ```
//!
//! with `N^q u = M₁(∂̄u, u) + ∂̄ M₂(u, u)`. The crate provides the operator
//! calculus ([`dolbeault`]), the constrained time integrator ([`dynamics`]),
//! Sobolev and Bochner–Sobolev norms ([`norms`]), a dense-matrix oracle for the
//! operators ([`reference`]) and persistence ([`io`]).

pub mod dolbeault;
pub mod dynamics;
pub mod error;
pub mod forms;
pub mod initial;
pub mod io;
pub mod norms;
pub mod reference;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use forms::{BilinearSpec, FormField, MultiIndex};
pub use spectral::{Representation, SpectralGrid, C64};
