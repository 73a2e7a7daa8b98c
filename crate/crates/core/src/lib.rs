//! Numerical laboratory for weighted Sobolev embeddings.
//!
//! The crate computes and stress-tests the exponent calculus for embeddings
//! `W^1_p(D, |x|^α) ↪ L_s(D, |x|^α)` on anisotropic Hölder cusp domains:
//!
//! * [`geometry`]: cusp domains `H_g`, graded quadrature grids and integrals
//!   that report whether they are finite or divergent.
//! * [`weights`]: power and tabulated radial weights, Muckenhoupt `A_p` checks,
//!   weighted measures.
//! * [`cuspmap`]: the homeomorphism `φ_a : H_1 → H_g`, its derivative and
//!   Jacobian, and the distortion integrals that decide which exponents it
//!   transfers.
//! * [`exponents`]: closed-form embedding thresholds, exact over the rationals.
//! * [`mollifier`]: smooth convolution with a bump kernel.
//! * [`pde`]: P1 finite elements for `div(w ∇u) = f` with zero boundary data.
//! * [`probe`]: trial-function families that test the sharpness of a threshold.

// `!(x > 0.0)` is how inputs reject NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cuspmap;
pub mod error;
pub mod exponents;
pub mod extended;
pub mod geometry;
pub mod mollifier;
pub mod pde;
pub mod probe;
pub(crate) mod quad;
pub mod weights;

pub use error::{Error, Result};
pub use extended::{Extended, ExtendedReal};
pub use geometry::{CuspDomain, IntegralVerdict, IntegrateConfig, Region, Verdict};
pub use weights::Weight;
