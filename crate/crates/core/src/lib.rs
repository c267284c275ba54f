//! Stationary 2-varifolds in R^4.
//!
//! The building blocks are the minimal surfaces `U^{d,a0}` swept over the
//! Clifford cone, plane annuli spanned by the two rulings of that cone, and
//! weighted sums of them. On top of these sit the mini-layer, layer and full
//! shell constructions, plus the tools used to check them numerically:
//! first variation by quadrature, mass and density profiles, blow-ups and
//! tangent-direction band classification.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod constructions;
pub mod field;
pub mod geom4;
pub mod minimal_surface;
pub mod quadrature;
pub mod varifold;

mod error;

pub use error::{Error, Result};
pub use geom4::{Mat4, Vec4};
