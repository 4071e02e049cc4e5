//! Numerical machinery for boundary unique continuation of Kirchhoff–Love
//! plates.
//!
//! The crate builds the objects that appear in quantitative unique
//! continuation at a clamped boundary and checks their properties on grids:
//! boundary graphs and their extension ([`geometry`]), the flattening
//! conformal map ([`conformal`]), plate coefficients and a clamped solver
//! ([`plate`]), the reflection across a flat boundary ([`reflection`]),
//! Carleman and Hardy weights ([`carleman`]) and three-spheres verifiers
//! ([`threespheres`]).

// `!(a < b)` is used deliberately so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod chart;
pub mod conformal;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod jet;
pub mod plate;
pub mod quadrature;
pub mod reflection;
pub mod sparse;
pub mod stencil;
pub mod threespheres;

pub use error::{Error, Result};
pub use expr::Expr;
pub use grid::{analytic, AnalyticField, Grid, ScalarField};
pub use jet::Jet;
