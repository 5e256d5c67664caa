//! Desk-scale numerical laboratory for moment measures.
//!
//! The crate computes moment-measure representations of 1D probability
//! measures via the dual variational functionals `J` (log-partition minus
//! linear term) and `E` (entropy plus maximal correlation), and provides the
//! surrounding machinery: discrete Legendre conjugates, Gibbs normalization,
//! 1D optimal transport in quantile form, Brascamp-Lieb variance deficits and
//! their optimizer manifold, Prekopa-Leindler condition checks with the
//! sup-convolution triple, and a damped monotone-rearrangement fixed-point
//! solver with a regularization path.
//!
//! Everything operates on uniform grids (`grid::Grid`) carrying scalar fields
//! (`grid::Field`); all values are immutable after construction and every
//! operation is pure.

pub mod convexlab;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod measures;
pub mod momsolve;
pub mod numerics;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{Axis, Field, Grid, Point};
