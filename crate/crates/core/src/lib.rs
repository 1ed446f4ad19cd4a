//! Lateral sums and Stokes-line jumps for `∂t^p u = ∂z^q u` with Cauchy data
//! carrying one singular or branch point.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod data;
pub mod geometry;
pub mod jump;
pub mod kernels;
pub mod lateral;
pub mod quadrature;
pub mod series;

pub use num_complex::Complex64;
