//! Boundary-element building blocks for the nonlinear Molodensky problem.
//!
//! The single layer potential uses the negative kernel
//! `V mu(x) = -1/(4 pi) * int mu(y) / |x - y| ds_y` everywhere in this crate.
//! Stored Galerkin matrices of `V` are negated so they are positive definite.
//!
//! The crate is `no_std` with `alloc` when the default `std` feature is off.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assembly;
pub mod driver;
pub mod error;
pub mod field;
pub mod kernels;
pub mod math;
pub mod mesh;
pub mod quadrature;
pub mod smoother;
pub mod solvers;
pub mod space;

pub use error::{Error, Result};

/// 3D vector type used throughout.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix type used throughout.
pub type Mat3 = nalgebra::Matrix3<f64>;
