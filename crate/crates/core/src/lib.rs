//! Numerical differential geometry for frame-based general relativity.
//!
//! The crate evaluates curvature through orthonormal coframes and the Cartan
//! structural equations, reduces U(1)-symmetric four-metrics to a 2+1
//! Einstein–wave-map system, evaluates the reduced ADM constraints, evolution
//! equations and Weyl fields on a periodic grid, and provides flat-space wave
//! kernels (Kirchhoff, Hadamard descent, Duhamel).
//!
//! Derivatives of analytic fields are exact: every field can be expanded into a
//! truncated multivariate Taylor series ([`jet::Jet`]) at a point, and all
//! geometric quantities are computed in that arithmetic. Closure-only fields
//! fall back to fourth-order finite differences.
//!
//! The crate is `no_std` and needs only `alloc`.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod adm;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod field;
pub mod fixtures;
pub mod forms;
pub mod jet;
pub mod linalg;
pub mod math;
pub mod quadrature;
pub mod quasi_local;
pub mod reduction;
pub mod wave;

pub use error::{Error, Result};
pub use field::{Chart, FieldRef, ScalarField};
pub use forms::{CoFrame, FormField, MetricField};
pub use jet::{Jet, JetCtx, JetLayout};

/// Crate version, recorded in report metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
