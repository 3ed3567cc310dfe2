//! Discrete pluripotential theory on the flat torus.
//!
//! Potentials live on a periodic lattice; a background form is a symmetric
//! matrix field `G`, and a function `u` is θ-psh when `G + D²u` is positive
//! semidefinite at every node. On top of that the crate provides mixed
//! Monge–Ampère products with their non-pluripolar restriction, envelopes,
//! volumes of classes, and a solver for degenerate complex Monge–Ampère
//! type equations.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod ma;
pub mod qpsh;
pub mod sampling;
pub mod scalar;
pub mod solver;
pub mod verify;
pub mod volumes;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use grid::{Direction, GridTorus};
pub use scalar::Scalar;

pub type SymMat = linalg::SymMat<f64>;
pub type BackgroundForm = geometry::BackgroundForm<f64>;
pub type ReferenceMetric = geometry::ReferenceMetric<f64>;
pub type VolumeForm = geometry::VolumeForm<f64>;
pub type QPshFunction = qpsh::QPshFunction<f64>;
pub type DiscreteMeasure = ma::DiscreteMeasure<f64>;
pub type EnvelopeResult = envelope::EnvelopeResult<f64>;
pub type SolverSetup = solver::SolverSetup<f64>;
pub type SolveResult = solver::SolveResult<f64>;
pub type VolumeReport = volumes::VolumeReport<f64>;
