//! Concept-based specifications for vision classifiers, checked in
//! embedding space.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the file formats and the command
//! line use.

// `!(x > y)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod directions;
pub mod embedding;
pub mod error;
pub mod lang;
pub(crate) mod linalg;
pub mod lp;
pub mod oracle;
pub mod regions;
pub mod rep_maps;
pub mod scalar;
pub mod validate;
pub mod verifier;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = embedding::Matrix<f64>;
pub type EmbeddingSet = embedding::EmbeddingSet<f64>;
pub type ColumnStats = embedding::ColumnStats<f64>;
pub type ConceptDirection = directions::ConceptDirection<f64>;
pub type AffineMap = rep_maps::AffineMap<f64>;
pub type RepMap = rep_maps::RepMap<f64>;
pub type BoxRegion = regions::BoxRegion<f64>;
pub type LinearHead = verifier::LinearHead<f64>;
pub type LinearProgram = lp::LinearProgram<f64>;
pub type VerificationContext = verifier::VerificationContext<f64>;
pub type VerificationOutcome = verifier::VerificationOutcome<f64>;
