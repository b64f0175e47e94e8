//! Robust linear estimation by nonsmooth convex optimization.
//!
//! The crate estimates a parameter vector from measurements contaminated by
//! intermittent, arbitrarily large gross errors. It provides the
//! least-absolute-deviation family of estimators (plain, weighted, iteratively
//! reweighted, noise-aware regularized, multivariable sum-of-norms, geometric
//! median), exact optimality/uniqueness certificates for their solutions,
//! computable genericity bounds that predict how many outliers are
//! correctable, and a reproducible Monte Carlo experiment harness.
//!
//! All numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases at the crate root fix the common double-precision case.

pub mod bounds;
pub mod certificates;
pub mod datamodel;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset64 = datamodel::Dataset<f64>;
pub type MultiDataset64 = datamodel::MultiDataset<f64>;
pub type IndexPartition64 = datamodel::IndexPartition<f64>;
pub type Estimate64 = solvers::Estimate<f64>;
pub type RegularizedSolution64 = solvers::RegularizedSolution<f64>;
pub type Certificate64 = certificates::Certificate<f64>;
pub type BoundsReport64 = bounds::BoundsReport<f64>;
