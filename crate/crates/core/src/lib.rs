//! Numerical laboratory for planar one-phase Bernoulli free boundary solutions.
//!
//! The crate evaluates the classical global solutions (half-plane, two-plane, wedge,
//! double hairpin, Scherk, disk complement), checks the variational and viscosity
//! notions of solution on sampled fields, extracts and compares free boundaries,
//! and maps solutions to minimal surfaces through the Traizet correspondence.

pub mod cli;
pub mod conformal;
pub mod error;
pub mod geometry;
pub mod io;
pub mod point;
pub mod quad;
pub mod solutions;
pub mod traizet;
pub mod variational;

pub use error::{Error, Result};
pub use point::{Point2, Rect};
pub use solutions::{AnalyticSolution, Evaluator, Family, RigidMotion};
