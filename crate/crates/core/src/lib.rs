//! Numerical laboratory for the Lorentzian 2-tori `(T², -f(x)² dt² + dx²)`.
//!
//! The crate integrates timelike geodesics in hyperbolic-angle form, computes
//! Lorentzian distances on the universal cover by shooting, certifies
//! timelike poles, finds closed timelike geodesics in a given homology
//! class, and evaluates Busemann functions of vertical rays.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod causal;
mod clairaut;
pub mod dynamics;
pub mod error;
pub mod horocycle;
pub mod lattice;
pub mod ode;
pub mod poles;
pub mod profile;
pub mod quadrature;

pub use causal::{CausalRelation, DistanceOptions, DistanceResult, Maximizer};
pub use dynamics::{GeodesicPath, NullBranch, NullPath, PhaseState, RotationNumbers, StoppingCondition};
pub use error::{Error, Result};
pub use lattice::{ClosedGeodesicResult, HomologyClass};
pub use poles::{CutValue, PoleCertificate, PoleStatus};
pub use profile::{Jet, ProfileFn, ProfileKind};

/// A point `(t, x)` of the universal cover.
pub type Point = (f64, f64);
