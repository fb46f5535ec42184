use thiserror::Error;

use crate::dynamics::GeodesicPath;
use crate::lattice::HomologyClass;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("stop condition not reached within proper-time budget {budget}")]
    StopUnreachable { budget: f64, partial: Box<GeodesicPath> },

    #[error("integrator failed: {0}")]
    Integrator(String),

    #[error("no connecting geodesic found for a chronological pair {p:?} -> {q:?}")]
    NoConnectingGeodesic { p: (f64, f64), q: (f64, f64) },

    #[error("class ({}, {}) is not in the interior of the stable time cone", .0.k_t, .0.k_x)]
    NoTimelikeClass(HomologyClass),

    #[error("solver inconsistency: {0}")]
    Inconsistent(String),
}

impl Error {
    /// Errors that signal a numerical contract was broken, as opposed to bad input.
    pub fn is_solver_inconsistency(&self) -> bool {
        matches!(
            self,
            Error::NoConnectingGeodesic { .. } | Error::Inconsistent(_) | Error::Integrator(_)
        )
    }
}
