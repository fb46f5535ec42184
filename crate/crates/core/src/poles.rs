//! Timelike pole certificates, the cut function and injectivity probes for
//! the exponential map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{self, DistanceOptions};
use crate::dynamics::{self, FlowOptions, GeodesicPath, PhaseState, StoppingCondition};
use crate::error::{Error, Result};
use crate::profile::ProfileFn;
use crate::Point;

/// Defect `|d(p, γ(τ)) - τ|` tolerated before a geodesic counts as
/// non-maximising.
pub const DEFECT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Half-width of the symmetric initial-angle grid.
    pub psi_span: f64,
    pub defect_tol: f64,
    /// Integrator tolerance for Jacobi fields and probe points.
    pub flow_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            psi_span: 2.0,
            defect_tol: DEFECT_TOL,
            flow_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefutationReason {
    JacobiZero,
    DistanceDefect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PoleStatus {
    Certified,
    /// The first failing angle and the proper time of its failure.
    Refuted {
        psi0: f64,
        tau: f64,
        reason: RefutationReason,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleEvidence {
    pub psi0: f64,
    pub first_jacobi_zero: Option<f64>,
    /// `max |d(p, γ(τ)) - τ|` over the probe times.
    pub max_defect: f64,
    /// Probe time of that maximum.
    pub defect_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleCertificate {
    pub point: Point,
    pub horizon: f64,
    pub n_angles: usize,
    pub options: CertifyOptions,
    pub status: PoleStatus,
    pub evidence: Vec<AngleEvidence>,
}

impl PoleCertificate {
    pub fn is_certified(&self) -> bool {
        self.status == PoleStatus::Certified
    }

    pub fn jacobi_zero_count(&self) -> usize {
        self.evidence.iter().filter(|e| e.first_jacobi_zero.is_some()).count()
    }

    pub fn max_defect(&self) -> f64 {
        self.evidence.iter().map(|e| e.max_defect).fold(0.0, f64::max)
    }
}

/// Symmetric grid of `n` initial angles on `[-span, span]`.
pub fn angle_grid(span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64).collect()
}

fn probe_defect(f: &ProfileFn, p: Point, path: &GeodesicPath, tau: f64) -> Result<f64> {
    let q = path.state_at_tau(path.start().tau + tau).point();
    let d = causal::distance(f, p, q, &DistanceOptions::value_only())?.value;
    Ok((d - tau).abs())
}

/// Finite-horizon, finite-grid evidence that `p` is a timelike pole: no
/// Jacobi zero on `(0, T]` along any sampled geodesic, and every sampled
/// geodesic still realises the distance at `τ ∈ {T/4, T/2, T}`.
pub fn certify_pole(f: &ProfileFn, p: Point, horizon: f64, n_angles: usize) -> Result<PoleCertificate> {
    certify_pole_with(f, p, horizon, n_angles, CertifyOptions::default())
}

pub fn certify_pole_with(
    f: &ProfileFn,
    p: Point,
    horizon: f64,
    n_angles: usize,
    options: CertifyOptions,
) -> Result<PoleCertificate> {
    if !(horizon > 0.0) || n_angles < 8 {
        return Err(Error::Domain("certification needs T > 0 and at least 8 angles".into()));
    }
    let flow_opts = FlowOptions::with_tol(options.flow_tol);
    let probes = [0.25 * horizon, 0.5 * horizon, horizon];
    let evidence: Vec<AngleEvidence> = angle_grid(options.psi_span, n_angles)
        .into_par_iter()
        .map(|psi0| {
            let s0 = PhaseState::at(p, psi0);
            let zeros = dynamics::jacobi_zeros(f, s0, horizon, &flow_opts)?;
            let path = dynamics::flow(f, s0, StoppingCondition::ProperTime(horizon), &flow_opts)?;
            let mut max_defect = 0.0;
            let mut defect_tau = probes[0];
            for &tau in &probes {
                let d = probe_defect(f, p, &path, tau)?;
                if d > max_defect {
                    max_defect = d;
                    defect_tau = tau;
                }
            }
            Ok(AngleEvidence {
                psi0,
                first_jacobi_zero: zeros.first().copied(),
                max_defect,
                defect_tau,
            })
        })
        .collect::<Result<_>>()?;

    let status = evidence
        .iter()
        .find_map(|e| match e.first_jacobi_zero {
            Some(tau) => Some(PoleStatus::Refuted {
                psi0: e.psi0,
                tau,
                reason: RefutationReason::JacobiZero,
            }),
            None if e.max_defect > options.defect_tol => Some(PoleStatus::Refuted {
                psi0: e.psi0,
                tau: e.defect_tau,
                reason: RefutationReason::DistanceDefect,
            }),
            None => None,
        })
        .unwrap_or(PoleStatus::Certified);

    Ok(PoleCertificate {
        point: p,
        horizon,
        n_angles,
        options,
        status,
        evidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CutValue {
    Finite {
        value: f64,
    },
    /// No distance defect was found up to the horizon.
    Unbounded {
        horizon: f64,
    },
}

impl CutValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            CutValue::Finite { value } => Some(value),
            CutValue::Unbounded { .. } => None,
        }
    }
}

/// Coarse probes per horizon before bisection.
const CUT_PROBES: usize = 16;

/// The cut function `s(v) = sup{τ : d(p, γ_v(τ)) = τ}` along the geodesic
/// with initial angle `psi0`, explored up to `horizon`.
pub fn cut_value(f: &ProfileFn, p: Point, psi0: f64, horizon: f64) -> Result<CutValue> {
    if !(horizon > 0.0) {
        return Err(Error::Domain("cut value horizon must be positive".into()));
    }
    let path = dynamics::flow(
        f,
        PhaseState::at(p, psi0),
        StoppingCondition::ProperTime(horizon),
        &FlowOptions::with_tol(1e-12),
    )?;
    let defect = |tau: f64| probe_defect(f, p, &path, tau);
    let mut prev = 0.0;
    for i in 1..=CUT_PROBES {
        let tau = horizon * i as f64 / CUT_PROBES as f64;
        if defect(tau)? > DEFECT_TOL {
            let (mut lo, mut hi) = (prev, tau);
            while hi - lo > 1e-10 * horizon.max(1.0) {
                let m = 0.5 * (lo + hi);
                if defect(m)? > DEFECT_TOL {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            return Ok(CutValue::Finite { value: lo });
        }
        prev = tau;
    }
    Ok(CutValue::Unbounded { horizon })
}

/// Two distinct grid geodesics from the same point meeting again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub psi_a: f64,
    pub tau_a: f64,
    pub psi_b: f64,
    pub tau_b: f64,
    pub point: Point,
}

/// Samples the exponential map `(ψ₀, τ) ↦ γ_{ψ₀}(τ)` at `p` and reports every
/// pair of distinct grid geodesics that meet again before the largest
/// probed proper time.
///
/// All geodesics share `p`, so a collision is a transversal crossing of two
/// of them away from `p`; crossings are located on the dense output, which
/// refines the grid locally.
pub fn exp_injectivity_probe(f: &ProfileFn, p: Point, angles: &[f64], taus: &[f64]) -> Result<Vec<Collision>> {
    let horizon = taus.iter().copied().fold(0.0, f64::max);
    if !(horizon > 0.0) {
        return Ok(Vec::new());
    }
    let opts = FlowOptions::with_tol(1e-12);
    let paths: Vec<GeodesicPath> = angles
        .par_iter()
        .map(|&psi| dynamics::flow(f, PhaseState::at(p, psi), StoppingCondition::ProperTime(horizon), &opts))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..paths.len())
        .flat_map(|i| (i + 1..paths.len()).map(move |j| (i, j)))
        .collect();
    const SPATIAL_TOL: f64 = 1e-6;
    let found: Vec<Vec<Collision>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&paths[i], &paths[j]);
            causal::crossing_times(a, b)
                .into_iter()
                .filter_map(|t| {
                    let (sa, sb) = (a.state_at_t(t), b.state_at_t(t));
                    let close = (sa.x - sb.x).abs() <= SPATIAL_TOL;
                    let away = (sa.t - p.0).abs() > SPATIAL_TOL || (sa.x - p.1).abs() > SPATIAL_TOL;
                    (close && away).then_some(Collision {
                        psi_a: angles[i],
                        tau_a: sa.tau - a.start().tau,
                        psi_b: angles[j],
                        tau_b: sb.tau - b.start().tau,
                        point: sa.point(),
                    })
                })
                .collect()
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_points_are_poles() {
        let f = ProfileFn::constant(1.0).unwrap();
        let cert = certify_pole(&f, (0.0, 0.3), 10.0, 8).unwrap();
        assert!(cert.is_certified(), "{:?}", cert.status);
        assert_eq!(cert.jacobi_zero_count(), 0);
        assert!(cert.max_defect() <= DEFECT_TOL);
    }

    #[test]
    fn flat_cut_value_is_unbounded() {
        let f = ProfileFn::constant(1.0).unwrap();
        assert_eq!(
            cut_value(&f, (0.0, 0.0), 0.7, 20.0).unwrap(),
            CutValue::Unbounded { horizon: 20.0 }
        );
    }

    #[test]
    fn flat_exponential_map_is_injective() {
        let f = ProfileFn::constant(1.0).unwrap();
        let angles = angle_grid(2.0, 12);
        assert!(exp_injectivity_probe(&f, (0.0, 0.0), &angles, &[5.0])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn focusing_point_is_refuted() {
        // Minimum of the cosine profile: the vertical geodesic focuses.
        let f = ProfileFn::cosine(1.5, 0.4).unwrap();
        let cert = certify_pole(&f, (0.0, 0.5), 5.0, 8).unwrap();
        assert!(matches!(cert.status, PoleStatus::Refuted { .. }));
        assert!(cut_value(&f, (0.0, 0.5), 0.0, 5.0).unwrap().finite().is_some());
    }
}
