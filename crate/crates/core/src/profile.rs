//! Periodic warping profiles `f` generating the metric `-f(x)^2 dt^2 + dx^2`.
//!
//! Every profile has period 1 in `x`. Values and the first two derivatives are
//! returned in closed form so that the geodesic and Jacobi equations never
//! need numerical differentiation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Value of a profile and its first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `f ≡ c`, the flat metric.
    Constant { c: f64 },
    /// `f(x) = a + b cos(2πx)`.
    Cosine { a: f64, b: f64 },
    /// Low plateau `1/2` on `[-ε/4, ε/4]`, high plateau `2` on `[ε/2, 1-ε/2]`,
    /// joined by C∞ transitions.
    TheoremPlateau { epsilon: f64 },
}

/// A closed-form 1-periodic profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFn {
    kind: ProfileKind,
    f_min: f64,
    f_max: f64,
    max_locus: Vec<(f64, f64)>,
    null_period: f64,
}

const LOW: f64 = 0.5;
const HIGH: f64 = 2.0;

impl ProfileFn {
    pub fn new(kind: ProfileKind) -> Result<Self> {
        let (f_min, f_max, max_locus) = match kind {
            ProfileKind::Constant { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::Domain(format!("constant profile needs c > 0, got {c}")));
                }
                (c, c, vec![(0.0, 1.0)])
            }
            ProfileKind::Cosine { a, b } => {
                if !(a.is_finite() && b.is_finite() && a > b.abs()) {
                    return Err(Error::Domain(format!("cosine profile needs a > |b|, got a={a}, b={b}")));
                }
                let locus = if b > 0.0 {
                    vec![(0.0, 0.0)]
                } else if b < 0.0 {
                    vec![(0.5, 0.5)]
                } else {
                    vec![(0.0, 1.0)]
                };
                (a - b.abs(), a + b.abs(), locus)
            }
            ProfileKind::TheoremPlateau { epsilon } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(Error::Domain(format!(
                        "plateau profile needs 0 < epsilon < 1, got {epsilon}"
                    )));
                }
                (LOW, HIGH, vec![(epsilon / 2.0, 1.0 - epsilon / 2.0)])
            }
        };
        let mut profile = ProfileFn {
            kind,
            f_min,
            f_max,
            max_locus,
            null_period: f64::NAN,
        };
        profile.null_period = profile.cell_inverse_integral(1.0);
        Ok(profile)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(ProfileKind::Constant { c })
    }

    pub fn cosine(a: f64, b: f64) -> Result<Self> {
        Self::new(ProfileKind::Cosine { a, b })
    }

    /// The profile used to build tori whose timelike poles fill all but an
    /// `epsilon` fraction of the volume.
    pub fn theorem_plateau(epsilon: f64) -> Result<Self> {
        Self::new(ProfileKind::TheoremPlateau { epsilon })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Closed intervals of `[0, 1)` on which `f = f_max`.
    pub fn max_locus(&self) -> &[(f64, f64)] {
        &self.max_locus
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, ProfileKind::Constant { .. })
            || matches!(self.kind, ProfileKind::Cosine { b, .. } if b == 0.0)
    }

    /// Whether `x` (any lift) lies in the maximum locus, up to `tol`.
    pub fn is_max_point(&self, x: f64, tol: f64) -> bool {
        let u = x.rem_euclid(1.0);
        self.max_locus.iter().any(|&(lo, hi)| {
            (u >= lo - tol && u <= hi + tol)
                || (u - 1.0 >= lo - tol && u - 1.0 <= hi + tol)
                || (u + 1.0 >= lo - tol && u + 1.0 <= hi + tol)
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).value
    }

    /// Value and exact first and second derivatives at any real `x`.
    pub fn eval(&self, x: f64) -> Jet {
        match self.kind {
            ProfileKind::Constant { c } => Jet {
                value: c,
                d1: 0.0,
                d2: 0.0,
            },
            ProfileKind::Cosine { a, b } => {
                let phase = TAU * (x - x.round());
                let (s, c) = phase.sin_cos();
                Jet {
                    value: a + b * c,
                    d1: -b * TAU * s,
                    d2: -b * TAU * TAU * c,
                }
            }
            ProfileKind::TheoremPlateau { epsilon } => plateau_eval(epsilon, x.rem_euclid(1.0)),
        }
    }

    /// `f_max - f(x)`, evaluated without cancellation next to the maximum.
    pub fn deficit(&self, x: f64) -> f64 {
        match self.kind {
            ProfileKind::Constant { .. } => 0.0,
            ProfileKind::Cosine { b, .. } => {
                // Offsets from the nearest maximum are exact, so the deficit
                // keeps full relative precision right next to it.
                let y = x - x.round();
                if b >= 0.0 {
                    let s = (PI * y).sin();
                    2.0 * b * s * s
                } else {
                    let s = (PI * (0.5 - y.abs())).sin();
                    -2.0 * b * s * s
                }
            }
            ProfileKind::TheoremPlateau { epsilon } => {
                let w = epsilon / 4.0;
                let u = x.rem_euclid(1.0);
                let span = HIGH - LOW;
                if u <= w || u >= 1.0 - w {
                    span
                } else if u >= 2.0 * w && u <= 1.0 - 2.0 * w {
                    0.0
                } else if u < 2.0 * w {
                    // 1 - S(s) = S(1 - s).
                    span * smooth_step((2.0 * w - u) / w).0
                } else {
                    span * smooth_step((u - (1.0 - 2.0 * w)) / w).0
                }
            }
        }
    }

    /// The first point of the maximum locus reached from `x` moving in
    /// `direction` (`x` itself when it lies in the locus).
    pub fn next_max_point(&self, x: f64, direction: f64) -> f64 {
        let mut best = if direction > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        for &(lo, hi) in &self.max_locus {
            let m = (x - lo).floor();
            if x >= lo + m && x <= hi + m {
                return x;
            }
            let candidate = if direction > 0.0 {
                lo + (x - lo).ceil()
            } else {
                hi + (x - hi).floor()
            };
            best = if direction > 0.0 {
                best.min(candidate)
            } else {
                best.max(candidate)
            };
        }
        best
    }

    /// Largest spatial displacement an integrator step may take from `x`
    /// without stepping over a feature of the profile.
    pub fn safe_dx(&self, x: f64, direction: f64) -> f64 {
        match self.kind {
            ProfileKind::Constant { .. } => f64::INFINITY,
            ProfileKind::Cosine { b: 0.0, .. } => f64::INFINITY,
            ProfileKind::Cosine { .. } => 0.05,
            ProfileKind::TheoremPlateau { epsilon } => {
                let w = epsilon / 4.0;
                let u = x.rem_euclid(1.0);
                // Breakpoints of the piecewise description, in increasing order.
                let breaks = [-w, w, 2.0 * w, 1.0 - 2.0 * w, 1.0 - w, 1.0 + w];
                let in_blend = (u > w && u < 2.0 * w) || (u > 1.0 - 2.0 * w && u < 1.0 - w);
                if in_blend || direction == 0.0 {
                    return w / 4.0;
                }
                let to_edge = if direction > 0.0 {
                    breaks
                        .iter()
                        .map(|b| b - u)
                        .filter(|d| *d > 1e-12)
                        .fold(f64::INFINITY, f64::min)
                } else {
                    breaks
                        .iter()
                        .map(|b| u - b)
                        .filter(|d| *d > 1e-12)
                        .fold(f64::INFINITY, f64::min)
                };
                to_edge + w / 4.0
            }
        }
    }

    /// `∫₀¹ dx / f(x)`, the coordinate time a light ray needs to cross one period.
    pub fn null_period(&self) -> f64 {
        self.null_period
    }

    /// `∫_a^b dx / f(x)` for arbitrary lifts `a`, `b`.
    pub fn inverse_integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    fn antiderivative(&self, x: f64) -> f64 {
        let n = x.floor();
        n * self.null_period + self.cell_inverse_integral(x - n)
    }

    /// `∫₀^u dx / f` for `u ∈ [0, 1]`, split at the profile's breakpoints.
    fn cell_inverse_integral(&self, u: f64) -> f64 {
        match self.kind {
            ProfileKind::Constant { c } => u / c,
            ProfileKind::Cosine { b: 0.0, .. } => u / self.f_max,
            ProfileKind::Cosine { .. } => {
                let (v, _) = quadrature::integrate(|x| 1.0 / self.value(x), 0.0, u, 1e-13);
                v
            }
            ProfileKind::TheoremPlateau { epsilon } => {
                let w = epsilon / 4.0;
                let pieces = [0.0, w, 2.0 * w, 1.0 - 2.0 * w, 1.0 - w, 1.0];
                let mut total = 0.0;
                for win in pieces.windows(2) {
                    let lo = win[0];
                    let hi = win[1].min(u);
                    if hi <= lo {
                        break;
                    }
                    let mid = 0.5 * (win[0] + win[1]);
                    let jet = plateau_eval(epsilon, mid);
                    let is_const = jet.d1 == 0.0 && jet.d2 == 0.0;
                    total += if is_const {
                        (hi - lo) / jet.value
                    } else {
                        quadrature::integrate(|x| 1.0 / plateau_eval(epsilon, x).value, lo, hi, 1e-14).0
                    };
                }
                total
            }
        }
    }
}

/// Returns the C∞ step `S` on `[0, 1]` with its first two derivatives,
/// `S(s) = φ(s) / (φ(s) + φ(1 - s))`, `φ(s) = exp(-1/s)`.
pub(crate) fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let r = 1.0 - s;
    // S = σ(w) with w = 1/r - 1/s.
    let w = 1.0 / r - 1.0 / s;
    let sigma = if w >= 0.0 {
        1.0 / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        e / (1.0 + e)
    };
    let e = (-w.abs()).exp();
    let q = e / ((1.0 + e) * (1.0 + e)); // σ(1 - σ)
    if q == 0.0 {
        return (sigma, 0.0, 0.0);
    }
    let dw = 1.0 / (r * r) + 1.0 / (s * s);
    let d2w = 2.0 / (r * r * r) - 2.0 / (s * s * s);
    let d1 = q * dw;
    let d2 = q * (1.0 - 2.0 * sigma) * dw * dw + q * d2w;
    (sigma, d1, d2)
}

fn plateau_eval(epsilon: f64, u: f64) -> Jet {
    let w = epsilon / 4.0;
    let span = HIGH - LOW;
    let constant = |value| Jet {
        value,
        d1: 0.0,
        d2: 0.0,
    };
    if u <= w || u >= 1.0 - w {
        constant(LOW)
    } else if u >= 2.0 * w && u <= 1.0 - 2.0 * w {
        constant(HIGH)
    } else if u < 2.0 * w {
        let (s, ds, d2s) = smooth_step((u - w) / w);
        Jet {
            value: LOW + span * s,
            d1: span * ds / w,
            d2: span * d2s / (w * w),
        }
    } else {
        let (s, ds, d2s) = smooth_step((1.0 - w - u) / w);
        Jet {
            value: LOW + span * s,
            d1: -span * ds / w,
            d2: span * d2s / (w * w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_is_flat() {
        let f = ProfileFn::constant(1.0).unwrap();
        assert_eq!(
            f.eval(0.37),
            Jet {
                value: 1.0,
                d1: 0.0,
                d2: 0.0
            }
        );
    }

    #[test]
    fn plateau_values() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        assert_eq!(f.value(0.0), 0.5);
        assert_eq!(f.value(0.5), 2.0);
        assert_eq!(f.value(-0.1), 0.5);
        assert_eq!(f.value(0.3), 2.0);
        let blend = f.value(0.20);
        assert!(blend > 0.5 && blend < 2.0);
        assert_eq!(f.f_min(), 0.5);
        assert_eq!(f.f_max(), 2.0);
    }

    #[test]
    fn plateau_widths() {
        for (eps, width) in [(0.1, 0.9), (0.9, 0.1)] {
            let f = ProfileFn::theorem_plateau(eps).unwrap();
            let (lo, hi) = f.max_locus()[0];
            assert!(((hi - lo) - width).abs() < 1e-15);
            assert_eq!(f.value(lo), 2.0);
            assert_eq!(f.value(hi), 2.0);
            assert_eq!(f.value(eps / 4.0), 0.5);
            assert_eq!(f.value(-eps / 4.0), 0.5);
        }
    }

    #[test]
    fn plateau_blend_is_monotone() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let mut prev = f.value(0.125);
        for i in 1..=10_000 {
            let x = 0.125 + 0.125 * i as f64 / 10_000.0;
            let v = f.value(x);
            assert!(v >= prev, "rising blend not monotone at {x}");
            prev = v;
        }
        let mut prev = f.value(0.75);
        for i in 1..=10_000 {
            let x = 0.75 + 0.125 * i as f64 / 10_000.0;
            let v = f.value(x);
            assert!(v <= prev, "falling blend not monotone at {x}");
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        for eps in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(ProfileFn::theorem_plateau(eps), Err(Error::Domain(_))));
        }
        assert!(ProfileFn::constant(0.0).is_err());
        assert!(ProfileFn::cosine(0.4, 0.4).is_err());
    }

    #[test]
    fn null_period_of_constants() {
        assert_eq!(ProfileFn::constant(2.0).unwrap().null_period(), 0.5);
        assert_eq!(ProfileFn::constant(1.0).unwrap().null_period(), 1.0);
    }

    #[test]
    fn inverse_integral_spans_cells() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let p = f.null_period();
        assert!((f.inverse_integral(0.0, 3.0) - 3.0 * p).abs() < 1e-12);
        assert!((f.inverse_integral(-1.25, 1.75) - 3.0 * p).abs() < 1e-12);
        assert!((f.inverse_integral(0.3, 0.6) - 0.15).abs() < 1e-14);
        assert!((f.inverse_integral(0.6, 0.3) + 0.15).abs() < 1e-14);
    }

    #[test]
    fn max_locus_membership() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        assert!(f.is_max_point(0.5, 0.0));
        assert!(f.is_max_point(3.25, 0.0));
        assert!(!f.is_max_point(0.2, 1e-9));
        let c = ProfileFn::cosine(1.5, 0.4).unwrap();
        assert!(c.is_max_point(2.0, 1e-12));
        assert!(c.is_max_point(0.999_999_999_999_9, 1e-12));
        assert!(!c.is_max_point(0.5, 1e-12));
    }

    #[test]
    fn smooth_step_derivatives_match_differences() {
        for &s in &[0.05, 0.2, 0.5, 0.77, 0.95] {
            let h = 1e-5;
            let (v, d1, d2) = smooth_step(s);
            let (vp, ..) = smooth_step(s + h);
            let (vm, ..) = smooth_step(s - h);
            assert!(((vp - vm) / (2.0 * h) - d1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!(((vp - 2.0 * v + vm) / (h * h) - d2).abs() < 1e-4 * (1.0 + d2.abs()));
        }
        assert_eq!(smooth_step(1e-5), (0.0, 0.0, 0.0));
    }
}
