//! Deck translations, the stable time cone, displacement functions, closed
//! timelike geodesics through poles and axes of deck translations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{self, DistanceOptions};
use crate::dynamics::{self, FlowOptions, GeodesicPath, PhaseState, StoppingCondition};
use crate::error::{Error, Result};
use crate::profile::ProfileFn;
use crate::Point;

/// Integer translation class `(k_t, k_x)` of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HomologyClass {
    pub k_t: i64,
    pub k_x: i64,
}

impl HomologyClass {
    pub const fn new(k_t: i64, k_x: i64) -> Self {
        HomologyClass { k_t, k_x }
    }

    pub fn scaled(self, m: i64) -> Self {
        HomologyClass::new(self.k_t * m, self.k_x * m)
    }

    pub fn is_zero(self) -> bool {
        self.k_t == 0 && self.k_x == 0
    }
}

impl std::fmt::Display for HomologyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.k_t, self.k_x)
    }
}

/// The deck translation `T_k(t, x) = (t + k_t, x + k_x)`.
pub fn deck_apply(k: HomologyClass, p: Point) -> Point {
    (p.0 + k.k_t as f64, p.1 + k.k_x as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeMembership {
    Interior,
    Exterior,
    /// Within `CONE_MARGIN` of a null direction.
    Indeterminate,
}

impl ConeMembership {
    pub fn is_interior(self) -> bool {
        self == ConeMembership::Interior
    }
}

pub const CONE_MARGIN: f64 = 1e-9;

/// Whether the direction of `k` lies strictly between the null rotation
/// numbers, i.e. `k_t > |k_x| · P` with `P = ∫₀¹ dx / f`.
pub fn in_time_cone_interior(f: &ProfileFn, k: HomologyClass) -> ConeMembership {
    if k.k_t <= 0 {
        return ConeMembership::Exterior;
    }
    let margin = k.k_t as f64 - (k.k_x as f64).abs() * f.null_period();
    if margin.abs() < CONE_MARGIN {
        ConeMembership::Indeterminate
    } else if margin > 0.0 {
        ConeMembership::Interior
    } else {
        ConeMembership::Exterior
    }
}

/// The displacement function `q ↦ d(q, T_k q)`.
pub fn displacement(f: &ProfileFn, k: HomologyClass, q: Point) -> Result<f64> {
    Ok(causal::distance(f, q, deck_apply(k, q), &DistanceOptions::value_only())?.value)
}

/// Displacement sampled at the cell centres of an `n_t × n_x` grid on `[0, 1)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementMap {
    pub class: HomologyClass,
    pub n_t: usize,
    pub n_x: usize,
    /// Row-major by time cell: `values[i_t * n_x + i_x]`.
    pub values: Vec<f64>,
    pub max: f64,
    /// Cells within `ARGMAX_TOL` of the maximum, in lexicographic order.
    pub argmax: Vec<(usize, usize)>,
    /// Largest spread of any column across time rows.
    pub row_spread: f64,
}

pub const ARGMAX_TOL: f64 = 1e-6;

impl DisplacementMap {
    pub fn cell_center(&self, i_t: usize, i_x: usize) -> Point {
        (
            (i_t as f64 + 0.5) / self.n_t as f64,
            (i_x as f64 + 0.5) / self.n_x as f64,
        )
    }

    pub fn value(&self, i_t: usize, i_x: usize) -> f64 {
        self.values[i_t * self.n_x + i_x]
    }

    /// Whether some argmax cell lies within one cell width of the locus
    /// where `f` is maximal. Off-axis classes have a constant displacement,
    /// so requiring every argmax cell there would be meaningless.
    pub fn argmax_meets_max_locus(&self, f: &ProfileFn) -> bool {
        let width = 1.0 / self.n_x as f64;
        self.argmax.iter().any(|&(_, i_x)| {
            let x = (i_x as f64 + 0.5) * width;
            f.max_locus().iter().any(|&(a, b)| {
                // Loci are given inside one period; compare modulo 1.
                [-1.0, 0.0, 1.0]
                    .iter()
                    .any(|s| x + width >= a + s && x - width <= b + s)
            })
        })
    }
}

pub fn displacement_map(f: &ProfileFn, k: HomologyClass, n_t: usize, n_x: usize) -> Result<DisplacementMap> {
    if n_t == 0 || n_x == 0 {
        return Err(Error::Domain("displacement grid must be nonempty".into()));
    }
    // The metric is t-invariant, so every column is constant in exact
    // arithmetic; the full grid is kept as a regression test of that.
    let cells: Vec<(usize, usize)> = (0..n_t).flat_map(|i| (0..n_x).map(move |j| (i, j))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let q = ((i as f64 + 0.5) / n_t as f64, (j as f64 + 0.5) / n_x as f64);
            displacement(f, k, q)
        })
        .collect::<Result<_>>()?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let argmax = cells
        .iter()
        .zip(&values)
        .filter(|(_, v)| **v >= max - ARGMAX_TOL)
        .map(|(c, _)| *c)
        .collect();
    let row_spread = (0..n_x)
        .map(|j| {
            let col = (0..n_t).map(|i| values[i * n_x + j]);
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(DisplacementMap {
        class: k,
        n_t,
        n_x,
        values,
        max,
        argmax,
        row_spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedGeodesicResult {
    pub class: HomologyClass,
    pub base: Point,
    pub psi0: f64,
    pub period_length: f64,
    /// Position mismatch between the end of one period and `T_k(base)`.
    pub closure_residual: f64,
    /// `|ψ(τ₁) - ψ₀|`, not enforced by the solver.
    pub psi_residual: f64,
    /// `|L - d(base, T_k base)|`.
    pub maximality_gap: f64,
    pub path: GeodesicPath,
}

const CLOSURE_TOL: f64 = 1e-13;

fn period_flow(f: &ProfileFn, base: Point, k: HomologyClass, psi0: f64) -> Result<GeodesicPath> {
    let opts = FlowOptions::with_tol(CLOSURE_TOL);
    let stop = match k.k_x.signum() {
        0 => StoppingCondition::TimeAtLeast(base.0 + k.k_t as f64),
        1 => StoppingCondition::XAtLeast(base.1 + k.k_x as f64),
        _ => StoppingCondition::XAtMost(base.1 + k.k_x as f64),
    };
    dynamics::flow(f, PhaseState::at(base, psi0), stop, &opts)
}

/// Solves for the initial angle whose geodesic from `base` advances by
/// `k_x` in `x` over exactly `k_t` in `t`.
///
/// `x` is monotone for every `ψ₀ ≠ 0` when `f(base) = f_max`, and the time
/// needed for the advance decreases strictly from `+∞` to `|k_x| · P` as
/// `|ψ₀|` grows, so the bracket is found by geometric expansion from `|ψ₀| = 1`.
/// Fails with `NoTimelikeClass` when the target lies below that infimum.
pub fn solve_period_angle(f: &ProfileFn, base: Point, k: HomologyClass) -> Result<f64> {
    if k.k_t <= 0 {
        return Err(Error::NoTimelikeClass(k));
    }
    if k.k_x == 0 {
        return Ok(0.0);
    }
    let sign = k.k_x.signum() as f64;
    let target = k.k_t as f64;
    let advance = |psi: f64| -> Result<f64> {
        let path = period_flow(f, base, k, sign * psi)?;
        Ok(path.end().t - base.0)
    };
    // Δt - |k_x| P shrinks like 1 / cosh²ψ₀, so at this ceiling classes
    // within about 1e-13 of the null boundary are already resolved, while
    // larger angles only make the flow stiff.
    const PSI_CEILING: f64 = 16.0;
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut g_hi = advance(hi)? - target;
    if g_hi > 0.0 {
        while g_hi > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > PSI_CEILING {
                return Err(Error::NoTimelikeClass(k));
            }
            g_hi = advance(hi)? - target;
        }
    } else {
        let mut g_lo = g_hi;
        while g_lo <= 0.0 {
            hi = lo;
            g_hi = g_lo;
            lo *= 0.5;
            if lo < 1e-12 {
                return Err(Error::Inconsistent(format!("period bracket collapsed for class {k}")));
            }
            g_lo = advance(lo)? - target;
        }
    }
    if g_hi == 0.0 {
        return Ok(sign * hi);
    }
    // Illinois on the decreasing map |ψ₀| ↦ Δt - k_t over [lo, hi].
    let mut g_lo = advance(lo)? - target;
    let mut side = 0i8;
    let mut best = if g_lo.abs() < g_hi.abs() {
        (lo, g_lo)
    } else {
        (hi, g_hi)
    };
    for _ in 0..200 {
        if best.1.abs() <= 1e-12 * target || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mut m = hi - g_hi * (hi - lo) / (g_hi - g_lo);
        if !(m > lo && m < hi) {
            m = 0.5 * (lo + hi);
        }
        let gm = advance(m)? - target;
        if gm.abs() < best.1.abs() {
            best = (m, gm);
        }
        if gm == 0.0 {
            break;
        }
        if gm > 0.0 {
            lo = m;
            g_lo = gm;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = m;
            g_hi = gm;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(sign * best.0)
}

/// Closed timelike geodesic through a point of maximal `f` in class `k`.
pub fn closed_geodesic_through_pole(f: &ProfileFn, base: Point, k: HomologyClass) -> Result<ClosedGeodesicResult> {
    if !f.is_max_point(base.1, 1e-12) {
        return Err(Error::Domain(format!("x = {} is not a maximum of the profile", base.1)));
    }
    if !in_time_cone_interior(f, k).is_interior() {
        return Err(Error::NoTimelikeClass(k));
    }
    let psi0 = solve_period_angle(f, base, k)?;
    let path = period_flow(f, base, k, psi0)?;
    let end = path.end();
    let target = deck_apply(k, base);
    let closure_residual = (end.t - target.0).abs().max((end.x - target.1).abs());
    let period_length = path.proper_length();
    let d = causal::distance(f, base, target, &DistanceOptions::value_only())?.value;
    Ok(ClosedGeodesicResult {
        class: k,
        base,
        psi0,
        period_length,
        closure_residual,
        psi_residual: (end.psi - psi0).abs(),
        maximality_gap: (period_length - d).abs(),
        path,
    })
}

/// Axis of the deck translation `T_k` through `q`, built from one
/// maximising segment and its translates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub class: HomologyClass,
    pub start: Point,
    pub periods: usize,
    pub psi0: f64,
    pub period_length: f64,
    /// `T_k^i` applied to the maximiser from `q` to `T_k q`, `i = 0..periods`.
    pub segments: Vec<GeodesicPath>,
    /// Tangent mismatch at each of the `periods - 1` junctions: the angle gap
    /// plus the position gap.
    pub junction_mismatch: Vec<f64>,
    /// `d(q, T_k^m q)` for `m = 1..=periods`.
    pub power_lengths: Vec<f64>,
    /// The geodesic from `q` with angle `ψ₀` integrated across all periods.
    pub continued: GeodesicPath,
}

impl Axis {
    /// `max_m |d(q, T_k^m q) - m · d(q, T_k q)|`.
    pub fn power_gap(&self) -> f64 {
        self.power_lengths
            .iter()
            .enumerate()
            .map(|(i, l)| (l - (i + 1) as f64 * self.period_length).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_junction_mismatch(&self) -> f64 {
        self.junction_mismatch.iter().copied().fold(0.0, f64::max)
    }

    /// States of the continued geodesic at `t_q + i · k_t`, `i = 0..=periods`.
    pub fn stroboscope(&self) -> Vec<PhaseState> {
        (0..=self.periods)
            .map(|i| {
                self.continued
                    .state_at_t(self.start.0 + (i as i64 * self.class.k_t) as f64)
            })
            .collect()
    }

    /// Least-squares slope `dx/dt` of the stroboscopic states.
    pub fn direction(&self) -> f64 {
        let pts: Vec<Point> = self.stroboscope().iter().map(PhaseState::point).collect();
        axis_direction(&pts)
    }
}

pub fn build_axis(f: &ProfileFn, k: HomologyClass, q: Point, periods: usize) -> Result<Axis> {
    if periods == 0 || k.k_t <= 0 {
        return Err(Error::Domain(
            "an axis needs a future class and at least one period".into(),
        ));
    }
    let d = causal::distance(f, q, deck_apply(k, q), &DistanceOptions::default())?;
    let best = d.maximizers.first().ok_or_else(|| Error::NoConnectingGeodesic {
        p: q,
        q: deck_apply(k, q),
    })?;
    let seg = best.path.clone().expect("paths were requested");
    let segments: Vec<GeodesicPath> = (0..periods as i64)
        .map(|i| {
            let s = k.scaled(i);
            seg.translated(s.k_t as f64, s.k_x as f64).retimed(i as f64 * d.value)
        })
        .collect();
    let junction_mismatch = segments
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].end(), w[1].start());
            (a.psi - b.psi).abs() + (a.t - b.t).abs().max((a.x - b.x).abs())
        })
        .collect();
    let power_lengths = (1..=periods as i64)
        .into_par_iter()
        .map(|m| Ok(causal::distance(f, q, deck_apply(k.scaled(m), q), &DistanceOptions::value_only())?.value))
        .collect::<Result<Vec<f64>>>()?;
    let continued = dynamics::flow(
        f,
        PhaseState::at(q, best.psi0),
        StoppingCondition::TimeAtLeast(q.0 + (periods as i64 * k.k_t) as f64),
        &FlowOptions::with_tol(CLOSURE_TOL),
    )?;
    Ok(Axis {
        class: k,
        start: q,
        periods,
        psi0: best.psi0,
        period_length: d.value,
        segments,
        junction_mismatch,
        power_lengths,
        continued,
    })
}

/// Least-squares slope `dx/dt` through the points `(t_i, x_i)`.
pub fn axis_direction(points: &[Point]) -> f64 {
    let n = points.len() as f64;
    let (mt, mx) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), p| {
        let dt = p.0 - mt;
        (sxy + dt * (p.1 - mx), sxx + dt * dt)
    });
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelReport {
    pub slope_a: f64,
    pub slope_b: f64,
    pub slope_gap: f64,
    pub min_separation: f64,
    pub max_separation: f64,
    /// `max_separation / min_separation`.
    pub band_ratio: f64,
    pub parallel: bool,
}

pub const SLOPE_TOL: f64 = 1e-6;
pub const BAND_RATIO_TOL: f64 = 1e-3;

/// Coordinate time at which an `x`-monotone path reaches `x`.
fn t_at_x(path: &GeodesicPath, x: f64) -> f64 {
    let (mut lo, mut hi) = (path.start().t, path.end().t);
    let up = path.end().x > path.start().x;
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if (path.state_at_t(m).x < x) == up {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Compares the directions of two axes of the same class and the band
/// their separation stays in over the common window.
///
/// Separation is measured along the direction in which the axes are
/// graphs: the `t`-gap at matched `x` for axes that advance in `x`, and the
/// `x`-gap at matched `t` for vertical ones.
pub fn parallel_check(a: &Axis, b: &Axis, samples: usize) -> ParallelReport {
    let slope_a = a.direction();
    let slope_b = b.direction();
    let (pa, pb) = (&a.continued, &b.continued);
    let n = samples.max(2);
    let gaps: Vec<f64> = if a.class.k_x == 0 {
        let lo = pa.start().t.max(pb.start().t);
        let hi = pa.end().t.min(pb.end().t);
        (0..n)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (pa.state_at_t(t).x - pb.state_at_t(t).x).abs()
            })
            .collect()
    } else {
        let (a0, a1) = (pa.start().x.min(pa.end().x), pa.start().x.max(pa.end().x));
        let (b0, b1) = (pb.start().x.min(pb.end().x), pb.start().x.max(pb.end().x));
        let (lo, hi) = (a0.max(b0), a1.min(b1));
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (t_at_x(pa, x) - t_at_x(pb, x)).abs()
            })
            .collect()
    };
    let min_separation = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max_separation = gaps.iter().copied().fold(0.0, f64::max);
    let band_ratio = if min_separation > 0.0 {
        max_separation / min_separation
    } else {
        f64::INFINITY
    };
    let slope_gap = (slope_a - slope_b).abs();
    ParallelReport {
        slope_a,
        slope_b,
        slope_gap,
        min_separation,
        max_separation,
        band_ratio,
        parallel: slope_gap <= SLOPE_TOL && band_ratio <= 1.0 + BAND_RATIO_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deck_translation() {
        assert_eq!(deck_apply(HomologyClass::new(0, 0), (0.3, 0.7)), (0.3, 0.7));
        assert_eq!(deck_apply(HomologyClass::new(2, 1), (0.0, 0.0)), (2.0, 1.0));
    }

    #[test]
    fn flat_cone() {
        let f = ProfileFn::constant(1.0).unwrap();
        assert_eq!(
            in_time_cone_interior(&f, HomologyClass::new(2, 1)),
            ConeMembership::Interior
        );
        assert_eq!(
            in_time_cone_interior(&f, HomologyClass::new(1, 1)),
            ConeMembership::Indeterminate
        );
        assert_eq!(
            in_time_cone_interior(&f, HomologyClass::new(1, 2)),
            ConeMembership::Exterior
        );
        assert_eq!(
            in_time_cone_interior(&f, HomologyClass::new(-2, 1)),
            ConeMembership::Exterior
        );
    }

    #[test]
    fn flat_closed_geodesic() {
        let f = ProfileFn::constant(1.0).unwrap();
        let r = closed_geodesic_through_pole(&f, (0.0, 0.0), HomologyClass::new(2, 1)).unwrap();
        assert!((r.period_length - 3f64.sqrt()).abs() < 1e-9);
        assert!((r.psi0 - (1.0 / 3f64.sqrt()).asinh()).abs() < 1e-9);
        assert!(r.closure_residual <= 1e-8 && r.psi_residual <= 1e-8);
        assert!(r.maximality_gap <= 1e-5);
    }

    #[test]
    fn exterior_class_is_rejected() {
        let f = ProfileFn::constant(1.0).unwrap();
        let err = closed_geodesic_through_pole(&f, (0.0, 0.0), HomologyClass::new(1, 2)).unwrap_err();
        assert!(matches!(err, Error::NoTimelikeClass(_)));
        assert!(solve_period_angle(&f, (0.0, 0.0), HomologyClass::new(1, 2)).is_err());
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<Point> = (0..5).map(|i| (i as f64, 0.25 * i as f64 + 1.0)).collect();
        assert!((axis_direction(&pts) - 0.25).abs() < 1e-15);
        assert_eq!(axis_direction(&[(0.0, 0.4), (1.0, 0.4)]), 0.0);
    }
}
