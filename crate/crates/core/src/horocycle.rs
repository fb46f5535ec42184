//! Busemann functions of vertical rays through maxima of the profile, and
//! their level sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{self, CausalRelation, DistanceOptions};
use crate::error::{Error, Result};
use crate::profile::ProfileFn;
use crate::Point;

/// The unit-speed vertical ray `γ(s) = (t₀ + s / f_max, x₀)` from a point
/// where `f` attains its maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralRay {
    pub base: Point,
    pub speed: f64,
}

impl CentralRay {
    pub fn new(f: &ProfileFn, base: Point) -> Result<Self> {
        if !f.is_max_point(base.1, 1e-12) {
            return Err(Error::Domain(format!(
                "ray base x = {} is not a maximum of the profile",
                base.1
            )));
        }
        Ok(CentralRay { base, speed: f.f_max() })
    }

    pub fn at(&self, s: f64) -> Point {
        (self.base.0 + s / self.speed, self.base.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusemannOptions {
    pub s_start: f64,
    /// Largest `s` at which a new estimate is formed (the last one also
    /// evaluates `h(2s)`).
    pub s_cap: f64,
    pub tol: f64,
    pub monotone_tol: f64,
}

impl Default for BusemannOptions {
    fn default() -> Self {
        BusemannOptions {
            s_start: 4.0,
            s_cap: 16384.0,
            tol: 1e-6,
            monotone_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusemannValue {
    pub value: f64,
    /// `(s, h(s))` with `h(s) = s - d(p, γ(s))`, `s` doubling.
    pub trace: Vec<(f64, f64)>,
    /// Last change of the extrapolated value.
    pub increment: f64,
    pub converged: bool,
}

/// `b_γ(p) = lim_{s→∞} [s - d(p, γ(s))]`.
///
/// `h(s)` is non-increasing and approaches its limit like `c / s`, so
/// successive values on the doubling schedule are combined as
/// `2 h(2s) - h(s)`, which cancels the leading term. Iteration stops once
/// two extrapolants agree within `tol`.
pub fn busemann(f: &ProfileFn, ray: &CentralRay, p: Point, opts: &BusemannOptions) -> Result<BusemannValue> {
    let mut s = opts.s_start;
    while causal::causal_relation(f, p, ray.at(s)) != CausalRelation::Chronological {
        s *= 2.0;
        if s > opts.s_cap {
            return Err(Error::Domain(format!(
                "{p:?} is not in the past of the ray up to s = {}",
                opts.s_cap
            )));
        }
    }
    let h =
        |s: f64| -> Result<f64> { Ok(s - causal::distance(f, p, ray.at(s), &DistanceOptions::value_only())?.value) };
    let mut trace = vec![(s, h(s)?)];
    let mut extrapolated: Option<f64> = None;
    let mut increment = f64::INFINITY;
    let mut converged = false;
    while s <= opts.s_cap {
        let s2 = 2.0 * s;
        let h2 = h(s2)?;
        let h1 = trace.last().unwrap().1;
        if h2 > h1 + opts.monotone_tol {
            return Err(Error::Inconsistent(format!(
                "Busemann trace increased from {h1} at s = {s} to {h2} at s = {s2}"
            )));
        }
        trace.push((s2, h2));
        let r = 2.0 * h2 - h1;
        if let Some(prev) = extrapolated {
            increment = (r - prev).abs();
            if increment <= opts.tol {
                converged = true;
                extrapolated = Some(r);
                break;
            }
        }
        extrapolated = Some(r);
        s = s2;
    }
    Ok(BusemannValue {
        value: extrapolated.unwrap_or(trace[0].1),
        trace,
        increment,
        converged,
    })
}

/// Busemann value only, failing when the schedule does not converge.
pub fn busemann_value(f: &ProfileFn, ray: &CentralRay, p: Point) -> Result<f64> {
    let b = busemann(f, ray, p, &BusemannOptions::default())?;
    if !b.converged {
        return Err(Error::Inconsistent(format!(
            "Busemann function at {p:?} did not converge (last increment {})",
            b.increment
        )));
    }
    Ok(b.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorosphereVertex {
    pub x: f64,
    pub t: f64,
    pub level: f64,
    pub residual: f64,
}

pub const LEVEL_TOL: f64 = 1e-6;

/// The level set `{b_γ = level}` sampled as a graph `t(x)`.
///
/// `b_γ` increases strictly along future timelike directions, so at each
/// `x` the level is a single root in `t`. Because the metric is invariant
/// under time translation and the ray is vertical, `b_γ(t + s, x) =
/// b_γ(t, x) + f_max s`; secant steps seeded with that slope usually land
/// on the level after one correction, and a bracketed search takes over
/// otherwise.
pub fn horosphere(f: &ProfileFn, ray: &CentralRay, level: f64, xs: &[f64]) -> Result<Vec<HorosphereVertex>> {
    xs.par_iter().map(|&x| horosphere_vertex(f, ray, level, x)).collect()
}

fn horosphere_vertex(f: &ProfileFn, ray: &CentralRay, level: f64, x: f64) -> Result<HorosphereVertex> {
    let b = |t: f64| busemann_value(f, ray, (t, x)).map(|v| v - level);
    let target = 0.1 * LEVEL_TOL;
    let mut t0 = ray.base.0 + level / ray.speed;
    let mut g0 = b(t0)?;
    let mut best = (t0, g0);
    let mut slope = ray.speed;
    for _ in 0..6 {
        if best.1.abs() <= target {
            break;
        }
        let t1 = t0 - g0 / slope;
        let g1 = b(t1)?;
        if g1.abs() < best.1.abs() {
            best = (t1, g1);
        }
        if t1 == t0 || g1 == g0 {
            break;
        }
        slope = (g1 - g0) / (t1 - t0);
        if !(slope > 0.0) {
            break;
        }
        (t0, g0) = (t1, g1);
    }
    if best.1.abs() > target {
        best = bracketed_level(&b, best, 1.0 / f.f_min(), target)?;
    }
    Ok(HorosphereVertex {
        x,
        t: best.0,
        level,
        residual: best.1.abs(),
    })
}

/// Regula falsi for the increasing map `t ↦ b(t) - level`, bracketed by
/// geometric expansion around `start`.
fn bracketed_level(b: &dyn Fn(f64) -> Result<f64>, start: (f64, f64), step: f64, target: f64) -> Result<(f64, f64)> {
    let (mut lo, mut g_lo) = start;
    let (mut hi, mut g_hi) = start;
    let mut width = step;
    while g_lo > 0.0 {
        hi = lo;
        g_hi = g_lo;
        lo -= width;
        width *= 2.0;
        g_lo = b(lo)?;
    }
    width = step;
    while g_hi < 0.0 {
        lo = hi;
        g_lo = g_hi;
        hi += width;
        width *= 2.0;
        g_hi = b(hi)?;
    }
    let mut best = if g_lo.abs() < g_hi.abs() {
        (lo, g_lo)
    } else {
        (hi, g_hi)
    };
    let mut side = 0i8;
    for _ in 0..100 {
        if best.1.abs() <= target || hi - lo <= 1e-12 {
            break;
        }
        let mut m = hi - g_hi * (hi - lo) / (g_hi - g_lo);
        if !(m > lo && m < hi) {
            m = 0.5 * (lo + hi);
        }
        let gm = b(m)?;
        if gm.abs() < best.1.abs() {
            best = (m, gm);
        }
        if gm < 0.0 {
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
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorosphereGap {
    /// `d(γ(s_p), γ(s_q)) = s_q - s_p`.
    pub ray_distance: f64,
    pub sampled_sup: f64,
    pub argmax: (Point, Point),
    pub lower: Vec<HorosphereVertex>,
    pub upper: Vec<HorosphereVertex>,
    pub max_residual: f64,
    /// Pairs whose distance was computed before the bound cut the scan off.
    pub evaluated_pairs: usize,
}

impl HorosphereGap {
    /// Sampled supremum within `[(1 - allowance) · d, d + 1e-6]`.
    pub fn within(&self, allowance: f64) -> bool {
        self.sampled_sup <= self.ray_distance + 1e-6 && self.sampled_sup >= self.ray_distance * (1.0 - allowance)
    }
}

/// Compares `d(γ(s_p), γ(s_q))` with the sampled supremum of `d(y, z)` over
/// `y` on the horosphere through `γ(s_p)` and `z` on the one through
/// `γ(s_q)`, each sampled at `samples` points of `x ∈ [x₀ - ½, x₀ + ½]`.
pub fn horosphere_distance_check(
    f: &ProfileFn,
    ray: &CentralRay,
    s_p: f64,
    s_q: f64,
    samples: usize,
) -> Result<HorosphereGap> {
    if !(s_q > s_p) || samples < 2 {
        return Err(Error::Domain("need s_p < s_q and at least two samples".into()));
    }
    let x0 = ray.base.1;
    let xs: Vec<f64> = (0..samples)
        .map(|i| x0 - 0.5 + i as f64 / (samples - 1) as f64)
        .collect();
    // Levels of b on the ray: b(γ(s)) = s. Time translation by δ adds
    // f_max δ to b, so the upper horosphere is the lower one lifted by
    // (s_q - s_p) / f_max, with the same residuals.
    let lower = horosphere(f, ray, s_p, &xs)?;
    let lift = (s_q - s_p) / ray.speed;
    let upper: Vec<HorosphereVertex> = lower
        .iter()
        .map(|v| HorosphereVertex {
            t: v.t + lift,
            level: s_q,
            ..*v
        })
        .collect();
    // Since f ≤ f_max, every causal curve is at most as long as in the flat
    // metric with constant f_max, so d(y, z) ≤ √(f_max² Δt² - Δx²). Pairs
    // are visited by decreasing bound and the scan stops once no remaining
    // pair can beat the best value found.
    let c = f.f_max();
    let flat_bound = |a: &HorosphereVertex, b: &HorosphereVertex| {
        let dt = b.t - a.t;
        let dx = b.x - a.x;
        if dt > 0.0 {
            ((c * dt).powi(2) - dx * dx).max(0.0).sqrt()
        } else {
            0.0
        }
    };
    let mut pairs: Vec<(f64, Point, Point)> = lower
        .iter()
        .flat_map(|a| upper.iter().map(move |b| (flat_bound(a, b), (a.t, a.x), (b.t, b.x))))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let opts = DistanceOptions::value_only();
    let mut sup = 0.0;
    let mut argmax = (pairs[0].1, pairs[0].2);
    let mut evaluated = 0;
    for chunk in pairs.chunks(32) {
        if chunk[0].0 <= sup {
            break;
        }
        let values: Vec<f64> = chunk
            .par_iter()
            .map(|&(bound, y, z)| {
                if bound <= sup {
                    Ok(0.0)
                } else {
                    Ok(causal::distance(f, y, z, &opts)?.value)
                }
            })
            .collect::<Result<_>>()?;
        evaluated += chunk.iter().filter(|c| c.0 > sup).count();
        for (v, c) in values.iter().zip(chunk) {
            if *v > sup {
                sup = *v;
                argmax = (c.1, c.2);
            }
        }
    }
    let max_residual = lower.iter().chain(&upper).map(|v| v.residual).fold(0.0, f64::max);
    Ok(HorosphereGap {
        ray_distance: s_q - s_p,
        sampled_sup: sup,
        argmax,
        lower,
        upper,
        max_residual,
        evaluated_pairs: evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_busemann_is_scaled_time() {
        let f = ProfileFn::constant(1.5).unwrap();
        let ray = CentralRay::new(&f, (0.0, 0.0)).unwrap();
        for p in [(0.0, 0.0), (1.0, 0.3), (-2.0, 0.9), (0.5, -1.2)] {
            let b = busemann(&f, &ray, p, &BusemannOptions::default()).unwrap();
            assert!(b.converged);
            assert!((b.value - 1.5 * p.0).abs() < 1e-6, "{p:?}: {}", b.value);
        }
    }

    #[test]
    fn ray_points_have_their_parameter() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let ray = CentralRay::new(&f, (0.0, 0.5)).unwrap();
        let b = busemann_value(&f, &ray, ray.at(3.0)).unwrap();
        assert!((b - 3.0).abs() < 1e-6);
    }

    #[test]
    fn ray_must_start_on_maximum() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        assert!(CentralRay::new(&f, (0.0, 0.0)).is_err());
    }
}
