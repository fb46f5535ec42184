//! Connecting geodesics near the separatrix, evaluated by quadrature.
//!
//! A geodesic with Clairaut constant `C = f_max + η` just below or above
//! `f_max` lingers next to the maximum locus for a time that blows up as
//! `η → 0`. Integrating it in proper time lets the conserved `C` drift by
//! the integrator tolerance, which is a large relative error in `η`. Here
//! `C` is held exactly and the legs between turning points are integrated
//! in `x`:
//!
//! `dt/dx = C / (f √(C² - f²))`, `dτ/dx = f / √(C² - f²)`.
//!
//! The profiles in this crate have no local maxima outside the maximum
//! locus, so turning points are bracketed between the start and the next
//! point of the locus.

use crate::profile::ProfileFn;
use crate::quadrature;

/// Relative size of `η` below which a root is re-solved here.
pub(crate) const NEAR_SEPARATRIX: f64 = 1e-2;

#[derive(Clone, Copy)]
enum Rate {
    Time,
    Length,
}

/// A turning point `base + offset` with `base` the integer part of the
/// maximum it approaches. Next to a maximum at an integer the offset then
/// keeps full relative precision, and elsewhere it stays inside `[0, 1)`
/// where the profile is evaluated without reduction.
#[derive(Clone, Copy)]
struct Turn {
    base: f64,
    offset: f64,
}

impl Turn {
    fn x(self) -> f64 {
        self.base + self.offset
    }
}

struct Level<'a> {
    f: &'a ProfileFn,
    /// `C - f_max`.
    eta: f64,
}

impl Level<'_> {
    fn c(&self) -> f64 {
        self.f.f_max() + self.eta
    }

    /// `C - f(x)`.
    fn gap(&self, x: f64) -> f64 {
        self.eta + self.f.deficit(x)
    }

    fn rate(&self, x: f64, rate: Rate) -> f64 {
        let gap = self.gap(x);
        if gap <= 0.0 {
            return 0.0;
        }
        let c = self.c();
        let fx = self.f.value(x);
        let root = (gap * (c + fx)).sqrt();
        match rate {
            Rate::Time => c / (fx * root),
            Rate::Length => fx / root,
        }
    }

    /// First turning point from `x` in `direction`, where `f = C`.
    fn turning(&self, x: f64, direction: f64) -> Option<Turn> {
        if self.eta >= 0.0 || self.gap(x) < 0.0 {
            return None;
        }
        let m = self.f.next_max_point(x, direction);
        let base = m.floor();
        let (mut inside, mut outside) = (x - base, m - base);
        for _ in 0..200 {
            let m = 0.5 * (inside + outside);
            if m == inside || m == outside {
                break;
            }
            if self.gap(m) > 0.0 {
                inside = m;
            } else {
                outside = m;
            }
        }
        Some(Turn { base, offset: inside })
    }

    fn weight(&self, x: f64, rate: Rate) -> f64 {
        let c = self.c();
        let fx = self.f.value(x);
        match rate {
            Rate::Time => c / (fx * (c + fx).sqrt()),
            Rate::Length => fx / (c + fx).sqrt(),
        }
    }

    /// `∫ rate |dx|` from the turning point `x_t` to `other`.
    ///
    /// With `x = x_t ± u²` the integrand becomes `2 w(x) / √(gap(x) / u²)`.
    /// The gap is taken relative to the deficit at `x_t` itself, so the
    /// rounding of `x_t` cannot leave a sliver where the integrand is
    /// missing, and `gap / δ` with `δ = |x - x_t|` is a divided difference
    /// replaced by its Taylor expansion where cancellation would dominate.
    fn turning_leg(&self, turn: Turn, other: f64, rate: Rate, tol: f64) -> f64 {
        let (x_t, other) = (turn.offset, other - turn.base);
        let dir = (other - x_t).signum();
        let d_t = self.f.deficit(x_t);
        let jet = self.f.eval(x_t);
        // Deficit derivatives along the leg.
        let (d1, d2) = (-jet.d1 * dir, -jet.d2);
        let cutoff = if d2 == 0.0 {
            1e-8
        } else {
            (f64::EPSILON * d_t.max(f64::MIN_POSITIVE) * d1.abs() / (d2 * d2))
                .cbrt()
                .min(1e-8)
        };
        let g = |u: f64| {
            let x = x_t + dir * u * u;
            let delta = (x - x_t).abs();
            let slope = if delta <= cutoff {
                d1 + 0.5 * d2 * (u * u)
            } else {
                (self.f.deficit(x) - d_t) / delta
            };
            if slope <= 0.0 {
                return 0.0;
            }
            2.0 * self.weight(x, rate) / slope.sqrt()
        };
        quadrature::integrate(g, 0.0, (other - x_t).abs().sqrt(), tol).0
    }

    /// `∫ rate |dx|` over a monotone leg between `a` and `b` that avoids
    /// turning points.
    fn leg(&self, a: f64, b: f64, rate: Rate, tol: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if lo == hi {
            return 0.0;
        }
        quadrature::integrate(|x| self.rate(x, rate), lo, hi, tol).0
    }

    /// `∫ rate |dx|` over the full swing between two turning points.
    fn swing(&self, a: Turn, b: Turn, rate: Rate, tol: f64) -> f64 {
        let m = 0.5 * (a.x() + b.x());
        self.turning_leg(a, m, rate, 0.5 * tol) + self.turning_leg(b, m, rate, 0.5 * tol)
    }

    /// Leg without turning points, using periodicity for long spans.
    fn passing_leg(&self, a: f64, b: f64, rate: Rate, tol: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let periods = (hi - lo).floor();
        let rest = self.leg(lo + periods, hi, rate, tol);
        if periods >= 1.0 {
            periods * self.leg(lo, lo + 1.0, rate, tol) + rest
        } else {
            rest
        }
    }
}

/// Which passage through `x_q` a connecting geodesic makes.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Route {
    /// `C` above every value of `f` on the way: `x` is monotone.
    Passing,
    /// Trapped between two turning points, reaching `x_q` on leg `k`
    /// (leg 0 starts at `x_0`).
    Trapped { sigma: f64, k: u32 },
}

struct Problem<'a> {
    f: &'a ProfileFn,
    x0: f64,
    xq: f64,
    dt: f64,
    tol: f64,
}

impl Problem<'_> {
    /// Arrival time at `x_q` along `route` and the proper time it takes,
    /// or `None` where the route does not exist for this `η`.
    fn arrival(&self, eta: f64, route: Route, with_length: bool) -> Option<(f64, f64)> {
        let lvl = Level { f: self.f, eta };
        if lvl.gap(self.x0) < 0.0 || lvl.gap(self.xq) < 0.0 {
            return None;
        }
        let both = |leg: &dyn Fn(Rate) -> f64| (leg(Rate::Time), if with_length { leg(Rate::Length) } else { 0.0 });
        match route {
            Route::Passing => {
                if eta <= 0.0 {
                    return None;
                }
                let t = lvl.passing_leg(self.x0, self.xq, Rate::Time, self.tol);
                let l = if with_length {
                    lvl.passing_leg(self.x0, self.xq, Rate::Length, self.tol)
                } else {
                    0.0
                };
                Some((t, l))
            }
            Route::Trapped { sigma, k } => {
                let ahead = lvl.turning(self.x0, sigma)?;
                let behind = lvl.turning(self.x0, -sigma)?;
                let (lo, hi) = (ahead.x().min(behind.x()), ahead.x().max(behind.x()));
                if self.xq < lo || self.xq > hi {
                    return None;
                }
                if k == 0 {
                    if (self.xq - self.x0) * sigma < 0.0 {
                        return None;
                    }
                    return Some(both(&|r| lvl.leg(self.x0, self.xq, r, self.tol)));
                }
                let first = both(&|r| lvl.turning_leg(ahead, self.x0, r, self.tol));
                let full = both(&|r| lvl.swing(ahead, behind, r, self.tol));
                let start = if k % 2 == 1 { ahead } else { behind };
                let last = both(&|r| lvl.turning_leg(start, self.xq, r, self.tol));
                let n = (k - 1) as f64;
                Some((first.0 + n * full.0 + last.0, first.1 + n * full.1 + last.1))
            }
        }
    }

    /// The route whose arrival time at `η` is closest to `Δt`.
    fn classify(&self, eta: f64, sigma: f64) -> Option<Route> {
        if eta > 0.0 {
            return Some(Route::Passing);
        }
        let mut best: Option<(f64, Route)> = None;
        for k in 0..10_000u32 {
            let route = Route::Trapped { sigma, k };
            let Some((t, _)) = self.arrival(eta, route, false) else {
                if k == 0 {
                    continue;
                }
                break;
            };
            let miss = (t - self.dt).abs();
            if best.is_none_or(|(m, _)| miss < m) {
                best = Some((miss, route));
            }
            if t > self.dt {
                break;
            }
        }
        best.map(|b| b.1)
    }
}

/// A connecting geodesic from quadrature: initial angle, proper-time
/// length and the time mismatch at `x_q` converted to a spatial residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct QuadratureRoot {
    pub psi: f64,
    pub length: f64,
    pub residual: f64,
}

fn eta_of_psi(f: &ProfileFn, x0: f64, psi: f64) -> f64 {
    let d0 = f.deficit(x0);
    let f0 = f.value(x0);
    // f0 cosh ψ - f_max = f0 (cosh ψ - 1) - (f_max - f0).
    let h = (0.5 * psi).sinh();
    2.0 * f0 * h * h - d0
}

fn psi_of_eta(f: &ProfileFn, x0: f64, eta: f64, sigma: f64) -> f64 {
    let f0 = f.value(x0);
    // cosh ψ - 1 = (η + deficit) / f0 = 2 sinh²(ψ/2).
    let excess = (eta + f.deficit(x0)).max(0.0) / f0;
    sigma * 2.0 * (0.5 * excess).sqrt().asinh()
}

/// Re-solves a connecting geodesic found by shooting with initial angle
/// close to `psi`, holding the Clairaut constant exact. Only roots passing
/// `accept` are returned; empty when `psi` is not near the separatrix or no
/// route can be bracketed.
pub(crate) fn polish(
    f: &ProfileFn,
    x0: f64,
    dt: f64,
    xq: f64,
    psi: f64,
    accept: &dyn Fn(&QuadratureRoot) -> bool,
) -> Vec<QuadratureRoot> {
    if f.is_flat() || psi == 0.0 {
        return Vec::new();
    }
    let eta_c = eta_of_psi(f, x0, psi);
    if eta_c.abs() > NEAR_SEPARATRIX * f.f_max() {
        return Vec::new();
    }
    let problem = Problem {
        f,
        x0,
        xq,
        dt,
        tol: 1e-14 * dt.max(1.0),
    };
    // Clairaut drift of the shooting integration shifts the numerical
    // separatrix by about this much, so a shooting root inside the band
    // may sit on the wrong side of it; both sides are solved there.
    let unresolved = 1e-9 * f.f_max();
    let z_c = eta_c.abs().max(f64::EPSILON * f.f_max()).ln();
    let side = if eta_c == 0.0 { 1.0 } else { eta_c.signum() };
    let sides: &[f64] = if eta_c.abs() > unresolved { &[1.0] } else { &[1.0, -1.0] };
    sides
        .iter()
        .filter_map(|&s| solve_side(&problem, s * side, z_c, psi.signum(), accept))
        .collect()
}

/// Lowest `ln|η|` tried: the lingering time grows like `|ln η|`, and
/// smaller `η` would underflow.
const ZETA_FLOOR: f64 = -700.0;

/// Solves for `η = side · e^ζ` near `ζ = z_c` on the route closest to the
/// shooting root. The leg reached at `Δt` can change within the band where
/// shooting cannot resolve `η`, so the neighbouring legs are tried when
/// that route has no acceptable root.
fn solve_side(
    problem: &Problem,
    side: f64,
    z_c: f64,
    sigma: f64,
    accept: &dyn Fn(&QuadratureRoot) -> bool,
) -> Option<QuadratureRoot> {
    let routes = match problem.classify(side * z_c.exp(), sigma)? {
        Route::Passing if (problem.xq - problem.x0) * sigma <= 0.0 => return None,
        Route::Passing => vec![Route::Passing],
        Route::Trapped { sigma, k } => [Some(k), k.checked_sub(1), Some(k + 1)]
            .into_iter()
            .flatten()
            .map(|k| Route::Trapped { sigma, k })
            .collect(),
    };
    routes
        .into_iter()
        .filter_map(|route| solve_route(problem, side, route, z_c, sigma))
        .find(|r| accept(r))
}

fn solve_route(problem: &Problem, side: f64, route: Route, z_c: f64, sigma: f64) -> Option<QuadratureRoot> {
    let (f, x0, xq, dt) = (problem.f, problem.x0, problem.xq, problem.dt);
    // Work in ζ = ln|η|, which spreads out the approach to the separatrix.
    let eta = |z: f64| side * z.exp();
    let g = |z: f64| problem.arrival(eta(z), route, false).map(|(t, _)| t - dt);
    let g_c = g(z_c)?;
    let z_top = (NEAR_SEPARATRIX * f.f_max()).ln();

    let mut bracket = None;
    let mut h = 1e-7;
    while bracket.is_none() && z_c - h > ZETA_FLOOR {
        let lo = g(z_c - h);
        let hi = if z_c + h <= z_top { g(z_c + h) } else { None };
        for (z, gz) in [(z_c - h, lo), (z_c + h, hi)] {
            if let Some(gz) = gz {
                if gz == 0.0 || gz.signum() != g_c.signum() {
                    bracket = Some(if z < z_c { (z, gz, z_c, g_c) } else { (z_c, g_c, z, gz) });
                    break;
                }
            }
        }
        h *= if h < 8.0 { 4.0 } else { 2.0 };
    }
    let (mut a, mut ga, mut b, mut gb) = bracket?;
    let target = 1e-13 * dt.max(1.0);
    let mut best = if ga.abs() < gb.abs() { (a, ga) } else { (b, gb) };
    let mut side_flag = 0i8;
    for _ in 0..200 {
        if best.1.abs() <= target || b - a <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
            break;
        }
        let mut m = b - gb * (b - a) / (gb - ga);
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let gm = g(m)?;
        if gm.abs() < best.1.abs() {
            best = (m, gm);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
            if side_flag == -1 {
                gb *= 0.5;
            }
            side_flag = -1;
        } else {
            b = m;
            gb = gm;
            if side_flag == 1 {
                ga *= 0.5;
            }
            side_flag = 1;
        }
    }
    let eta_star = eta(best.0);
    let (_, length) = problem.arrival(eta_star, route, true)?;
    // dx/dt at arrival turns the time mismatch into a position mismatch.
    let lvl = Level { f, eta: eta_star };
    let speed = 1.0 / lvl.rate(xq, Rate::Time).max(f64::MIN_POSITIVE);
    Some(QuadratureRoot {
        psi: psi_of_eta(f, x0, eta_star, sigma),
        length,
        residual: best.1.abs() * speed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, PhaseState};
    use crate::ode::Tolerance;

    #[test]
    fn angle_and_level_round_trip() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        for (x0, psi) in [(0.1, 2.06), (0.5, 0.01), (0.2, -0.3)] {
            let eta = eta_of_psi(&f, x0, psi);
            assert!((psi_of_eta(&f, x0, eta, psi.signum()) - psi).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_matches_integration_away_from_trouble() {
        // A passing geodesic with a comfortable margin above the separatrix.
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let (x0, psi) = (0.1, 2.2);
        let end =
            dynamics::endpoint_at_time(&f, PhaseState::new(0.0, x0, psi), 1.5, Tolerance::uniform(1e-13)).unwrap();
        let eta = eta_of_psi(&f, x0, psi);
        let p = Problem {
            f: &f,
            x0,
            xq: end.x,
            dt: 1.5,
            tol: 1e-14,
        };
        let (t, l) = p.arrival(eta, Route::Passing, true).unwrap();
        assert!((t - 1.5).abs() < 1e-9, "{t}");
        assert!((l - end.tau).abs() < 1e-9, "{l} vs {}", end.tau);
    }

    #[test]
    fn trapped_route_matches_integration() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let (x0, psi) = (0.1, 1.5);
        let end =
            dynamics::endpoint_at_time(&f, PhaseState::new(0.0, x0, psi), 3.0, Tolerance::uniform(1e-13)).unwrap();
        let eta = eta_of_psi(&f, x0, psi);
        assert!(eta < 0.0);
        let p = Problem {
            f: &f,
            x0,
            xq: end.x,
            dt: 3.0,
            tol: 1e-14,
        };
        let route = p.classify(eta, 1.0).unwrap();
        let (t, l) = p.arrival(eta, route, true).unwrap();
        assert!((t - 3.0).abs() < 1e-8, "{route:?}: {t}");
        assert!((l - end.tau).abs() < 1e-8, "{l} vs {}", end.tau);
    }
}
