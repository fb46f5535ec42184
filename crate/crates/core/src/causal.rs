//! Causal relations and the Lorentzian distance on the universal cover.
//!
//! The distance between chronologically related points is realised by a
//! maximal geodesic, so it is computed by shooting: every geodesic leaving
//! `p` is followed to the time slice `t = t_q`, the roots of
//! `ψ₀ ↦ x(ψ₀) - x_q` are bracketed on a grid and polished, and the longest
//! connecting geodesic wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clairaut;
use crate::dynamics::{self, FlowOptions, GeodesicPath, PhaseState, StoppingCondition};
use crate::error::{Error, Result};
use crate::ode::Tolerance;
use crate::profile::ProfileFn;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalRelation {
    /// `q ∈ I⁺(p)`.
    Chronological,
    /// `q ∈ J⁺(p) \ I⁺(p)`, reached only by light rays.
    CausalBoundary,
    Unrelated,
}

/// Tolerance separating the causal boundary from its two sides.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Classifies `q` relative to `p`: `q ∈ J⁺(p)` iff `t_q - t_p ≥ |∫ dx / f|`.
pub fn causal_relation(f: &ProfileFn, p: Point, q: Point) -> CausalRelation {
    let dt = q.0 - p.0;
    if dt <= 0.0 {
        return if p == q {
            CausalRelation::CausalBoundary
        } else {
            CausalRelation::Unrelated
        };
    }
    let margin = dt - f.inverse_integral(p.1, q.1).abs();
    if margin.abs() <= BOUNDARY_TOL {
        CausalRelation::CausalBoundary
    } else if margin > 0.0 {
        CausalRelation::Chronological
    } else {
        CausalRelation::Unrelated
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceOptions {
    /// Nodes of the first ψ₀ scan; each refinement doubles the resolution.
    pub initial_nodes: usize,
    pub max_refinements: usize,
    /// Integrator tolerance for scan shots (only signs are used).
    pub scan_tol: f64,
    /// Integrator tolerance for root polishing.
    pub solve_tol: f64,
    /// Endpoint residual `|x - x_q|` accepted for a polished root.
    pub root_tol: f64,
    pub tie_tol: f64,
    /// Two successive refinements must agree on the maximum to this level.
    pub agree_tol: f64,
    pub with_paths: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            initial_nodes: 64,
            max_refinements: 8,
            scan_tol: 1e-7,
            solve_tol: 1e-12,
            root_tol: 1e-10,
            tie_tol: 1e-9,
            agree_tol: 1e-9,
            with_paths: true,
        }
    }
}

impl DistanceOptions {
    /// Default options without maximizer paths, for batch evaluation.
    pub fn value_only() -> Self {
        DistanceOptions {
            with_paths: false,
            ..DistanceOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maximizer {
    pub psi0: f64,
    pub length: f64,
    /// `|x - x_q|` at `t = t_q` for the polished shot.
    pub residual: f64,
    pub path: Option<GeodesicPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub relation: CausalRelation,
    /// Every connecting geodesic within the tie tolerance of the maximum,
    /// ordered by increasing ψ₀.
    pub maximizers: Vec<Maximizer>,
    /// Number of connecting geodesics found at the final resolution.
    pub root_count: usize,
    pub scan_nodes: usize,
}

impl DistanceResult {
    fn zero(relation: CausalRelation) -> Self {
        DistanceResult {
            value: 0.0,
            relation,
            maximizers: Vec::new(),
            root_count: 0,
            scan_nodes: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Root {
    psi: f64,
    length: f64,
    residual: f64,
    /// Polished with accurate shots (otherwise only with scan shots).
    precise: bool,
}

/// Roots whose scan-accuracy length falls this far below the best one
/// cannot be maximisers and are not polished further.
const PRECISE_MARGIN: f64 = 1e-4;

/// Endpoint miss beyond which a maximiser is reported as a solver failure
/// rather than returned.
const RESIDUAL_LIMIT: f64 = 1e-6;

struct Shooter<'a> {
    f: &'a ProfileFn,
    x0: f64,
    dt: f64,
    xq: f64,
    /// Angle windows around the separatrices, where the endpoint is so
    /// sensitive to errors that scan shots use the accurate tolerance.
    sensitive: Vec<(f64, f64)>,
}

impl Shooter<'_> {
    fn shoot(&self, psi: f64, tol: f64) -> Result<(f64, f64)> {
        let end = dynamics::endpoint_at_time(
            self.f,
            PhaseState::new(0.0, self.x0, psi),
            self.dt,
            Tolerance::uniform(tol),
        )?;
        Ok((end.x - self.xq, end.tau))
    }

    fn scan_tol(&self, psi: f64, opts: &DistanceOptions) -> f64 {
        if self.sensitive.iter().any(|&(a, b)| psi >= a && psi <= b) {
            opts.solve_tol
        } else {
            opts.scan_tol
        }
    }

    fn scan(&self, psis: &[f64], opts: &DistanceOptions) -> Result<Vec<f64>> {
        psis.par_iter()
            .map(|&psi| self.shoot(psi, self.scan_tol(psi, opts)).map(|(g, _)| g))
            .collect()
    }

    /// Illinois iteration on a sign change `g(lo) · g(hi) < 0` with shots at
    /// `tol`, stopping once `|g| ≤ target`. Returns the best iterate and the
    /// final bracket.
    #[allow(clippy::too_many_arguments)]
    fn illinois(
        &self,
        mut lo: f64,
        mut hi: f64,
        mut glo: f64,
        mut ghi: f64,
        tol: f64,
        target: f64,
    ) -> Result<(Root, [(f64, f64); 2])> {
        let mut best = Root {
            psi: if glo.abs() < ghi.abs() { lo } else { hi },
            length: f64::NAN,
            residual: glo.abs().min(ghi.abs()),
            precise: false,
        };
        let mut side = 0i8;
        for _ in 0..200 {
            if (best.residual <= target && best.length.is_finite())
                || (hi - lo) <= 4.0 * f64::EPSILON * (1.0 + lo.abs())
            {
                break;
            }
            let mut mid = hi - ghi * (hi - lo) / (ghi - glo);
            if !(mid > lo && mid < hi) {
                mid = 0.5 * (lo + hi);
            }
            let (gm, tm) = self.shoot(mid, tol)?;
            if gm.abs() <= best.residual || !best.length.is_finite() {
                best = Root {
                    psi: mid,
                    length: tm,
                    residual: gm.abs(),
                    precise: false,
                };
            }
            if gm == 0.0 {
                break;
            }
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            } else {
                hi = mid;
                ghi = gm;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            }
        }
        if !best.length.is_finite() {
            best.length = self.shoot(best.psi, tol)?.1;
        }
        Ok((best, [(lo, glo), (hi, ghi)]))
    }

    /// Locates the root of a scan sign change on `[a, b]` with scan shots.
    fn coarse_root(&self, a: f64, b: f64, ga: f64, gb: f64, opts: &DistanceOptions) -> Result<(Root, [(f64, f64); 2])> {
        let tol = self.scan_tol(a, opts).min(self.scan_tol(b, opts));
        self.illinois(a, b, ga, gb, tol, 10.0 * tol)
    }

    /// Refines a coarse root with accurate shots: secant steps seeded by the
    /// coarse bracket, falling back to a bracketed solve on `[a, b]`.
    fn refine(
        &self,
        coarse: &Root,
        bracket: [(f64, f64); 2],
        a: f64,
        b: f64,
        opts: &DistanceOptions,
    ) -> Result<Option<Root>> {
        let [(l, gl), (h, gh)] = bracket;
        let mut slope = (gh - gl) / (h - l);
        let mut x0 = coarse.psi;
        let (mut g0, t0) = self.shoot(x0, opts.solve_tol)?;
        let mut best = Root {
            psi: x0,
            length: t0,
            residual: g0.abs(),
            precise: true,
        };
        let width = b - a;
        for _ in 0..8 {
            if best.residual <= opts.root_tol || !slope.is_finite() || slope == 0.0 {
                break;
            }
            let x1 = x0 - g0 / slope;
            if !(x1 > a - width && x1 < b + width) {
                break;
            }
            let (g1, t1) = self.shoot(x1, opts.solve_tol)?;
            if g1.abs() < best.residual {
                best = Root {
                    psi: x1,
                    length: t1,
                    residual: g1.abs(),
                    precise: true,
                };
            }
            if x1 == x0 {
                break;
            }
            slope = (g1 - g0) / (x1 - x0);
            (x0, g0) = (x1, g1);
        }
        if best.residual <= opts.root_tol {
            return Ok(Some(best));
        }
        let (ga, _) = self.shoot(a, opts.solve_tol)?;
        let (gb, _) = self.shoot(b, opts.solve_tol)?;
        if ga == 0.0 || gb == 0.0 || ga.signum() != gb.signum() {
            let (r, _) = self.illinois(a, b, ga, gb, opts.solve_tol, opts.root_tol)?;
            let r = Root { precise: true, ..r };
            return Ok(Some(if r.residual < best.residual { r } else { best }));
        }
        Ok(None)
    }

    /// Swaps in the quadrature solutions for a root next to a separatrix,
    /// where shooting loses the Clairaut constant to integrator drift.
    fn near_separatrix(&self, root: Root, opts: &DistanceOptions) -> Vec<Root> {
        let accept = |q: &clairaut::QuadratureRoot| {
            (q.psi - root.psi).abs() <= 1e-6 * (1.0 + root.psi.abs()) && q.residual <= opts.root_tol.max(root.residual)
        };
        let polished: Vec<Root> = clairaut::polish(self.f, self.x0, self.dt, self.xq, root.psi, &accept)
            .into_iter()
            .map(|q| Root {
                psi: q.psi,
                length: q.length,
                residual: q.residual,
                precise: true,
            })
            .collect();
        if polished.is_empty() {
            vec![root]
        } else {
            polished
        }
    }
}

fn sign_changes(values: &[f64]) -> Vec<usize> {
    let positive = |v: f64| v >= 0.0;
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| positive(w[0]) != positive(w[1]))
        .map(|(i, _)| i)
        .collect()
}

fn uniform_grid(span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64).collect()
}

/// Initial angles whose geodesics are asymptotic to the level `f = f_max`.
///
/// Near these the geodesic lingers by the maximum locus for a time that
/// blows up as `ψ₀` approaches them, so narrow pairs of roots hide there.
fn separatrix_angles(f: &ProfileFn, x0: f64) -> Vec<f64> {
    let a = (f.f_max() / f.value(x0)).max(1.0).acosh();
    if a == 0.0 {
        vec![0.0]
    } else {
        vec![-a, a]
    }
}

/// `grid` plus nodes approaching each separatrix angle geometrically
/// (ratio 4) from both sides, down to an offset of 1e-12.
fn clustered_grid(grid: Vec<f64>, separatrices: &[f64]) -> Vec<f64> {
    let span = grid[grid.len() - 1];
    let h = grid[1] - grid[0];
    let mut nodes = grid;
    for &c in separatrices {
        let mut d = h;
        while d >= 1e-12 {
            nodes.extend([c - d, c + d].into_iter().filter(|x| x.abs() < span));
            d *= 0.25;
        }
        if c.abs() < span {
            nodes.push(c);
        }
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    nodes
}

/// Lorentzian distance `d(p, q)` with all (near-)maximizing geodesics.
pub fn distance(f: &ProfileFn, p: Point, q: Point, opts: &DistanceOptions) -> Result<DistanceResult> {
    let relation = causal_relation(f, p, q);
    if relation != CausalRelation::Chronological {
        return Ok(DistanceResult::zero(relation));
    }
    let kx = p.1.floor();
    let mut shooter = Shooter {
        f,
        x0: p.1 - kx,
        dt: q.0 - p.0,
        xq: q.1 - kx,
        sensitive: Vec::new(),
    };
    let separatrices = separatrix_angles(f, shooter.x0);
    let dx = shooter.xq - shooter.x0;

    // Bracketing range for ψ₀, widened until both ends sit on the correct
    // side of x_q with no sign change in the outermost cells.
    let mut span = (dx.abs() * f.f_max() / shooter.dt).asinh() + 2.0;
    let n0 = opts.initial_nodes.max(8);
    let mut psis;
    let mut values;
    let mut widenings = 0;
    loop {
        let grid = uniform_grid(span, n0);
        let h = grid[1] - grid[0];
        shooter.sensitive = separatrices.iter().map(|&c| (c - 2.0 * h, c + 2.0 * h)).collect();
        psis = clustered_grid(grid, &separatrices);
        values = shooter.scan(&psis, opts)?;
        let n = values.len();
        let ends_ok = values[0] < 0.0 && values[n - 1] > 0.0;
        let edges_quiet = (values[1] < 0.0) && (values[n - 2] > 0.0);
        if ends_ok && edges_quiet {
            break;
        }
        widenings += 1;
        if widenings > 12 {
            return Err(Error::Inconsistent(format!(
                "ψ₀ bracket failed to enclose the target after widening to ±{span}"
            )));
        }
        span *= 1.5;
    }

    let mut roots: Vec<Root> = Vec::new();
    let mut previous: Option<(usize, f64)> = None;
    let mut level = 0;
    loop {
        let changes = sign_changes(&values);
        let mut found: Vec<Root> = Vec::new();
        let mut brackets = Vec::new();
        for &i in &changes {
            let (a, b) = (psis[i], psis[i + 1]);
            if let Some(r) = roots.iter().find(|r| r.precise && r.psi >= a && r.psi <= b) {
                found.push(*r);
                brackets.push(None);
                continue;
            }
            let (r, br) = shooter.coarse_root(a, b, values[i], values[i + 1], opts)?;
            found.push(r);
            brackets.push(Some((br, i)));
        }
        // Accurate polishing only where a maximiser can be.
        let coarse_best = found.iter().map(|r| r.length).fold(f64::NEG_INFINITY, f64::max);
        let mut polished = Vec::with_capacity(found.len());
        for (r, br) in found.into_iter().zip(brackets) {
            if r.precise || r.length < coarse_best - PRECISE_MARGIN {
                polished.push(r);
                continue;
            }
            let (br, i) = br.expect("cached roots are already precise");
            let (a, b) = (psis[i], psis[i + 1]);
            if let Some(p) = shooter.refine(&r, br, a, b, opts)? {
                polished.extend(shooter.near_separatrix(p, opts));
                continue;
            }
            // The scan sign change did not survive accurate shots; retry on
            // the neighbouring cells before giving up on it.
            let lo = if i > 0 { psis[i - 1] } else { a };
            let hi = if i + 2 < psis.len() { psis[i + 2] } else { b };
            if let Some(p) = shooter.refine(&r, br, lo, hi, opts)? {
                polished.extend(shooter.near_separatrix(p, opts));
            }
        }
        let mut found = polished;
        found.sort_by(|a, b| a.psi.total_cmp(&b.psi));
        found.dedup_by(|a, b| (a.psi - b.psi).abs() <= 1e-10 * (1.0 + a.psi.abs()));
        let best = found.iter().map(|r| r.length).fold(f64::NEG_INFINITY, f64::max);
        roots = found;

        let stable = matches!(previous, Some((count, value))
            if count == roots.len() && (value - best).abs() <= opts.agree_tol);
        if (stable && !roots.is_empty()) || level >= opts.max_refinements {
            break;
        }
        previous = Some((roots.len(), best));
        level += 1;

        let mids: Vec<f64> = psis.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mid_values = shooter.scan(&mids, opts)?;
        let mut next_psis = Vec::with_capacity(psis.len() * 2 - 1);
        let mut next_values = Vec::with_capacity(psis.len() * 2 - 1);
        for i in 0..mids.len() {
            next_psis.push(psis[i]);
            next_values.push(values[i]);
            next_psis.push(mids[i]);
            next_values.push(mid_values[i]);
        }
        next_psis.push(*psis.last().unwrap());
        next_values.push(*values.last().unwrap());
        psis = next_psis;
        values = next_values;
    }

    if roots.is_empty() {
        return Err(Error::NoConnectingGeodesic { p, q });
    }
    let value = roots.iter().map(|r| r.length).fold(f64::NEG_INFINITY, f64::max);
    if let Some(bad) = roots
        .iter()
        .find(|r| r.length >= value - opts.tie_tol && !(r.residual <= RESIDUAL_LIMIT))
    {
        return Err(Error::Inconsistent(format!(
            "maximiser from {p:?} to {q:?} misses the endpoint by {:e} (ψ₀ = {})",
            bad.residual, bad.psi
        )));
    }
    let mut maximizers = Vec::new();
    for r in roots.iter().filter(|r| r.length >= value - opts.tie_tol) {
        let path = if opts.with_paths {
            let flow_opts = FlowOptions::with_tol(opts.solve_tol);
            Some(dynamics::flow(
                f,
                PhaseState::at(p, r.psi),
                StoppingCondition::TimeAtLeast(q.0),
                &flow_opts,
            )?)
        } else {
            None
        };
        maximizers.push(Maximizer {
            psi0: r.psi,
            length: r.length,
            residual: r.residual,
            path,
        });
    }
    Ok(DistanceResult {
        value,
        relation,
        maximizers,
        root_count: roots.len(),
        scan_nodes: psis.len(),
    })
}

/// `d(p, q)` only.
pub fn distance_value(f: &ProfileFn, p: Point, q: Point) -> Result<f64> {
    Ok(distance(f, p, q, &DistanceOptions::value_only())?.value)
}

/// `sup_{q ∈ S} d(p, q)` with its first maximiser in input order.
pub fn distance_point_set(f: &ProfileFn, p: Point, set: &[Point], opts: &DistanceOptions) -> Result<(f64, Point)> {
    let first = *set
        .first()
        .ok_or_else(|| Error::Domain("point set must be nonempty".into()))?;
    let values: Vec<f64> = set
        .par_iter()
        .map(|&q| distance(f, p, q, opts).map(|d| d.value))
        .collect::<Result<_>>()?;
    let mut best = (values[0], first);
    for (v, q) in values.iter().zip(set).skip(1) {
        if *v > best.0 {
            best = (*v, *q);
        }
    }
    Ok(best)
}

/// Coordinate times at which two geodesic segments cross transversally.
///
/// Timelike segments are graphs over `t`, so they cross exactly where
/// `x₁(t) - x₂(t)` changes sign on their common time window. The difference
/// is evaluated on the dense output at both sample sets and their midpoints;
/// coincidences at the window ends and tangential touches are not counted.
pub fn crossing_times(seg1: &GeodesicPath, seg2: &GeodesicPath) -> Vec<f64> {
    let lo = seg1.start().t.max(seg2.start().t);
    let hi = seg1.end().t.min(seg2.end().t);
    if hi <= lo {
        return Vec::new();
    }
    let mut ts: Vec<f64> = seg1
        .samples()
        .iter()
        .chain(seg2.samples())
        .map(|s| s.t)
        .filter(|&t| t > lo && t < hi)
        .collect();
    ts.push(lo);
    ts.push(hi);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut grid = Vec::with_capacity(2 * ts.len());
    for w in ts.windows(2) {
        grid.push(w[0]);
        grid.push(0.5 * (w[0] + w[1]));
    }
    grid.push(hi);

    let gap = |t: f64| seg1.state_at_t(t).x - seg2.state_at_t(t).x;
    const TOUCH: f64 = 1e-9;
    let signed: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| (t, gap(t)))
        .filter(|(_, d)| d.abs() > TOUCH)
        .collect();
    let mut out = Vec::new();
    for w in signed.windows(2) {
        let ((mut a, mut ga), (mut b, _)) = (w[0], w[1]);
        if ga.signum() == w[1].1.signum() {
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let gm = gap(m);
            if gm.signum() == ga.signum() {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// Number of transversal crossings between two geodesic segments.
pub fn crossing_check(seg1: &GeodesicPath, seg2: &GeodesicPath) -> usize {
    crossing_times(seg1, seg2).len()
}
