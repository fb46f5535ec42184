//! Timelike geodesics, light rays and Jacobi fields of `-f(x)^2 dt^2 + dx^2`.
//!
//! Unit future timelike vectors are written in hyperbolic-angle form
//! `(ṫ, ẋ) = (cosh ψ / f(x), sinh ψ)`. Along a geodesic the Clairaut quantity
//! `f(x) cosh ψ` is conserved, and differentiating it gives the first-order
//! system integrated here:
//!
//! ```text
//! ṫ = cosh ψ / f(x),   ẋ = sinh ψ,   ψ̇ = -(f'(x) / f(x)) cosh ψ.
//! ```
//!
//! All integrations are carried out in a frame where the start point has
//! `t = 0` and `x ∈ [0, 1)`, then translated back by a deck transformation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Crossing, Event, Integrator, OdeError, Segment, System, Tolerance};
use crate::profile::ProfileFn;

/// A point of the unit future observer bundle, with its proper time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub x: f64,
    pub psi: f64,
    pub tau: f64,
}

impl PhaseState {
    pub fn new(t: f64, x: f64, psi: f64) -> Self {
        PhaseState { t, x, psi, tau: 0.0 }
    }

    pub fn at(p: (f64, f64), psi: f64) -> Self {
        PhaseState::new(p.0, p.1, psi)
    }

    pub fn point(&self) -> (f64, f64) {
        (self.t, self.x)
    }

    /// Coordinate velocity `(ṫ, ẋ)`.
    pub fn velocity(&self, f: &ProfileFn) -> (f64, f64) {
        (self.psi.cosh() / f.value(self.x), self.psi.sinh())
    }

    /// `g(v, v) + 1` for the represented velocity; zero up to rounding.
    pub fn unit_speed_residual(&self, f: &ProfileFn) -> f64 {
        let fx = f.value(self.x);
        let (tdot, xdot) = self.velocity(f);
        -fx * fx * tdot * tdot + xdot * xdot + 1.0
    }

    /// The time-reflected, reversed state: `(t, x, ψ) ↦ (-t, x, -ψ)`.
    pub fn reflected(&self) -> Self {
        PhaseState {
            t: -self.t,
            x: self.x,
            psi: -self.psi,
            tau: self.tau,
        }
    }

    fn translated(&self, dt: f64, dx: f64) -> Self {
        PhaseState {
            t: self.t + dt,
            x: self.x + dx,
            ..*self
        }
    }
}

/// `f(x) cosh ψ`, conserved along every timelike geodesic.
pub fn clairaut(f: &ProfileFn, s: &PhaseState) -> f64 {
    f.value(s.x) * s.psi.cosh()
}

pub(crate) struct GeodesicSystem<'a> {
    pub f: &'a ProfileFn,
}

impl System<3> for GeodesicSystem<'_> {
    #[inline]
    fn rhs(&self, y: &[f64; 3]) -> [f64; 3] {
        let jet = self.f.eval(y[1]);
        let (sh, ch) = (y[2].sinh(), y[2].cosh());
        [ch / jet.value, sh, -(jet.d1 / jet.value) * ch]
    }

    fn error_scale(&self, i: usize, y0: &[f64; 3], y1: &[f64; 3], tol: &Tolerance) -> f64 {
        if i < 2 {
            tol.atol
        } else {
            tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs())
        }
    }

    fn max_step(&self, y: &[f64; 3], dy: &[f64; 3]) -> f64 {
        let speed = dy[1].abs();
        if speed == 0.0 {
            return f64::INFINITY;
        }
        self.f.safe_dx(y[1], dy[1]) / speed
    }
}

/// Geodesic together with the perpendicular Jacobi scalar `j'' + κ j = 0`,
/// `κ = f''(x) / f(x)` (the negated Gaussian curvature of the metric).
struct JacobiSystem<'a> {
    geo: GeodesicSystem<'a>,
}

impl System<5> for JacobiSystem<'_> {
    #[inline]
    fn rhs(&self, y: &[f64; 5]) -> [f64; 5] {
        let jet = self.geo.f.eval(y[1]);
        let (sh, ch) = (y[2].sinh(), y[2].cosh());
        let kappa = jet.d2 / jet.value;
        [ch / jet.value, sh, -(jet.d1 / jet.value) * ch, y[4], -kappa * y[3]]
    }

    fn error_scale(&self, i: usize, y0: &[f64; 5], y1: &[f64; 5], tol: &Tolerance) -> f64 {
        if i < 2 {
            tol.atol
        } else {
            tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs())
        }
    }

    fn max_step(&self, y: &[f64; 5], dy: &[f64; 5]) -> f64 {
        let speed = dy[1].abs();
        if speed == 0.0 {
            return f64::INFINITY;
        }
        self.geo.f.safe_dx(y[1], dy[1]) / speed
    }
}

/// Stop rule for [`flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StoppingCondition {
    ProperTime(f64),
    TimeAtLeast(f64),
    XAtLeast(f64),
    XAtMost(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub tol: Tolerance,
    /// Proper-time budget for coordinate stops.
    pub tau_budget: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            tol: Tolerance::default(),
            tau_budget: 1e6,
            max_steps: 5_000_000,
        }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        FlowOptions {
            tol: Tolerance::uniform(tol),
            ..FlowOptions::default()
        }
    }

    fn integrator(&self) -> Integrator {
        Integrator {
            tol: self.tol,
            max_steps: self.max_steps,
        }
    }
}

fn event_tol(target: f64) -> f64 {
    (4.0 * f64::EPSILON * target.abs()).max(1e-12)
}

fn ode_err(e: OdeError) -> Error {
    Error::Integrator(e.to_string())
}

/// A densely sampled unit-speed timelike geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    samples: Vec<PhaseState>,
    /// `d/dτ` of `(t, x, ψ)` at each sample, for Hermite interpolation.
    rates: Vec<[f64; 3]>,
    clairaut: f64,
    drift: f64,
}

impl GeodesicPath {
    fn from_segments(f: &ProfileFn, start: PhaseState, start_rate: [f64; 3], segs: &[Segment<3>]) -> Self {
        let mut samples = Vec::with_capacity(segs.len() + 1);
        let mut rates = Vec::with_capacity(segs.len() + 1);
        samples.push(start);
        rates.push(start_rate);
        for seg in segs {
            samples.push(PhaseState {
                t: seg.y1[0],
                x: seg.y1[1],
                psi: seg.y1[2],
                tau: seg.s1,
            });
            rates.push(seg.f1);
        }
        let c = clairaut(f, &start);
        let drift = samples
            .iter()
            .map(|s| (clairaut(f, s) - c).abs() / c)
            .fold(0.0, f64::max);
        GeodesicPath {
            samples,
            rates,
            clairaut: c,
            drift,
        }
    }

    pub fn samples(&self) -> &[PhaseState] {
        &self.samples
    }

    pub fn start(&self) -> PhaseState {
        self.samples[0]
    }

    pub fn end(&self) -> PhaseState {
        *self.samples.last().expect("paths are never empty")
    }

    /// Clairaut constant measured at the first sample.
    pub fn clairaut(&self) -> f64 {
        self.clairaut
    }

    /// Largest relative deviation of `f cosh ψ` from its initial value.
    pub fn clairaut_drift(&self) -> f64 {
        self.drift
    }

    pub fn proper_length(&self) -> f64 {
        self.end().tau - self.start().tau
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn segment(&self, i: usize) -> Segment<3> {
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        Segment {
            s0: a.tau,
            y0: [a.t, a.x, a.psi],
            f0: self.rates[i],
            s1: b.tau,
            y1: [b.t, b.x, b.psi],
            f1: self.rates[i + 1],
        }
    }

    /// Interpolated state at proper time `tau` (clamped to the path).
    pub fn state_at_tau(&self, tau: f64) -> PhaseState {
        if self.samples.len() == 1 || tau <= self.start().tau {
            return self.start();
        }
        if tau >= self.end().tau {
            return self.end();
        }
        let i = self.samples.partition_point(|s| s.tau <= tau).saturating_sub(1);
        let i = i.min(self.samples.len() - 2);
        let (y, _) = ode::hermite(&self.segment(i), tau);
        PhaseState {
            t: y[0],
            x: y[1],
            psi: y[2],
            tau,
        }
    }

    /// Interpolated state at coordinate time `t` (clamped to the path).
    pub fn state_at_t(&self, t: f64) -> PhaseState {
        if self.samples.len() == 1 || t <= self.start().t {
            return self.start();
        }
        if t >= self.end().t {
            return self.end();
        }
        let i = self.samples.partition_point(|s| s.t <= t).saturating_sub(1);
        let i = i.min(self.samples.len() - 2);
        let seg = self.segment(i);
        // t is strictly increasing in τ; solve t(τ) = t by safeguarded Newton.
        let (mut lo, mut hi) = (seg.s0, seg.s1);
        let mut tau = lo + (hi - lo) * (t - seg.y0[0]) / (seg.y1[0] - seg.y0[0]);
        for _ in 0..60 {
            let (y, dy) = ode::hermite(&seg, tau);
            let r = y[0] - t;
            if r.abs() <= 1e-15 * t.abs().max(1.0) {
                break;
            }
            if r > 0.0 {
                hi = tau;
            } else {
                lo = tau;
            }
            let next = tau - r / dy[0];
            tau = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        let (y, _) = ode::hermite(&seg, tau);
        PhaseState {
            t: y[0],
            x: y[1],
            psi: y[2],
            tau,
        }
    }

    /// Applies the deck translation `(t, x) ↦ (t + dt, x + dx)`.
    pub fn translated(&self, dt: f64, dx: f64) -> Self {
        GeodesicPath {
            samples: self.samples.iter().map(|s| s.translated(dt, dx)).collect(),
            ..self.clone()
        }
    }

    /// Shifts proper time by `dtau` (used when concatenating periods).
    pub fn retimed(&self, dtau: f64) -> Self {
        GeodesicPath {
            samples: self
                .samples
                .iter()
                .map(|s| PhaseState {
                    tau: s.tau + dtau,
                    ..*s
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// Deck-translates `s0` into the frame `t = 0`, `x ∈ [0, 1)`.
fn normalise(s0: &PhaseState) -> (PhaseState, f64, f64) {
    let kx = s0.x.floor();
    (
        PhaseState {
            t: 0.0,
            x: s0.x - kx,
            psi: s0.psi,
            tau: s0.tau,
        },
        s0.t,
        kx,
    )
}

/// Integrates the geodesic from `s0` until `stop`.
pub fn flow(f: &ProfileFn, s0: PhaseState, stop: StoppingCondition, opts: &FlowOptions) -> Result<GeodesicPath> {
    let (local, t_off, kx) = normalise(&s0);
    let sys = GeodesicSystem { f };
    let y0 = [local.t, local.x, local.psi];
    let start_rate = sys.rhs(&y0);
    let tau0 = local.tau;

    let (s_end, target, crossing_sign, coord) = match stop {
        StoppingCondition::ProperTime(t) => (t, 0.0, 0.0, None),
        StoppingCondition::TimeAtLeast(t1) => (f64::INFINITY, t1 - t_off, 1.0, Some(0usize)),
        StoppingCondition::XAtLeast(x1) => (tau0 + opts.tau_budget, x1 - kx, 1.0, Some(1)),
        StoppingCondition::XAtMost(x1) => (tau0 + opts.tau_budget, x1 - kx, -1.0, Some(1)),
    };

    if let Some(i) = coord {
        if crossing_sign * (y0[i] - target) >= 0.0 {
            return Ok(GeodesicPath::from_segments(f, s0, start_rate, &[]));
        }
    }

    let g = move |y: &[f64; 3]| match coord {
        Some(i) => crossing_sign * (y[i] - target),
        None => 0.0,
    };
    let events = [Event {
        g: &g,
        crossing: Crossing::Up,
        terminal: true,
        tol: event_tol(target),
    }];
    let events: &[Event<'_, 3>] = if coord.is_some() { &events } else { &[] };

    let mut segs: Vec<Segment<3>> = Vec::new();
    let outcome = opts
        .integrator()
        .run(&sys, tau0, y0, s_end, events, |seg| segs.push(*seg))
        .map_err(ode_err)?;

    let path = GeodesicPath::from_segments(f, local, start_rate, &segs).translated(t_off, kx);
    if coord.is_some() && outcome.terminal.is_none() {
        return Err(Error::StopUnreachable {
            budget: opts.tau_budget,
            partial: Box::new(path),
        });
    }
    Ok(path)
}

/// Endpoint of the geodesic from `s0` at coordinate time `t1`, without
/// recording the path.
///
/// Orbits of the reduced `(x mod 1, ψ)` dynamics are periodic: either `x`
/// advances by a whole period with `ψ` restored (Clairaut constant above
/// `f_max`), or `ψ` oscillates between two turning points. Once one period
/// has been integrated, whole periods are added by the deck translation and
/// only the final partial period is integrated.
pub fn endpoint_at_time(f: &ProfileFn, s0: PhaseState, t1: f64, tol: Tolerance) -> Result<PhaseState> {
    if t1 <= s0.t {
        return Ok(s0);
    }
    let (local, t_off, kx) = normalise(&s0);
    let target = t1 - t_off;
    let sys = GeodesicSystem { f };
    let integ = Integrator {
        tol,
        max_steps: 2_000_000,
    };
    let t_event = move |y: &[f64; 3]| y[0] - target;
    let t_stop = Event {
        g: &t_event,
        crossing: Crossing::Up,
        terminal: true,
        tol: event_tol(target),
    };
    let finish = |s: f64, y: [f64; 3]| PhaseState {
        t: y[0] + t_off,
        x: y[1] + kx,
        psi: y[2],
        tau: s,
    };
    let run = |s: f64, y: [f64; 3], extra: Option<&Event<'_, 3>>| {
        let owned: Vec<Event<'_, 3>> = std::iter::once(t_stop).chain(extra.copied()).collect();
        integ.run(&sys, s, y, f64::INFINITY, &owned, |_| {}).map_err(ode_err)
    };

    // A period event can land a rounding error past the target when the
    // period divides the remaining time; the state there is the answer.
    let last_leg = |s: f64, y: [f64; 3]| -> Result<PhaseState> {
        if y[0] >= target {
            return Ok(finish(s, y));
        }
        let out = run(s, y, None)?;
        Ok(finish(out.s, out.y))
    };

    let y0 = [0.0, local.x, local.psi];
    let c = f.value(local.x) * local.psi.cosh();

    if c > f.f_max() * (1.0 + 1e-12) {
        // x is strictly monotone; one period is x ↦ x ± 1 with ψ restored.
        let sigma = local.psi.signum();
        let x0 = local.x;
        let x_event = move |y: &[f64; 3]| sigma * (y[1] - x0) - 1.0;
        let period = Event {
            g: &x_event,
            crossing: Crossing::Up,
            terminal: true,
            tol: 1e-12,
        };
        let out = run(local.tau, y0, Some(&period))?;
        if out.terminal == Some(0) {
            return Ok(finish(out.s, out.y));
        }
        let dt = out.y[0];
        let dtau = out.s - local.tau;
        let mut n = ((target - dt) / dt).floor().max(0.0);
        while n > 0.0 && (n + 1.0) * dt >= target {
            n -= 1.0;
        }
        let jumped = [(n + 1.0) * dt, x0 + sigma * (n + 1.0), local.psi];
        return last_leg(local.tau + (n + 1.0) * dtau, jumped);
    }

    // Oscillating (or equilibrium) orbit: a period runs between successive
    // upward zero crossings of ψ.
    let psi_g = |y: &[f64; 3]| y[2];
    let up = Event {
        g: &psi_g,
        crossing: Crossing::Up,
        terminal: true,
        tol: 1e-13,
    };
    let down = Event {
        g: &psi_g,
        crossing: Crossing::Down,
        terminal: true,
        tol: 1e-13,
    };
    let a = run(local.tau, y0, Some(&up))?;
    if a.terminal == Some(0) || a.terminal.is_none() {
        return Ok(finish(a.s, a.y));
    }
    let b = run(a.s, a.y, Some(&down))?;
    if b.terminal == Some(0) || b.terminal.is_none() {
        return Ok(finish(b.s, b.y));
    }
    let cc = run(b.s, b.y, Some(&up))?;
    if cc.terminal == Some(0) || cc.terminal.is_none() {
        return Ok(finish(cc.s, cc.y));
    }
    let dt = cc.y[0] - a.y[0];
    let dtau = cc.s - a.s;
    let mut m = ((target - cc.y[0]) / dt).floor().max(0.0);
    while m > 0.0 && cc.y[0] + m * dt >= target {
        m -= 1.0;
    }
    let jumped = [cc.y[0] + m * dt, cc.y[1], cc.y[2]];
    last_leg(cc.s + m * dtau, jumped)
}

/// Zeros in `(τ₀, τ₀ + horizon]` of the perpendicular Jacobi scalar with
/// `j(0) = 0`, `j'(0) = 1`.
pub fn jacobi_zeros(f: &ProfileFn, s0: PhaseState, horizon: f64, opts: &FlowOptions) -> Result<Vec<f64>> {
    Ok(jacobi_run(f, s0, horizon, opts, false)?.0)
}

/// Zeros of `j` and the sampled `(τ, j)` trace.
pub type JacobiTrace = (Vec<f64>, Vec<(f64, f64)>);

/// Jacobi scalar `j(τ)` sampled at the accepted steps, with its zeros.
pub fn jacobi_trace(f: &ProfileFn, s0: PhaseState, horizon: f64, opts: &FlowOptions) -> Result<JacobiTrace> {
    jacobi_run(f, s0, horizon, opts, true)
}

fn jacobi_run(
    f: &ProfileFn,
    s0: PhaseState,
    horizon: f64,
    opts: &FlowOptions,
    keep_trace: bool,
) -> Result<JacobiTrace> {
    if horizon <= 0.0 {
        return Err(Error::Domain(format!("Jacobi horizon must be positive, got {horizon}")));
    }
    let (local, _, _) = normalise(&s0);
    let sys = JacobiSystem {
        geo: GeodesicSystem { f },
    };
    let g = |y: &[f64; 5]| y[3];
    let events = [Event {
        g: &g,
        crossing: Crossing::Either,
        terminal: false,
        tol: 1e-13,
    }];
    let mut trace = Vec::new();
    if keep_trace {
        trace.push((local.tau, 0.0));
    }
    let out = opts
        .integrator()
        .run(
            &sys,
            local.tau,
            [0.0, local.x, local.psi, 0.0, 1.0],
            local.tau + horizon,
            &events,
            |seg| {
                if keep_trace {
                    trace.push((seg.s1, seg.y1[3]));
                }
            },
        )
        .map_err(ode_err)?;
    let zeros = out.hits.iter().map(|h| h.s - local.tau + s0.tau).collect();
    Ok((zeros, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullBranch {
    /// `dx/dt = +f(x)`.
    Plus,
    /// `dx/dt = -f(x)`.
    Minus,
}

impl NullBranch {
    fn sign(self) -> f64 {
        match self {
            NullBranch::Plus => 1.0,
            NullBranch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullStop {
    TimeAtLeast(f64),
    XReaches(f64),
}

/// A future-directed light ray, sampled as `(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullPath {
    pub branch: NullBranch,
    pub samples: Vec<(f64, f64)>,
}

impl NullPath {
    pub fn end(&self) -> (f64, f64) {
        *self.samples.last().expect("paths are never empty")
    }
}

struct NullSystem<'a> {
    f: &'a ProfileFn,
    sign: f64,
}

impl System<1> for NullSystem<'_> {
    #[inline]
    fn rhs(&self, y: &[f64; 1]) -> [f64; 1] {
        [self.sign * self.f.value(y[0])]
    }

    fn error_scale(&self, _i: usize, _y0: &[f64; 1], _y1: &[f64; 1], tol: &Tolerance) -> f64 {
        tol.atol
    }

    fn max_step(&self, y: &[f64; 1], dy: &[f64; 1]) -> f64 {
        self.f.safe_dx(y[0], dy[0]) / dy[0].abs()
    }
}

/// Integrates a light ray `dx/dt = ±f(x)` from `p`.
pub fn null_flow(f: &ProfileFn, p: (f64, f64), branch: NullBranch, stop: NullStop, tol: Tolerance) -> Result<NullPath> {
    let sign = branch.sign();
    let kx = p.1.floor();
    let x0 = p.1 - kx;
    let sys = NullSystem { f, sign };
    let integ = Integrator {
        tol,
        max_steps: 5_000_000,
    };
    let mut samples = vec![p];
    let mut push = |seg: &Segment<1>| samples.push((seg.s1 + p.0, seg.y1[0] + kx));
    match stop {
        NullStop::TimeAtLeast(t1) => {
            integ.run(&sys, 0.0, [x0], t1 - p.0, &[], &mut push).map_err(ode_err)?;
        }
        NullStop::XReaches(x1) => {
            let target = x1 - kx;
            if sign * (target - x0) < 0.0 {
                return Err(Error::Domain(format!(
                    "{branch:?} ray from x = {} never reaches x = {x1}",
                    p.1
                )));
            }
            if target != x0 {
                let g = move |y: &[f64; 1]| sign * (y[0] - target);
                let events = [Event {
                    g: &g,
                    crossing: Crossing::Up,
                    terminal: true,
                    tol: event_tol(target),
                }];
                integ
                    .run(&sys, 0.0, [x0], f64::INFINITY, &events, &mut push)
                    .map_err(ode_err)?;
            }
        }
    }
    Ok(NullPath { branch, samples })
}

/// Asymptotic slopes `dx/dt` of the two light-ray foliations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationNumbers {
    pub minus: f64,
    pub plus: f64,
    pub null_period: f64,
    /// Slopes measured from long light rays, `±N / t_N`.
    pub flow_minus: f64,
    pub flow_plus: f64,
    /// Coordinate-time span of the long rays.
    pub flow_span: f64,
}

impl RotationNumbers {
    pub fn cross_check_error(&self) -> f64 {
        (self.plus - self.flow_plus)
            .abs()
            .max((self.minus - self.flow_minus).abs())
    }

    pub fn is_class_a(&self) -> bool {
        self.plus != self.minus
    }
}

/// Rotation numbers `m± = ±1/P`, cross-validated against light rays run for
/// at least 10³ units of coordinate time.
pub fn rotation_numbers(f: &ProfileFn) -> Result<RotationNumbers> {
    let p = f.null_period();
    let periods = (1000.0 / p).ceil();
    let tol = Tolerance::uniform(1e-12);
    let plus = null_flow(f, (0.0, 0.0), NullBranch::Plus, NullStop::XReaches(periods), tol)?;
    let minus = null_flow(f, (0.0, 0.0), NullBranch::Minus, NullStop::XReaches(-periods), tol)?;
    let t_plus = plus.end().0;
    let t_minus = minus.end().0;
    Ok(RotationNumbers {
        minus: -1.0 / p,
        plus: 1.0 / p,
        null_period: p,
        flow_minus: -periods / t_minus,
        flow_plus: periods / t_plus,
        flow_span: t_plus.min(t_minus),
    })
}
