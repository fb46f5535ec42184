//! Dormand–Prince 5(4) integrator for autonomous systems, with event location
//! and per-step Hermite dense output.

use thiserror::Error;

/// An autonomous first-order system `y' = F(y)`.
pub trait System<const N: usize> {
    fn rhs(&self, y: &[f64; N]) -> [f64; N];

    /// Weight used to normalise the local error of component `i`.
    fn error_scale(&self, i: usize, y0: &[f64; N], y1: &[f64; N], tol: &Tolerance) -> f64 {
        tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs())
    }

    /// Upper bound on the next step from `y` (features the error estimate might skip).
    fn max_step(&self, _y: &[f64; N], _dy: &[f64; N]) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub const fn new(rtol: f64, atol: f64) -> Self {
        Tolerance { rtol, atol }
    }

    pub const fn uniform(tol: f64) -> Self {
        Tolerance { rtol: tol, atol: tol }
    }
}

impl Default for Tolerance {
    /// Tight enough that long unit-speed geodesics (τ ~ 200) keep the
    /// Clairaut drift near 5e-9; at 1e-10 it reaches several 1e-8.
    fn default() -> Self {
        Tolerance::uniform(1e-11)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at s = {0}")]
    StepUnderflow(f64),
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("non-finite state at s = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// `g` goes from negative to non-negative.
    Up,
    /// `g` goes from positive to non-positive.
    Down,
    Either,
}

impl Crossing {
    fn detects(self, before: f64, after: f64) -> bool {
        match self {
            Crossing::Up => before < 0.0 && after >= 0.0,
            Crossing::Down => before > 0.0 && after <= 0.0,
            Crossing::Either => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

/// A scalar event function with a crossing direction.
#[derive(Clone, Copy)]
pub struct Event<'a, const N: usize> {
    pub g: &'a dyn Fn(&[f64; N]) -> f64,
    pub crossing: Crossing,
    pub terminal: bool,
    /// Accepted residual `|g|` at the located event.
    pub tol: f64,
}

/// One accepted step, enough for cubic Hermite interpolation.
#[derive(Debug, Clone, Copy)]
pub struct Segment<const N: usize> {
    pub s0: f64,
    pub y0: [f64; N],
    pub f0: [f64; N],
    pub s1: f64,
    pub y1: [f64; N],
    pub f1: [f64; N],
}

#[derive(Debug, Clone, Copy)]
pub struct Hit<const N: usize> {
    pub event: usize,
    pub s: f64,
    pub y: [f64; N],
}

#[derive(Debug, Clone)]
pub struct Outcome<const N: usize> {
    pub s: f64,
    pub y: [f64; N],
    pub dy: [f64; N],
    /// Index of the terminal event that stopped the run, if any.
    pub terminal: Option<usize>,
    pub hits: Vec<Hit<N>>,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub tol: Tolerance,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            tol: Tolerance::default(),
            max_steps: 2_000_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One Dormand–Prince step. Returns the new state, its derivative and the
/// embedded error vector.
pub fn dopri_step<S: System<N>, const N: usize>(
    sys: &S,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N], [f64; N]) {
    let k2 = sys.rhs(&combo(y, h, &[(A21, k1)]));
    let k3 = sys.rhs(&combo(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = sys.rhs(&combo(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = sys.rhs(&combo(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = sys.rhs(&combo(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y1 = combo(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = sys.rhs(&y1);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y1, k7, err)
}

/// Cubic Hermite interpolation inside a segment.
pub fn hermite<const N: usize>(seg: &Segment<N>, s: f64) -> ([f64; N], [f64; N]) {
    let h = seg.s1 - seg.s0;
    if h == 0.0 {
        return (seg.y0, seg.f0);
    }
    let u = ((s - seg.s0) / h).clamp(0.0, 1.0);
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let d00 = (6.0 * u2 - 6.0 * u) / h;
    let d10 = 3.0 * u2 - 4.0 * u + 1.0;
    let d01 = (-6.0 * u2 + 6.0 * u) / h;
    let d11 = 3.0 * u2 - 2.0 * u;
    let mut y = [0.0; N];
    let mut dy = [0.0; N];
    for i in 0..N {
        y[i] = h00 * seg.y0[i] + h10 * h * seg.f0[i] + h01 * seg.y1[i] + h11 * h * seg.f1[i];
        dy[i] = d00 * seg.y0[i] + d10 * seg.f0[i] + d01 * seg.y1[i] + d11 * seg.f1[i];
    }
    (y, dy)
}

impl Integrator {
    pub fn new(tol: Tolerance) -> Self {
        Integrator {
            tol,
            ..Integrator::default()
        }
    }

    fn error_norm<S: System<N>, const N: usize>(&self, sys: &S, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            let sc = sys.error_scale(i, y0, y1, &self.tol);
            let e = (err[i] / sc).abs();
            // f64::max would silently drop a NaN.
            if !e.is_finite() || !y1[i].is_finite() {
                return f64::INFINITY;
            }
            worst = worst.max(e);
        }
        worst
    }

    fn initial_step<S: System<N>, const N: usize>(&self, sys: &S, y0: &[f64; N], f0: &[f64; N]) -> f64 {
        let mut d0 = 0.0f64;
        let mut d1 = 0.0f64;
        for i in 0..N {
            let sc = sys.error_scale(i, y0, y0, &self.tol);
            d0 = d0.max((y0[i] / sc).abs());
            d1 = d1.max((f0[i] / sc).abs());
        }
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = combo(y0, h0, &[(1.0, f0)]);
        let f1 = sys.rhs(&y1);
        let mut d2 = 0.0f64;
        for i in 0..N {
            let sc = sys.error_scale(i, y0, y0, &self.tol);
            d2 = d2.max(((f1[i] - f0[i]) / sc).abs() / h0);
        }
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(sys.max_step(y0, f0))
    }

    /// Integrates from `s0` towards `s_end` (may be infinite), stopping early
    /// at the first terminal event. Every accepted (possibly truncated) step
    /// is passed to `observe`.
    pub fn run<S: System<N>, const N: usize>(
        &self,
        sys: &S,
        s0: f64,
        y0: [f64; N],
        s_end: f64,
        events: &[Event<'_, N>],
        mut observe: impl FnMut(&Segment<N>),
    ) -> Result<Outcome<N>, OdeError> {
        let mut s = s0;
        let mut y = y0;
        let mut f = sys.rhs(&y);
        let mut hits = Vec::new();
        let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(&y)).collect();
        if s_end <= s0 {
            return Ok(Outcome {
                s,
                y,
                dy: f,
                terminal: None,
                hits,
                steps: 0,
            });
        }
        let mut h = self.initial_step(sys, &y, &f);
        let mut rejected_last = false;
        let mut steps = 0usize;
        loop {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps(self.max_steps));
            }
            h = h.min(sys.max_step(&y, &f));
            let mut last = false;
            if s + h >= s_end {
                h = s_end - s;
                last = true;
            }
            if h <= 1e-14 * s.abs().max(1.0) && !last {
                return Err(OdeError::StepUnderflow(s));
            }
            let (y1, f1, err) = dopri_step(sys, &y, &f, h);
            let norm = self.error_norm(sys, &y, &y1, &err);
            if !norm.is_finite() {
                h *= 0.1;
                rejected_last = true;
                if h <= 1e-14 * s.abs().max(1.0) {
                    return Err(OdeError::NonFinite(s));
                }
                continue;
            }
            if norm > 1.0 {
                h *= (0.9 * norm.powf(-0.2)).max(0.2);
                rejected_last = true;
                continue;
            }
            steps += 1;

            // Event scan over the accepted step.
            let g_new: Vec<f64> = events.iter().map(|e| (e.g)(&y1)).collect();
            let mut located: Vec<(usize, f64, [f64; N])> = Vec::new();
            for (k, ev) in events.iter().enumerate() {
                if ev.crossing.detects(g_prev[k], g_new[k]) {
                    let (theta, ye) = locate(sys, &y, &f, h, ev, g_prev[k], g_new[k], &y1);
                    located.push((k, theta, ye));
                }
            }
            let first_terminal = located
                .iter()
                .filter(|(k, ..)| events[*k].terminal)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .copied();
            if let Some((k_term, theta, ye)) = first_terminal {
                for &(k, th, yh) in &located {
                    if !events[k].terminal && th <= theta {
                        hits.push(Hit {
                            event: k,
                            s: s + th,
                            y: yh,
                        });
                    }
                }
                let fe = sys.rhs(&ye);
                let seg = Segment {
                    s0: s,
                    y0: y,
                    f0: f,
                    s1: s + theta,
                    y1: ye,
                    f1: fe,
                };
                observe(&seg);
                hits.push(Hit {
                    event: k_term,
                    s: s + theta,
                    y: ye,
                });
                return Ok(Outcome {
                    s: s + theta,
                    y: ye,
                    dy: fe,
                    terminal: Some(k_term),
                    hits,
                    steps,
                });
            }
            located.sort_by(|a, b| a.1.total_cmp(&b.1));
            for (k, th, yh) in located {
                hits.push(Hit {
                    event: k,
                    s: s + th,
                    y: yh,
                });
            }

            let s1 = if last { s_end } else { s + h };
            observe(&Segment {
                s0: s,
                y0: y,
                f0: f,
                s1,
                y1,
                f1,
            });
            s = s1;
            y = y1;
            f = f1;
            g_prev = g_new;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite(s));
            }
            if last {
                return Ok(Outcome {
                    s,
                    y,
                    dy: f,
                    terminal: None,
                    hits,
                    steps,
                });
            }
            let mut fac = (0.9 * norm.max(1e-12).powf(-0.2)).clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            rejected_last = false;
            h *= fac;
        }
    }
}

/// Locates an event inside an accepted step by a safeguarded secant
/// (Illinois) iteration on the step length, re-stepping from the step start.
/// Returns the step length and state on the post-crossing side.
#[allow(clippy::too_many_arguments)]
fn locate<S: System<N>, const N: usize>(
    sys: &S,
    y: &[f64; N],
    f: &[f64; N],
    h: f64,
    ev: &Event<'_, N>,
    g0: f64,
    g1: f64,
    y1: &[f64; N],
) -> (f64, [f64; N]) {
    let (mut lo, mut glo) = (0.0, g0);
    let (mut hi, mut ghi, mut yhi) = (h, g1, *y1);
    let mut side = 0i8;
    for _ in 0..200 {
        if ghi.abs() <= ev.tol || (hi - lo) <= 4.0 * f64::EPSILON * hi.abs().max(1e-300) {
            break;
        }
        let mut theta = hi - ghi * (hi - lo) / (ghi - glo);
        if !(theta > lo && theta < hi) {
            theta = 0.5 * (lo + hi);
        }
        let (yt, _, _) = dopri_step(sys, y, f, theta);
        let gt = (ev.g)(&yt);
        let after_side = ev.crossing.detects(glo, gt) || gt == 0.0;
        if after_side {
            hi = theta;
            ghi = gt;
            yhi = yt;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        } else {
            lo = theta;
            glo = gt;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        }
    }
    (hi, yhi)
}
