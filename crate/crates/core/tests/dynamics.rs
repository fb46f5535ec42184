use lortorus::dynamics::{self, FlowOptions, NullStop};
use lortorus::ode::Tolerance;
use lortorus::{NullBranch, PhaseState, ProfileFn, StoppingCondition};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn flow_tau(f: &ProfileFn, s0: PhaseState, tau: f64) -> lortorus::GeodesicPath {
    dynamics::flow(f, s0, StoppingCondition::ProperTime(tau), &FlowOptions::default()).unwrap()
}

/// Fixed-step RK4 for the geodesic system, written independently of the
/// library integrator. Returns `(t, x, ψ)` at every step.
fn rk4_geodesic(f: &ProfileFn, s0: PhaseState, horizon: f64, h: f64) -> Vec<[f64; 3]> {
    let rhs = |y: [f64; 3]| {
        let jet = f.eval(y[1]);
        let (s, c) = (y[2].sinh(), y[2].cosh());
        [c / jet.value, s, -jet.d1 / jet.value * c]
    };
    let add = |y: [f64; 3], k: [f64; 3], a: f64| [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2]];
    let steps = (horizon / h).round() as usize;
    let mut y = [s0.t, s0.x, s0.psi];
    let mut out = vec![y];
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(add(y, k1, 0.5 * h));
        let k3 = rhs(add(y, k2, 0.5 * h));
        let k4 = rhs(add(y, k3, h));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(y);
    }
    out
}

/// Focusing times from two geodesics with angles `ψ₀ ± δ`: zeros of their
/// separation projected on the unit normal `(sinh ψ / f, cosh ψ)`.
fn spread_focusing_times(f: &ProfileFn, s0: PhaseState, horizon: f64) -> Vec<f64> {
    let delta = 1e-6;
    let h = 1e-3;
    let a = rk4_geodesic(
        f,
        PhaseState {
            psi: s0.psi + delta,
            ..s0
        },
        horizon,
        h,
    );
    let b = rk4_geodesic(
        f,
        PhaseState {
            psi: s0.psi - delta,
            ..s0
        },
        horizon,
        h,
    );
    let base = rk4_geodesic(f, s0, horizon, h);
    let j: Vec<f64> = (0..base.len())
        .map(|i| {
            let (dt, dx) = ((a[i][0] - b[i][0]) / (2.0 * delta), (a[i][1] - b[i][1]) / (2.0 * delta));
            let psi = base[i][2];
            let fx = f.value(base[i][1]);
            -fx * psi.sinh() * dt + psi.cosh() * dx
        })
        .collect();
    let mut zeros = Vec::new();
    for i in 1..j.len() - 1 {
        if j[i] == 0.0 || j[i].signum() != j[i + 1].signum() {
            let s = j[i] / (j[i] - j[i + 1]);
            zeros.push((i as f64 + s) * h);
        }
    }
    zeros
}

#[test]
fn flat_geodesics_are_straight_lines() {
    let f = ProfileFn::constant(1.0).unwrap();
    let end = flow_tau(&f, PhaseState::new(0.0, 0.0, 0.0), 2.0).end();
    assert!(close(end.t, 2.0, 1e-12) && close(end.x, 0.0, 1e-12) && end.psi == 0.0 && close(end.tau, 2.0, 1e-12));
    for psi in [-1.3, 0.4, 2.0] {
        let t = 3.5;
        let end = flow_tau(&f, PhaseState::new(0.0, 0.0, psi), t).end();
        assert!(close(end.t, t * psi.cosh(), 1e-9), "{psi}: {end:?}");
        assert!(close(end.x, t * psi.sinh(), 1e-9), "{psi}: {end:?}");
        assert!(close(end.psi, psi, 1e-12));
    }
}

#[test]
fn vertical_geodesic_on_the_high_plateau() {
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    let end = flow_tau(&f, PhaseState::new(0.0, 0.5, 0.0), 4.0).end();
    assert!(close(end.t, 2.0, 1e-12) && end.x == 0.5 && end.psi == 0.0 && close(end.tau, 4.0, 1e-12));
}

#[test]
fn clairaut_constant_examples() {
    let flat = ProfileFn::constant(1.0).unwrap();
    assert_eq!(dynamics::clairaut(&flat, &PhaseState::new(0.0, 0.3, 0.0)), 1.0);
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    assert_eq!(dynamics::clairaut(&f, &PhaseState::new(0.0, 0.5, 0.0)), 2.0);
    let c = dynamics::clairaut(&flat, &PhaseState::new(0.0, 0.0, 1f64.asinh()));
    assert!(close(c, 2f64.sqrt(), 1e-15));
}

#[test]
fn coordinate_stops_are_exact() {
    let f = ProfileFn::cosine(1.5, 0.4).unwrap();
    let opts = FlowOptions::default();
    let s0 = PhaseState::new(0.0, 0.1, 1.2);
    let p = dynamics::flow(&f, s0, StoppingCondition::XAtLeast(2.3), &opts).unwrap();
    assert!(close(p.end().x, 2.3, 1e-12));
    let p = dynamics::flow(&f, s0, StoppingCondition::TimeAtLeast(5.0), &opts).unwrap();
    assert!(close(p.end().t, 5.0, 1e-12));
    let back = PhaseState::new(0.0, 0.1, -1.2);
    let p = dynamics::flow(&f, back, StoppingCondition::XAtMost(-1.7), &opts).unwrap();
    assert!(close(p.end().x, -1.7, 1e-12));
}

#[test]
fn flat_and_pole_geodesics_have_no_conjugate_points() {
    let opts = FlowOptions::with_tol(1e-12);
    let flat = ProfileFn::constant(1.0).unwrap();
    assert!(
        dynamics::jacobi_zeros(&flat, PhaseState::new(0.0, 0.2, 0.7), 100.0, &opts)
            .unwrap()
            .is_empty()
    );
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    for psi in [-2.0, -0.6, 0.0, 0.3, 1.1, 2.0] {
        let zeros = dynamics::jacobi_zeros(&f, PhaseState::new(0.0, 0.5, psi), 100.0, &opts).unwrap();
        assert!(zeros.is_empty(), "ψ₀ = {psi}: {zeros:?}");
    }
}

#[test]
fn jacobi_zeros_match_the_spread_oracle() {
    let f = ProfileFn::cosine(1.5, 0.4).unwrap();
    let opts = FlowOptions::with_tol(1e-12);
    let horizon = 20.0;
    for s0 in [
        PhaseState::new(0.0, 0.5, 0.0),
        PhaseState::new(0.0, 0.3, 0.2),
        PhaseState::new(0.0, 0.4, -0.5),
        PhaseState::new(0.0, 0.7, 0.35),
    ] {
        let zeros = dynamics::jacobi_zeros(&f, s0, horizon, &opts).unwrap();
        let oracle = spread_focusing_times(&f, s0, horizon);
        assert!(!oracle.is_empty(), "{s0:?} does not focus");
        assert_eq!(zeros.len(), oracle.len(), "{s0:?}: {zeros:?} vs {oracle:?}");
        for (z, o) in zeros.iter().zip(&oracle) {
            assert!(close(*z, *o, 1e-4), "{s0:?}: {z} vs {o}");
        }
    }
}

#[test]
fn null_ray_examples() {
    let tol = Tolerance::uniform(1e-12);
    let flat = ProfileFn::constant(1.0).unwrap();
    let end = dynamics::null_flow(&flat, (0.0, 0.0), NullBranch::Plus, NullStop::TimeAtLeast(3.0), tol)
        .unwrap()
        .end();
    assert!(close(end.0, 3.0, 1e-12) && close(end.1, 3.0, 1e-12));
    let two = ProfileFn::constant(2.0).unwrap();
    let end = dynamics::null_flow(&two, (0.0, 0.0), NullBranch::Plus, NullStop::XReaches(1.0), tol)
        .unwrap()
        .end();
    assert!(close(end.0, 0.5, 1e-12) && close(end.1, 1.0, 1e-12));
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    let end = dynamics::null_flow(&f, (0.0, 0.0), NullBranch::Plus, NullStop::XReaches(1.0), tol)
        .unwrap()
        .end();
    assert!(close(end.0, f.null_period(), 1e-8) && close(end.1, 1.0, 1e-12));
}

#[test]
fn null_rays_advance_by_the_inverse_profile() {
    // dt = dx / f along a light ray; each step is checked against a
    // fixed-grid Simpson rule.
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    for branch in [NullBranch::Plus, NullBranch::Minus] {
        let ray = dynamics::null_flow(
            &f,
            (0.0, 0.3),
            branch,
            NullStop::TimeAtLeast(4.0),
            Tolerance::uniform(1e-12),
        )
        .unwrap();
        for w in ray.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(b.0 > a.0);
            let n = 2000;
            let h = (b.1 - a.1) / n as f64;
            let inner: f64 = (1..n)
                .map(|i| (if i % 2 == 1 { 4.0 } else { 2.0 }) / f.value(a.1 + i as f64 * h))
                .sum();
            let dt = ((1.0 / f.value(a.1) + 1.0 / f.value(b.1) + inner) * h / 3.0).abs();
            assert!(close(b.0 - a.0, dt, 1e-10), "{branch:?} {a:?} -> {b:?}: {dt}");
        }
    }
}

#[test]
fn rotation_number_examples() {
    let r = dynamics::rotation_numbers(&ProfileFn::constant(1.0).unwrap()).unwrap();
    assert!(close(r.minus, -1.0, 1e-15) && close(r.plus, 1.0, 1e-15));
    let r = dynamics::rotation_numbers(&ProfileFn::constant(2.0).unwrap()).unwrap();
    assert!(close(r.minus, -2.0, 1e-15) && close(r.plus, 2.0, 1e-15));
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    let r = dynamics::rotation_numbers(&f).unwrap();
    assert!(r.is_class_a());
    assert!(close(r.plus, 1.0 / f.null_period(), 1e-15));
    assert!(r.flow_span >= 1e3);
    assert!(r.cross_check_error() <= 1e-6, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clairaut_constant_is_conserved(x in 0.0f64..1.0, psi in -2.5f64..2.5) {
        let f = ProfileFn::cosine(1.5, 0.4).unwrap();
        let path = flow_tau(&f, PhaseState::new(0.0, x, psi), 200.0);
        let c = path.clairaut();
        let drift = path
            .samples()
            .iter()
            .map(|s| (dynamics::clairaut(&f, s) - c).abs() / c)
            .fold(0.0, f64::max);
        prop_assert!(drift <= 1e-8, "drift {drift}");
        prop_assert!((drift - path.clairaut_drift()).abs() <= 1e-15);
    }

    #[test]
    fn samples_are_unit_speed_and_future_directed(x in -1.0f64..1.0, psi in -2.0f64..2.0) {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let path = flow_tau(&f, PhaseState::new(0.0, x, psi), 30.0);
        for s in path.samples() {
            // Rounding in -f²ṫ² + ẋ² + 1 scales with the size of its terms.
            let scale = s.psi.cosh().powi(2);
            prop_assert!(s.unit_speed_residual(&f).abs() <= 1e-14 * scale);
        }
        for w in path.samples().windows(2) {
            prop_assert!(w[1].t > w[0].t && w[1].tau > w[0].tau);
        }
    }

    #[test]
    fn geodesics_escape_a_pole_monotonically(x in 0.25f64..0.75, psi in prop_oneof![-2.0f64..-1e-3, 1e-3f64..2.0]) {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let path = flow_tau(&f, PhaseState::new(0.0, x, psi), 50.0);
        let sign = psi.signum();
        for w in path.samples().windows(2) {
            prop_assert!(sign * (w[1].x - w[0].x) > 0.0);
            prop_assert!(w[1].psi.signum() == sign);
        }
    }

    #[test]
    fn reversing_a_geodesic_returns_to_its_start(x in 0.0f64..1.0, psi in -1.5f64..1.5, tau in 1.0f64..20.0) {
        let f = ProfileFn::cosine(1.5, 0.4).unwrap();
        let s0 = PhaseState::new(0.0, x, psi);
        let end = flow_tau(&f, s0, tau).end();
        // Time reflection turns the reversed curve into a future-directed one.
        let back = flow_tau(&f, PhaseState::new(end.t, end.x, end.psi).reflected(), tau).end().reflected();
        prop_assert!((back.t - s0.t).abs() <= 1e-7);
        prop_assert!((back.x - s0.x).abs() <= 1e-7);
        prop_assert!((back.psi - s0.psi).abs() <= 1e-7);
    }
}
