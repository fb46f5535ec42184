use lortorus::causal::{self, causal_relation, distance, distance_point_set, distance_value};
use lortorus::lattice::deck_apply;
use lortorus::{CausalRelation, DistanceOptions, HomologyClass, ProfileFn};
use proptest::prelude::*;

/// Longest timelike path over a spacetime lattice: time steps of `dt`,
/// positions on a grid of spacing `dt / refine`, straight timelike moves
/// between consecutive time layers. Segment lengths use Simpson's rule.
fn lattice_longest_path(f: &ProfileFn, p: (f64, f64), q: (f64, f64), margin: f64, n_t: usize, refine: usize) -> f64 {
    let dt = (q.0 - p.0) / n_t as f64;
    let dx = dt / refine as f64;
    let x_lo = p.1.min(q.1) - margin;
    let n_x = ((p.1.max(q.1) + margin - x_lo) / dx).round() as usize + 1;
    let index = |x: f64| ((x - x_lo) / dx).round() as usize;
    let max_jump = (f.f_max() * dt / dx).floor() as i64;
    // f on the half-integer grid, for segment midpoints.
    let half: Vec<f64> = (0..2 * n_x).map(|i| f.value(x_lo + 0.5 * i as f64 * dx)).collect();
    let mut best = vec![f64::NEG_INFINITY; n_x];
    best[index(p.1)] = 0.0;
    for _ in 0..n_t {
        let mut next = vec![f64::NEG_INFINITY; n_x];
        for (j, &here) in best.iter().enumerate() {
            if here == f64::NEG_INFINITY {
                continue;
            }
            for jump in -max_jump..=max_jump {
                let k = j as i64 + jump;
                if k < 0 || k >= n_x as i64 {
                    continue;
                }
                let v = jump as f64 * dx / dt;
                let speed = |g: f64| (g * g - v * v).max(0.0).sqrt();
                let (fa, fm, fb) = (half[2 * j], half[(j as i64 + k) as usize], half[2 * k as usize]);
                if fa > v.abs() && fm > v.abs() && fb > v.abs() {
                    let cand = here + (speed(fa) + 4.0 * speed(fm) + speed(fb)) * dt / 6.0;
                    let slot = &mut next[k as usize];
                    if cand > *slot {
                        *slot = cand;
                    }
                }
            }
        }
        best = next;
    }
    best[index(q.1)]
}

#[test]
fn relation_examples() {
    let flat = ProfileFn::constant(1.0).unwrap();
    assert_eq!(
        causal_relation(&flat, (0.0, 0.0), (2.0, 1.0)),
        CausalRelation::Chronological
    );
    assert_eq!(
        causal_relation(&flat, (0.0, 0.0), (1.0, 1.0)),
        CausalRelation::CausalBoundary
    );
    assert_eq!(
        causal_relation(&flat, (0.0, 0.0), (1.0, 2.0)),
        CausalRelation::Unrelated
    );
    assert_eq!(
        causal_relation(&flat, (0.0, 0.0), (-1.0, 0.0)),
        CausalRelation::Unrelated
    );
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    // Fixed-grid Simpson rule for the null travel time over one period.
    let n = 200_000;
    let h = 1.0 / n as f64;
    let inner: f64 = (1..n)
        .map(|i| (if i % 2 == 1 { 4.0 } else { 2.0 }) / f.value(i as f64 * h))
        .sum();
    let period = (1.0 / f.value(0.0) + 1.0 / f.value(1.0) + inner) * h / 3.0;
    assert_eq!(
        causal_relation(&f, (0.0, 0.0), (period, 1.0)),
        CausalRelation::CausalBoundary
    );
    assert_eq!(
        causal_relation(&f, (0.0, 0.0), (period + 1e-6, 1.0)),
        CausalRelation::Chronological
    );
    assert_eq!(
        causal_relation(&f, (0.0, 0.0), (period - 1e-6, 1.0)),
        CausalRelation::Unrelated
    );
}

#[test]
fn flat_distance_examples() {
    let flat = ProfileFn::constant(1.0).unwrap();
    assert!((distance_value(&flat, (0.0, 0.0), (2.0, 0.0)).unwrap() - 2.0).abs() < 1e-9);
    assert!((distance_value(&flat, (0.0, 0.0), (2.0, 1.0)).unwrap() - 3f64.sqrt()).abs() < 1e-9);
    let r = distance(&flat, (0.0, 0.0), (1.0, 2.0), &DistanceOptions::default()).unwrap();
    assert_eq!(r.value, 0.0);
    assert_eq!(r.relation, CausalRelation::Unrelated);
}

#[test]
fn plateau_distance_agrees_with_the_lattice_oracle() {
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    let (p, q) = ((0.0, 0.5), (3.0, 1.5));
    let d = distance_value(&f, p, q).unwrap();
    // Halving the time step and quartering the position step refines the
    // slopes and the polygon together.
    let levels: Vec<f64> = [(50, 32), (100, 64), (200, 128)]
        .iter()
        .map(|&(n_t, refine)| lattice_longest_path(&f, p, q, 0.1, n_t, refine))
        .collect();
    for l in &levels {
        assert!(*l <= d + 1e-6, "lattice path {l} longer than d = {d}");
    }
    // Aitken extrapolation takes the convergence order from the data.
    let (d1, d2) = (levels[1] - levels[0], levels[2] - levels[1]);
    assert!(d2 > 0.0 && d2 < d1, "lattice values do not converge: {levels:?}");
    let limit = levels[2] + d2 * d2 / (d1 - d2);
    let own_error = limit - levels[2];
    assert!(
        (limit - d).abs() <= 1e-3,
        "d = {d}, lattice {levels:?} -> {limit} (own error {own_error:.1e})"
    );
}

#[test]
fn distances_to_a_maximum_column_obey_the_reverse_triangle_inequality() {
    // Targets on x = 0, where cosine(1.5, 0.4) peaks: far ones are reached
    // only by geodesics that linger next to the separatrix for longer than
    // any double-precision initial angle can express.
    let f = ProfileFn::cosine(1.5, 0.4).unwrap();
    let p = (0.0, 0.2);
    let at = |s: f64| (s / f.f_max(), 0.0);
    let mut previous = (4.0, distance_value(&f, p, at(4.0)).unwrap());
    for s in [8.0, 16.0, 32.0] {
        let d = distance_value(&f, p, at(s)).unwrap();
        // d(p, γ(s)) + d(γ(s), γ(2s)) ≤ d(p, γ(2s)), and the ray is unit speed.
        assert!(
            d >= previous.1 + (s - previous.0) - 1e-8,
            "s {s}: {d} after {previous:?}"
        );
        previous = (s, d);
    }
}

#[test]
fn lingering_maximizers_from_the_minimum_respect_mirror_symmetry() {
    // From the trough of cosine(1.5, 0.4) the maximiser swings out to a
    // crest at x = 0 or x = 1, lingers there, and comes back. x ↦ 1 - x is
    // an isometry, so mirrored targets must give the same distance.
    let f = ProfileFn::cosine(1.5, 0.4).unwrap();
    let p = (0.0, 0.5);
    for (t, dx) in [(9.082868549122852, 0.0405319574029325), (6.0, 0.1), (12.0, 0.02)] {
        let right = distance(&f, p, (t, 0.5 + dx), &DistanceOptions::value_only()).unwrap();
        let left = distance(&f, p, (t, 0.5 - dx), &DistanceOptions::value_only()).unwrap();
        for m in right.maximizers.iter().chain(&left.maximizers) {
            assert!(m.residual <= 1e-9, "t {t}: residual {}", m.residual);
        }
        assert!(
            (right.value - left.value).abs() <= 1e-8,
            "t {t}: {} vs {}",
            right.value,
            left.value
        );
    }
}

#[test]
fn maximizers_connect_the_endpoints() {
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    for (p, q) in [
        ((0.0, 0.5), (3.0, 1.5)),
        ((0.0, 0.1), (2.5, -0.4)),
        ((0.3, 0.9), (4.0, 2.2)),
    ] {
        let r = distance(&f, p, q, &DistanceOptions::default()).unwrap();
        assert!(!r.maximizers.is_empty());
        for m in &r.maximizers {
            assert!(m.residual <= 1e-9, "{p:?} -> {q:?}: residual {}", m.residual);
            assert!((m.length - r.value).abs() <= 1e-9);
            let end = m.path.as_ref().unwrap().end();
            assert!((end.t - q.0).abs() <= 1e-9 && (end.x - q.1).abs() <= 1e-8, "{end:?}");
        }
    }
}

#[test]
fn point_set_distance() {
    let flat = ProfileFn::constant(1.0).unwrap();
    let opts = DistanceOptions::value_only();
    let (v, arg) = distance_point_set(&flat, (0.0, 0.0), &[(2.0, 0.0), (2.0, 1.0)], &opts).unwrap();
    assert!((v - 2.0).abs() < 1e-9 && arg == (2.0, 0.0));
    let (v, arg) = distance_point_set(&flat, (0.0, 0.0), &[(1.0, 3.0), (-1.0, 0.0)], &opts).unwrap();
    assert_eq!((v, arg), (0.0, (1.0, 3.0)));
}

#[test]
fn flat_maximizers_cross_at_most_once() {
    let flat = ProfileFn::constant(1.0).unwrap();
    let seg = |p, q| {
        let r = distance(&flat, p, q, &DistanceOptions::default()).unwrap();
        r.maximizers[0].path.clone().unwrap()
    };
    let a = seg((0.0, 0.0), (4.0, 2.0));
    let b = seg((0.0, 2.0), (4.0, 0.0));
    let c = seg((0.0, 3.0), (4.0, 3.5));
    assert_eq!(causal::crossing_check(&a, &b), 1);
    assert_eq!(causal::crossing_check(&a, &c), 0);
}

#[test]
fn plateau_maximizers_cross_at_most_once() {
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    let seg = |p, q| {
        let r = distance(&f, p, q, &DistanceOptions::default()).unwrap();
        r.maximizers[0].path.clone().unwrap()
    };
    let paths = [
        seg((0.0, 0.0), (3.0, 1.2)),
        seg((0.0, 1.1), (3.0, -0.1)),
        seg((0.2, 0.5), (2.8, 0.5)),
        seg((-0.5, 0.8), (3.5, 0.2)),
    ];
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            assert!(causal::crossing_check(&paths[i], &paths[j]) <= 1, "{i} {j}");
        }
    }
}

#[test]
fn reverse_triangle_inequality_on_a_chain() {
    let f = ProfileFn::theorem_plateau(0.5).unwrap();
    let pts = [(0.0, 0.1), (1.2, 0.6), (2.1, 0.4), (3.3, 1.3), (4.0, 0.9)];
    let d = |a: usize, b: usize| distance_value(&f, pts[a], pts[b]).unwrap();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            for c in b + 1..pts.len() {
                assert!(d(a, c) - d(a, b) - d(b, c) >= -1e-7, "{a} {b} {c}");
            }
        }
    }
}

fn reflect(p: (f64, f64)) -> (f64, f64) {
    (-p.0, p.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flat_distance_formula(c in 0.5f64..3.0, t in 0.01f64..5.0, x in -8.0f64..8.0) {
        let f = ProfileFn::constant(c).unwrap();
        let d = distance_value(&f, (0.0, 0.0), (t, x)).unwrap();
        let expected = ((c * t).powi(2) - x * x).max(0.0).sqrt();
        match causal_relation(&f, (0.0, 0.0), (t, x)) {
            CausalRelation::Chronological => prop_assert!((d - expected).abs() <= 1e-7),
            _ => prop_assert_eq!(d, 0.0),
        }
    }

    #[test]
    fn distance_is_deck_invariant(
        t in 0.3f64..3.0, x0 in 0.0f64..1.0, x1 in -1.0f64..2.0,
        k_t in -3i64..3, k_x in -3i64..3,
    ) {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let (p, q) = ((0.0, x0), (t, x1));
        let k = HomologyClass::new(k_t, k_x);
        let d = distance_value(&f, p, q).unwrap();
        let moved = distance_value(&f, deck_apply(k, p), deck_apply(k, q)).unwrap();
        prop_assert!((d - moved).abs() <= 1e-9, "{d} vs {moved}");
    }

    #[test]
    fn time_reflection_swaps_the_endpoints(t in 0.3f64..3.0, x0 in 0.0f64..1.0, x1 in -1.0f64..2.0) {
        let f = ProfileFn::cosine(1.5, 0.4).unwrap();
        let (p, q) = ((0.0, x0), (t, x1));
        let d = distance_value(&f, p, q).unwrap();
        let back = distance_value(&f, reflect(q), reflect(p)).unwrap();
        prop_assert!((d - back).abs() <= 1e-9, "{d} vs {back}");
    }

    #[test]
    fn boundary_pairs_have_zero_distance(x0 in 0.0f64..1.0, x1 in -2.0f64..3.0) {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let t = f.inverse_integral(x0.min(x1), x0.max(x1));
        let d = distance_value(&f, (0.0, x0), (t, x1)).unwrap();
        prop_assert!(d <= 1e-8);
    }
}
