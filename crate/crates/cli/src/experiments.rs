//! The experiments behind `--experiment`.

use anyhow::{Context, Result};
use lortorus::acceptance::{self, CheckReport, Suite};
use lortorus::causal::{self, DistanceOptions};
use lortorus::dynamics::{self, FlowOptions, StoppingCondition};
use lortorus::horocycle::{self, BusemannOptions, CentralRay};
use lortorus::lattice;
use lortorus::poles::{self, CertifyOptions};
use lortorus::{PhaseState, Point, ProfileFn, ProfileKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{class, Expectation, ExperimentConfig, ExperimentName};
use crate::output::{Artifacts, Cell, Csv};
use crate::svg;

pub struct Outcome {
    pub checks: Vec<CheckReport>,
    pub values: Value,
}

pub fn run(name: ExperimentName, config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let f = config.profile();
    match name {
        ExperimentName::Classify => classify(&f, config),
        ExperimentName::CertifyPole => certify_pole(&f, config, out),
        ExperimentName::Distance => distance(&f, config, out),
        ExperimentName::ClosedGeodesics => closed_geodesics(&f, config, out),
        ExperimentName::DisplacementMap => displacement_map(&f, config, out),
        ExperimentName::Busemann => busemann(&f, config, out),
        ExperimentName::Selftest => selftest(&f, config),
    }
}

/// `(0, centre of the first maximum interval)`.
fn default_pole(f: &ProfileFn) -> Point {
    let (a, b) = f.max_locus()[0];
    (0.0, 0.5 * (a + b))
}

fn point(p: Option<[f64; 2]>, f: &ProfileFn) -> Point {
    p.map_or_else(|| default_pole(f), |[t, x]| (t, x))
}

fn check(name: &str, passed: bool, measured: f64, tolerance: f64, detail: String) -> CheckReport {
    CheckReport::new(name, passed, measured, tolerance, detail)
}

fn classify(f: &ProfileFn, config: &ExperimentConfig) -> Result<Outcome> {
    let tol = config.classify.tolerance;
    let r = dynamics::rotation_numbers(f)?;
    let err = r.cross_check_error();
    let checks = vec![
        check(
            "rotation-cross-check",
            err <= tol,
            err,
            tol,
            format!("light-ray slopes {} {}", r.flow_plus, r.flow_minus),
        ),
        check(
            "class-a",
            r.is_class_a(),
            r.plus - r.minus,
            0.0,
            "m+ - m- must be positive".into(),
        ),
    ];
    Ok(Outcome {
        checks,
        values: json!({
            "null_period": r.null_period,
            "m_plus": r.plus,
            "m_minus": r.minus,
            "flow_plus": r.flow_plus,
            "flow_minus": r.flow_minus,
            "class_a": r.is_class_a(),
        }),
    })
}

fn certify_pole(f: &ProfileFn, config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let c = &config.certify_pole;
    let p = point(c.point, f);
    let options = CertifyOptions {
        psi_span: c.psi_span,
        defect_tol: c.defect_tol,
        ..CertifyOptions::default()
    };
    let cert = poles::certify_pole_with(f, p, c.horizon, c.angles, options)?;
    let fan: Vec<Vec<Point>> = cert
        .evidence
        .par_iter()
        .map(|e| {
            let path = dynamics::flow(
                f,
                PhaseState::at(p, e.psi0),
                StoppingCondition::ProperTime(c.fan_length),
                &FlowOptions::default(),
            )?;
            Ok(path.samples().iter().map(PhaseState::point).collect())
        })
        .collect::<lortorus::Result<_>>()?;
    out.text(
        "geodesics.svg",
        &svg::geodesics(f, &fan, "geodesics from the certified point"),
    )?;

    let mut csv = Csv::new(&["psi0", "first_jacobi_zero", "max_defect", "defect_tau"]);
    for e in &cert.evidence {
        csv.row(&[
            Cell::from(e.psi0),
            Cell::from(e.first_jacobi_zero.unwrap_or(f64::INFINITY)),
            Cell::from(e.max_defect),
            Cell::from(e.defect_tau),
        ]);
    }
    out.csv("certificate.csv", &csv)?;

    let expected = match c.expect {
        Expectation::Any => true,
        Expectation::Certified => cert.is_certified(),
        Expectation::Refuted => !cert.is_certified(),
    };
    let checks = vec![check(
        "pole-verdict",
        expected,
        cert.max_defect(),
        c.defect_tol,
        format!(
            "{:?} with {} Jacobi zeros over {} angles, horizon {}; expected {:?}",
            cert.status,
            cert.jacobi_zero_count(),
            c.angles,
            c.horizon,
            c.expect
        ),
    )];
    Ok(Outcome {
        checks,
        values: json!({
            "point": [p.0, p.1],
            "certified": cert.is_certified(),
            "status": cert.status,
            "jacobi_zero_count": cert.jacobi_zero_count(),
            "max_defect": cert.max_defect(),
        }),
    })
}

fn distance(f: &ProfileFn, config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let d = &config.distance;
    let mut pairs: Vec<(Point, Point)> = d.pairs.iter().map(|[p, q]| ((p[0], p[1]), (q[0], q[1]))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..d.random_pairs {
        let p: Point = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let q = (
            p.0 + rng.gen_range(0.0..d.max_dt),
            p.1 + rng.gen_range(-d.max_dx..d.max_dx),
        );
        pairs.push((p, q));
    }
    let opts = DistanceOptions::default();
    let results: Vec<causal::DistanceResult> = pairs
        .par_iter()
        .map(|&(p, q)| causal::distance(f, p, q, &opts))
        .collect::<lortorus::Result<_>>()?;

    let mut csv = Csv::new(&[
        "p_t",
        "p_x",
        "q_t",
        "q_x",
        "relation",
        "distance",
        "maximizers",
        "max_residual",
    ]);
    let mut worst: f64 = 0.0;
    let mut curves = Vec::new();
    for (&(p, q), r) in pairs.iter().zip(&results) {
        let residual = r.maximizers.iter().map(|m| m.residual).fold(0.0, f64::max);
        worst = worst.max(residual);
        let relation = match r.relation {
            causal::CausalRelation::Chronological => "chronological",
            causal::CausalRelation::CausalBoundary => "causal-boundary",
            causal::CausalRelation::Unrelated => "unrelated",
        };
        csv.row(&[
            Cell::from(p.0),
            Cell::from(p.1),
            Cell::from(q.0),
            Cell::from(q.1),
            Cell::from(relation),
            Cell::from(r.value),
            Cell::from(r.maximizers.len()),
            Cell::from(residual),
        ]);
        for m in &r.maximizers {
            if let Some(path) = &m.path {
                curves.push(path.samples().iter().map(PhaseState::point).collect());
            }
        }
    }
    out.csv("distance.csv", &csv)?;
    out.text("geodesics.svg", &svg::geodesics(f, &curves, "maximising geodesics"))?;

    let mut checks = vec![check(
        "maximizer-residual",
        worst <= d.residual_tol,
        worst,
        d.residual_tol,
        format!("{} pairs", pairs.len()),
    )];
    if let ProfileKind::Constant { c } = f.kind() {
        let err = pairs
            .iter()
            .zip(&results)
            .map(|(&(p, q), r)| {
                let (dt, dx) = (q.0 - p.0, q.1 - p.1);
                let exact = if dt > 0.0 && c * dt > dx.abs() {
                    ((c * dt).powi(2) - dx * dx).sqrt()
                } else {
                    0.0
                };
                (r.value - exact).abs()
            })
            .fold(0.0, f64::max);
        checks.push(check("flat-oracle", err <= 1e-7, err, 1e-7, format!("constant({c})")));
    }
    let values: Vec<Value> = results
        .iter()
        .map(|r| json!({ "distance": r.value, "maximizers": r.maximizers.iter().map(|m| m.psi0).collect::<Vec<_>>() }))
        .collect();
    Ok(Outcome {
        checks,
        values: json!({ "pairs": values }),
    })
}

fn closed_geodesics(f: &ProfileFn, config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let g = &config.closed_geodesics;
    let base = point(g.base, f);
    let results: Vec<lortorus::ClosedGeodesicResult> = g
        .classes
        .par_iter()
        .map(|&k| lattice::closed_geodesic_through_pole(f, base, class(k)))
        .collect::<lortorus::Result<_>>()?;
    let mut csv = Csv::new(&["k_t", "k_x", "psi0", "length", "closure_residual", "maximality_gap"]);
    let mut checks = Vec::new();
    let mut values = Vec::new();
    for r in &results {
        csv.row(&[
            Cell::from(r.class.k_t),
            Cell::from(r.class.k_x),
            Cell::from(r.psi0),
            Cell::from(r.period_length),
            Cell::from(r.closure_residual),
            Cell::from(r.maximality_gap),
        ]);
        let closure = r.closure_residual.max(r.psi_residual);
        checks.push(check(
            &format!("closure {}", r.class),
            closure <= g.closure_tol,
            closure,
            g.closure_tol,
            format!("position {:e}, angle {:e}", r.closure_residual, r.psi_residual),
        ));
        checks.push(check(
            &format!("maximality {}", r.class),
            r.maximality_gap <= g.maximality_tol,
            r.maximality_gap,
            g.maximality_tol,
            format!("length {}", r.period_length),
        ));
        values.push(json!({
            "class": [r.class.k_t, r.class.k_x],
            "psi0": r.psi0,
            "length": r.period_length,
            "closure_residual": r.closure_residual,
            "psi_residual": r.psi_residual,
            "maximality_gap": r.maximality_gap,
        }));
    }
    out.csv("closed-geodesics.csv", &csv)?;
    let curves: Vec<Vec<Point>> = results
        .iter()
        .map(|r| r.path.samples().iter().map(PhaseState::point).collect())
        .collect();
    out.text(
        "geodesics.svg",
        &svg::geodesics(f, &curves, "closed timelike geodesics"),
    )?;
    Ok(Outcome {
        checks,
        values: json!({ "base": [base.0, base.1], "classes": values }),
    })
}

fn displacement_map(f: &ProfileFn, config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let m = &config.displacement_map;
    let k = class(m.class);
    let map = lattice::displacement_map(f, k, m.n_t, m.n_x)?;
    let pole = default_pole(f);
    let at_pole = lattice::displacement(f, k, pole)?;
    let mut csv = Csv::new(&["cell_t", "cell_x", "value"]);
    for i_t in 0..m.n_t {
        for i_x in 0..m.n_x {
            csv.row(&[Cell::from(i_t), Cell::from(i_x), Cell::from(map.value(i_t, i_x))]);
        }
    }
    out.csv("displacement-map.csv", &csv)?;
    out.text(
        "displacement.svg",
        &svg::heatmap(f, m.n_t, m.n_x, &map.values, &format!("displacement of class {k}")),
    )?;
    let excess = map.max - at_pole;
    let checks = vec![
        check(
            "argmax-on-max-locus",
            map.argmax_meets_max_locus(f),
            map.argmax.len() as f64,
            0.0,
            format!("{} argmax cells", map.argmax.len()),
        ),
        check(
            "maximum-at-pole",
            excess <= m.excess_tol,
            excess,
            m.excess_tol,
            format!("grid max {}, value at {pole:?} {at_pole}", map.max),
        ),
        check(
            "time-row-invariance",
            map.row_spread <= m.row_tol,
            map.row_spread,
            m.row_tol,
            "largest spread of a column across rows".into(),
        ),
    ];
    Ok(Outcome {
        checks,
        values: json!({
            "class": [k.k_t, k.k_x],
            "max": map.max,
            "pole_value": at_pole,
            "argmax": map.argmax,
            "row_spread": map.row_spread,
        }),
    })
}

fn busemann(f: &ProfileFn, config: &ExperimentConfig, out: &mut Artifacts) -> Result<Outcome> {
    let b = &config.busemann;
    let ray = CentralRay::new(f, point(b.base, f))?;
    let opts = BusemannOptions {
        s_start: b.s_start,
        s_cap: b.s_cap,
        tol: b.tol,
        ..BusemannOptions::default()
    };
    let values: Vec<horocycle::BusemannValue> = b
        .points
        .par_iter()
        .map(|&[t, x]| horocycle::busemann(f, &ray, (t, x), &opts))
        .collect::<lortorus::Result<_>>()?;
    let unconverged = values.iter().filter(|v| !v.converged).count();

    let x0 = ray.base.1;
    let xs: Vec<f64> = (0..b.samples)
        .map(|i| x0 - 0.5 + i as f64 / (b.samples - 1) as f64)
        .collect();
    let mut csv = Csv::new(&["x", "t", "level", "residual"]);
    let mut polylines = Vec::new();
    let mut worst: f64 = 0.0;
    for &level in &b.levels {
        let verts = horocycle::horosphere(f, &ray, level, &xs)?;
        for v in &verts {
            csv.row(&[
                Cell::from(v.x),
                Cell::from(v.t),
                Cell::from(v.level),
                Cell::from(v.residual),
            ]);
            worst = worst.max(v.residual);
        }
        polylines.push((level, verts.iter().map(|v| (v.x, v.t)).collect::<Vec<_>>()));
    }
    out.csv("busemann.csv", &csv)?;
    let s_hi = b.levels.iter().copied().fold(1.0, f64::max);
    let t_lo = polylines
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.1))
        .fold(ray.base.0, f64::min);
    out.text(
        "horospheres.svg",
        &svg::horospheres(&polylines, x0, (t_lo, ray.at(s_hi).0), "horospheres of the central ray"),
    )?;

    let mut checks = vec![
        check(
            "busemann-converged",
            unconverged == 0,
            unconverged as f64,
            0.0,
            format!("{} points", values.len()),
        ),
        check(
            "horosphere-residual",
            worst <= horocycle::LEVEL_TOL,
            worst,
            horocycle::LEVEL_TOL,
            format!("{} levels x {} samples", b.levels.len(), b.samples),
        ),
    ];
    let mut gap_value = Value::Null;
    if let Some([s_p, s_q]) = b.gap {
        let gap = horocycle::horosphere_distance_check(f, &ray, s_p, s_q, b.samples)?;
        let excess = gap.sampled_sup - gap.ray_distance;
        checks.push(check(
            "horosphere-distance",
            gap.within(b.gap_allowance),
            excess,
            1e-6,
            format!(
                "sup {} vs d {} (allowance {})",
                gap.sampled_sup, gap.ray_distance, b.gap_allowance
            ),
        ));
        gap_value = json!({ "ray_distance": gap.ray_distance, "sampled_sup": gap.sampled_sup });
    }
    let points: Vec<Value> = b
        .points
        .iter()
        .zip(&values)
        .map(|(p, v)| json!({ "point": p, "value": v.value, "increment": v.increment, "trace": v.trace }))
        .collect();
    Ok(Outcome {
        checks,
        values: json!({ "ray_base": [ray.base.0, ray.base.1], "points": points, "gap": gap_value }),
    })
}

/// Flat-metric oracles, then the named acceptance checks.
fn selftest(f: &ProfileFn, config: &ExperimentConfig) -> Result<Outcome> {
    let c = match f.kind() {
        ProfileKind::Constant { c } => c,
        _ => 1.0,
    };
    let mut checks = acceptance::flat_oracle_checks(c, config.seed)?;
    let cases = config.selftest_checks();
    if !cases.is_empty() {
        let suite = Suite::new(config.seed)?;
        for case in cases {
            checks.push(suite.run(case).with_context(|| format!("selftest case {case}"))?);
        }
    }
    Ok(Outcome {
        checks,
        values: json!({ "flat_c": c }),
    })
}
