//! The acceptance suite: eleven quantitative checks of the geometry, each
//! runnable on its own by name, plus flat-metric oracle checks for any
//! constant profile.
//!
//! Sampled checks draw from a ChaCha stream keyed by the suite seed and the
//! check's name, so results do not depend on which other checks run.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{self, CausalRelation, DistanceOptions};
use crate::dynamics::{self, FlowOptions, PhaseState, StoppingCondition};
use crate::error::{Error, Result};
use crate::horocycle::{self, BusemannOptions, CentralRay};
use crate::lattice::{self, DisplacementMap, HomologyClass};
use crate::poles;
use crate::profile::ProfileFn;
use crate::Point;

pub const DEFAULT_SEED: u64 = 20_240_611;

/// The pole of the plateau profile used throughout.
pub const POLE: Point = (0.0, 0.5);

pub const PLATEAU_EPSILON: f64 = 0.5;

/// Classes with closed geodesics through the pole.
pub const CLOSED_CLASSES: [HomologyClass; 5] = [
    HomologyClass::new(1, 0),
    HomologyClass::new(2, 1),
    HomologyClass::new(3, 1),
    HomologyClass::new(3, 2),
    HomologyClass::new(5, 3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    ClairautConservation,
    FlatDistance,
    ClassA,
    PoleCertificate,
    ClosedGeodesics,
    DisplacementMaximum,
    AxisSmoothness,
    Busemann,
    HorosphereDistance,
    Structural,
    ParallelAxes,
}

impl Check {
    pub const ALL: [Check; 11] = [
        Check::ClairautConservation,
        Check::FlatDistance,
        Check::ClassA,
        Check::PoleCertificate,
        Check::ClosedGeodesics,
        Check::DisplacementMaximum,
        Check::AxisSmoothness,
        Check::Busemann,
        Check::HorosphereDistance,
        Check::Structural,
        Check::ParallelAxes,
    ];

    pub fn number(self) -> usize {
        Check::ALL.iter().position(|&c| c == self).unwrap() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::ClairautConservation => "clairaut-conservation",
            Check::FlatDistance => "flat-distance",
            Check::ClassA => "class-a",
            Check::PoleCertificate => "pole-certificate",
            Check::ClosedGeodesics => "closed-geodesics",
            Check::DisplacementMaximum => "displacement-maximum",
            Check::AxisSmoothness => "axis-smoothness",
            Check::Busemann => "busemann",
            Check::HorosphereDistance => "horosphere-distance",
            Check::Structural => "structural",
            Check::ParallelAxes => "parallel-axes",
        }
    }

    pub fn from_name(name: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one check. `measured` is the headline quantity, which must not
/// exceed `tolerance` (margins are reported as deficits); `detail` carries
/// the secondary ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, passed: bool, measured: f64, tolerance: f64, detail: String) -> Self {
        CheckReport {
            name: name.into(),
            passed,
            measured,
            tolerance,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:.3e} (tolerance {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

/// Shared state for a run: the plateau profile, the seed and displacement
/// maps that several checks read.
pub struct Suite {
    pub seed: u64,
    plateau: ProfileFn,
    maps: Mutex<HashMap<HomologyClass, Arc<DisplacementMap>>>,
}

/// Resolution of the displacement maps.
pub const MAP_CELLS: usize = 64;

impl Suite {
    pub fn new(seed: u64) -> Result<Self> {
        Ok(Suite {
            seed,
            plateau: ProfileFn::theorem_plateau(PLATEAU_EPSILON)?,
            maps: Mutex::new(HashMap::new()),
        })
    }

    fn rng(&self, check: Check) -> ChaCha8Rng {
        let salt = check.name().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
        });
        ChaCha8Rng::seed_from_u64(self.seed ^ salt)
    }

    pub fn displacement_map(&self, k: HomologyClass) -> Result<Arc<DisplacementMap>> {
        if let Some(m) = self.maps.lock().unwrap().get(&k) {
            return Ok(m.clone());
        }
        let m = Arc::new(lattice::displacement_map(&self.plateau, k, MAP_CELLS, MAP_CELLS)?);
        self.maps.lock().unwrap().insert(k, m.clone());
        Ok(m)
    }

    pub fn run(&self, check: Check) -> Result<CheckReport> {
        let f = &self.plateau;
        let mut report = match check {
            Check::ClairautConservation => clairaut_conservation(&mut self.rng(check)),
            Check::FlatDistance => flat_distance(1.0, &mut self.rng(check), 1000, 200),
            Check::ClassA => class_a(f),
            Check::PoleCertificate => pole_certificate(f),
            Check::ClosedGeodesics => closed_geodesics(f),
            Check::DisplacementMaximum => self.displacement_maximum(),
            Check::AxisSmoothness => self.axis_smoothness(),
            Check::Busemann => busemann(f, &mut self.rng(check)),
            Check::HorosphereDistance => horosphere_distance(f),
            Check::Structural => structural(f, &mut self.rng(check)),
            Check::ParallelAxes => self.parallel_axes(),
        }?;
        report.name = check.name().to_string();
        Ok(report)
    }

    pub fn run_all(&self) -> Vec<(Check, Result<CheckReport>)> {
        Check::ALL.into_iter().map(|c| (c, self.run(c))).collect()
    }

    fn displacement_maximum(&self) -> Result<CheckReport> {
        let f = &self.plateau;
        let mut worst_period_gap: f64 = 0.0;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut on_locus = true;
        let mut detail = Vec::new();
        for k in [HomologyClass::new(1, 0), HomologyClass::new(3, 1)] {
            let map = self.displacement_map(k)?;
            let axis_period = lattice::closed_geodesic_through_pole(f, POLE, k)?.period_length;
            let pole_value = lattice::displacement(f, k, POLE)?;
            let period_gap = (map.max - axis_period).abs();
            let excess = map.max - pole_value;
            let locus = map.argmax_meets_max_locus(f);
            worst_period_gap = worst_period_gap.max(period_gap);
            worst_excess = worst_excess.max(excess);
            on_locus &= locus;
            detail.push(format!(
                "{k}: max {:.10} axis {:.10} pole {:.10} argmax cells {} on plateau {locus} row spread {:.1e}",
                map.max,
                axis_period,
                pole_value,
                map.argmax.len(),
                map.row_spread
            ));
        }
        let passed = on_locus && worst_period_gap <= 1e-4 && worst_excess <= 1e-6;
        Ok(CheckReport::new(
            "",
            passed,
            worst_period_gap,
            1e-4,
            format!("excess over pole {worst_excess:.3e}; {}", detail.join("; ")),
        ))
    }

    /// First argmax cell of the class map whose centre lies on the plateau.
    fn plateau_argmax(&self, k: HomologyClass, skip: usize) -> Result<Point> {
        let f = &self.plateau;
        let map = self.displacement_map(k)?;
        map.argmax
            .iter()
            .map(|&(i, j)| map.cell_center(i, j))
            .filter(|p| f.is_max_point(p.1, 1e-12))
            .nth(skip)
            .ok_or_else(|| Error::Inconsistent(format!("fewer than {} argmax cells of {k} on the plateau", skip + 1)))
    }

    fn axis_smoothness(&self) -> Result<CheckReport> {
        let f = &self.plateau;
        let mut junction: f64 = 0.0;
        let mut power: f64 = 0.0;
        let mut detail = Vec::new();
        for k in [HomologyClass::new(1, 0), HomologyClass::new(3, 1)] {
            let q = self.plateau_argmax(k, 0)?;
            let axis = lattice::build_axis(f, k, q, 4)?;
            junction = junction.max(axis.max_junction_mismatch());
            power = power.max(axis.power_gap());
            detail.push(format!(
                "{k} from ({:.4}, {:.4}): junction {:.3e} power gap {:.3e}",
                q.0,
                q.1,
                axis.max_junction_mismatch(),
                axis.power_gap()
            ));
        }
        let measured = junction.max(power);
        Ok(CheckReport::new(
            "",
            measured <= 1e-6,
            measured,
            1e-6,
            detail.join("; "),
        ))
    }

    fn parallel_axes(&self) -> Result<CheckReport> {
        let f = &self.plateau;
        let k = HomologyClass::new(3, 1);
        let map = self.displacement_map(k)?;
        let on_plateau: Vec<Point> = map
            .argmax
            .iter()
            .map(|&(i, j)| map.cell_center(i, j))
            .filter(|p| f.is_max_point(p.1, 1e-12))
            .collect();
        let (qa, qb) = match (on_plateau.first(), on_plateau.last()) {
            (Some(&a), Some(&b)) if a != b => (a, b),
            _ => return Err(Error::Inconsistent("need two distinct plateau argmax cells".into())),
        };
        let a = lattice::build_axis(f, k, qa, 3)?;
        let b = lattice::build_axis(f, k, qb, 3)?;
        let r = lattice::parallel_check(&a, &b, 256);
        let passed = r.slope_gap <= lattice::SLOPE_TOL && r.band_ratio <= 1.0 + lattice::BAND_RATIO_TOL;
        Ok(CheckReport::new(
            "",
            passed,
            r.slope_gap,
            lattice::SLOPE_TOL,
            format!(
                "axes from ({:.4}, {:.4}) and ({:.4}, {:.4}): slopes {:.12} {:.12}, band [{:.6e}, {:.6e}] ratio {:.8}",
                qa.0, qa.1, qb.0, qb.1, r.slope_a, r.slope_b, r.min_separation, r.max_separation, r.band_ratio
            ),
        ))
    }
}

fn clairaut_conservation(rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    let f = ProfileFn::cosine(1.5, 0.4)?;
    let starts: Vec<PhaseState> = (0..100)
        .map(|_| PhaseState::new(0.0, rng.gen_range(0.0..1.0), rng.gen_range(-2.0..2.0)))
        .collect();
    let drifts: Vec<f64> = starts
        .par_iter()
        .map(|&s| {
            let path = dynamics::flow(&f, s, StoppingCondition::ProperTime(200.0), &FlowOptions::default())?;
            Ok(path.clairaut_drift())
        })
        .collect::<Result<_>>()?;
    let worst = drifts.iter().copied().fold(0.0, f64::max);
    Ok(CheckReport::new(
        "",
        worst <= 1e-8,
        worst,
        1e-8,
        format!("{} geodesics on cosine(1.5, 0.4) over tau in [0, 200]", drifts.len()),
    ))
}

/// `d = √(c²Δt² - Δx²)` on `n_chrono` chronological pairs, and exactly zero
/// on `n_other` pairs outside the causal future.
pub fn flat_distance(c: f64, rng: &mut ChaCha8Rng, n_chrono: usize, n_other: usize) -> Result<CheckReport> {
    let f = ProfileFn::constant(c)?;
    let chrono: Vec<(Point, Point)> = (0..n_chrono)
        .map(|_| {
            let p = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let dt: f64 = rng.gen_range(0.01..10.0);
            let dx = c * dt * rng.gen_range(-0.999..0.999);
            (p, (p.0 + dt, p.1 + dx))
        })
        .collect();
    let other: Vec<(Point, Point)> = (0..n_other)
        .map(|_| {
            let p = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let dt: f64 = rng.gen_range(-10.0..10.0);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let dx = side * c * dt.abs() * rng.gen_range(1.001..3.0) + side * 1e-3;
            (p, (p.0 + dt, p.1 + dx))
        })
        .collect();
    let opts = DistanceOptions::value_only();
    let errors: Vec<f64> = chrono
        .par_iter()
        .map(|&(p, q)| {
            let (dt, dx) = (q.0 - p.0, q.1 - p.1);
            let exact = ((c * dt).powi(2) - dx * dx).sqrt();
            Ok((causal::distance(&f, p, q, &opts)?.value - exact).abs())
        })
        .collect::<Result<_>>()?;
    let nonzero = other
        .par_iter()
        .map(|&(p, q)| Ok(causal::distance(&f, p, q, &opts)?.value))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .filter(|&v| v != 0.0)
        .count();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Ok(CheckReport::new(
        "flat-distance",
        worst <= 1e-7 && nonzero == 0,
        worst,
        1e-7,
        format!(
            "constant({c}): {} chronological pairs, {nonzero} of {} non-causal pairs with nonzero distance",
            errors.len(),
            other.len()
        ),
    ))
}

/// Busemann function of a vertical ray in the flat metric `c²dt²`: `b = c·t`.
pub fn flat_busemann(c: f64, rng: &mut ChaCha8Rng, n: usize) -> Result<CheckReport> {
    let f = ProfileFn::constant(c)?;
    let ray = CentralRay::new(&f, (0.0, 0.0))?;
    let points: Vec<Point> = (0..n)
        .map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let errors: Vec<f64> = points
        .par_iter()
        .map(|&p| Ok((horocycle::busemann_value(&f, &ray, p)? - c * p.0).abs()))
        .collect::<Result<_>>()?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Ok(CheckReport::new(
        "flat-busemann",
        worst <= 1e-6,
        worst,
        1e-6,
        format!("constant({c}): {n} points"),
    ))
}

/// Null rotation numbers of a constant profile are `±c`.
pub fn flat_rotation(c: f64) -> Result<CheckReport> {
    let f = ProfileFn::constant(c)?;
    let r = dynamics::rotation_numbers(&f)?;
    let err = (r.plus - c).abs().max((r.minus + c).abs()).max(r.cross_check_error());
    Ok(CheckReport::new(
        "flat-rotation",
        err <= 1e-6,
        err,
        1e-6,
        format!("m+ {:.12} m- {:.12}", r.plus, r.minus),
    ))
}

/// Every point of a flat torus is a pole.
pub fn flat_pole(c: f64) -> Result<CheckReport> {
    let f = ProfileFn::constant(c)?;
    let cert = poles::certify_pole(&f, (0.0, 0.25), 20.0, 16)?;
    Ok(CheckReport::new(
        "flat-pole",
        cert.is_certified(),
        cert.max_defect(),
        poles::DEFECT_TOL,
        format!("{} Jacobi zeros over 16 angles", cert.jacobi_zero_count()),
    ))
}

/// The flat-metric oracle checks for `constant(c)`.
pub fn flat_oracle_checks(c: f64, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        flat_distance(c, &mut rng, 1000, 200)?,
        flat_busemann(c, &mut rng, 100)?,
        flat_rotation(c)?,
        flat_pole(c)?,
    ])
}

fn class_a(f: &ProfileFn) -> Result<CheckReport> {
    let r = dynamics::rotation_numbers(f)?;
    let err = r.cross_check_error();
    Ok(CheckReport::new(
        "",
        r.is_class_a() && err <= 1e-6,
        err,
        1e-6,
        format!(
            "P {:.12}, m+ {:.12}, m- {:.12}, light-ray slopes {:.12} {:.12}",
            r.null_period, r.plus, r.minus, r.flow_plus, r.flow_minus
        ),
    ))
}

fn pole_certificate(f: &ProfileFn) -> Result<CheckReport> {
    let cert = poles::certify_pole(f, POLE, 100.0, 64)?;
    let zeros = cert.jacobi_zero_count();
    let defect = cert.max_defect();
    Ok(CheckReport::new(
        "",
        zeros == 0 && defect <= 1e-6,
        defect,
        1e-6,
        format!(
            "{zeros} Jacobi zeros over {} angles, horizon {}",
            cert.n_angles, cert.horizon
        ),
    ))
}

fn closed_geodesics(f: &ProfileFn) -> Result<CheckReport> {
    let results: Vec<_> = CLOSED_CLASSES
        .par_iter()
        .map(|&k| {
            let interior = lattice::in_time_cone_interior(f, k).is_interior();
            Ok((interior, lattice::closed_geodesic_through_pole(f, POLE, k)?))
        })
        .collect::<Result<_>>()?;
    let all_interior = results.iter().all(|r| r.0);
    let closure = results.iter().map(|r| r.1.closure_residual).fold(0.0, f64::max);
    let psi = results.iter().map(|r| r.1.psi_residual).fold(0.0, f64::max);
    let gap = results.iter().map(|r| r.1.maximality_gap).fold(0.0, f64::max);
    let lengths: Vec<String> = results
        .iter()
        .map(|(_, r)| format!("L{} = {:.10}", r.class, r.period_length))
        .collect();
    Ok(CheckReport::new(
        "",
        all_interior && closure <= 1e-8 && psi <= 1e-8 && gap <= 1e-5,
        gap,
        1e-5,
        format!(
            "closure {closure:.3e}, psi mismatch {psi:.3e}, all interior {all_interior}; {}",
            lengths.join(", ")
        ),
    ))
}

/// Points drawn in `[t_lo, t_hi] × [x_lo, x_hi]`.
fn sample_points(rng: &mut ChaCha8Rng, n: usize, t: (f64, f64), x: (f64, f64)) -> Vec<Point> {
    (0..n)
        .map(|_| (rng.gen_range(t.0..t.1), rng.gen_range(x.0..x.1)))
        .collect()
}

/// Index pairs `(i, j)` of the pool with `pool[i] ≪ pool[j]`.
fn chronological_pairs(f: &ProfileFn, pool: &[Point]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..pool.len() {
        for j in 0..pool.len() {
            if i != j && causal::causal_relation(f, pool[i], pool[j]) == CausalRelation::Chronological {
                out.push((i, j));
            }
        }
    }
    out
}

fn busemann(f: &ProfileFn, rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    let flat = flat_busemann(1.5, rng, 100)?;
    let ray = CentralRay::new(f, POLE)?;
    // A pool of points whose chronological pairs supply the sample, so each
    // Busemann value serves several pairs.
    let mut pool = sample_points(rng, 24, (-1.5, 1.5), (-0.5, 1.5));
    let mut pairs = chronological_pairs(f, &pool);
    while pairs.len() < 200 {
        pool.extend(sample_points(rng, 4, (-1.5, 1.5), (-0.5, 1.5)));
        pairs = chronological_pairs(f, &pool);
    }
    // Fisher-Yates on the pair list keeps the selection seed-determined.
    for i in (1..pairs.len()).rev() {
        pairs.swap(i, rng.gen_range(0..=i));
    }
    pairs.truncate(200);
    let values: Vec<horocycle::BusemannValue> = pool
        .par_iter()
        .map(|&p| horocycle::busemann(f, &ray, p, &BusemannOptions::default()))
        .collect::<Result<_>>()?;
    let unconverged = values.iter().filter(|v| !v.converged).count();
    let rise = values
        .iter()
        .flat_map(|v| v.trace.windows(2).map(|w| w[1].1 - w[0].1))
        .fold(f64::NEG_INFINITY, f64::max);
    let opts = DistanceOptions::value_only();
    let margins: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = causal::distance(f, pool[i], pool[j], &opts)?.value;
            Ok(values[j].value - values[i].value - d)
        })
        .collect::<Result<_>>()?;
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let passed = flat.passed && unconverged == 0 && worst >= -1e-6 && rise <= 1e-8;
    Ok(CheckReport::new(
        "",
        passed,
        -worst,
        1e-6,
        format!(
            "flat b = 1.5 t error {:.3e}; {} pairs from {} points; largest trace rise {rise:.3e}; {unconverged} unconverged",
            flat.measured,
            margins.len(),
            pool.len()
        ),
    ))
}

fn horosphere_distance(f: &ProfileFn) -> Result<CheckReport> {
    let ray = CentralRay::new(f, POLE)?;
    let d_pq = causal::distance_value(f, ray.at(1.0), ray.at(4.0))?;
    let gap = horocycle::horosphere_distance_check(f, &ray, 1.0, 4.0, 64)?;
    let sup = gap.sampled_sup;
    let passed = sup >= 0.98 * d_pq && sup <= d_pq + 1e-6 && gap.max_residual <= horocycle::LEVEL_TOL;
    Ok(CheckReport::new(
        "",
        passed,
        sup - d_pq,
        1e-6,
        format!(
            "sup {sup:.10} vs d(p, q) {d_pq:.10} (lower bound {:.6}); vertex residual {:.3e}; {} of {} pairs evaluated",
            0.98 * d_pq,
            gap.max_residual,
            gap.evaluated_pairs,
            gap.lower.len() * gap.upper.len()
        ),
    ))
}

fn structural(f: &ProfileFn, rng: &mut ChaCha8Rng) -> Result<CheckReport> {
    let opts = DistanceOptions::value_only();

    // Reverse triangle inequality over triples drawn from a pool, so each
    // distance is computed once.
    let pool = sample_points(rng, 40, (0.0, 4.0), (0.0, 1.5));
    let pairs = chronological_pairs(f, &pool);
    let dist: HashMap<(usize, usize), f64> = pairs
        .par_iter()
        .map(|&(i, j)| Ok(((i, j), causal::distance(f, pool[i], pool[j], &opts)?.value)))
        .collect::<Result<_>>()?;
    let mut triples = Vec::new();
    for &(i, j) in &pairs {
        for k in 0..pool.len() {
            if dist.contains_key(&(j, k)) {
                triples.push((i, j, k));
            }
        }
    }
    for i in (1..triples.len()).rev() {
        triples.swap(i, rng.gen_range(0..=i));
    }
    triples.truncate(1000);
    let triangle = triples
        .iter()
        .map(|&(i, j, k)| {
            let d_ik = dist.get(&(i, k)).copied().unwrap_or(0.0);
            d_ik - dist[&(i, j)] - dist[&(j, k)]
        })
        .fold(f64::INFINITY, f64::min);

    // Crossings between maximisers of pairs drawn from the same window.
    let seg_pairs: Vec<((Point, Point), (Point, Point))> = (0..100)
        .map(|_| {
            let mut pair = || loop {
                let p = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let q = (p.0 + rng.gen_range(1.0..3.0), p.1 + rng.gen_range(-1.0..1.0));
                if causal::causal_relation(f, p, q) == CausalRelation::Chronological {
                    return (p, q);
                }
            };
            (pair(), pair())
        })
        .collect();
    let crossings: Vec<usize> = seg_pairs
        .par_iter()
        .map(|&((p1, q1), (p2, q2))| {
            let a = causal::distance(f, p1, q1, &DistanceOptions::default())?;
            let b = causal::distance(f, p2, q2, &DistanceOptions::default())?;
            let pa = a.maximizers[0].path.as_ref().expect("paths requested");
            let pb = b.maximizers[0].path.as_ref().expect("paths requested");
            Ok(causal::crossing_check(pa, pb))
        })
        .collect::<Result<_>>()?;
    let most_crossings = crossings.iter().copied().max().unwrap_or(0);

    // Deck invariance.
    let cases: Vec<(Point, Point, HomologyClass)> = (0..100)
        .map(|_| loop {
            let p = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let q = (p.0 + rng.gen_range(0.5..3.0), p.1 + rng.gen_range(-1.5..1.5));
            let k = HomologyClass::new(rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            if causal::causal_relation(f, p, q) == CausalRelation::Chronological {
                return (p, q, k);
            }
        })
        .collect();
    let deck = cases
        .par_iter()
        .map(|&(p, q, k)| {
            let d = causal::distance(f, p, q, &opts)?.value;
            let dk = causal::distance(f, lattice::deck_apply(k, p), lattice::deck_apply(k, q), &opts)?.value;
            Ok((d - dk).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let passed = triples.len() == 1000 && triangle >= -1e-7 && most_crossings <= 1 && deck <= 1e-9;
    Ok(CheckReport::new(
        "",
        passed,
        -triangle,
        1e-7,
        format!(
            "{} triples from {} points; most crossings {most_crossings} over {} maximiser pairs; deck invariance {deck:.3e} over {} cases",
            triples.len(),
            pool.len(),
            crossings.len(),
            cases.len()
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in Check::ALL {
            assert_eq!(Check::from_name(c.name()), Some(c));
        }
        assert_eq!(Check::ParallelAxes.number(), 11);
        assert_eq!(Check::from_name("nope"), None);
    }

    #[test]
    fn flat_oracles_pass_for_unit_profile() {
        for r in flat_oracle_checks(1.0, 1).unwrap() {
            assert!(r.passed, "{}", r.line());
        }
    }
}
