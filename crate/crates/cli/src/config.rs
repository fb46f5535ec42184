//! Experiment configuration: TOML with one table per experiment.

use std::fmt;
use std::path::{Path, PathBuf};

use lortorus::acceptance::{Check, DEFAULT_SEED};
use lortorus::{HomologyClass, ProfileFn, ProfileKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Classify,
    CertifyPole,
    Distance,
    ClosedGeodesics,
    DisplacementMap,
    Busemann,
    Selftest,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::Classify,
        ExperimentName::CertifyPole,
        ExperimentName::Distance,
        ExperimentName::ClosedGeodesics,
        ExperimentName::DisplacementMap,
        ExperimentName::Busemann,
        ExperimentName::Selftest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Classify => "classify",
            ExperimentName::CertifyPole => "certify-pole",
            ExperimentName::Distance => "distance",
            ExperimentName::ClosedGeodesics => "closed-geodesics",
            ExperimentName::DisplacementMap => "displacement-map",
            ExperimentName::Busemann => "busemann",
            ExperimentName::Selftest => "selftest",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == name)
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The warping profile, mirroring [`ProfileKind`] with strict keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { c: f64 },
    Cosine { a: f64, b: f64 },
    TheoremPlateau { epsilon: f64 },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::TheoremPlateau { epsilon: 0.5 }
    }
}

impl ProfileSpec {
    pub fn kind(self) -> ProfileKind {
        match self {
            ProfileSpec::Constant { c } => ProfileKind::Constant { c },
            ProfileSpec::Cosine { a, b } => ProfileKind::Cosine { a, b },
            ProfileSpec::TheoremPlateau { epsilon } => ProfileKind::TheoremPlateau { epsilon },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Any,
    Certified,
    Refuted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    /// Allowed gap between the closed-form and light-ray rotation numbers.
    pub tolerance: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyParams {
    /// Defaults to the centre of the first maximum interval at `t = 0`.
    pub point: Option<[f64; 2]>,
    pub horizon: f64,
    pub angles: usize,
    pub psi_span: f64,
    pub defect_tol: f64,
    pub expect: Expectation,
    /// Proper time drawn for each geodesic of the fan figure.
    pub fan_length: f64,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams {
            point: None,
            horizon: 100.0,
            angles: 64,
            psi_span: 2.0,
            defect_tol: 1e-6,
            expect: Expectation::Any,
            fan_length: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceParams {
    pub pairs: Vec<[[f64; 2]; 2]>,
    /// Extra pairs drawn from the seed: `p` in the unit square, `q - p` in
    /// `[0, max_dt] × [-max_dx, max_dx]`.
    pub random_pairs: usize,
    pub max_dt: f64,
    pub max_dx: f64,
    /// Largest endpoint residual accepted for a maximiser.
    pub residual_tol: f64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            pairs: vec![[[0.0, 0.5], [3.0, 1.5]]],
            random_pairs: 0,
            max_dt: 4.0,
            max_dx: 2.0,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedParams {
    pub base: Option<[f64; 2]>,
    pub classes: Vec<[i64; 2]>,
    pub closure_tol: f64,
    pub maximality_tol: f64,
}

impl Default for ClosedParams {
    fn default() -> Self {
        ClosedParams {
            base: None,
            classes: vec![[1, 0], [2, 1], [3, 1], [3, 2], [5, 3]],
            closure_tol: 1e-8,
            maximality_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplacementParams {
    pub class: [i64; 2],
    pub n_t: usize,
    pub n_x: usize,
    /// Allowed excess of any cell over the value at the maximum point.
    pub excess_tol: f64,
    /// Allowed spread of a column across time rows.
    pub row_tol: f64,
}

impl Default for DisplacementParams {
    fn default() -> Self {
        DisplacementParams {
            class: [1, 0],
            n_t: 64,
            n_x: 64,
            excess_tol: 1e-6,
            row_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusemannParams {
    /// Base of the vertical ray; defaults like `certify_pole.point`.
    pub base: Option<[f64; 2]>,
    pub points: Vec<[f64; 2]>,
    /// Horosphere levels, each sampled at `samples` points of one period.
    pub levels: Vec<f64>,
    pub samples: usize,
    pub tol: f64,
    pub s_start: f64,
    pub s_cap: f64,
    /// `[s_p, s_q]` for the horosphere distance check, if wanted.
    pub gap: Option<[f64; 2]>,
    pub gap_allowance: f64,
}

impl Default for BusemannParams {
    fn default() -> Self {
        BusemannParams {
            base: None,
            points: vec![[0.0, 0.7], [0.5, 0.1], [1.0, 0.0]],
            levels: vec![1.0, 4.0],
            samples: 17,
            tol: 1e-6,
            s_start: 4.0,
            s_cap: 16384.0,
            gap: None,
            gap_allowance: 0.02,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestParams {
    /// Named acceptance checks to run after the flat oracles; `"all"` runs
    /// every one.
    pub cases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentName>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub classify: ClassifyParams,
    #[serde(default)]
    pub certify_pole: CertifyParams,
    #[serde(default)]
    pub distance: DistanceParams,
    #[serde(default)]
    pub closed_geodesics: ClosedParams,
    #[serde(default)]
    pub displacement_map: DisplacementParams,
    #[serde(default)]
    pub busemann: BusemannParams,
    #[serde(default)]
    pub selftest: SelftestParams,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: DEFAULT_SEED,
            out: None,
            profile: ProfileSpec::default(),
            classify: ClassifyParams::default(),
            certify_pole: CertifyParams::default(),
            distance: DistanceParams::default(),
            closed_geodesics: ClosedParams::default(),
            displacement_map: DisplacementParams::default(),
            busemann: BusemannParams::default(),
            selftest: SelftestParams::default(),
        }
    }
}

/// A configuration error, located in the source when possible.
#[derive(Debug)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub location: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = self
            .path
            .as_deref()
            .map_or_else(|| "<config>".to_string(), |p| p.display().to_string());
        match self.location {
            Some((line, col)) => write!(f, "{path}:{line}:{col}: {}", self.message),
            None => write!(f, "{path}: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line and column of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Finds `key` inside `[table]` (or at top level for an empty table name).
fn locate(src: &str, table: &str, key: &str) -> Option<(usize, usize)> {
    let mut current = String::new();
    let mut offset = 0;
    for line in src.split_inclusive('\n') {
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            current = rest.split(']').next().unwrap_or("").trim().to_string();
        } else if current == table {
            let name = trimmed.split(['=', ' ', '\t']).next().unwrap_or("");
            if name == key {
                return Some(line_col(src, offset + indent));
            }
        }
        offset += line.len();
    }
    None
}

impl ExperimentConfig {
    pub fn parse(src: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(src).map_err(|e| ConfigError {
            path: path.map(Path::to_path_buf),
            location: e.span().map(|s| line_col(src, s.start)),
            message: e.message().trim().to_string(),
        })?;
        config.validate().map_err(|(table, key, message)| ConfigError {
            path: path.map(Path::to_path_buf),
            location: locate(src, table, key),
            message,
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            location: None,
            message: e.to_string(),
        })?;
        Self::parse(&src, Some(path))
    }

    /// Checks ranges the types cannot express; errors name the table and key.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        fn positive(
            table: &'static str,
            key: &'static str,
            v: f64,
        ) -> Result<(), (&'static str, &'static str, String)> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err((
                    table,
                    key,
                    format!("{table}.{key} must be positive and finite, got {v}"),
                ))
            }
        }
        fn at_least(
            table: &'static str,
            key: &'static str,
            v: usize,
            min: usize,
        ) -> Result<(), (&'static str, &'static str, String)> {
            if v >= min {
                Ok(())
            } else {
                Err((table, key, format!("{table}.{key} must be at least {min}, got {v}")))
            }
        }
        ProfileFn::new(self.profile.kind()).map_err(|e| ("profile", "kind", e.to_string()))?;
        positive("classify", "tolerance", self.classify.tolerance)?;

        let c = &self.certify_pole;
        positive("certify_pole", "horizon", c.horizon)?;
        at_least("certify_pole", "angles", c.angles, 8)?;
        positive("certify_pole", "psi_span", c.psi_span)?;
        positive("certify_pole", "defect_tol", c.defect_tol)?;
        positive("certify_pole", "fan_length", c.fan_length)?;

        let d = &self.distance;
        positive("distance", "max_dt", d.max_dt)?;
        positive("distance", "max_dx", d.max_dx)?;
        positive("distance", "residual_tol", d.residual_tol)?;

        let g = &self.closed_geodesics;
        positive("closed_geodesics", "closure_tol", g.closure_tol)?;
        positive("closed_geodesics", "maximality_tol", g.maximality_tol)?;
        if g.classes.is_empty() {
            return Err((
                "closed_geodesics",
                "classes",
                "closed_geodesics.classes is empty".into(),
            ));
        }

        let m = &self.displacement_map;
        at_least("displacement_map", "n_t", m.n_t, 1)?;
        at_least("displacement_map", "n_x", m.n_x, 1)?;
        positive("displacement_map", "excess_tol", m.excess_tol)?;
        positive("displacement_map", "row_tol", m.row_tol)?;
        if m.class[0] <= 0 {
            return Err((
                "displacement_map",
                "class",
                "displacement_map.class needs k_t > 0".into(),
            ));
        }

        let b = &self.busemann;
        at_least("busemann", "samples", b.samples, 2)?;
        positive("busemann", "tol", b.tol)?;
        positive("busemann", "s_start", b.s_start)?;
        positive("busemann", "s_cap", b.s_cap)?;
        positive("busemann", "gap_allowance", b.gap_allowance)?;
        if let Some([s_p, s_q]) = b.gap {
            if !(s_q > s_p) {
                return Err((
                    "busemann",
                    "gap",
                    format!("busemann.gap needs s_p < s_q, got [{s_p}, {s_q}]"),
                ));
            }
        }

        for case in &self.selftest.cases {
            if case != "all" && Check::from_name(case).is_none() {
                let known: Vec<&str> = Check::ALL.iter().map(|c| c.name()).collect();
                return Err((
                    "selftest",
                    "cases",
                    format!("unknown selftest case {case:?}; known: all, {}", known.join(", ")),
                ));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> ProfileFn {
        ProfileFn::new(self.profile.kind()).expect("validated")
    }

    pub fn selftest_checks(&self) -> Vec<Check> {
        if self.selftest.cases.iter().any(|c| c == "all") {
            return Check::ALL.to_vec();
        }
        self.selftest.cases.iter().filter_map(|c| Check::from_name(c)).collect()
    }
}

pub fn class(k: [i64; 2]) -> HomologyClass {
    HomologyClass::new(k[0], k[1])
}
