//! Experiment configuration files.
//!
//! One experiment per TOML file. Unknown keys are rejected.
//!
//! ```toml
//! name = "ellipsoid-d20"
//!
//! [geometry]
//! kind = "ellipsoid"      # euclidean-ball | ellipsoid | lp-ball | l1-ball | hypercube
//! dimension = 20
//! matrix = "random"       # or a path to a CSV file
//! eigen_min = 0.1
//!
//! [problem]
//! sparsity = 5
//! sigma = 0.5
//! sigma_factor = 1.0     # scales sigma inside the error radius
//! delta = 0.1
//! horizon = 2000
//! trials = 20
//! seed = 0
//!
//! [algorithm]
//! mode = "apsee-g"        # apsee | apsee-g | apsee-g-compact | oracle
//! basis = "standard"      # standard | gaussian-orthogonal | uniform-orthogonal
//!
//! [theta]
//! source = "uniform"      # uniform | file | gap-controlled
//!
//! [regret]
//! alpha = "one"           # one | exhaustive | auto | a number in (0, 1]
//! ```

use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::algorithms::Algorithm;
use crate::error::{Error, Result};
use crate::estimation::BasisKind;
use crate::geometry::{ActionSetGeometry, GeometryKind};
use crate::linalg::{self, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    geometry: RawGeometry,
    problem: RawProblem,
    #[serde(default)]
    algorithm: RawAlgorithm,
    #[serde(default)]
    theta: RawTheta,
    #[serde(default)]
    regret: RawRegret,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    kind: String,
    dimension: usize,
    radius: Option<f64>,
    p: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    matrix: Option<String>,
    eigen_min: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    sparsity: usize,
    sigma: f64,
    sigma_factor: Option<f64>,
    #[serde(default = "default_delta")]
    delta: f64,
    horizon: u64,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
}

fn default_delta() -> f64 {
    0.1
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm {
    mode: Option<String>,
    basis: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTheta {
    source: Option<String>,
    path: Option<String>,
    gap: Option<f64>,
    style: Option<String>,
    budget: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRegret {
    alpha: Option<AlphaField>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AlphaField {
    Value(f64),
    Name(String),
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    stride: Option<u64>,
}

/// Default smallest eigenvalue of a randomly drawn ellipsoid matrix.
pub const DEFAULT_EIGEN_MIN: f64 = 0.1;
/// Default largest `|θ*_i|` allowed for gap-controlled parameters.
pub const DEFAULT_THETA_BUDGET: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    Random { eigen_min: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    EuclideanBall { radius: f64 },
    Ellipsoid { matrix: MatrixSource },
    LpBall { p: f64, radius: f64 },
    L1Ball { radius: f64 },
    Hypercube { lo: f64, hi: f64 },
}

impl GeometrySpec {
    pub fn kind(&self) -> GeometryKind {
        match self {
            GeometrySpec::EuclideanBall { .. } => GeometryKind::EuclideanBall,
            GeometrySpec::Ellipsoid { .. } => GeometryKind::Ellipsoid,
            GeometrySpec::LpBall { .. } => GeometryKind::LpBall,
            GeometrySpec::L1Ball { .. } => GeometryKind::L1Ball,
            GeometrySpec::Hypercube { .. } => GeometryKind::Hypercube,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Algorithm(Algorithm),
    /// Always plays the optimal sparse action; a benchmark sanity check.
    Oracle,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Algorithm(a) => a.name(),
            PolicyKind::Oracle => "oracle",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("oracle") {
            return Ok(PolicyKind::Oracle);
        }
        s.parse().map(PolicyKind::Algorithm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapStyle {
    /// Top-H magnitudes spaced `2Δ` apart.
    Standard,
    /// Top-H magnitudes within `1e-6` of each other.
    Adversarial,
}

impl GapStyle {
    pub fn name(self) -> &'static str {
        match self {
            GapStyle::Standard => "standard",
            GapStyle::Adversarial => "adversarial",
        }
    }
}

impl FromStr for GapStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(GapStyle::Standard),
            "adversarial" => Ok(GapStyle::Adversarial),
            other => Err(Error::Config(format!("unknown gap style `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSource {
    /// Each coordinate uniform on `[-1, 1]`, redrawn per trial.
    Uniform,
    /// One fixed vector shared by every trial.
    Explicit(Vector),
    GapControlled {
        gap: f64,
        style: GapStyle,
        budget: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSource {
    One,
    /// Exhaustive submodularity ratio of each trial's `θ*`; needs `d ≤ 10`.
    Exhaustive,
    Value(f64),
}

impl AlphaSource {
    pub fn name(self) -> String {
        match self {
            AlphaSource::One => "one".into(),
            AlphaSource::Exhaustive => "exhaustive".into(),
            AlphaSource::Value(v) => format!("{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub dimension: usize,
    pub geometry: GeometrySpec,
    pub geometry_seed: u64,
    pub sparsity: usize,
    pub sigma: f64,
    /// Multiplies `sigma` in the error radius only; 1 means the true noise level.
    pub sigma_factor: f64,
    pub delta: f64,
    pub horizon: u64,
    pub trials: usize,
    pub seed: u64,
    pub policy: PolicyKind,
    pub basis: BasisKind,
    pub theta: ThetaSource,
    pub alpha: AlphaSource,
    /// Ledger rows are kept for `t` divisible by the stride, and for `t = T`.
    pub stride: u64,
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} d={} H={} sigma={} delta={} T={} trials={} policy={} basis={}",
            self.name,
            self.geometry.kind(),
            self.dimension,
            self.sparsity,
            self.sigma,
            self.delta,
            self.horizon,
            self.trials,
            self.policy.name(),
            self.basis
        )
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

impl ExperimentConfig {
    /// Parses TOML text; relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        Self::from_table(table, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn from_table(table: toml::Table, base_dir: Option<&Path>) -> Result<Self> {
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
        Self::from_raw(raw, base_dir)
    }

    fn from_raw(raw: RawConfig, base_dir: Option<&Path>) -> Result<Self> {
        let d = raw.geometry.dimension;
        if d == 0 {
            return Err(cfg_err("geometry.dimension must be at least 1"));
        }
        let g = &raw.geometry;
        let kind = g.kind.to_ascii_lowercase().replace('_', "-");
        let allowed: &[&str] = match kind.as_str() {
            "euclidean-ball" | "ball" | "l2-ball" => &["radius"],
            "ellipsoid" => &["matrix", "eigen_min"],
            "lp-ball" => &["p", "radius"],
            "l1-ball" => &["radius"],
            "hypercube" => &["lo", "hi"],
            other => return Err(cfg_err(format!("unknown geometry kind `{other}`"))),
        };
        let present = [
            ("radius", g.radius.is_some()),
            ("p", g.p.is_some()),
            ("lo", g.lo.is_some()),
            ("hi", g.hi.is_some()),
            ("matrix", g.matrix.is_some()),
            ("eigen_min", g.eigen_min.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(cfg_err(format!(
                    "geometry.{key} does not apply to `{kind}`"
                )));
            }
        }
        let radius = g.radius.unwrap_or(1.0);
        let geometry = match kind.as_str() {
            "euclidean-ball" | "ball" | "l2-ball" => GeometrySpec::EuclideanBall { radius },
            "ellipsoid" => {
                let matrix = match g.matrix.as_deref() {
                    None | Some("random") => MatrixSource::Random {
                        eigen_min: g.eigen_min.unwrap_or(DEFAULT_EIGEN_MIN),
                    },
                    Some(path) => {
                        if g.eigen_min.is_some() {
                            return Err(cfg_err(
                                "geometry.eigen_min only applies to a random matrix",
                            ));
                        }
                        MatrixSource::File(resolve(base_dir, path))
                    }
                };
                if let MatrixSource::Random { eigen_min } = matrix {
                    if !(eigen_min > 0.0 && eigen_min <= 1.0) {
                        return Err(cfg_err(format!(
                            "geometry.eigen_min must lie in (0, 1], got {eigen_min}"
                        )));
                    }
                }
                GeometrySpec::Ellipsoid { matrix }
            }
            "lp-ball" => GeometrySpec::LpBall {
                p: g.p
                    .ok_or_else(|| cfg_err("geometry.p is required for lp-ball"))?,
                radius,
            },
            "l1-ball" => GeometrySpec::L1Ball { radius },
            _ => GeometrySpec::Hypercube {
                lo: g.lo.unwrap_or(-1.0),
                hi: g.hi.unwrap_or(1.0),
            },
        };

        let p = &raw.problem;
        if p.trials == 0 {
            return Err(cfg_err("problem.trials must be at least 1"));
        }
        if p.horizon == 0 {
            return Err(cfg_err("problem.horizon must be at least 1"));
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return Err(cfg_err(format!(
                "problem.delta must lie in (0, 1), got {}",
                p.delta
            )));
        }
        if !(p.sigma.is_finite() && p.sigma >= 0.0) {
            return Err(cfg_err(format!(
                "problem.sigma must be finite and ≥ 0, got {}",
                p.sigma
            )));
        }
        let sigma_factor = p.sigma_factor.unwrap_or(1.0);
        if !(sigma_factor.is_finite() && sigma_factor >= 0.0) {
            return Err(cfg_err(format!(
                "problem.sigma_factor must be finite and ≥ 0, got {sigma_factor}"
            )));
        }
        if p.sparsity == 0 || p.sparsity > d {
            return Err(cfg_err(format!(
                "problem.sparsity must lie in [1, {d}], got {}",
                p.sparsity
            )));
        }

        let policy = match raw.algorithm.mode.as_deref() {
            None => PolicyKind::Algorithm(Algorithm::ApseeG),
            Some(s) => s.parse()?,
        };
        let basis = match raw.algorithm.basis.as_deref() {
            None => BasisKind::Standard,
            Some(s) => s.parse().map_err(|e: Error| cfg_err(e.to_string()))?,
        };

        let t = &raw.theta;
        let source = t
            .source
            .as_deref()
            .unwrap_or("uniform")
            .to_ascii_lowercase()
            .replace('_', "-");
        let theta = match source.as_str() {
            "uniform" => {
                if t.path.is_some() || t.gap.is_some() || t.style.is_some() || t.budget.is_some() {
                    return Err(cfg_err("theta.source = uniform takes no further keys"));
                }
                ThetaSource::Uniform
            }
            "file" => {
                if t.gap.is_some() || t.style.is_some() || t.budget.is_some() {
                    return Err(cfg_err("theta.source = file only takes theta.path"));
                }
                let path = resolve(
                    base_dir,
                    t.path
                        .as_deref()
                        .ok_or_else(|| cfg_err("theta.path is required"))?,
                );
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let v =
                    parse_vector(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
                if v.len() != d {
                    return Err(cfg_err(format!(
                        "theta file has {} entries, expected {d}",
                        v.len()
                    )));
                }
                ThetaSource::Explicit(v)
            }
            "gap-controlled" => {
                if t.path.is_some() {
                    return Err(cfg_err(
                        "theta.path does not apply to gap-controlled parameters",
                    ));
                }
                let gap = t.gap.ok_or_else(|| cfg_err("theta.gap is required"))?;
                if !(gap > 0.0 && gap.is_finite()) {
                    return Err(cfg_err(format!("theta.gap must be positive, got {gap}")));
                }
                if p.sparsity >= d {
                    return Err(cfg_err(
                        "gap-controlled parameters need sparsity < dimension",
                    ));
                }
                let style = t.style.as_deref().unwrap_or("standard").parse()?;
                let budget = t.budget.unwrap_or(DEFAULT_THETA_BUDGET);
                ThetaSource::GapControlled { gap, style, budget }
            }
            other => return Err(cfg_err(format!("unknown theta source `{other}`"))),
        };

        let alpha = match raw.regret.alpha {
            None => AlphaSource::auto(d),
            Some(AlphaField::Value(v)) => AlphaSource::value(v)?,
            Some(AlphaField::Name(s)) => match s.to_ascii_lowercase().as_str() {
                "one" => AlphaSource::One,
                "exhaustive" => AlphaSource::Exhaustive,
                "auto" => AlphaSource::auto(d),
                other => AlphaSource::value(
                    other
                        .parse()
                        .map_err(|_| cfg_err(format!("unknown alpha `{other}`")))?,
                )?,
            },
        };
        if alpha == AlphaSource::Exhaustive && d > crate::oracles::EXHAUSTIVE_RATIO_MAX_DIM {
            return Err(cfg_err(format!(
                "exhaustive alpha needs dimension ≤ {}, got {d}",
                crate::oracles::EXHAUSTIVE_RATIO_MAX_DIM
            )));
        }

        let stride = raw.output.stride.unwrap_or(1);
        if stride == 0 {
            return Err(cfg_err("output.stride must be at least 1"));
        }

        let cfg = ExperimentConfig {
            name: raw.name.unwrap_or_else(|| "experiment".into()),
            dimension: d,
            geometry,
            geometry_seed: raw.geometry.seed.unwrap_or(p.seed),
            sparsity: p.sparsity,
            sigma: p.sigma,
            sigma_factor,
            delta: p.delta,
            horizon: p.horizon,
            trials: p.trials,
            seed: p.seed,
            policy,
            basis,
            theta,
            alpha,
            stride,
        };
        // fail fast on geometry parameters
        cfg.build_geometry()?;
        Ok(cfg)
    }

    /// Builds the action set. A random ellipsoid matrix is drawn once per
    /// experiment from the geometry seed.
    pub fn build_geometry(&self) -> Result<ActionSetGeometry> {
        let d = self.dimension;
        match &self.geometry {
            GeometrySpec::EuclideanBall { radius } => ActionSetGeometry::euclidean_ball(d, *radius),
            GeometrySpec::LpBall { p, radius } => ActionSetGeometry::lp_ball(d, *p, *radius),
            GeometrySpec::L1Ball { radius } => ActionSetGeometry::l1_ball(d, *radius),
            GeometrySpec::Hypercube { lo, hi } => {
                ActionSetGeometry::hypercube(vec![*lo; d], vec![*hi; d])
            }
            GeometrySpec::Ellipsoid {
                matrix: MatrixSource::Random { eigen_min },
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.geometry_seed);
                ActionSetGeometry::ellipsoid(linalg::random_spd(d, *eigen_min, &mut rng))
            }
            GeometrySpec::Ellipsoid {
                matrix: MatrixSource::File(path),
            } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let a = linalg::parse_matrix_csv(&text)
                    .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
                if a.nrows() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: a.nrows(),
                    });
                }
                ActionSetGeometry::ellipsoid(a)
            }
        }
    }
}

impl AlphaSource {
    fn auto(d: usize) -> Self {
        if d <= crate::oracles::EXHAUSTIVE_RATIO_MAX_DIM {
            AlphaSource::Exhaustive
        } else {
            AlphaSource::One
        }
    }

    fn value(v: f64) -> Result<Self> {
        if v > 0.0 && v <= 1.0 {
            Ok(AlphaSource::Value(v))
        } else {
            Err(cfg_err(format!("regret.alpha must lie in (0, 1], got {v}")))
        }
    }
}

/// Reads numbers separated by commas, whitespace or newlines; `#` starts a comment.
pub fn parse_vector(text: &str) -> std::result::Result<Vector, String> {
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
        {
            values.push(tok.parse::<f64>().map_err(|e| format!("`{tok}`: {e}"))?);
        }
    }
    if values.is_empty() {
        return Err("no values".into());
    }
    Ok(Vector::from_vec(values))
}

/// Parses a sweep value: integer, then float, then boolean, else a string.
pub fn parse_override_value(s: &str) -> toml::Value {
    if let Ok(i) = s.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = s.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = s.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    toml::Value::String(s.to_string())
}

/// Sets a dotted key such as `problem.sigma` in a parsed config table.
pub fn set_dotted_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg_err(format!("malformed key `{key}`")));
    }
    let (last, sections) = parts.split_last().expect("non-empty key");
    let mut current = table;
    for section in sections {
        let entry = current
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(cfg_err(format!("`{section}` in `{key}` is not a section"))),
        };
    }
    current.insert(last.to_string(), value);
    Ok(())
}
