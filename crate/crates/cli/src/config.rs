//! Experiment configuration: a versioned JSON document with model
//! declarations and one optional section per subcommand.

use conegrowth::circle::{CircleLift, CircleOrderSettings, Primitive};
use conegrowth::stable::{MetricSpec, TorusMetric};
use conegrowth::suite::SuiteSettings;
use conegrowth::torus::{HomogeneousHamiltonian, SphereGrid, DEFAULT_CIRCLE_POINTS, DEFAULT_LATTICE_RADIUS};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// The configuration shipped with the repository.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.json");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error("{0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Model {
        context: String,
        source: conegrowth::Error,
    },
}

fn model_err(context: impl Into<String>) -> impl FnOnce(conegrowth::Error) -> ConfigError {
    let context = context.into();
    move |source| ConfigError::Model { context, source }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub circle: CircleModel,
    #[serde(default)]
    pub torus: TorusModel,
    #[serde(default)]
    pub metrics: BTreeMap<String, MetricSource>,
    pub rot: Option<RotSection>,
    pub gamma_circle: Option<GammaCircleSection>,
    pub gamma_torus: Option<GammaTorusSection>,
    pub shape: Option<ShapeSection>,
    pub stable_norm: Option<StableNormSection>,
    pub beta: Option<BetaSection>,
    #[serde(default)]
    pub verify: SuiteSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleModel {
    /// Named words of primitives; `e` (the unit translation) is predeclared.
    #[serde(default)]
    pub elements: BTreeMap<String, Vec<Primitive>>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusModel {
    #[serde(default)]
    pub hamiltonians: BTreeMap<String, HomogeneousHamiltonian>,
    /// Angles of the circle grid for `n = 2`.
    pub grid_points: Option<usize>,
    /// Sup-norm radius of the lattice grid for `n >= 3`.
    pub lattice_radius: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MetricSource {
    Csv(CsvMetric),
    Spec(MetricSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvMetric {
    /// Table with header `q1..qn,g11..gnn`, resolved against the config's
    /// directory when relative.
    pub csv: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotSection {
    pub elements: Vec<String>,
    pub iterations: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaCircleSection {
    pub pairs: Vec<(String, String)>,
    pub horizon: usize,
    /// Iterations of the rotation-number enclosure used for the exact value.
    #[serde(default = "default_iterations")]
    pub iterations: u64,
}

fn default_iterations() -> u64 {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaTorusSection {
    pub pairs: Vec<(String, String)>,
    /// Also write the sphere table of every Hamiltonian used.
    #[serde(default)]
    pub write_tables: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeInstance {
    pub f: String,
    pub g: String,
    pub a: Vec<f64>,
    pub c: f64,
    pub k: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSection {
    pub instances: Vec<ShapeInstance>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormRun {
    pub metric: String,
    pub e: Vec<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableNormSection {
    pub runs: Vec<NormRun>,
    pub horizon: usize,
    pub resolution: usize,
    /// Also run the dual descent and report its lower bound.
    #[serde(default = "yes")]
    pub dual: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSection {
    pub runs: Vec<NormRun>,
    pub horizon: usize,
    pub resolution: usize,
}

/// A parsed and validated configuration with all models constructed.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub circle: BTreeMap<String, CircleLift>,
    pub circle_settings: CircleOrderSettings,
    pub metrics: BTreeMap<String, TorusMetric>,
}

impl Experiment {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let (text, base) = match path {
            Some(p) => (
                std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (DEFAULT_CONFIG.to_string(), PathBuf::from(".")),
        };
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version(config.schema_version));
        }

        let mut circle = BTreeMap::new();
        circle.insert("e".to_string(), conegrowth::circle::translation_e());
        for (name, word) in &config.circle.elements {
            let lift = CircleLift::new(word.clone()).map_err(model_err(format!("circle element {name}")))?;
            circle.insert(name.clone(), lift);
        }
        let mut circle_settings = CircleOrderSettings::default();
        if let Some(n) = config.circle.grid_points {
            if n < 2 {
                return Err(ConfigError::Invalid("circle.grid_points must be at least 2".into()));
            }
            circle_settings.grid_points = n;
        }

        let mut metrics = BTreeMap::new();
        for (name, source) in &config.metrics {
            let metric = match source {
                MetricSource::Spec(spec) => TorusMetric::from_spec(spec),
                MetricSource::Csv(c) => {
                    let path = base.join(&c.csv);
                    let file = std::fs::File::open(&path).map_err(|source| ConfigError::Read { path, source })?;
                    TorusMetric::from_csv(file)
                }
            }
            .map_err(model_err(format!("metric {name}")))?;
            metrics.insert(name.clone(), metric);
        }

        let exp = Self {
            config,
            circle,
            circle_settings,
            metrics,
        };
        exp.validate_references()?;
        Ok(exp)
    }

    fn validate_references(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        if let Some(rot) = &c.rot {
            if rot.iterations == 0 {
                return Err(ConfigError::Invalid("rot.iterations must be positive".into()));
            }
            for name in &rot.elements {
                self.lift(name)?;
            }
        }
        if let Some(s) = &c.gamma_circle {
            if s.horizon == 0 || s.iterations == 0 {
                return Err(ConfigError::Invalid("gamma_circle.horizon and iterations must be positive".into()));
            }
            for (f, g) in &s.pairs {
                self.lift(f)?;
                self.lift(g)?;
            }
        }
        if let Some(s) = &c.gamma_torus {
            for (f, g) in &s.pairs {
                self.same_dim(f, g)?;
            }
        }
        if let Some(s) = &c.shape {
            for (i, inst) in s.instances.iter().enumerate() {
                let dim = self.same_dim(&inst.f, &inst.g)?;
                if inst.a.len() != dim {
                    return Err(ConfigError::Invalid(format!("shape instance {i}: a has the wrong dimension")));
                }
                if !(inst.c > 0.0) || inst.k == 0 {
                    return Err(ConfigError::Invalid(format!("shape instance {i}: need c > 0 and k >= 1")));
                }
            }
        }
        let runs = c
            .stable_norm
            .iter()
            .flat_map(|s| s.runs.iter().map(move |r| (r, s.horizon, s.resolution)))
            .chain(c.beta.iter().flat_map(|s| s.runs.iter().map(move |r| (r, s.horizon, s.resolution))));
        for (run, horizon, resolution) in runs {
            let m = self.metric(&run.metric)?;
            if run.e.len() != m.dim() || run.e.iter().all(|&x| x == 0) {
                return Err(ConfigError::Invalid(format!(
                    "class {:?} must be nonzero with dimension {}",
                    run.e,
                    m.dim()
                )));
            }
            if horizon == 0 || resolution < 2 {
                return Err(ConfigError::Invalid("horizon must be positive and resolution at least 2".into()));
            }
        }
        Ok(())
    }

    pub fn lift(&self, name: &str) -> Result<&CircleLift, ConfigError> {
        self.circle
            .get(name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown circle element {name}")))
    }

    pub fn hamiltonian(&self, name: &str) -> Result<&HomogeneousHamiltonian, ConfigError> {
        self.config
            .torus
            .hamiltonians
            .get(name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown hamiltonian {name}")))
    }

    fn same_dim(&self, f: &str, g: &str) -> Result<usize, ConfigError> {
        let (f, g) = (self.hamiltonian(f)?, self.hamiltonian(g)?);
        if f.dim() != g.dim() {
            return Err(ConfigError::Invalid(format!(
                "hamiltonians have dimensions {} and {}",
                f.dim(),
                g.dim()
            )));
        }
        Ok(f.dim())
    }

    pub fn metric(&self, name: &str) -> Result<&TorusMetric, ConfigError> {
        self.metrics
            .get(name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown metric {name}")))
    }

    pub fn sphere_grid(&self, dim: usize) -> Result<SphereGrid, ConfigError> {
        let t = &self.config.torus;
        let grid = if dim == 2 {
            SphereGrid::circle(t.grid_points.unwrap_or(DEFAULT_CIRCLE_POINTS))
        } else {
            SphereGrid::lattice(dim, t.lattice_radius.unwrap_or(DEFAULT_LATTICE_RADIUS))
        };
        grid.map_err(model_err("sphere grid"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let e = Experiment::load(None).unwrap();
        assert!(e.config.rot.is_some());
        assert!(e.circle.contains_key("e"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Experiment::parse(r#"{"schema_version": 1, "bogus": 3}"#, Path::new(".")).err().unwrap();
        assert!(matches!(err, ConfigError::Parse(_)));
        let err = Experiment::parse(
            r#"{"schema_version": 1, "rot": {"elements": [], "iterations": 5, "n": 1}}"#,
            Path::new("."),
        )
        .err()
        .unwrap();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn version_and_validity_ranges() {
        let err = Experiment::parse(r#"{"schema_version": 2}"#, Path::new(".")).err().unwrap();
        assert!(matches!(err, ConfigError::Version(2)));
        let bad_lift = r#"{"schema_version": 1, "circle": {"elements":
            {"f": [{"a": 0.1, "harmonics": [{"j": 1, "b": 0.2, "phi": 0}]}]}}}"#;
        assert!(matches!(
            Experiment::parse(bad_lift, Path::new(".")),
            Err(ConfigError::Model { .. })
        ));
        let missing = r#"{"schema_version": 1, "rot": {"elements": ["nope"], "iterations": 5}}"#;
        assert!(matches!(Experiment::parse(missing, Path::new(".")), Err(ConfigError::Invalid(_))));
    }
}
