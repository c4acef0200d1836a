//! Run configuration files (TOML).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ergodic::{
    ArnoldConfig, Horizon, LambdaMode, LambdaOptions, PotentialGauge, QuadratureGrid, Sampling,
};
use crate::fields::{make_hopf_pair, make_superposition_pair, make_unlinked_pair, FieldSpec, TubeSpec};
use crate::flow::StepControl;
use crate::vec3::Vec3;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Link,
    Helicity,
    Lambda,
    Converge,
    Verify,
    Curves,
    Check,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Link => "link",
            Command::Helicity => "helicity",
            Command::Lambda => "lambda",
            Command::Converge => "converge",
            Command::Verify => "verify",
            Command::Curves => "curves",
            Command::Check => "check",
        }
    }
}

/// Built-in field pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    HopfPair,
    UnlinkedPair,
    SuperpositionPair,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::HopfPair, Preset::UnlinkedPair, Preset::SuperpositionPair];

    pub fn build(self, minor_radius: f64, amplitude: f64) -> Result<(FieldSpec, FieldSpec)> {
        match self {
            Preset::HopfPair => make_hopf_pair(minor_radius, amplitude),
            Preset::UnlinkedPair => make_unlinked_pair(minor_radius, amplitude),
            Preset::SuperpositionPair => make_superposition_pair(minor_radius, amplitude),
        }
    }
}

/// A field given inline as a tube list or by reference to a field file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tubes: Option<Vec<TubeSpec>>,
}

impl FieldSource {
    pub fn resolve(&self, base: &Path) -> Result<FieldSpec> {
        match (&self.file, &self.tubes) {
            (Some(f), None) => FieldSpec::load(&base.join(f)),
            (None, Some(t)) => Ok(FieldSpec::new(t.clone())),
            _ => Err(Error::validation("a field needs exactly one of `file` or `tubes`")),
        }
    }
}

/// Either a preset pair or explicit `x` and `y` fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub minor_radius: f64,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<FieldSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<FieldSource>,
}

impl Default for FieldsConfig {
    fn default() -> Self {
        FieldsConfig { preset: None, minor_radius: 0.2, amplitude: 1.0, x: None, y: None }
    }
}

impl FieldsConfig {
    pub fn resolve(&self, base: &Path) -> Result<(FieldSpec, FieldSpec)> {
        match (&self.x, &self.y) {
            (None, None) => self.preset.unwrap_or(Preset::HopfPair).build(self.minor_radius, self.amplitude),
            (Some(x), Some(y)) => {
                if self.preset.is_some() {
                    return Err(Error::validation("fields: give either `preset` or `x` and `y`, not both"));
                }
                Ok((x.resolve(base)?, y.resolve(base)?))
            }
            _ => Err(Error::validation("fields: `x` and `y` must be given together")),
        }
    }
}

/// `both` evaluates the two modes on the same closed curves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    Geometric,
    #[default]
    Kernel,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaConfig {
    pub mode: ModeChoice,
    pub sampling: Sampling,
    pub n_samples: usize,
    pub max_seglen: f64,
    pub tol: f64,
    pub link_tol: f64,
    pub separation_factor: f64,
    pub projection_seed: u64,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        let o = LambdaOptions::default();
        LambdaConfig {
            mode: ModeChoice::Kernel,
            sampling: Sampling::FluxWeighted,
            n_samples: 200,
            max_seglen: o.max_seglen,
            tol: o.tol,
            link_tol: o.link_tol,
            separation_factor: o.separation_factor,
            projection_seed: o.projection_seed,
        }
    }
}

impl LambdaConfig {
    pub fn options(&self, ctrl: StepControl) -> LambdaOptions {
        LambdaOptions {
            ctrl,
            max_seglen: self.max_seglen,
            tol: self.tol,
            link_tol: self.link_tol,
            separation_factor: self.separation_factor,
            projection_seed: self.projection_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HelicityConfig {
    pub grid: QuadratureGrid,
    pub potential_grid: QuadratureGrid,
    pub gauge: PotentialGauge,
    /// Relative agreement required between the kernel and potential values.
    pub relative_tolerance: f64,
}

impl Default for HelicityConfig {
    fn default() -> Self {
        HelicityConfig {
            grid: QuadratureGrid::default(),
            potential_grid: QuadratureGrid { spacing: 0.0125, ..QuadratureGrid::default() },
            gauge: PotentialGauge::Axial,
            relative_tolerance: 0.02,
        }
    }
}

fn pi_schedule(multiples: &[f64]) -> Vec<Horizon> {
    multiples.iter().map(|k| Horizon { t: k * PI, s: k * PI }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub relative_tolerance: f64,
    pub stderr_factor: f64,
    pub decay_schedule: Vec<Horizon>,
    pub decay_pairs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let a = ArnoldConfig::default();
        VerifyConfig {
            relative_tolerance: a.relative_tolerance,
            stderr_factor: a.stderr_factor,
            decay_schedule: a.decay_schedule,
            decay_pairs: a.decay_pairs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub schedule: Vec<Horizon>,
    pub n_pairs: usize,
    pub mode: LambdaMode,
    /// Only the short-path terms; no linking estimates.
    pub terms_only: bool,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            schedule: pi_schedule(&[4.0, 8.0, 16.0, 32.0]),
            n_pairs: 50,
            mode: LambdaMode::Geometric,
            terms_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_a: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_b: Option<PathBuf>,
    /// Number of random rigid-motion circle pairs; used when no curves are given.
    pub random_circle_pairs: usize,
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub tol: f64,
    /// Largest allowed `|gauss − oracle|` for a pair to pass.
    pub agreement: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            curve_a: None,
            curve_b: None,
            random_circle_pairs: 50,
            min_vertices: 64,
            max_vertices: 512,
            tol: 1e-6,
            agreement: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesConfig {
    /// Seeds; sampled from the run seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec3>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Check every field of these presets instead of the run's fields.
    pub presets: Vec<Preset>,
    pub n_points: usize,
    pub divergence_step: f64,
    pub divergence_limit: f64,
    pub jacobian_seeds: usize,
    pub jacobian_time: f64,
    pub jacobian_step: f64,
    pub jacobian_tol: f64,
    pub jacobian_limit: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            presets: Vec::new(),
            n_points: 10_000,
            divergence_step: 1e-7,
            divergence_limit: 1e-6,
            jacobian_seeds: 100,
            jacobian_time: 10.0,
            jacobian_step: 1e-6,
            jacobian_tol: 1e-12,
            jacobian_limit: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from(".") }
    }
}

fn default_seed() -> u64 {
    20_240_601
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub integrator: StepControl,
    #[serde(default)]
    pub lambda: LambdaConfig,
    #[serde(default)]
    pub helicity: HelicityConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub curves: CurvesConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            command,
            seed: default_seed(),
            workers: 0,
            horizon: Horizon::default(),
            fields: FieldsConfig::default(),
            integrator: StepControl::default(),
            lambda: LambdaConfig::default(),
            helicity: HelicityConfig::default(),
            verify: VerifyConfig::default(),
            converge: ConvergeConfig::default(),
            link: LinkConfig::default(),
            curves: CurvesConfig::default(),
            check: CheckConfig::default(),
            output: OutputConfig::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Parse(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Read and parse; relative paths in the file resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&s)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Output directory, relative to the working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone()
    }

    pub fn fields(&self) -> Result<(FieldSpec, FieldSpec)> {
        self.fields.resolve(&self.base_dir)
    }

    pub fn lambda_options(&self) -> LambdaOptions {
        self.lambda.options(self.integrator)
    }

    pub fn arnold(&self) -> ArnoldConfig {
        ArnoldConfig {
            horizon: self.horizon,
            n_samples: self.lambda.n_samples,
            seed: self.seed,
            mode: match self.lambda.mode {
                ModeChoice::Geometric => LambdaMode::Geometric,
                _ => LambdaMode::Kernel,
            },
            sampling: self.lambda.sampling,
            lambda: self.lambda_options(),
            grid: self.helicity.grid,
            potential_grid: self.helicity.potential_grid,
            gauge: self.helicity.gauge,
            decay_schedule: self.verify.decay_schedule.clone(),
            decay_pairs: self.verify.decay_pairs,
            relative_tolerance: self.verify.relative_tolerance,
            stderr_factor: self.verify.stderr_factor,
        }
    }

    /// Range and consistency checks, including existence of referenced files.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be positive and finite (got {v})")))
            }
        };
        self.horizon.validate()?;
        self.lambda_options().validate()?;
        self.helicity.grid.validate()?;
        self.helicity.potential_grid.validate()?;
        positive("helicity.relative_tolerance", self.helicity.relative_tolerance)?;
        self.fields()?;
        match self.command {
            Command::Lambda | Command::Verify if self.lambda.n_samples == 0 => {
                return Err(Error::validation("lambda.n_samples must be at least 1"));
            }
            Command::Verify => {
                positive("verify.relative_tolerance", self.verify.relative_tolerance)?;
                positive("verify.stderr_factor", self.verify.stderr_factor)?;
                for h in &self.verify.decay_schedule {
                    h.validate()?;
                }
            }
            Command::Converge => {
                if self.converge.n_pairs == 0 || self.converge.schedule.is_empty() {
                    return Err(Error::validation("converge needs n_pairs ≥ 1 and a non-empty schedule"));
                }
                for h in &self.converge.schedule {
                    h.validate()?;
                }
            }
            Command::Link => {
                let l = &self.link;
                match (&l.curve_a, &l.curve_b) {
                    (Some(a), Some(b)) => {
                        for p in [a, b] {
                            let full = self.resolve(p);
                            if !full.is_file() {
                                return Err(Error::validation(format!("curve file {} does not exist", full.display())));
                            }
                        }
                    }
                    (None, None) => {
                        if l.random_circle_pairs == 0 {
                            return Err(Error::validation("link needs curve files or random_circle_pairs ≥ 1"));
                        }
                        if !(3 <= l.min_vertices && l.min_vertices <= l.max_vertices) {
                            return Err(Error::validation("link needs 3 ≤ min_vertices ≤ max_vertices"));
                        }
                    }
                    _ => return Err(Error::validation("link: curve_a and curve_b must be given together")),
                }
                positive("link.tol", l.tol)?;
                positive("link.agreement", l.agreement)?;
            }
            Command::Check => {
                let c = &self.check;
                positive("check.divergence_step", c.divergence_step)?;
                positive("check.divergence_limit", c.divergence_limit)?;
                positive("check.jacobian_time", c.jacobian_time)?;
                positive("check.jacobian_step", c.jacobian_step)?;
                positive("check.jacobian_tol", c.jacobian_tol)?;
                positive("check.jacobian_limit", c.jacobian_limit)?;
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
schema_version = 1
command = "converge"
seed = 7
workers = 2

[horizon]
T = 12.5
S = 25.0

[fields]
minor_radius = 0.15

[fields.x]
tubes = [{ center = [0.0, 0.0, 0.0], axis = [0.0, 0.0, 1.0], major_radius = 1.0, minor_radius = 0.15, amplitude = 1.0, sign = 1 }]

[fields.y]
tubes = [{ center = [1.0, 0.0, 0.0], axis = [0.0, 1.0, 0.0], major_radius = 1.0, minor_radius = 0.15, amplitude = 2.0, sign = -1 }]

[lambda]
mode = "both"
n_samples = 10

[helicity]
grid = { spacing = 0.1, rule = { kind = "gauss", order = 2 } }

[converge]
schedule = [{ T = 1.0, S = 1.0 }, { T = 2.0, S = 2.0 }]
n_pairs = 3
"#;

    #[test]
    fn round_trip_is_idempotent() {
        let a = RunConfig::from_toml_str(FULL).unwrap();
        let text = a.to_toml_string().unwrap();
        let b = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(text, b.to_toml_string().unwrap());
        assert_eq!(b.seed, 7);
        assert_eq!(b.lambda.mode, ModeChoice::Both);
        assert_eq!(b.converge.schedule.len(), 2);
        b.validate().unwrap();
    }

    #[test]
    fn defaults_round_trip() {
        for cmd in [Command::Link, Command::Helicity, Command::Lambda, Command::Converge, Command::Verify] {
            let a = RunConfig::new(cmd);
            a.validate().unwrap();
            let b = RunConfig::from_toml_str(&a.to_toml_string().unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn minimal_config_uses_hopf_pair() {
        let c = RunConfig::from_toml_str("schema_version = 1\ncommand = \"verify\"\n").unwrap();
        let (x, y) = c.fields().unwrap();
        assert_eq!((x, y), make_hopf_pair(0.2, 1.0).unwrap());
        assert_eq!(c.arnold().n_samples, 200);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml_str("schema_version = 2\ncommand = \"verify\"\n").unwrap_err().is_validation());
        assert!(RunConfig::from_toml_str("schema_version = 1\ncommand = \"fly\"\n").is_err());
        assert!(RunConfig::from_toml_str("schema_version = 1\ncommand = \"link\"\nbogus = 1\n").is_err());
        let c = RunConfig::from_toml_str("schema_version = 1\ncommand = \"verify\"\n[fields]\nminor_radius = 0.5\n").unwrap();
        assert!(c.validate().unwrap_err().is_validation());
        let c = RunConfig::from_toml_str(
            "schema_version = 1\ncommand = \"link\"\n[link]\ncurve_a = \"nope.csv\"\ncurve_b = \"nope.csv\"\n",
        )
        .unwrap();
        assert!(c.validate().unwrap_err().is_validation());
        let c = RunConfig::from_toml_str(
            "schema_version = 1\ncommand = \"lambda\"\n[fields]\npreset = \"hopf_pair\"\n[fields.x]\ntubes = []\n",
        )
        .unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn field_files_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y) = make_superposition_pair(0.2, 1.0).unwrap();
        std::fs::write(dir.path().join("x.toml"), x.to_toml_string().unwrap()).unwrap();
        std::fs::write(dir.path().join("y.toml"), y.to_toml_string().unwrap()).unwrap();
        let cfg_path = dir.path().join("run.toml");
        std::fs::write(
            &cfg_path,
            "schema_version = 1\ncommand = \"helicity\"\n[fields.x]\nfile = \"x.toml\"\n[fields.y]\nfile = \"y.toml\"\n",
        )
        .unwrap();
        let c = RunConfig::load(&cfg_path).unwrap();
        assert_eq!(c.fields().unwrap(), (x, y));
    }
}
