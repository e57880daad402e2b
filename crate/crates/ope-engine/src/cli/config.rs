//! Run configuration: a TOML file with an explicit schema version.

use super::CliError;
use crate::algebra::{format_dim, parse_combination, parse_dim, parse_operator, parse_rational, CompositeOperator, Dim, Theory};
use crate::recursion::LagrangianTerm;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TheoryConfig {
    Preset { preset: String },
    Inline(Theory),
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig::Preset { preset: "scalar".into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { rel_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianEntry {
    pub operator: String,
    #[serde(default = "one_u32")]
    pub g_power: u32,
    #[serde(default = "one_string")]
    pub coeff: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeOpeConfig {
    pub a: Vec<String>,
    pub b: String,
    /// Point sets at which the coefficient is sampled.
    #[serde(default)]
    pub samples: Vec<Vec<[f64; 4]>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionConfig {
    pub a: Vec<String>,
    pub b: String,
    pub points: Vec<[f64; 4]>,
    #[serde(default = "default_tail_radii")]
    pub tail_radii: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default = "default_scaling_points")]
    pub points: [[f64; 4]; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_tau_min")]
    pub tau_min: f64,
    #[serde(default = "default_fit_points")]
    pub fit_points: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Also write every `(τ, value)` curve as CSV.
    #[serde(default)]
    pub curves: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            points: default_scaling_points(),
            grid_points: default_grid_points(),
            tau_min: default_tau_min(),
            fit_points: default_fit_points(),
            margin: default_margin(),
            curves: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssocConfig {
    pub a: [String; 3],
    pub b: String,
    pub points: [[f64; 4]; 3],
    #[serde(default = "default_truncations")]
    pub d_trunc: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WardConfig {
    /// Stop after this many `(A₁, A₂, B)` triples.
    #[serde(default)]
    pub max_triples: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreesConfig {
    #[serde(default = "default_tree_samples")]
    pub samples: usize,
    #[serde(default = "default_samples_1d")]
    pub integration_samples_1d: usize,
    #[serde(default = "default_samples_4d")]
    pub integration_samples_4d: usize,
}

impl Default for TreesConfig {
    fn default() -> Self {
        TreesConfig {
            samples: default_tree_samples(),
            integration_samples_1d: default_samples_1d(),
            integration_samples_4d: default_samples_4d(),
        }
    }
}

/// Parsed file contents. Every default is filled in so the manifest can echo
/// the effective configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub theory: TheoryConfig,
    #[serde(default = "one_f64")]
    pub mu: f64,
    #[serde(default = "default_dmax")]
    pub d_max: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_lagrangian")]
    pub lagrangian: Vec<LagrangianEntry>,
    #[serde(default)]
    pub free_ope: Option<FreeOpeConfig>,
    #[serde(default)]
    pub recursion: Option<RecursionConfig>,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub assoc: Option<AssocConfig>,
    #[serde(default)]
    pub ward: Option<WardConfig>,
    #[serde(default)]
    pub trees: TreesConfig,
}

fn one_u32() -> u32 {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn one_string() -> String {
    "1".into()
}
fn default_dmax() -> String {
    "4".into()
}
fn default_tail_radii() -> Vec<f64> {
    vec![10.0, 20.0, 40.0]
}
fn default_scaling_points() -> [[f64; 4]; 2] {
    [[0.31, -0.12, 0.27, 0.05], [0.0; 4]]
}
fn default_grid_points() -> usize {
    crate::analysis::DEFAULT_GRID_POINTS
}
fn default_tau_min() -> f64 {
    1e-3
}
fn default_fit_points() -> usize {
    crate::analysis::DEFAULT_FIT_POINTS
}
fn default_margin() -> f64 {
    0.05
}
fn default_truncations() -> Vec<String> {
    ["2", "4", "6", "8"].map(String::from).to_vec()
}
fn default_tree_samples() -> usize {
    10_000
}
fn default_samples_1d() -> usize {
    2_000
}
fn default_samples_4d() -> usize {
    24
}
fn default_lagrangian() -> Vec<LagrangianEntry> {
    vec![LagrangianEntry { operator: "1/24*phi^4".into(), g_power: 1, coeff: "1".into() }]
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::config("CONFIG_INVALID", msg)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::config("CONFIG_NOT_FOUND", format!("no config file at {}", path.display())),
            _ => CliError::config("CONFIG_UNREADABLE", format!("{}: {e}", path.display())),
        })?;
        let text = std::str::from_utf8(&bytes).map_err(|_| invalid("config is not UTF-8"))?;
        let cfg = Self::parse(text)?;
        Ok((cfg, bytes))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "SCHEMA_VERSION",
                format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu must be positive and finite"));
        }
        if !(self.quadrature.rel_tol > 0.0) {
            return Err(invalid("quadrature.rel_tol must be positive"));
        }
        self.d_max()?;
        self.theory()?;
        Ok(())
    }

    pub fn d_max(&self) -> Result<Dim, CliError> {
        parse_dim(&self.d_max).map_err(|e| invalid(format!("d_max: {e}")))
    }

    pub fn theory(&self) -> Result<Theory, CliError> {
        let t = match &self.theory {
            TheoryConfig::Preset { preset } => Theory::preset(preset).map_err(|e| invalid(e.to_string()))?,
            TheoryConfig::Inline(t) => t.clone(),
        };
        t.validate().map_err(|e| invalid(format!("theory: {e}")))?;
        Ok(t)
    }

    pub fn lagrangian(&self, t: &Theory) -> Result<Vec<LagrangianTerm>, CliError> {
        self.lagrangian
            .iter()
            .map(|e| {
                Ok(LagrangianTerm {
                    operator: parse_combination(t, &e.operator).map_err(|err| invalid(format!("lagrangian: {err}")))?,
                    g_power: e.g_power,
                    coeff: parse_rational(&e.coeff).ok_or_else(|| invalid(format!("lagrangian coefficient `{}`", e.coeff)))?,
                })
            })
            .collect()
    }

    /// Applies command-line overrides.
    pub fn override_with(&mut self, tol: Option<f64>, seed: Option<u64>, dmax: Option<&str>, format: Option<Format>) -> Result<(), CliError> {
        if let Some(t) = tol {
            self.quadrature.rel_tol = t;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(d) = dmax {
            let d = parse_dim(d).map_err(|e| CliError::usage(format!("--dmax: {e}")))?;
            self.d_max = format_dim(&d);
        }
        if let Some(f) = format {
            self.format = f;
        }
        self.validate()
    }
}

pub fn operator(t: &Theory, s: &str) -> Result<CompositeOperator, CliError> {
    parse_operator(t, s).map_err(|e| invalid(format!("operator `{s}`: {e}")))
}

pub fn operators(t: &Theory, s: &[String]) -> Result<Vec<CompositeOperator>, CliError> {
    s.iter().map(|x| operator(t, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::parse("schema_version = 1\n").unwrap();
        assert_eq!(c.mu, 1.0);
        assert_eq!(c.d_max().unwrap(), Dim::from_integer(4));
        assert_eq!(c.format, Format::Json);
        assert_eq!(c.trees.samples, 10_000);
        assert_eq!(c.theory().unwrap().name, "scalar");
    }

    #[test]
    fn schema_version_enforced() {
        assert_eq!(RunConfig::parse("schema_version = 2\n").unwrap_err().code, "SCHEMA_VERSION");
        assert_eq!(RunConfig::parse("mu = 1.0\n").unwrap_err().code, "CONFIG_INVALID");
        assert_eq!(RunConfig::parse("schema_version = 1\nbogus = 3\n").unwrap_err().code, "CONFIG_INVALID");
    }

    #[test]
    fn presets_and_overrides() {
        let mut c = RunConfig::parse("schema_version = 1\nd_max = \"3\"\n[theory]\npreset = \"qed_free\"\n").unwrap();
        assert_eq!(c.theory().unwrap().name, Theory::qed_free().name);
        c.override_with(Some(1e-4), Some(9), Some("5/2"), Some(Format::Csv)).unwrap();
        assert_eq!(c.d_max, "5/2");
        assert_eq!(c.seed, 9);
        assert_eq!(c.format, Format::Csv);
        assert!(c.override_with(Some(-1.0), None, None, None).is_err());
    }
}
