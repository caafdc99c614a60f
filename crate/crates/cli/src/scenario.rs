//! Scenario configuration: a single TOML file naming the map, the
//! experiment, its parameter table and the seed. Unknown keys are rejected
//! and the canonicalized text is hashed for replay checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario field invalid: {0}")]
    Invalid(String),
}

/// Complex number encoded as `[re, im]`.
pub type Pair = [f64; 2];

pub fn cpx(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// Map description mirroring the catalog families.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    Polynomial { coeffs: Vec<Pair> },
    Quadratic { c: Pair },
    Power { d: usize },
    Blaschke { zeros: Vec<Pair>, rotation: Pair },
    ExpFamily { lambda: Pair },
    SineFamily { lambda: Pair },
    FatouBaker,
}

impl MapConfig {
    pub fn build(&self) -> Result<fatou_core::MapSpec, SchemaError> {
        use fatou_core::MapSpec;
        let spec = match self {
            MapConfig::Polynomial { coeffs } => {
                MapSpec::polynomial(coeffs.iter().map(|&p| cpx(p)).collect())
                    .map_err(|e| SchemaError::Invalid(e.to_string()))?
            }
            MapConfig::Quadratic { c } => MapSpec::quadratic(cpx(*c)),
            MapConfig::Power { d } => MapSpec::power(*d),
            MapConfig::Blaschke { zeros, rotation } => {
                MapSpec::blaschke(zeros.iter().map(|&p| cpx(p)).collect(), cpx(*rotation))
                    .map_err(|e| SchemaError::Invalid(e.to_string()))?
            }
            MapConfig::ExpFamily { lambda } => MapSpec::ExpFamily { lambda: cpx(*lambda) },
            MapConfig::SineFamily { lambda } => MapSpec::SineFamily { lambda: cpx(*lambda) },
            MapConfig::FatouBaker => MapSpec::FatouBaker,
        };
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lyapunov,
    Hmeasure,
    Backward,
    Tower,
    Periodic,
    ReturnMap,
    RhoCheck,
    Inner,
}

impl ExperimentKind {
    pub const ALL: [(ExperimentKind, &'static str); 8] = [
        (ExperimentKind::Lyapunov, "lyapunov: exponent by circle quadrature or Birkhoff averages"),
        (ExperimentKind::Hmeasure, "hmeasure: harmonic-measure estimates, decay fits, bound checks"),
        (ExperimentKind::Backward, "backward: natural-extension backward orbit sampling"),
        (ExperimentKind::Tower, "tower: certified inverse-branch towers"),
        (ExperimentKind::Periodic, "periodic: repelling periodic points over a disk cover"),
        (ExperimentKind::ReturnMap, "return_map: first-return times, Kac and exponent identities"),
        (ExperimentKind::RhoCheck, "rho_check: punctured-metric inclusions and thin-value families"),
        (ExperimentKind::Inner, "inner: Denjoy-Wolff, Cowen type, invariance, Stolz, recurrence"),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Hmeasure => "hmeasure",
            ExperimentKind::Backward => "backward",
            ExperimentKind::Tower => "tower",
            ExperimentKind::Periodic => "periodic",
            ExperimentKind::ReturnMap => "return_map",
            ExperimentKind::RhoCheck => "rho_check",
            ExperimentKind::Inner => "inner",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParams {
    /// quadrature | birkhoff_forward | birkhoff_backward
    pub method: String,
    #[serde(default = "default_n_quad")]
    pub n: usize,
    pub x0: Option<Pair>,
    /// Independent chains averaged in the backward method.
    #[serde(default = "one")]
    pub chains: usize,
    pub expected: Option<f64>,
    pub tol: Option<f64>,
}

fn default_n_quad() -> usize {
    4096
}
fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// unit_disk | slit_plane | sector | sampled_jordan | poly_basin
    pub kind: String,
    pub alpha: Option<f64>,
    pub basepoint: Option<Pair>,
    pub boundary: Option<Vec<Pair>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub center: Pair,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub expected_slope: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmeasureParams {
    pub domain: DomainConfig,
    pub targets: Vec<TargetConfig>,
    #[serde(default = "default_walks")]
    pub n: usize,
    /// riemann | wos
    pub backend: String,
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub beurling: bool,
}

fn default_walks() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackwardParams {
    pub x0: Option<Pair>,
    pub depth: usize,
    /// plane_equal_weight | circle_transfer | first_return
    pub mode: String,
    pub arc_center: Option<f64>,
    pub arc_length: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerParams {
    pub depth: usize,
    #[serde(default = "one")]
    pub count: usize,
    pub eta: Option<f64>,
    pub m: Option<f64>,
    /// Reference exponent for the contraction verdict.
    pub chi_ref: Option<f64>,
    /// Samples per level for the double-double identity check (0 skips).
    #[serde(default)]
    pub identity_samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicParams {
    pub disks: Option<Vec<TargetConfig>>,
    pub cover_count: Option<usize>,
    pub cover_radius: Option<f64>,
    #[serde(default = "default_chains")]
    pub budget_chains: usize,
    #[serde(default = "default_depth")]
    pub budget_depth: usize,
    pub min_hits: Option<usize>,
}

fn default_chains() -> usize {
    48
}
fn default_depth() -> usize {
    96
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReturnMapParams {
    pub arc_center: f64,
    pub arc_length: f64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    /// kac | identity | both
    #[serde(default = "default_both")]
    pub check: String,
    #[serde(default = "default_gap_tol")]
    pub identity_tol: f64,
}

fn default_trials() -> usize {
    10_000
}
fn default_both() -> String {
    "both".into()
}
fn default_gap_tol() -> f64 {
    0.02
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoCheckParams {
    #[serde(default = "default_configs")]
    pub configs: usize,
    #[serde(default = "default_samples")]
    pub samples_per_config: usize,
    /// Also classify the synthetic thin/violating singular families.
    #[serde(default)]
    pub thin_families: bool,
}

fn default_configs() -> usize {
    1000
}
fn default_samples() -> usize {
    256
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerParams {
    /// denjoy_wolff | cowen | invariance | stolz | recurrence
    pub check: String,
    /// lebesgue | lambda_r (invariance)
    pub measure: Option<String>,
    pub k_max: Option<usize>,
    pub n_quad: Option<usize>,
    pub threshold: Option<f64>,
    pub xi: Option<Pair>,
    pub rho: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub arc_center: Option<f64>,
    pub arc_length: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    Lyapunov(LyapunovParams),
    Hmeasure(HmeasureParams),
    Backward(BackwardParams),
    Tower(TowerParams),
    Periodic(PeriodicParams),
    ReturnMap(ReturnMapParams),
    RhoCheck(RhoCheckParams),
    Inner(InnerParams),
}

/// Raw scenario file layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub experiment: ExperimentKind,
    #[serde(default = "default_outdir")]
    pub output_dir: String,
    pub map: MapConfig,
    pub params: toml::Table,
}

fn default_outdir() -> String {
    "out".into()
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, SchemaError> {
        let scenario: Scenario = toml::from_str(text)?;
        // Validate the params against the experiment-specific schema now.
        scenario.typed_params()?;
        scenario.map.build()?;
        Ok(scenario)
    }

    /// Parse the free-form params table against the experiment schema.
    pub fn typed_params(&self) -> Result<Params, SchemaError> {
        let raw = self.params.clone();
        let parse_err = |e: toml::de::Error| SchemaError::Invalid(format!("params: {e}"));
        Ok(match self.experiment {
            ExperimentKind::Lyapunov => Params::Lyapunov(raw.try_into().map_err(parse_err)?),
            ExperimentKind::Hmeasure => Params::Hmeasure(raw.try_into().map_err(parse_err)?),
            ExperimentKind::Backward => Params::Backward(raw.try_into().map_err(parse_err)?),
            ExperimentKind::Tower => Params::Tower(raw.try_into().map_err(parse_err)?),
            ExperimentKind::Periodic => Params::Periodic(raw.try_into().map_err(parse_err)?),
            ExperimentKind::ReturnMap => Params::ReturnMap(raw.try_into().map_err(parse_err)?),
            ExperimentKind::RhoCheck => Params::RhoCheck(raw.try_into().map_err(parse_err)?),
            ExperimentKind::Inner => Params::Inner(raw.try_into().map_err(parse_err)?),
        })
    }

    /// Digest of the canonicalized scenario: the parsed structure is
    /// re-serialized (fixed field order) and hashed.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("scenario serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }
}
