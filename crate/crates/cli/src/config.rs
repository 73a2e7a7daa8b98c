//! Run configuration: one TOML file with a section per command.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sobolab::mollifier::MollifyDomain;
use sobolab::pde::MeshDomain;
use sobolab::probe::TrialKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ApCheck,
    Exponents,
    Distortion,
    Mollify,
    Solve,
    Probe,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ApCheck => "ap-check",
            Command::Exponents => "exponents",
            Command::Distortion => "distortion",
            Command::Mollify => "mollify",
            Command::Solve => "solve",
            Command::Probe => "probe",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// When present, must name the subcommand being run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, rename = "output_dir", skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_check: Option<ApCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollify: Option<MollifyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeParams>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Either `alpha` for `|x|^α` or a radial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApCheckParams {
    pub n: usize,
    pub p: f64,
    pub weight: WeightSpec,
    #[serde(default = "default_radius_min")]
    pub radius_min: f64,
    #[serde(default = "one")]
    pub radius_max: f64,
    #[serde(default = "default_radius_count")]
    pub radius_count: usize,
    #[serde(default = "default_random_centers")]
    pub random_centers: usize,
}

fn default_radius_min() -> f64 {
    1e-3
}
fn default_radius_count() -> usize {
    7
}
fn default_random_centers() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsParams {
    pub n: u32,
    pub p: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default = "default_order")]
    pub m: u32,
    /// Target exponents to certify with a witness triple.
    #[serde(default)]
    pub s: Vec<f64>,
}

fn default_order() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionParams {
    /// Profile exponents `γ_i`; the dimension is one more than their count.
    pub exponents: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    pub a: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub q_sweep: Vec<f64>,
    #[serde(default)]
    pub s_sweep: Vec<f64>,
    /// Also estimate the quasiisometry constant of the map.
    #[serde(default)]
    pub quasiisometry: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzProfile {
    /// `x_1`.
    Linear,
    /// `|x_1 - 1/2|`.
    Kink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifyParams {
    pub r: f64,
    pub delta: f64,
    pub p: f64,
    pub weight: WeightSpec,
    #[serde(default = "default_mollify_domain")]
    pub domain: MollifyDomain,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_per_axis")]
    pub per_axis: usize,
    /// Points where the commutation is tested.
    #[serde(default = "default_samples")]
    pub samples: Vec<Vec<f64>>,
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default = "default_profile")]
    pub function: LipschitzProfile,
}

fn default_mollify_domain() -> MollifyDomain {
    MollifyDomain::lipschitz_cusp()
}
fn default_step() -> f64 {
    1e-4
}
fn default_per_axis() -> usize {
    16
}
fn default_samples() -> Vec<Vec<f64>> {
    vec![vec![0.3, 0.7], vec![0.45, 0.75], vec![0.2, 0.8]]
}
fn default_profile() -> LipschitzProfile {
    LipschitzProfile::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Load {
    Constant { value: f64 },
    /// `div(w ∇u)` for `u = sin(πx) sin(πy)` and a power weight.
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    #[serde(default = "default_mesh_domain")]
    pub domain: MeshDomain,
    /// Mesh sizes, coarsest first; several sizes give a convergence table.
    pub h: Vec<f64>,
    #[serde(default = "one")]
    pub grading: f64,
    pub alpha: f64,
    pub load: Load,
    #[serde(default = "default_solver_tol")]
    pub tol: f64,
}

fn default_mesh_domain() -> MeshDomain {
    MeshDomain::unit_square()
}
fn default_solver_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    pub n: u32,
    pub p: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub s: Vec<f64>,
    #[serde(default = "default_kind")]
    pub family: TrialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
}

fn default_kind() -> TrialKind {
    TrialKind::TipBump
}
