//! On-disk scenario files: a builder invocation or an explicit scenario,
//! plus the run settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wigner::analysis::{measurement_variables, Variable};
use wigner::protocol::{
    build_basic_wfs, build_bipartite, build_paper_scenario, build_signaling, validate, MeasurementOrder, Scenario,
};
use wigner::qstate::QubitBasis;
use wigner::runner::{EmissionSemantics, UpdatePolicy};
use wigner::spacetime::FrameVelocity;
use wigner::Complex64;

use crate::Invalid;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub scenario: ScenarioSource,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSource {
    Paper {
        n_qubits: usize,
    },
    BasicWfs {
        alpha: Complex64,
        beta: Complex64,
    },
    Bipartite {
        alpha: Complex64,
        beta: Complex64,
        gamma: Complex64,
        u_theta: f64,
        v_theta: f64,
        order: MeasurementOrder,
    },
    Signaling {
        theta: f64,
        n_qubits: usize,
    },
    Explicit(Box<Scenario>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Enumerate,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_policy")]
    pub policy: UpdatePolicy,
    #[serde(default = "default_semantics")]
    pub semantics: EmissionSemantics,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default)]
    pub seed: u64,
    /// Joint-distribution variables; every projective measurement when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<Variable>>,
}

fn default_betas() -> Vec<f64> {
    vec![0.0]
}

fn default_policy() -> UpdatePolicy {
    UpdatePolicy::UnitaryLab
}

fn default_semantics() -> EmissionSemantics {
    EmissionSemantics::RecordAdaptive
}

fn default_n() -> u64 {
    100_000
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            betas: default_betas(),
            policy: default_policy(),
            semantics: default_semantics(),
            mode: Mode::default(),
            n: default_n(),
            seed: 0,
            variables: None,
        }
    }
}

impl ScenarioSource {
    pub fn build(&self) -> Result<Scenario, Invalid> {
        let built = match self {
            ScenarioSource::Paper { n_qubits } => build_paper_scenario(*n_qubits),
            ScenarioSource::BasicWfs { alpha, beta } => build_basic_wfs(*alpha, *beta),
            ScenarioSource::Bipartite {
                alpha,
                beta,
                gamma,
                u_theta,
                v_theta,
                order,
            } => build_bipartite(
                *alpha,
                *beta,
                *gamma,
                QubitBasis::new(*u_theta),
                QubitBasis::new(*v_theta),
                *order,
            ),
            ScenarioSource::Signaling { theta, n_qubits } => build_signaling(*theta, *n_qubits),
            ScenarioSource::Explicit(s) => Ok((**s).clone()),
        };
        built.map_err(|e| Invalid(format!("scenario: {e}")))
    }
}

/// A parsed file whose scenario passed validation.
pub struct Loaded {
    pub file: ScenarioFile,
    pub scenario: Scenario,
}

impl Loaded {
    pub fn variables(&self) -> Vec<Variable> {
        self.file
            .run
            .variables
            .clone()
            .unwrap_or_else(|| measurement_variables(&self.scenario))
    }
}

pub fn parse(text: &str) -> Result<ScenarioFile, Invalid> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Invalid(format!("malformed scenario file: {e}")))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Invalid(format!(
            "schema_version: expected {SCHEMA_VERSION}, got {}",
            file.schema_version
        )));
    }
    Ok(file)
}

pub fn check_betas(betas: &[f64]) -> Result<(), Invalid> {
    for &b in betas {
        FrameVelocity::new(b).map_err(|e| Invalid(format!("beta: {e}")))?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Loaded, Invalid> {
    let text = std::fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?;
    let file = parse(&text)?;
    let scenario = file.scenario.build()?;
    if let Err(violations) = validate(&scenario) {
        let list: Vec<String> = violations.iter().map(|v| format!("{:?}: {}", v.kind, v.message)).collect();
        return Err(Invalid(format!("scenario `{}` is invalid: {}", scenario.id, list.join("; "))));
    }
    check_betas(&file.run.betas)?;
    if let Some(vars) = &file.run.variables {
        if let Some(v) = vars.iter().find(|v| !v.event_id.starts_with('@') && scenario.event(&v.event_id).is_none()) {
            return Err(Invalid(format!("run.variables: unknown event `{}`", v.event_id)));
        }
    }
    Ok(Loaded { file, scenario })
}
