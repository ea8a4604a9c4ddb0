//! Outcome statistics from run reports: joint distributions, cross-frame
//! distances, agreement probabilities and recovery of A's angle from the
//! friend's record.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ids, OperationSpec, Scenario};
use crate::qstate::PLUS_LABEL;
use crate::runner::{
    extract_record_angle, run, theta_from_record, EmissionSemantics, Execution, RunError, RunReport, UpdatePolicy,
};

/// Frames whose joint distributions differ by at most this TVD agree.
pub const CONSISTENCY_TOL: f64 = 1e-9;
const ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("variable ({event_id}, {actor}) is missing from a branch")]
    MissingVariable { event_id: String, actor: String },
    #[error("need at least two x-basis measurements by `{actor}`, found {found}")]
    TooFewXMeasurements { actor: String, found: usize },
    #[error("scenario has no {0}")]
    MissingEvent(&'static str),
    #[error("no definite record: {0}")]
    NoDefiniteRecord(String),
}

/// An outcome variable: the label recorded by `actor` at `event_id`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String)", into = "(String, String)")]
pub struct Variable {
    pub event_id: String,
    pub actor: String,
}

impl Variable {
    pub fn new(event_id: &str, actor: &str) -> Self {
        Variable {
            event_id: event_id.into(),
            actor: actor.into(),
        }
    }
}

impl From<(String, String)> for Variable {
    fn from((event_id, actor): (String, String)) -> Self {
        Variable { event_id, actor }
    }
}

impl From<Variable> for (String, String) {
    fn from(v: Variable) -> Self {
        (v.event_id, v.actor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointEntry {
    pub outcome: Vec<String>,
    pub probability: f64,
}

/// Probability table over outcome tuples, sorted by tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub variables: Vec<Variable>,
    pub entries: Vec<JointEntry>,
}

impl JointDistribution {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    fn as_map(&self) -> BTreeMap<&[String], f64> {
        self.entries.iter().map(|e| (e.outcome.as_slice(), e.probability)).collect()
    }

    pub fn probability_where(&self, pred: impl Fn(&[String]) -> bool) -> f64 {
        self.entries.iter().filter(|e| pred(&e.outcome)).map(|e| e.probability).sum()
    }

    /// `P(variables[i] = variables[j])`.
    pub fn probability_equal(&self, i: usize, j: usize) -> f64 {
        self.probability_where(|o| o[i] == o[j])
    }

    pub fn probability_of(&self, i: usize, label: &str) -> f64 {
        self.probability_where(|o| o[i] == label)
    }

    pub fn marginal(&self, i: usize) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry(e.outcome[i].clone()).or_insert(0.0) += e.probability;
        }
        m
    }

    pub fn index_of(&self, v: &Variable) -> Option<usize> {
        self.variables.iter().position(|x| x == v)
    }
}

pub fn joint_distribution(report: &RunReport, variables: &[Variable]) -> Result<JointDistribution, AnalysisError> {
    let mut table: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for branch in &report.branches {
        let outcome = variables
            .iter()
            .map(|v| {
                branch
                    .outcome(&v.event_id, &v.actor)
                    .map(str::to_string)
                    .ok_or_else(|| AnalysisError::MissingVariable {
                        event_id: v.event_id.clone(),
                        actor: v.actor.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        *table.entry(outcome).or_insert(0.0) += branch.weight;
    }
    Ok(JointDistribution {
        variables: variables.to_vec(),
        entries: table
            .into_iter()
            .map(|(outcome, probability)| JointEntry { outcome, probability })
            .collect(),
    })
}

/// Half the L1 distance between two tables over the same variables.
pub fn total_variation(a: &JointDistribution, b: &JointDistribution) -> f64 {
    let (ma, mb) = (a.as_map(), b.as_map());
    let mut sum = 0.0;
    for (k, p) in &ma {
        sum += (p - mb.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, q) in &mb {
        if !ma.contains_key(k) {
            sum += q.abs();
        }
    }
    (sum / 2.0).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub variable: Variable,
    pub distribution: BTreeMap<String, f64>,
}

fn marginals(joint: &JointDistribution) -> Vec<Marginal> {
    joint
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| Marginal {
            variable: v.clone(),
            distribution: joint.marginal(i),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameComparison {
    pub scenario_id: String,
    pub beta1: f64,
    pub beta2: f64,
    pub policy: UpdatePolicy,
    pub semantics: EmissionSemantics,
    pub variables: Vec<Variable>,
    pub joint1: JointDistribution,
    pub joint2: JointDistribution,
    pub tvd: f64,
    pub marginals1: Vec<Marginal>,
    pub marginals2: Vec<Marginal>,
    pub consistent: bool,
}

pub fn compare_frames(
    s: &Scenario,
    beta1: f64,
    beta2: f64,
    policy: UpdatePolicy,
    semantics: EmissionSemantics,
    variables: &[Variable],
) -> Result<FrameComparison, AnalysisError> {
    let r1 = run(s, beta1, policy, semantics)?;
    let r2 = run(s, beta2, policy, semantics)?;
    let joint1 = joint_distribution(&r1, variables)?;
    let joint2 = joint_distribution(&r2, variables)?;
    let tvd = total_variation(&joint1, &joint2);
    Ok(FrameComparison {
        scenario_id: s.id.clone(),
        beta1,
        beta2,
        policy,
        semantics,
        variables: variables.to_vec(),
        marginals1: marginals(&joint1),
        marginals2: marginals(&joint2),
        joint1,
        joint2,
        tvd,
        consistent: tvd <= CONSISTENCY_TOL,
    })
}

/// Probability that the first two x-basis measurements by `actor` agree.
pub fn x_agreement(report: &RunReport, actor: &str) -> Result<f64, AnalysisError> {
    let xs: Vec<_> = report
        .measurements
        .iter()
        .filter(|m| m.actor == actor && m.basis_theta.is_some_and(|t| (t - FRAC_PI_2).abs() <= ANGLE_TOL))
        .collect();
    if xs.len() < 2 {
        return Err(AnalysisError::TooFewXMeasurements {
            actor: actor.into(),
            found: xs.len(),
        });
    }
    let vars = [Variable::new(&xs[0].event_id, actor), Variable::new(&xs[1].event_id, actor)];
    Ok(joint_distribution(report, &vars)?.probability_equal(0, 1))
}

/// One variable per projective measurement, in declaration order.
pub fn measurement_variables(s: &Scenario) -> Vec<Variable> {
    s.events
        .iter()
        .filter_map(|e| match &e.op {
            OperationSpec::ProjectiveMeasure { actor, .. } => Some(Variable::new(&e.event.id, actor)),
            _ => None,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredBranch {
    pub a_outcome: String,
    pub weight: f64,
    pub record: String,
    pub theta_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecovery {
    pub scenario_id: String,
    pub beta: f64,
    pub theta: f64,
    pub branches: Vec<RecoveredBranch>,
    /// `|⟨L_a|L_b⟩|` between the conditional lab states of the two A
    /// outcomes, just before the emission.
    pub orthogonality_residual: f64,
}

/// Reads A's angle off the friend's environment, per A-outcome branch,
/// immediately before the emission event in the frame moving at `beta`.
pub fn recover_theta(s: &Scenario, beta: f64) -> Result<ThetaRecovery, AnalysisError> {
    let (a_event, theta) = s
        .events
        .iter()
        .find_map(|e| match &e.op {
            OperationSpec::ProjectiveMeasure { actor, basis, .. } if actor == "A" => {
                basis.qubit_angle().map(|t| (e.event.id.clone(), t))
            }
            _ => None,
        })
        .ok_or(AnalysisError::MissingEvent("qubit-basis measurement by A"))?;
    let emit = s
        .events
        .iter()
        .find(|e| matches!(e.op, OperationSpec::EmitQubits { .. }))
        .map(|e| e.event.id.clone())
        .ok_or(AnalysisError::MissingEvent("emission"))?;
    let lab: Vec<String> = s
        .events
        .iter()
        .find_map(|e| match &e.op {
            OperationSpec::FriendMeasure {
                spin,
                apparatus,
                environment,
                ..
            } => Some(vec![spin.clone(), apparatus.clone(), environment.clone()]),
            _ => None,
        })
        .ok_or(AnalysisError::MissingEvent("friend measurement"))?;
    let env = &lab[2];

    let mut ex = Execution::new(s, beta, UpdatePolicy::UnitaryLab, EmissionSemantics::RecordAdaptive)?;
    ex.run_until(&emit)?;
    if !ex.processed().contains(&a_event) {
        return Err(AnalysisError::NoDefiniteRecord(format!(
            "`{a_event}` is not processed before `{emit}` in this frame; the friend acts on her own record basis"
        )));
    }

    let mut branches = Vec::new();
    let mut lab_states = Vec::new();
    for b in ex.branches() {
        let a_outcome = b
            .outcome(&a_event, "A")
            .ok_or_else(|| AnalysisError::MissingVariable {
                event_id: a_event.clone(),
                actor: "A".into(),
            })?
            .to_string();
        let rho_env = b.state.reduced_density(&[env]).map_err(|source| RunError::Engine {
            event: emit.clone(),
            source,
        })?;
        let record = extract_record_angle(&rho_env).ok_or_else(|| {
            AnalysisError::NoDefiniteRecord(format!("environment is not in a pure record state in branch A = {a_outcome}"))
        })?;
        branches.push(RecoveredBranch {
            theta_hat: theta_from_record(record, a_outcome == PLUS_LABEL),
            record: record.label(),
            weight: b.weight,
            a_outcome,
        });
        let lab_state = b
            .state
            .pure_factor(&lab)
            .map_err(|source| RunError::Engine {
                event: emit.clone(),
                source,
            })?
            .ok_or_else(|| AnalysisError::NoDefiniteRecord("lab is entangled with the outside".into()))?;
        lab_states.push(lab_state);
    }

    let mut residual = 0.0f64;
    for i in 0..lab_states.len() {
        for j in i + 1..lab_states.len() {
            residual = residual.max(lab_states[i].dotc(&lab_states[j]).norm());
        }
    }
    Ok(ThetaRecovery {
        scenario_id: s.id.clone(),
        beta,
        theta,
        branches,
        orthogonality_residual: residual,
    })
}

/// Variables of the full lab protocol: A, W_z, W_x and W_x2 when present.
pub fn paper_variables(s: &Scenario) -> Vec<Variable> {
    let mut vars = vec![
        Variable::new(ids::A_MEAS, "A"),
        Variable::new(ids::W_Z, "W"),
        Variable::new(ids::W_X, "W"),
    ];
    if s.event(ids::W_X2).is_some() {
        vars.push(Variable::new(ids::W_X2, "W"));
    }
    vars
}
