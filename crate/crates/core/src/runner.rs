//! Executes a scenario in the time order of one inertial frame, keeping a
//! weighted set of pure-state branches.
//!
//! Remote measurements collapse every branch instantaneously in the order
//! of the executing frame. The friend's own measurement is either a bare
//! entangling unitary ([`UpdatePolicy::UnitaryLab`]) or is followed by a
//! collapse of the environment in her record basis
//! ([`UpdatePolicy::ProjectiveAll`]).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{
    self, record_index, OperationSpec, Scenario, Violation, READY, RECORD_EVENT_ID,
};
use crate::qstate::{
    basis_vector, complete_isometry, kron_vectors, unitary_mapping, CMatrix, CVector, DensityMatrix, LabeledVector,
    QState, QStateError, QubitBasis, RemainderPolicy, MINUS_LABEL, PLUS_LABEL, PRUNE_TOL,
};
use crate::spacetime::{order_events, EventOrder, FrameVelocity, SpacetimeError};

/// Allowed drift of the total branch weight after any event.
pub const WEIGHT_TOL: f64 = 1e-9;
/// Purity and support tolerance for a definite environment record.
pub const RECORD_TOL: f64 = 1e-9;

/// Actor name attached to the friend's own outcomes.
pub const FRIEND: &str = "F";
/// Emission label when the friend applies the fixed controlled operation.
pub const FIXED_EMISSION: &str = "fixed";
/// Emission label when no definite record exists and the friend falls back
/// to the fixed controlled operation.
pub const FALLBACK_EMISSION: &str = "no-record";
/// Final-record label when the environment holds no definite record.
pub const NO_RECORD: &str = "none";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdatePolicy {
    /// The friend's measurement is the entangling unitary only.
    UnitaryLab,
    /// The friend's measurement also collapses the environment onto
    /// `{ε₊, ε₋}`.
    ProjectiveAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionSemantics {
    /// Each emitted qubit is flipped, controlled on the environment being
    /// `ε₋`.
    FixedUnitary,
    /// Per branch: if the environment holds a definite record in the
    /// `(ε₊, ε₋)` plane, emit qubits in the matching qubit state; otherwise
    /// behave as [`EmissionSemantics::FixedUnitary`].
    RecordAdaptive,
}

impl fmt::Display for UpdatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdatePolicy::UnitaryLab => "unitary-lab",
            UpdatePolicy::ProjectiveAll => "projective-all",
        })
    }
}

impl fmt::Display for EmissionSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmissionSemantics::FixedUnitary => "fixed-unitary",
            EmissionSemantics::RecordAdaptive => "record-adaptive",
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario is invalid: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Frame(#[from] SpacetimeError),
    #[error("event `{event}`: {source}")]
    Engine {
        event: String,
        #[source]
        source: QStateError,
    },
    #[error("branch weights sum to {0} after event `{1}`")]
    WeightDrift(f64, String),
    #[error("sample size must be at least 1")]
    EmptySample,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub event_id: String,
    pub actor: String,
    pub label: String,
}

impl OutcomeRecord {
    fn new(event_id: &str, actor: &str, label: &str) -> Self {
        OutcomeRecord {
            event_id: event_id.into(),
            actor: actor.into(),
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub state: QState,
    pub weight: f64,
    pub outcomes: Vec<OutcomeRecord>,
    /// Boosted time of the last processed event.
    pub frame_time: f64,
}

impl Branch {
    pub fn outcome(&self, event_id: &str, actor: &str) -> Option<&str> {
        self.outcomes
            .iter()
            .find(|o| o.event_id == event_id && o.actor == actor)
            .map(|o| o.label.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub weight: f64,
    pub outcomes: Vec<OutcomeRecord>,
}

impl BranchSummary {
    pub fn outcome(&self, event_id: &str, actor: &str) -> Option<&str> {
        self.outcomes
            .iter()
            .find(|o| o.event_id == event_id && o.actor == actor)
            .map(|o| o.label.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementInfo {
    pub event_id: String,
    pub actor: String,
    /// Polar angle when the measurement is in a qubit basis.
    pub basis_theta: Option<f64>,
}

/// Which event of a declared spacelike pair the executing frame processes
/// first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOrder {
    pub pair: (String, String),
    pub first: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub beta: f64,
    pub policy: UpdatePolicy,
    pub semantics: EmissionSemantics,
    pub event_order: Vec<String>,
    pub simultaneous: Vec<(String, String)>,
    pub spacelike_order: Vec<PairOrder>,
    pub measurements: Vec<MeasurementInfo>,
    pub branches: Vec<BranchSummary>,
}

impl RunReport {
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }
}

/// A definite record direction in the `(ε₊, ε₋)` plane: the environment is
/// `cos(θ/2)|ε₊⟩ ± sin(θ/2)|ε₋⟩` up to a global phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecordAngle {
    pub theta: f64,
    pub positive: bool,
}

impl RecordAngle {
    /// Qubit state the friend emits for this record.
    pub fn qubit_state(&self) -> CVector {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let sign = if self.positive { 1.0 } else { -1.0 };
        CVector::from_vec(vec![C64::new(c, 0.0), C64::new(sign * s, 0.0)])
    }

    pub fn label(&self) -> String {
        protocol::record_label(self.theta, self.positive)
    }
}

/// Reads a definite record off the environment's reduced state.
///
/// Accepts the 3×3 environment matrix (ready, `ε₊`, `ε₋`) or its 2×2 block
/// on `(ε₊, ε₋)`. Returns `None` unless the ready population is at most
/// `1e-9`, the block has purity at least `1 − 1e-9`, and the relative phase
/// between the two record amplitudes is real within `1e-9`.
pub fn extract_record_angle(rho_env: &DensityMatrix) -> Option<RecordAngle> {
    let block = match rho_env.dimension() {
        3 => {
            if rho_env.entries()[(READY, READY)].re > RECORD_TOL {
                return None;
            }
            rho_env.restricted(&[record_index(0), record_index(1)])
        }
        2 => rho_env.entries().clone(),
        _ => return None,
    };
    let purity: f64 = block.iter().map(|z| z.norm_sqr()).sum();
    if purity < 1.0 - RECORD_TOL {
        return None;
    }
    let p_plus = block[(0, 0)].re.max(0.0);
    let p_minus = block[(1, 1)].re.max(0.0);
    let theta = 2.0 * p_minus.sqrt().atan2(p_plus.sqrt());
    // block[(1,0)] = a₋ a₊*, so its phase is the relative phase.
    let coherence = block[(1, 0)];
    let positive = if coherence.norm() <= RECORD_TOL {
        true
    } else {
        let phase = coherence / coherence.norm();
        if phase.im.abs() > RECORD_TOL {
            return None;
        }
        phase.re > 0.0
    };
    Some(RecordAngle { theta, positive })
}

/// One compiled event: the matrices are built once per run.
#[derive(Clone, Debug)]
enum Compiled {
    Unitary {
        targets: Vec<String>,
        matrix: CMatrix,
    },
    Friend {
        targets: Vec<String>,
        matrix: CMatrix,
        environment: String,
    },
    Emit {
        environment: String,
        qubits: Vec<String>,
        semantics: EmissionSemantics,
        controlled_flip: CMatrix,
    },
    Measure {
        actor: String,
        targets: Vec<String>,
        basis: Vec<LabeledVector>,
        remainder: RemainderPolicy,
    },
}

struct Child {
    probability: f64,
    outcomes: Vec<OutcomeRecord>,
    state: QState,
}

fn engine_err(event: &str) -> impl Fn(QStateError) -> RunError + '_ {
    move |source| RunError::Engine {
        event: event.to_string(),
        source,
    }
}

fn ket(dim: usize, index: usize) -> CVector {
    basis_vector(dim, index)
}

/// `|±θ⟩|m0⟩|ε0⟩ → |±θ⟩|m±⟩|ε±⟩`, completed to a unitary on the 18-dim
/// (spin, apparatus, environment) factor.
pub fn friend_measurement_unitary(record_basis: QubitBasis) -> Result<CMatrix, QStateError> {
    let spins = [record_basis.plus(), record_basis.minus()];
    let inputs: Vec<CVector> = spins
        .iter()
        .map(|s| kron_vectors(&[s.clone(), ket(3, READY), ket(3, READY)]))
        .collect();
    let outputs: Vec<CVector> = spins
        .iter()
        .enumerate()
        .map(|(r, s)| kron_vectors(&[s.clone(), ket(3, record_index(r)), ket(3, record_index(r))]))
        .collect();
    unitary_mapping(&inputs, &outputs, 18)
}

/// Environment-controlled reset on (spin, apparatus, environment): for each
/// record `r`, `|r_θ⟩|m_r⟩ → |+⟩|m0⟩`; identity when the environment is
/// ready.
pub fn reset_unitary(record_basis: QubitBasis) -> Result<CMatrix, QStateError> {
    let spins = [record_basis.plus(), record_basis.minus()];
    let mut blocks = vec![CMatrix::identity(6, 6)];
    for (r, s) in spins.iter().enumerate() {
        let input = s.kronecker(&ket(3, record_index(r)));
        let output = ket(2, 0).kronecker(&ket(3, READY));
        blocks.push(unitary_mapping(&[input], &[output], 6)?);
    }
    // Row index (sa, e) = sa * 3 + e; block e acts on sa.
    let mut u = CMatrix::zeros(18, 18);
    for (e, block) in blocks.iter().enumerate() {
        for i in 0..6 {
            for j in 0..6 {
                u[(i * 3 + e, j * 3 + e)] = block[(i, j)];
            }
        }
    }
    Ok(u)
}

/// Controlled flip of one qubit on (environment, qubit), active on `ε₋`.
fn controlled_flip() -> CMatrix {
    let mut u = CMatrix::identity(6, 6);
    let minus = record_index(1);
    let (a, b) = (minus * 2, minus * 2 + 1);
    u[(a, a)] = C64::new(0.0, 0.0);
    u[(b, b)] = C64::new(0.0, 0.0);
    u[(a, b)] = C64::new(1.0, 0.0);
    u[(b, a)] = C64::new(1.0, 0.0);
    u
}

fn preparation(amplitudes: &[C64]) -> Result<CMatrix, QStateError> {
    let v = CVector::from_vec(amplitudes.to_vec());
    complete_isometry(&[v], amplitudes.len())
}

fn record_basis_for(scenario: &Scenario, spin: &str, environment: &str) -> QubitBasis {
    scenario
        .events
        .iter()
        .find_map(|e| match &e.op {
            OperationSpec::FriendMeasure {
                spin: s,
                environment: env,
                record_basis,
                ..
            } if s == spin && env == environment => Some(*record_basis),
            _ => None,
        })
        .unwrap_or_else(QubitBasis::z)
}

/// A scenario compiled for one frame, policy and emission semantics.
struct Engine<'s> {
    scenario: &'s Scenario,
    order: EventOrder,
    /// Scenario event indices in execution order.
    sequence: Vec<usize>,
    compiled: Vec<Compiled>,
    beta: FrameVelocity,
    policy: UpdatePolicy,
    semantics: EmissionSemantics,
    record_env: Option<String>,
}

impl<'s> Engine<'s> {
    fn new(
        scenario: &'s Scenario,
        beta: f64,
        policy: UpdatePolicy,
        semantics: EmissionSemantics,
    ) -> Result<Self, RunError> {
        let beta = FrameVelocity::new(beta)?;
        protocol::validate(scenario).map_err(RunError::Invalid)?;
        let order = order_events(&scenario.spacetime_events(), beta);
        let sequence = order
            .ids
            .iter()
            .map(|id| scenario.events.iter().position(|e| &e.event.id == id).expect("ordered ids come from the scenario"))
            .collect();
        let compiled = scenario
            .events
            .iter()
            .map(|ev| Self::compile(scenario, &ev.op, semantics).map_err(engine_err(&ev.event.id)))
            .collect::<Result<Vec<_>, _>>()?;
        let record_env = scenario.friend_measurement().map(|(_, env, _)| env.to_string());
        Ok(Engine {
            scenario,
            order,
            sequence,
            compiled,
            beta,
            policy,
            semantics,
            record_env,
        })
    }

    fn compile(scenario: &Scenario, op: &OperationSpec, semantics: EmissionSemantics) -> Result<Compiled, QStateError> {
        Ok(match op {
            OperationSpec::PrepareEntangled {
                target_pair,
                amplitudes,
            } => Compiled::Unitary {
                targets: target_pair.to_vec(),
                matrix: preparation(amplitudes)?,
            },
            OperationSpec::PrepareQubit { target, amplitudes } => Compiled::Unitary {
                targets: vec![target.clone()],
                matrix: preparation(amplitudes)?,
            },
            OperationSpec::FriendMeasure {
                spin,
                apparatus,
                environment,
                record_basis,
            } => Compiled::Friend {
                targets: vec![spin.clone(), apparatus.clone(), environment.clone()],
                matrix: friend_measurement_unitary(*record_basis)?,
                environment: environment.clone(),
            },
            OperationSpec::ResetLab {
                spin,
                apparatus,
                environment,
            } => Compiled::Unitary {
                targets: vec![spin.clone(), apparatus.clone(), environment.clone()],
                matrix: reset_unitary(record_basis_for(scenario, spin, environment))?,
            },
            OperationSpec::EmitQubits {
                environment,
                qubit_names,
                semantics_override,
            } => Compiled::Emit {
                environment: environment.clone(),
                qubits: qubit_names.clone(),
                semantics: semantics_override.unwrap_or(semantics),
                controlled_flip: controlled_flip(),
            },
            OperationSpec::ProjectiveMeasure {
                actor,
                targets,
                basis,
                remainder_policy,
            } => Compiled::Measure {
                actor: actor.clone(),
                targets: targets.clone(),
                basis: basis.labeled_vectors(),
                remainder: *remainder_policy,
            },
        })
    }

    fn initial_state(&self) -> Result<QState, RunError> {
        QState::basis_state(Arc::new(self.scenario.register.clone()), &self.scenario.initial_labels)
            .map_err(engine_err("initial state"))
    }

    fn event_id(&self, step: usize) -> &str {
        &self.scenario.events[self.sequence[step]].event.id
    }

    /// Applies the event at position `step` of the execution order to one
    /// branch state.
    fn apply(&self, step: usize, state: &QState) -> Result<Vec<Child>, RunError> {
        let id = self.event_id(step);
        let err = engine_err(id);
        let single = |state: QState, outcomes: Vec<OutcomeRecord>| {
            vec![Child {
                probability: 1.0,
                outcomes,
                state,
            }]
        };
        match &self.compiled[self.sequence[step]] {
            Compiled::Unitary { targets, matrix } => Ok(single(state.apply_unitary(targets, matrix).map_err(err)?, vec![])),
            Compiled::Friend {
                targets,
                matrix,
                environment,
            } => {
                let entangled = state.apply_unitary(targets, matrix).map_err(&err)?;
                match self.policy {
                    UpdatePolicy::UnitaryLab => Ok(single(entangled, vec![])),
                    UpdatePolicy::ProjectiveAll => {
                        let basis = vec![
                            LabeledVector::new(PLUS_LABEL, ket(3, record_index(0))),
                            LabeledVector::new(MINUS_LABEL, ket(3, record_index(1))),
                        ];
                        let outcomes = entangled
                            .measure(&[environment], &basis, RemainderPolicy::Collect)
                            .map_err(&err)?;
                        Ok(outcomes
                            .into_iter()
                            .map(|o| Child {
                                probability: o.probability,
                                outcomes: vec![OutcomeRecord::new(id, FRIEND, &o.label)],
                                state: o.state,
                            })
                            .collect())
                    }
                }
            }
            Compiled::Emit {
                environment,
                qubits,
                semantics,
                controlled_flip,
            } => {
                let record = match semantics {
                    EmissionSemantics::FixedUnitary => None,
                    EmissionSemantics::RecordAdaptive => {
                        let rho = state.reduced_density(&[environment]).map_err(&err)?;
                        extract_record_angle(&rho)
                    }
                };
                let mut out = state.clone();
                let label = match record {
                    Some(angle) => {
                        let prep = complete_isometry(&[angle.qubit_state()], 2).map_err(&err)?;
                        for q in qubits {
                            out = out.apply_unitary(&[q], &prep).map_err(&err)?;
                        }
                        angle.label()
                    }
                    None => {
                        for q in qubits {
                            out = out.apply_unitary(&[environment, q], controlled_flip).map_err(&err)?;
                        }
                        match semantics {
                            EmissionSemantics::FixedUnitary => FIXED_EMISSION.to_string(),
                            EmissionSemantics::RecordAdaptive => FALLBACK_EMISSION.to_string(),
                        }
                    }
                };
                Ok(single(out, vec![OutcomeRecord::new(id, FRIEND, &label)]))
            }
            Compiled::Measure {
                actor,
                targets,
                basis,
                remainder,
            } => {
                let outcomes = state.measure(targets, basis, *remainder).map_err(err)?;
                Ok(outcomes
                    .into_iter()
                    .map(|o| Child {
                        probability: o.probability,
                        outcomes: vec![OutcomeRecord::new(id, actor, &o.label)],
                        state: o.state,
                    })
                    .collect())
            }
        }
    }

    /// The friend's record at the end of the run, if the scenario has a lab.
    fn final_record(&self, state: &QState) -> Result<Option<OutcomeRecord>, RunError> {
        let Some(env) = &self.record_env else {
            return Ok(None);
        };
        let rho = state.reduced_density(&[env]).map_err(engine_err(RECORD_EVENT_ID))?;
        let label = extract_record_angle(&rho).map_or_else(|| NO_RECORD.to_string(), |a| a.label());
        Ok(Some(OutcomeRecord::new(RECORD_EVENT_ID, FRIEND, &label)))
    }

    fn header(&self, branches: Vec<BranchSummary>) -> RunReport {
        let spacelike_order = self
            .scenario
            .spacelike_pairs
            .iter()
            .map(|(a, b)| {
                let first = if self.order.precedes(a, b).unwrap_or(true) { a } else { b };
                PairOrder {
                    pair: (a.clone(), b.clone()),
                    first: first.clone(),
                }
            })
            .collect();
        let measurements = self
            .order
            .ids
            .iter()
            .filter_map(|id| {
                let ev = self.scenario.event(id)?;
                match &ev.op {
                    OperationSpec::ProjectiveMeasure { actor, basis, .. } => Some(MeasurementInfo {
                        event_id: id.clone(),
                        actor: actor.clone(),
                        basis_theta: basis.qubit_angle(),
                    }),
                    _ => None,
                }
            })
            .collect();
        RunReport {
            scenario_id: self.scenario.id.clone(),
            beta: self.beta.beta(),
            policy: self.policy,
            semantics: self.semantics,
            event_order: self.order.ids.clone(),
            simultaneous: self.order.ties.clone(),
            spacelike_order,
            measurements,
            branches,
        }
    }
}

/// Step-by-step execution of a scenario in one frame, for callers that need
/// the intermediate branch states.
pub struct Execution<'s> {
    engine: Engine<'s>,
    cursor: usize,
    branches: Vec<Branch>,
}

impl<'s> Execution<'s> {
    pub fn new(
        scenario: &'s Scenario,
        beta: f64,
        policy: UpdatePolicy,
        semantics: EmissionSemantics,
    ) -> Result<Self, RunError> {
        let engine = Engine::new(scenario, beta, policy, semantics)?;
        let root = Branch {
            state: engine.initial_state()?,
            weight: 1.0,
            outcomes: Vec::new(),
            frame_time: f64::NEG_INFINITY,
        };
        Ok(Execution {
            engine,
            cursor: 0,
            branches: vec![root],
        })
    }

    pub fn order(&self) -> &EventOrder {
        &self.engine.order
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Id of the next event to process.
    pub fn next_event(&self) -> Option<&str> {
        (self.cursor < self.engine.sequence.len()).then(|| self.engine.event_id(self.cursor))
    }

    pub fn processed(&self) -> &[String] {
        &self.engine.order.ids[..self.cursor]
    }

    /// Processes one event. Returns `false` once every event has been
    /// processed.
    pub fn step(&mut self) -> Result<bool, RunError> {
        if self.cursor >= self.engine.sequence.len() {
            return Ok(false);
        }
        let time = self.engine.order.times[self.cursor];
        let mut next = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            for child in self.engine.apply(self.cursor, &branch.state)? {
                let mut outcomes = branch.outcomes.clone();
                outcomes.extend(child.outcomes);
                next.push(Branch {
                    state: child.state,
                    weight: branch.weight * child.probability,
                    outcomes,
                    frame_time: time,
                });
            }
        }
        let total: f64 = next.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(RunError::WeightDrift(total, self.engine.event_id(self.cursor).to_string()));
        }
        next.retain(|b| b.weight >= PRUNE_TOL);
        let kept: f64 = next.iter().map(|b| b.weight).sum();
        for b in &mut next {
            b.weight /= kept;
        }
        self.branches = next;
        self.cursor += 1;
        Ok(true)
    }

    /// Processes events up to, but not including, `event_id`.
    pub fn run_until(&mut self, event_id: &str) -> Result<(), RunError> {
        while self.next_event().is_some_and(|id| id != event_id) {
            self.step()?;
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<(), RunError> {
        while self.step()? {}
        Ok(())
    }

    /// Runs any remaining events and returns the final branches, each with
    /// the friend's final record appended when the scenario has a lab.
    pub fn finish(mut self) -> Result<(RunReport, Vec<Branch>), RunError> {
        self.run_to_end()?;
        for b in &mut self.branches {
            if let Some(rec) = self.engine.final_record(&b.state)? {
                b.outcomes.push(rec);
            }
        }
        let summaries = self
            .branches
            .iter()
            .map(|b| BranchSummary {
                weight: b.weight,
                outcomes: b.outcomes.clone(),
            })
            .collect();
        Ok((self.engine.header(summaries), self.branches))
    }
}

/// Exact branch enumeration of `s` in the frame moving at `beta`.
pub fn run(s: &Scenario, beta: f64, policy: UpdatePolicy, semantics: EmissionSemantics) -> Result<RunReport, RunError> {
    Ok(Execution::new(s, beta, policy, semantics)?.finish()?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub outcomes: Vec<OutcomeRecord>,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub n: u64,
    pub seed: u64,
    /// Header of the run; `branches` carries empirical frequencies.
    pub report: RunReport,
    pub paths: Vec<SampledPath>,
}

struct Node {
    state: QState,
    children: Option<Vec<(f64, Vec<OutcomeRecord>, usize)>>,
    record: Option<Option<OutcomeRecord>>,
}

/// `n` independent trajectories, each outcome drawn with its Born
/// probability from a ChaCha8 stream seeded with `seed`.
///
/// Trajectories that share an outcome prefix share the corresponding
/// state, which is computed once on first visit.
pub fn sample(
    s: &Scenario,
    beta: f64,
    policy: UpdatePolicy,
    semantics: EmissionSemantics,
    n: u64,
    seed: u64,
) -> Result<SampleReport, RunError> {
    if n == 0 {
        return Err(RunError::EmptySample);
    }
    let engine = Engine::new(s, beta, policy, semantics)?;
    let depth = engine.sequence.len();
    let mut nodes = vec![Node {
        state: engine.initial_state()?,
        children: None,
        record: None,
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<Vec<OutcomeRecord>, u64> = BTreeMap::new();

    for _ in 0..n {
        let mut node = 0;
        let mut path = Vec::new();
        for step in 0..depth {
            if nodes[node].children.is_none() {
                let children = engine.apply(step, &nodes[node].state)?;
                let mut links = Vec::with_capacity(children.len());
                for child in children {
                    nodes.push(Node {
                        state: child.state,
                        children: None,
                        record: None,
                    });
                    links.push((child.probability, child.outcomes, nodes.len() - 1));
                }
                nodes[node].children = Some(links);
            }
            let links = nodes[node].children.as_ref().expect("expanded above");
            let total: f64 = links.iter().map(|l| l.0).sum();
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = links.len() - 1;
            for (i, l) in links.iter().enumerate() {
                acc += l.0;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            path.extend(links[pick].1.iter().cloned());
            node = links[pick].2;
        }
        if nodes[node].record.is_none() {
            nodes[node].record = Some(engine.final_record(&nodes[node].state)?);
        }
        if let Some(Some(rec)) = &nodes[node].record {
            path.push(rec.clone());
        }
        *counts.entry(path).or_default() += 1;
    }

    let paths: Vec<SampledPath> = counts
        .into_iter()
        .map(|(outcomes, count)| SampledPath { outcomes, count })
        .collect();
    let branches = paths
        .iter()
        .map(|p| BranchSummary {
            weight: p.count as f64 / n as f64,
            outcomes: p.outcomes.clone(),
        })
        .collect();
    Ok(SampleReport {
        n,
        seed,
        report: engine.header(branches),
        paths,
    })
}

/// Angle recovered from a record produced by A's measurement at angle θ:
/// `+` outcome leaves the record at `θ`, `−` at `π − θ` with negative sign.
pub fn theta_from_record(record: RecordAngle, a_outcome_positive: bool) -> f64 {
    if a_outcome_positive {
        record.theta
    } else {
        PI - record.theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{build_bipartite, build_paper_scenario, ids, MeasurementOrder};
    use crate::qstate::unitarity_defect;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn rho_of(v: &[f64]) -> DensityMatrix {
        let v = CVector::from_vec(v.iter().map(|&x| C64::new(x, 0.0)).collect());
        DensityMatrix::from_pure(&v)
    }

    #[test]
    fn record_angle_of_z_records() {
        let a = extract_record_angle(&rho_of(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(a, RecordAngle { theta: 0.0, positive: true });
        let a = extract_record_angle(&rho_of(&[0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(a.theta, PI, epsilon = 1e-15);
    }

    #[test]
    fn record_angle_of_x_records() {
        let h = FRAC_1_SQRT_2;
        let a = extract_record_angle(&rho_of(&[0.0, h, h])).unwrap();
        assert_abs_diff_eq!(a.theta, FRAC_PI_2, epsilon = 1e-12);
        assert!(a.positive);
        let a = extract_record_angle(&rho_of(&[0.0, h, -h])).unwrap();
        assert!(!a.positive);
        assert_eq!(a.label(), "-x");
    }

    #[test]
    fn no_record_for_mixed_ready_or_complex_phase() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(1, 1)] = C64::new(0.5, 0.0);
        assert_eq!(extract_record_angle(&DensityMatrix::new(m).unwrap()), None);
        assert_eq!(extract_record_angle(&rho_of(&[1.0, 0.0, 0.0])), None);
        let h = FRAC_1_SQRT_2;
        let v = CVector::from_vec(vec![C64::new(h, 0.0), C64::new(0.0, h)]);
        assert_eq!(extract_record_angle(&DensityMatrix::from_pure(&v)), None);
    }

    #[test]
    fn lab_unitaries_are_unitary() {
        for theta in [0.0, 0.4, FRAC_PI_2] {
            let b = QubitBasis::new(theta);
            assert!(unitarity_defect(&friend_measurement_unitary(b).unwrap()) < 1e-10);
            assert!(unitarity_defect(&reset_unitary(b).unwrap()) < 1e-10);
        }
        assert!(unitarity_defect(&controlled_flip()) < 1e-15);
    }

    #[test]
    fn friend_isometry_maps_ready_states_to_records() {
        let u = friend_measurement_unitary(QubitBasis::z()).unwrap();
        for r in 0..2 {
            let input = kron_vectors(&[ket(2, r), ket(3, READY), ket(3, READY)]);
            let expected = protocol::lab_record_state(r);
            assert_abs_diff_eq!((&u * input - expected).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rest_frame_emission_matches_entangled_branches() {
        // Before any W measurement: 1/√2(L̃₊|+⟩_A|++⟩ + L̃₋|−⟩_A|−−⟩).
        let s = build_paper_scenario(2).unwrap();
        let mut ex = Execution::new(&s, 0.0, UpdatePolicy::UnitaryLab, EmissionSemantics::RecordAdaptive).unwrap();
        ex.run_until(ids::A_MEAS).unwrap();
        assert_eq!(ex.branches().len(), 1);
        let state = &ex.branches()[0].state;
        let reg = state.register();
        let h = FRAC_1_SQRT_2;
        let plus = reg.index_of(&["+", "+", "m0", "eps+", "+", "+"]).unwrap();
        let minus = reg.index_of(&["+", "-", "m0", "eps-", "-", "-"]).unwrap();
        for (i, z) in state.amplitudes().iter().enumerate() {
            let expected = if i == plus || i == minus { h } else { 0.0 };
            assert_abs_diff_eq!(z.re, expected, epsilon = 1e-12);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-12);
        }
        ex.step().unwrap();
        let weights: Vec<f64> = ex.branches().iter().map(|b| b.weight).collect();
        assert_eq!(weights.len(), 2);
        for w in weights {
            assert_abs_diff_eq!(w, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn moving_frame_emits_x_qubits() {
        let s = build_paper_scenario(2).unwrap();
        let mut ex = Execution::new(&s, 0.2, UpdatePolicy::UnitaryLab, EmissionSemantics::RecordAdaptive).unwrap();
        ex.run_until(ids::W_Z).unwrap();
        assert_eq!(ex.processed()[1], ids::A_MEAS);
        assert_eq!(ex.branches().len(), 2);
        let h = FRAC_1_SQRT_2;
        for b in ex.branches() {
            let a = b.outcome(ids::A_MEAS, "A").unwrap();
            let sign = if a == "+" { 1.0 } else { -1.0 };
            assert_eq!(b.outcome(ids::EMIT, FRIEND), Some(if a == "+" { "+x" } else { "-x" }));
            let reg = b.state.register();
            let env = b.state.reduced_density(&[ids::ENVIRONMENT]).unwrap();
            let expected = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(sign * h, 0.0)]);
            assert_abs_diff_eq!(env.fidelity_with(&expected), 1.0, epsilon = 1e-12);
            let w1 = b.state.reduced_density(&["W1"]).unwrap();
            let x = if a == "+" { QubitBasis::x().plus() } else { QubitBasis::x().minus() };
            assert_abs_diff_eq!(w1.fidelity_with(&x), 1.0, epsilon = 1e-12);
            assert!(reg.contains("W2"));
        }
    }

    #[test]
    fn bipartite_weights_follow_amplitudes() {
        let (a, b, g) = (C64::new(0.6, 0.0), C64::new(0.0, 0.48), C64::new(0.64, 0.0));
        let s = build_bipartite(a, b, g, QubitBasis::new(0.3), QubitBasis::new(2.0), MeasurementOrder::AFirst).unwrap();
        for beta in [-0.5, 0.0, 0.5] {
            let r = run(&s, beta, UpdatePolicy::UnitaryLab, EmissionSemantics::FixedUnitary).unwrap();
            let mut w: Vec<(String, String, f64)> = r
                .branches
                .iter()
                .map(|br| {
                    (
                        br.outcome(ids::A_MEAS, "A").unwrap().to_string(),
                        br.outcome(ids::B_MEAS, "B").unwrap().to_string(),
                        br.weight,
                    )
                })
                .collect();
            w.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
            assert_eq!(w.len(), 3);
            assert_eq!((w[0].0.as_str(), w[0].1.as_str()), ("+", "-"));
            assert_abs_diff_eq!(w[0].2, 0.36, epsilon = 1e-12);
            assert_eq!((w[1].0.as_str(), w[1].1.as_str()), ("-", "+"));
            assert_abs_diff_eq!(w[1].2, 0.2304, epsilon = 1e-12);
            assert_eq!((w[2].0.as_str(), w[2].1.as_str()), ("-", "-"));
            assert_abs_diff_eq!(w[2].2, 0.4096, epsilon = 1e-12);
        }
    }

    #[test]
    fn superluminal_frame_is_rejected() {
        let s = build_paper_scenario(2).unwrap();
        assert!(matches!(
            run(&s, 1.0, UpdatePolicy::UnitaryLab, EmissionSemantics::FixedUnitary),
            Err(RunError::Frame(_))
        ));
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut s = build_paper_scenario(2).unwrap();
        s.events[3].event.x = 5.0;
        assert!(matches!(
            run(&s, 0.0, UpdatePolicy::UnitaryLab, EmissionSemantics::FixedUnitary),
            Err(RunError::Invalid(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = build_paper_scenario(2).unwrap();
        let a = sample(&s, 0.0, UpdatePolicy::UnitaryLab, EmissionSemantics::RecordAdaptive, 500, 7).unwrap();
        let b = sample(&s, 0.0, UpdatePolicy::UnitaryLab, EmissionSemantics::RecordAdaptive, 500, 7).unwrap();
        assert_eq!(a, b);
        let one = sample(&s, 0.0, UpdatePolicy::UnitaryLab, EmissionSemantics::RecordAdaptive, 1, 3).unwrap();
        assert_eq!(one.paths.len(), 1);
        assert_eq!(one.paths[0].count, 1);
        assert_abs_diff_eq!(one.report.total_weight(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            sample(&s, 0.0, UpdatePolicy::UnitaryLab, EmissionSemantics::RecordAdaptive, 0, 3),
            Err(RunError::EmptySample)
        ));
    }
}
