//! Scenario vocabulary: operations attached to spacetime events, builders for
//! the standard scenarios, and structural validation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{
    kron_vectors, orthonormality_defect, CVector, LabeledVector, QubitBasis, Register, RemainderPolicy,
    SubsystemSpec, NORM_TOL, ORTHO_TOL,
};
use crate::runner::EmissionSemantics;
use crate::spacetime::{classify_interval, IntervalKind, SpacetimeEvent};

/// Tolerance for placing an event on the lab worldline.
pub const WORLDLINE_TOL: f64 = 1e-12;
pub const MAX_EMITTED_QUBITS: usize = 12;

/// Basis labels of the friend's apparatus: ready, `+` record, `−` record.
pub const APPARATUS_LABELS: [&str; 3] = ["m0", "m+", "m-"];
/// Basis labels of the lab environment: ready, `+` record, `−` record.
pub const ENVIRONMENT_LABELS: [&str; 3] = ["eps0", "eps+", "eps-"];
/// Basis labels of every spin/qubit; index 0 is `|+⟩` (the z-up state).
pub const SPIN_LABELS: [&str; 2] = ["+", "-"];

/// Index of the ready state in apparatus and environment.
pub const READY: usize = 0;
/// Index of the record state correlated with outcome `±` (0 → `+`, 1 → `−`).
pub const fn record_index(outcome: usize) -> usize {
    outcome + 1
}

pub mod ids {
    pub const PREP: &str = "prep";
    pub const F_MEAS: &str = "F_meas";
    pub const RESET: &str = "reset";
    pub const EMIT: &str = "emit";
    pub const A_MEAS: &str = "A_meas";
    pub const B_MEAS: &str = "B_meas";
    pub const W_Z: &str = "W_z";
    pub const W_X: &str = "W_x";
    pub const W_X2: &str = "W_x2";
    pub const W_LAB: &str = "W_lab";

    pub const F_SPIN: &str = "F_spin";
    pub const A_SPIN: &str = "A_spin";
    pub const B_SPIN: &str = "B_spin";
    pub const APPARATUS: &str = "m";
    pub const ENVIRONMENT: &str = "eps";
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("parameter `{name}` out of range: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("amplitudes are not normalized (squared norm {0})")]
    NotNormalized(f64),
}

/// A basis vector given explicitly in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitVector {
    pub label: String,
    pub amplitudes: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementBasis {
    Qubit(QubitBasis),
    Explicit(Vec<ExplicitVector>),
}

impl MeasurementBasis {
    pub fn labeled_vectors(&self) -> Vec<LabeledVector> {
        match self {
            MeasurementBasis::Qubit(b) => b.labeled(),
            MeasurementBasis::Explicit(vs) => vs
                .iter()
                .map(|v| LabeledVector::new(v.label.clone(), CVector::from_vec(v.amplitudes.clone())))
                .collect(),
        }
    }

    pub fn qubit_angle(&self) -> Option<f64> {
        match self {
            MeasurementBasis::Qubit(b) => Some(b.theta),
            MeasurementBasis::Explicit(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperationSpec {
    /// Prepares two qubits from `|00⟩` into the given amplitudes
    /// (computational basis, first name most significant).
    PrepareEntangled {
        target_pair: [String; 2],
        amplitudes: Vec<C64>,
    },
    /// Prepares one qubit from `|0⟩`.
    PrepareQubit { target: String, amplitudes: Vec<C64> },
    /// The friend's measurement: `|±θ⟩|m0⟩|ε0⟩ → |±θ⟩|m±⟩|ε±⟩`.
    FriendMeasure {
        spin: String,
        apparatus: String,
        environment: String,
        record_basis: QubitBasis,
    },
    /// Returns spin and apparatus to `|+⟩|m0⟩`, keeping the environment
    /// record.
    ResetLab {
        spin: String,
        apparatus: String,
        environment: String,
    },
    /// The friend prepares fresh qubits according to her record.
    EmitQubits {
        environment: String,
        qubit_names: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        semantics_override: Option<EmissionSemantics>,
    },
    ProjectiveMeasure {
        actor: String,
        targets: Vec<String>,
        basis: MeasurementBasis,
        #[serde(default)]
        remainder_policy: RemainderPolicy,
    },
}

impl OperationSpec {
    /// Operations that happen inside the sealed lab.
    pub fn is_lab_internal(&self) -> bool {
        matches!(
            self,
            OperationSpec::FriendMeasure { .. } | OperationSpec::ResetLab { .. } | OperationSpec::EmitQubits { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OperationSpec::PrepareEntangled { .. } => "prepare_entangled",
            OperationSpec::PrepareQubit { .. } => "prepare_qubit",
            OperationSpec::FriendMeasure { .. } => "friend_measure",
            OperationSpec::ResetLab { .. } => "reset_lab",
            OperationSpec::EmitQubits { .. } => "emit_qubits",
            OperationSpec::ProjectiveMeasure { .. } => "projective_measure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledEvent {
    pub event: SpacetimeEvent,
    pub op: OperationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub register: Register,
    pub initial_labels: BTreeMap<String, String>,
    pub events: Vec<ScheduledEvent>,
    pub lab_x: f64,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Event pairs whose frame-dependent order is under test; each must be
    /// spacelike separated.
    #[serde(default)]
    pub spacelike_pairs: Vec<(String, String)>,
}

impl Scenario {
    pub fn event(&self, id: &str) -> Option<&ScheduledEvent> {
        self.events.iter().find(|e| e.event.id == id)
    }

    pub fn spacetime_events(&self) -> Vec<SpacetimeEvent> {
        self.events.iter().map(|e| e.event.clone()).collect()
    }

    /// The friend's measurement, if the scenario has a lab.
    pub fn friend_measurement(&self) -> Option<(&ScheduledEvent, &str, QubitBasis)> {
        self.events.iter().find_map(|e| match &e.op {
            OperationSpec::FriendMeasure {
                environment,
                record_basis,
                ..
            } => Some((e, environment.as_str(), *record_basis)),
            _ => None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateEventId,
    ReservedEventId,
    NonFiniteCoordinate,
    UnknownSubsystem,
    WrongDimension,
    InitialState,
    OffLabWorldline,
    NotSpacelike,
    NotCausallyAfterEmission,
    NotNormalized,
    InvalidBasis,
    UnknownEvent,
    DuplicateEmission,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Event id under which a run stores the friend's final environment record.
pub const RECORD_EVENT_ID: &str = "@end";

fn spin(name: &str) -> SubsystemSpec {
    SubsystemSpec::new(name, &SPIN_LABELS)
}

fn lab_specs() -> Vec<SubsystemSpec> {
    vec![
        SubsystemSpec::new(ids::APPARATUS, &APPARATUS_LABELS),
        SubsystemSpec::new(ids::ENVIRONMENT, &ENVIRONMENT_LABELS),
    ]
}

fn emitted_name(k: usize) -> String {
    format!("W{k}")
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn check_normalized(amplitudes: &[C64]) -> Result<(), ProtocolError> {
    let n: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
    if (n - 1.0).abs() > NORM_TOL || !n.is_finite() {
        return Err(ProtocolError::NotNormalized(n));
    }
    Ok(())
}

fn put_complex(params: &mut BTreeMap<String, f64>, name: &str, z: C64) {
    params.insert(format!("{name}.re"), z.re);
    params.insert(format!("{name}.im"), z.im);
}

fn lab_event(id: &str, t: f64, op: OperationSpec) -> ScheduledEvent {
    ScheduledEvent {
        event: SpacetimeEvent::new(id, t, 0.0),
        op,
    }
}

fn friend_measure() -> OperationSpec {
    OperationSpec::FriendMeasure {
        spin: ids::F_SPIN.into(),
        apparatus: ids::APPARATUS.into(),
        environment: ids::ENVIRONMENT.into(),
        record_basis: QubitBasis::z(),
    }
}

fn measure_qubit(actor: &str, target: &str, basis: QubitBasis) -> OperationSpec {
    OperationSpec::ProjectiveMeasure {
        actor: actor.into(),
        targets: vec![target.into()],
        basis: MeasurementBasis::Qubit(basis),
        remainder_policy: RemainderPolicy::Error,
    }
}

/// Shared skeleton of the full lab protocol: Bell pair between F and A,
/// friend's measurement, reset, emission of `n_qubits`, A's measurement at
/// `a_event`, then W's measurements.
fn lab_protocol(
    id: &str,
    n_qubits: usize,
    a_basis: QubitBasis,
    a_t: f64,
    a_x: f64,
    semantics_override: Option<EmissionSemantics>,
) -> Result<Scenario, ProtocolError> {
    if !(2..=MAX_EMITTED_QUBITS).contains(&n_qubits) {
        return Err(ProtocolError::Parameter {
            name: "n_qubits",
            reason: format!("{n_qubits} not in 2..={MAX_EMITTED_QUBITS}"),
        });
    }
    let mut specs = vec![spin(ids::F_SPIN), spin(ids::A_SPIN)];
    specs.extend(lab_specs());
    let qubits: Vec<String> = (1..=n_qubits).map(emitted_name).collect();
    specs.extend(qubits.iter().map(|q| spin(q)));
    let register = Register::new(specs).expect("builder register is well formed");

    let mut initial_labels = BTreeMap::new();
    for s in register.subsystems() {
        initial_labels.insert(s.name.clone(), s.basis_labels[0].clone());
    }

    let h = FRAC_1_SQRT_2;
    let bell = vec![c(h), c(0.0), c(0.0), c(h)];
    let mut events = vec![
        lab_event(
            ids::PREP,
            0.0,
            OperationSpec::PrepareEntangled {
                target_pair: [ids::F_SPIN.into(), ids::A_SPIN.into()],
                amplitudes: bell,
            },
        ),
        lab_event(ids::F_MEAS, 1.0, friend_measure()),
        lab_event(
            ids::RESET,
            1.2,
            OperationSpec::ResetLab {
                spin: ids::F_SPIN.into(),
                apparatus: ids::APPARATUS.into(),
                environment: ids::ENVIRONMENT.into(),
            },
        ),
        lab_event(
            ids::EMIT,
            2.0,
            OperationSpec::EmitQubits {
                environment: ids::ENVIRONMENT.into(),
                qubit_names: qubits.clone(),
                semantics_override,
            },
        ),
        ScheduledEvent {
            event: SpacetimeEvent::new(ids::A_MEAS, a_t, a_x),
            op: measure_qubit("A", ids::A_SPIN, a_basis),
        },
        lab_event(ids::W_Z, 3.0, measure_qubit("W", &qubits[0], QubitBasis::z())),
        lab_event(ids::W_X, 3.1, measure_qubit("W", &qubits[1], QubitBasis::x())),
    ];
    if n_qubits >= 3 {
        events.push(lab_event(ids::W_X2, 3.2, measure_qubit("W", &qubits[2], QubitBasis::x())));
    }

    let mut parameters = BTreeMap::new();
    parameters.insert("n_qubits".into(), n_qubits as f64);
    parameters.insert("theta_A".into(), a_basis.theta);
    Ok(Scenario {
        id: id.into(),
        register,
        initial_labels,
        events,
        lab_x: 0.0,
        parameters,
        spacelike_pairs: vec![(ids::EMIT.into(), ids::A_MEAS.into())],
    })
}

/// The full protocol: Bell pair, friend measures in z, resets, emits
/// `n_qubits` qubits, A measures in x at a spacelike distance from the
/// emission, W measures one emitted qubit in z and one (two when
/// `n_qubits ≥ 3`) in x.
pub fn build_paper_scenario(n_qubits: usize) -> Result<Scenario, ProtocolError> {
    lab_protocol("paper", n_qubits, QubitBasis::x(), 2.5, 10.0, None)
}

/// Variant where A measures at angle `theta` before the emission (in the
/// rest frame) and the friend emits according to whatever record she has.
pub fn build_signaling(theta: f64, n_qubits: usize) -> Result<Scenario, ProtocolError> {
    if !(0.0..PI).contains(&theta) {
        return Err(ProtocolError::Parameter {
            name: "theta",
            reason: format!("{theta} not in [0, π)"),
        });
    }
    lab_protocol(
        "signaling",
        n_qubits,
        QubitBasis::new(theta),
        1.5,
        10.0,
        Some(EmissionSemantics::RecordAdaptive),
    )
}

/// Lab state `|±⟩|m±⟩|ε±⟩` on (spin, apparatus, environment).
pub fn lab_record_state(outcome: usize) -> CVector {
    let mut spin = CVector::zeros(2);
    spin[outcome] = c(1.0);
    let mut m = CVector::zeros(3);
    m[record_index(outcome)] = c(1.0);
    kron_vectors(&[spin, m.clone(), m])
}

/// Single-spin Wigner-friend setup: F measures `α|+⟩ + β|−⟩` in z, then W
/// measures the whole lab in `{(|L₊⟩ ± |L₋⟩)/√2}` with the remainder
/// collected.
pub fn build_basic_wfs(alpha: C64, beta: C64) -> Result<Scenario, ProtocolError> {
    check_normalized(&[alpha, beta])?;
    let mut specs = vec![spin(ids::F_SPIN)];
    specs.extend(lab_specs());
    let register = Register::new(specs).expect("builder register is well formed");
    let initial_labels = register
        .subsystems()
        .iter()
        .map(|s| (s.name.clone(), s.basis_labels[0].clone()))
        .collect();

    let (lp, lm) = (lab_record_state(0), lab_record_state(1));
    let h = c(FRAC_1_SQRT_2);
    let explicit = |label: &str, v: CVector| ExplicitVector {
        label: label.into(),
        amplitudes: v.iter().cloned().collect(),
    };
    let basis = vec![explicit("+", (&lp + &lm) * h), explicit("-", (&lp - &lm) * h)];

    let events = vec![
        lab_event(
            ids::PREP,
            0.0,
            OperationSpec::PrepareQubit {
                target: ids::F_SPIN.into(),
                amplitudes: vec![alpha, beta],
            },
        ),
        lab_event(ids::F_MEAS, 1.0, friend_measure()),
        lab_event(
            ids::W_LAB,
            2.0,
            OperationSpec::ProjectiveMeasure {
                actor: "W".into(),
                targets: vec![ids::F_SPIN.into(), ids::APPARATUS.into(), ids::ENVIRONMENT.into()],
                basis: MeasurementBasis::Explicit(basis),
                remainder_policy: RemainderPolicy::Collect,
            },
        ),
    ];
    let mut parameters = BTreeMap::new();
    put_complex(&mut parameters, "alpha", alpha);
    put_complex(&mut parameters, "beta", beta);
    Ok(Scenario {
        id: "basic_wfs".into(),
        register,
        initial_labels,
        events,
        lab_x: 0.0,
        parameters,
        spacelike_pairs: vec![],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementOrder {
    #[serde(rename = "A_first")]
    AFirst,
    #[serde(rename = "B_first")]
    BFirst,
}

/// Two bare spins in `α|+u⟩|−v⟩ + β|−u⟩|+v⟩ + γ|−u⟩|−v⟩`, measured by A in
/// `u` and B in `v` at spacelike separated events.
pub fn build_bipartite(
    alpha: C64,
    beta: C64,
    gamma: C64,
    u_basis: QubitBasis,
    v_basis: QubitBasis,
    order: MeasurementOrder,
) -> Result<Scenario, ProtocolError> {
    check_normalized(&[alpha, beta, gamma])?;
    let register = Register::new(vec![spin(ids::A_SPIN), spin(ids::B_SPIN)]).expect("builder register is well formed");
    let initial_labels = register
        .subsystems()
        .iter()
        .map(|s| (s.name.clone(), s.basis_labels[0].clone()))
        .collect();

    let (up, um) = (u_basis.plus(), u_basis.minus());
    let (vp, vm) = (v_basis.plus(), v_basis.minus());
    let state = up.kronecker(&vm) * alpha + um.kronecker(&vp) * beta + um.kronecker(&vm) * gamma;

    let (t_a, t_b) = match order {
        MeasurementOrder::AFirst => (10.0, 10.5),
        MeasurementOrder::BFirst => (10.5, 10.0),
    };
    let events = vec![
        lab_event(
            ids::PREP,
            0.0,
            OperationSpec::PrepareEntangled {
                target_pair: [ids::A_SPIN.into(), ids::B_SPIN.into()],
                amplitudes: state.iter().cloned().collect(),
            },
        ),
        ScheduledEvent {
            event: SpacetimeEvent::new(ids::A_MEAS, t_a, -4.0),
            op: measure_qubit("A", ids::A_SPIN, u_basis),
        },
        ScheduledEvent {
            event: SpacetimeEvent::new(ids::B_MEAS, t_b, 4.0),
            op: measure_qubit("B", ids::B_SPIN, v_basis),
        },
    ];
    let mut parameters = BTreeMap::new();
    put_complex(&mut parameters, "alpha", alpha);
    put_complex(&mut parameters, "beta", beta);
    put_complex(&mut parameters, "gamma", gamma);
    parameters.insert("u_theta".into(), u_basis.theta);
    parameters.insert("v_theta".into(), v_basis.theta);
    Ok(Scenario {
        id: "bipartite".into(),
        register,
        initial_labels,
        events,
        lab_x: 0.0,
        parameters,
        spacelike_pairs: vec![(ids::A_MEAS.into(), ids::B_MEAS.into())],
    })
}

struct Checker<'a> {
    scenario: &'a Scenario,
    violations: Vec<Violation>,
}

impl Checker<'_> {
    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }

    fn subsystem(&mut self, event: &str, name: &str, dimension: Option<usize>) -> bool {
        match self.scenario.register.subsystem(name) {
            None => {
                self.push(
                    ViolationKind::UnknownSubsystem,
                    format!("event `{event}` references unknown subsystem `{name}`"),
                );
                false
            }
            Some(spec) => match dimension {
                Some(d) if spec.dimension != d => {
                    self.push(
                        ViolationKind::WrongDimension,
                        format!(
                            "event `{event}`: subsystem `{name}` has dimension {}, expected {d}",
                            spec.dimension
                        ),
                    );
                    false
                }
                _ => true,
            },
        }
    }

    fn amplitudes(&mut self, event: &str, amplitudes: &[C64], expected: usize) {
        if amplitudes.len() != expected {
            self.push(
                ViolationKind::WrongDimension,
                format!("event `{event}`: {} amplitudes, expected {expected}", amplitudes.len()),
            );
        } else if let Err(e) = check_normalized(amplitudes) {
            self.push(ViolationKind::NotNormalized, format!("event `{event}`: {e}"));
        }
    }

    fn operation(&mut self, ev: &ScheduledEvent) {
        let id = ev.event.id.as_str();
        match &ev.op {
            OperationSpec::PrepareEntangled {
                target_pair,
                amplitudes,
            } => {
                let ok = target_pair.iter().all(|t| self.subsystem(id, t, Some(2)));
                if target_pair[0] == target_pair[1] {
                    self.push(
                        ViolationKind::WrongDimension,
                        format!("event `{id}`: target pair names the same subsystem twice"),
                    );
                }
                if ok {
                    self.amplitudes(id, amplitudes, 4);
                }
            }
            OperationSpec::PrepareQubit { target, amplitudes } => {
                if self.subsystem(id, target, Some(2)) {
                    self.amplitudes(id, amplitudes, 2);
                }
            }
            OperationSpec::FriendMeasure {
                spin,
                apparatus,
                environment,
                ..
            }
            | OperationSpec::ResetLab {
                spin,
                apparatus,
                environment,
            } => {
                self.subsystem(id, spin, Some(2));
                self.subsystem(id, apparatus, Some(3));
                self.subsystem(id, environment, Some(3));
            }
            OperationSpec::EmitQubits {
                environment,
                qubit_names,
                ..
            } => {
                self.subsystem(id, environment, Some(3));
                for q in qubit_names {
                    self.subsystem(id, q, Some(2));
                }
            }
            OperationSpec::ProjectiveMeasure {
                targets,
                basis,
                remainder_policy,
                ..
            } => {
                if targets.is_empty() {
                    self.push(ViolationKind::InvalidBasis, format!("event `{id}` measures no subsystem"));
                    return;
                }
                if !targets.iter().all(|t| self.subsystem(id, t, None)) {
                    return;
                }
                let dim = match self.scenario.register.factor_dimension(targets) {
                    Ok(d) => d,
                    Err(_) => return,
                };
                let distinct: HashSet<_> = targets.iter().collect();
                if distinct.len() != targets.len() {
                    self.push(ViolationKind::InvalidBasis, format!("event `{id}` lists a target twice"));
                    return;
                }
                let vectors = basis.labeled_vectors();
                if vectors.iter().any(|v| v.vector.len() != dim) {
                    self.push(
                        ViolationKind::WrongDimension,
                        format!("event `{id}`: basis vectors do not have dimension {dim}"),
                    );
                    return;
                }
                let raw: Vec<CVector> = vectors.iter().map(|v| v.vector.clone()).collect();
                let defect = orthonormality_defect(&raw);
                if defect > ORTHO_TOL {
                    self.push(
                        ViolationKind::InvalidBasis,
                        format!("event `{id}`: basis is not orthonormal (defect {defect:e})"),
                    );
                }
                let labels: HashSet<_> = vectors.iter().map(|v| v.label.as_str()).collect();
                if labels.len() != vectors.len() {
                    self.push(ViolationKind::InvalidBasis, format!("event `{id}`: duplicate outcome labels"));
                }
                if vectors.len() > dim || (vectors.len() < dim && *remainder_policy == RemainderPolicy::Error) {
                    self.push(
                        ViolationKind::InvalidBasis,
                        format!(
                            "event `{id}`: {} basis vectors for a {dim}-dimensional factor with remainder policy {:?}",
                            vectors.len(),
                            remainder_policy
                        ),
                    );
                }
            }
        }
    }
}

/// Structural checks. Returns every violation found rather than stopping at
/// the first.
pub fn validate(s: &Scenario) -> Result<(), Vec<Violation>> {
    let mut ck = Checker {
        scenario: s,
        violations: Vec::new(),
    };

    let mut seen = HashSet::new();
    for ev in &s.events {
        let id = &ev.event.id;
        if !seen.insert(id.as_str()) {
            ck.push(ViolationKind::DuplicateEventId, format!("duplicate event id `{id}`"));
        }
        if id.starts_with('@') {
            ck.push(ViolationKind::ReservedEventId, format!("event id `{id}` uses the reserved prefix `@`"));
        }
        if !(ev.event.t.is_finite() && ev.event.x.is_finite()) {
            ck.push(ViolationKind::NonFiniteCoordinate, format!("event `{id}` has a non-finite coordinate"));
        }
    }
    if !s.lab_x.is_finite() {
        ck.push(ViolationKind::NonFiniteCoordinate, "lab worldline position is not finite".into());
    }

    for spec in s.register.subsystems() {
        match s.initial_labels.get(&spec.name) {
            None => ck.push(
                ViolationKind::InitialState,
                format!("no initial label for subsystem `{}`", spec.name),
            ),
            Some(l) if spec.label_index(l).is_none() => ck.push(
                ViolationKind::InitialState,
                format!("initial label `{l}` is not a basis label of `{}`", spec.name),
            ),
            Some(_) => {}
        }
    }
    for name in s.initial_labels.keys() {
        if !s.register.contains(name) {
            ck.push(
                ViolationKind::InitialState,
                format!("initial label given for unknown subsystem `{name}`"),
            );
        }
    }

    for ev in &s.events {
        ck.operation(ev);
        if ev.op.is_lab_internal() && (ev.event.x - s.lab_x).abs() > WORLDLINE_TOL {
            ck.push(
                ViolationKind::OffLabWorldline,
                format!(
                    "lab operation off lab worldline: `{}` at x = {}, lab at x = {}",
                    ev.event.id, ev.event.x, s.lab_x
                ),
            );
        }
    }

    let by_id: HashMap<&str, &SpacetimeEvent> = s.events.iter().map(|e| (e.event.id.as_str(), &e.event)).collect();
    for (a, b) in &s.spacelike_pairs {
        match (by_id.get(a.as_str()), by_id.get(b.as_str())) {
            (Some(ea), Some(eb)) => {
                if classify_interval(ea, eb) != IntervalKind::Spacelike {
                    ck.push(ViolationKind::NotSpacelike, format!("{a}/{b} not spacelike"));
                }
            }
            _ => ck.push(
                ViolationKind::UnknownEvent,
                format!("spacelike pair {a}/{b} names an unknown event"),
            ),
        }
    }

    // Measurements of emitted qubits must lie in the causal future of the
    // emission, so every frame agrees the qubits exist when measured.
    let mut emitted_by: HashMap<&str, &SpacetimeEvent> = HashMap::new();
    for ev in &s.events {
        if let OperationSpec::EmitQubits { qubit_names, .. } = &ev.op {
            for q in qubit_names {
                if emitted_by.insert(q.as_str(), &ev.event).is_some() {
                    ck.push(ViolationKind::DuplicateEmission, format!("qubit `{q}` is emitted more than once"));
                }
            }
        }
    }
    for ev in &s.events {
        if let OperationSpec::ProjectiveMeasure { targets, .. } = &ev.op {
            for t in targets {
                if let Some(emit) = emitted_by.get(t.as_str()) {
                    let after = ev.event.t > emit.t;
                    if !after || classify_interval(emit, &ev.event) != IntervalKind::Timelike {
                        ck.push(
                            ViolationKind::NotCausallyAfterEmission,
                            format!("`{}` is not in the causal future of `{}`", ev.event.id, emit.id),
                        );
                    }
                }
            }
        }
    }

    if ck.violations.is_empty() {
        Ok(())
    } else {
        Err(ck.violations)
    }
}

/// Record label for a direction in the (ε₊, ε₋) plane, as used in outcome
/// tables: `+`/`-` for the z records, `+x`/`-x` for the x records, and
/// `±theta=<angle>` otherwise.
pub fn record_label(theta: f64, positive: bool) -> String {
    const TOL: f64 = 1e-9;
    if theta.abs() <= TOL {
        "+".into()
    } else if (theta - PI).abs() <= TOL {
        "-".into()
    } else if (theta - FRAC_PI_2).abs() <= TOL {
        if positive { "+x" } else { "-x" }.into()
    } else {
        format!("{}theta={theta:.12}", if positive { '+' } else { '-' })
    }
}
