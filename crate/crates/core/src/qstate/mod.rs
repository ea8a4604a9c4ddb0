//! Dense pure states over registers of named subsystems of arbitrary finite
//! dimension.
//!
//! Every operation takes `&self` and returns a new value. Amplitudes are
//! stored densely in row-major order over the register's declared subsystem
//! order.

mod density;
mod linalg;
mod register;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use density::{match_pure_record, DensityMatrix};
pub use linalg::{
    basis_vector, complete_isometry, kron_vectors, orthonormality_defect, unitarity_defect, unitary_mapping,
    QubitBasis, MINUS_LABEL, PLUS_LABEL,
};
pub use register::{Register, SubsystemSpec};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Allowed drift of the squared norm, and of `U†U` from the identity.
pub const NORM_TOL: f64 = 1e-10;
/// Allowed deviation of a basis' Gram matrix from the identity.
pub const ORTHO_TOL: f64 = 1e-10;
/// Outcomes (and branches) below this probability are dropped.
pub const PRUNE_TOL: f64 = 1e-12;
/// Residual norm below which an orthonormal-completion seed is skipped.
pub const COMPLETION_RESIDUAL: f64 = 1e-8;
/// Label of the orthogonal-complement outcome when a basis is incomplete.
pub const REMAINDER_LABEL: &str = "other";

#[derive(Clone, Debug, Error, PartialEq)]
pub enum QStateError {
    #[error("duplicate subsystem name `{0}`")]
    DuplicateSubsystem(String),
    #[error("subsystem `{0}` has dimension 0")]
    ZeroDimension(String),
    #[error("subsystem `{name}` has {labels} basis labels for dimension {dimension}")]
    LabelCount { name: String, labels: usize, dimension: usize },
    #[error("duplicate basis label `{label}` in subsystem `{name}`")]
    DuplicateLabel { name: String, label: String },
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
    #[error("unknown basis label `{label}` for subsystem `{name}`")]
    UnknownLabel { name: String, label: String },
    #[error("no initial label for subsystem `{0}`")]
    MissingLabel(String),
    #[error("subsystem `{0}` listed twice")]
    DuplicateTarget(String),
    #[error("empty target list")]
    NoTargets,
    #[error("got {rows}x{cols}, expected dimension {expected}")]
    DimensionMismatch { rows: usize, cols: usize, expected: usize },
    #[error("matrix is not unitary (max |U†U - I| = {0:e})")]
    NotUnitary(f64),
    #[error("vectors are not orthonormal (max defect {0:e})")]
    NotOrthonormal(f64),
    #[error("{count} columns do not fit in dimension {dimension}")]
    TooManyColumns { count: usize, dimension: usize },
    #[error("basis of {count} vectors does not span the {dimension}-dimensional target factor")]
    IncompleteBasis { count: usize, dimension: usize },
    #[error("squared norm {0} is not 1")]
    Norm(f64),
    #[error("non-finite amplitude")]
    NonFinite,
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
}

/// A basis vector on some tensor factor, tagged with its outcome label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledVector {
    pub label: String,
    pub vector: CVector,
}

impl LabeledVector {
    pub fn new<S: Into<String>>(label: S, vector: CVector) -> Self {
        LabeledVector {
            label: label.into(),
            vector,
        }
    }
}

/// What to do when a measurement basis does not span its target factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderPolicy {
    #[default]
    Error,
    /// Add one outcome, labeled [`REMAINDER_LABEL`], for the projector onto
    /// the orthogonal complement.
    Collect,
}

/// One outcome of a projective measurement.
#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub label: String,
    pub probability: f64,
    pub state: QState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QState {
    register: Arc<Register>,
    amplitudes: CVector,
}

impl QState {
    /// Product basis state with one label per subsystem.
    pub fn init_register(
        specs: Vec<SubsystemSpec>,
        initial_labels: &BTreeMap<String, String>,
    ) -> Result<QState, QStateError> {
        let register = Register::new(specs)?;
        QState::basis_state(Arc::new(register), initial_labels)
    }

    pub fn basis_state(
        register: Arc<Register>,
        initial_labels: &BTreeMap<String, String>,
    ) -> Result<QState, QStateError> {
        if let Some(extra) = initial_labels.keys().find(|k| !register.contains(k)) {
            return Err(QStateError::UnknownSubsystem(extra.clone()));
        }
        let mut labels = Vec::with_capacity(register.subsystems().len());
        for spec in register.subsystems() {
            let label = initial_labels
                .get(&spec.name)
                .ok_or_else(|| QStateError::MissingLabel(spec.name.clone()))?;
            labels.push(label.as_str());
        }
        let index = register.index_of(&labels)?;
        let mut amplitudes = CVector::zeros(register.total_dimension());
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(QState { register, amplitudes })
    }

    /// Wraps a caller-supplied amplitude vector, which must already be
    /// normalized.
    pub fn from_amplitudes(register: Arc<Register>, amplitudes: CVector) -> Result<QState, QStateError> {
        if amplitudes.len() != register.total_dimension() {
            return Err(QStateError::DimensionMismatch {
                rows: amplitudes.len(),
                cols: 1,
                expected: register.total_dimension(),
            });
        }
        let state = QState { register, amplitudes };
        state.check()?;
        Ok(state)
    }

    pub fn register(&self) -> &Arc<Register> {
        &self.register
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn inner(&self, other: &QState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    fn check(&self) -> Result<(), QStateError> {
        if self.amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QStateError::NonFinite);
        }
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(QStateError::Norm(n));
        }
        Ok(())
    }

    /// Applies `matrix` on the tensor factor formed by `targets` (in that
    /// order, first target most significant) and the identity elsewhere.
    pub fn apply_unitary<S: AsRef<str>>(&self, targets: &[S], matrix: &CMatrix) -> Result<QState, QStateError> {
        let layout = self.register.layout(targets)?;
        let dim = layout.dimension();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(QStateError::DimensionMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected: dim,
            });
        }
        let defect = unitarity_defect(matrix);
        if defect > NORM_TOL {
            return Err(QStateError::NotUnitary(defect));
        }

        let mut out = CVector::zeros(self.amplitudes.len());
        let mut local = CVector::zeros(dim);
        for &base in &layout.bases {
            for (j, &off) in layout.offsets.iter().enumerate() {
                local[j] = self.amplitudes[base + off];
            }
            let mapped = matrix * &local;
            for (i, &off) in layout.offsets.iter().enumerate() {
                out[base + off] = mapped[i];
            }
        }
        let state = QState {
            register: Arc::clone(&self.register),
            amplitudes: out,
        };
        state.check()?;
        Ok(state)
    }

    /// Projective measurement of the `targets` factor in an orthonormal basis
    /// of labeled vectors.
    ///
    /// Returns the outcomes in basis order (remainder last), skipping any with
    /// probability below [`PRUNE_TOL`]. Each collapsed state is renormalized.
    pub fn measure<S: AsRef<str>>(
        &self,
        targets: &[S],
        basis: &[LabeledVector],
        remainder_policy: RemainderPolicy,
    ) -> Result<Vec<MeasurementOutcome>, QStateError> {
        let layout = self.register.layout(targets)?;
        let dim = layout.dimension();
        if let Some(bad) = basis.iter().find(|b| b.vector.len() != dim) {
            return Err(QStateError::DimensionMismatch {
                rows: bad.vector.len(),
                cols: 1,
                expected: dim,
            });
        }
        let vectors: Vec<CVector> = basis.iter().map(|b| b.vector.clone()).collect();
        let defect = orthonormality_defect(&vectors);
        if defect > ORTHO_TOL {
            return Err(QStateError::NotOrthonormal(defect));
        }
        if basis.len() > dim {
            return Err(QStateError::TooManyColumns {
                count: basis.len(),
                dimension: dim,
            });
        }
        let complete = basis.len() == dim;
        if !complete && remainder_policy == RemainderPolicy::Error {
            return Err(QStateError::IncompleteBasis {
                count: basis.len(),
                dimension: dim,
            });
        }

        let total = self.amplitudes.len();
        let mut projected: Vec<CVector> = (0..basis.len()).map(|_| CVector::zeros(total)).collect();
        let mut remainder = if complete { None } else { Some(self.amplitudes.clone()) };
        let mut local = CVector::zeros(dim);
        for &base in &layout.bases {
            for (j, &off) in layout.offsets.iter().enumerate() {
                local[j] = self.amplitudes[base + off];
            }
            for (k, b) in vectors.iter().enumerate() {
                let coeff = b.dotc(&local);
                if coeff == C64::new(0.0, 0.0) {
                    continue;
                }
                for (j, &off) in layout.offsets.iter().enumerate() {
                    let piece = coeff * b[j];
                    projected[k][base + off] = piece;
                    if let Some(rest) = remainder.as_mut() {
                        rest[base + off] -= piece;
                    }
                }
            }
        }

        let labels = basis
            .iter()
            .map(|b| b.label.clone())
            .chain(remainder.is_some().then(|| REMAINDER_LABEL.to_string()));
        let pieces = projected.into_iter().chain(remainder);
        let mut outcomes = Vec::new();
        for (label, piece) in labels.zip(pieces) {
            let probability = piece.norm_squared();
            if probability < PRUNE_TOL {
                continue;
            }
            let state = QState {
                register: Arc::clone(&self.register),
                amplitudes: piece / C64::new(probability.sqrt(), 0.0),
            };
            state.check()?;
            outcomes.push(MeasurementOutcome {
                label,
                probability,
                state,
            });
        }
        Ok(outcomes)
    }

    /// The `targets` factor of a product state, up to global phase.
    ///
    /// Returns `None` when the factor is entangled with the rest of the
    /// register (reduced purity below `1 − 1e-9`).
    pub fn pure_factor<S: AsRef<str>>(&self, targets: &[S]) -> Result<Option<CVector>, QStateError> {
        if self.reduced_density(targets)?.purity() < 1.0 - 1e-9 {
            return Ok(None);
        }
        let layout = self.register.layout(targets)?;
        let slice = |base: usize| -> CVector {
            CVector::from_iterator(layout.dimension(), layout.offsets.iter().map(|&o| self.amplitudes[base + o]))
        };
        let best = layout
            .bases
            .iter()
            .map(|&b| (b, slice(b).norm_squared()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let v = slice(best.0);
        Ok(Some(&v / C64::new(best.1.sqrt(), 0.0)))
    }

    /// Partial trace over everything but `targets`.
    pub fn reduced_density<S: AsRef<str>>(&self, targets: &[S]) -> Result<DensityMatrix, QStateError> {
        let layout = self.register.layout(targets)?;
        let dim = layout.dimension();
        let mut rho = CMatrix::zeros(dim, dim);
        for &base in &layout.bases {
            for (i, &oi) in layout.offsets.iter().enumerate() {
                let a = self.amplitudes[base + oi];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for (j, &oj) in layout.offsets.iter().enumerate() {
                    rho[(i, j)] += a * self.amplitudes[base + oj].conj();
                }
            }
        }
        Ok(DensityMatrix::from_entries_unchecked(rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn labels(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn two_qubits() -> QState {
        QState::init_register(
            vec![SubsystemSpec::qubit("a"), SubsystemSpec::qubit("b")],
            &labels(&[("a", "0"), ("b", "0")]),
        )
        .unwrap()
    }

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
    }

    fn hadamard() -> CMatrix {
        let h = 1.0 / 2f64.sqrt();
        CMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)])
    }

    fn cnot() -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(1.0);
        m[(1, 1)] = c(1.0);
        m[(2, 3)] = c(1.0);
        m[(3, 2)] = c(1.0);
        m
    }

    fn bell() -> QState {
        two_qubits()
            .apply_unitary(&["a"], &hadamard())
            .unwrap()
            .apply_unitary(&["a", "b"], &cnot())
            .unwrap()
    }

    #[test]
    fn single_qubit_basis_state() {
        let s = QState::init_register(vec![SubsystemSpec::qubit("q")], &labels(&[("q", "0")])).unwrap();
        assert_eq!(s.amplitudes().as_slice(), &[c(1.0), c(0.0)]);
    }

    #[test]
    fn lab_register_has_single_nonzero_amplitude() {
        let specs = vec![
            SubsystemSpec::new("F", &["+", "-"]),
            SubsystemSpec::new("A", &["+", "-"]),
            SubsystemSpec::new("m", &["m0", "m+", "m-"]),
            SubsystemSpec::new("eps", &["eps0", "eps+", "eps-"]),
        ];
        let init = labels(&[("F", "+"), ("A", "+"), ("m", "m0"), ("eps", "eps0")]);
        let s = QState::init_register(specs, &init).unwrap();
        assert_eq!(s.amplitudes().len(), 36);
        assert_eq!(s.amplitudes().iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(s.amplitudes()[0], c(1.0));
    }

    #[test]
    fn init_errors() {
        let dup = QState::init_register(
            vec![SubsystemSpec::qubit("q"), SubsystemSpec::qubit("q")],
            &labels(&[("q", "0")]),
        );
        assert!(matches!(dup, Err(QStateError::DuplicateSubsystem(_))));
        let bad_label = QState::init_register(vec![SubsystemSpec::qubit("q")], &labels(&[("q", "2")]));
        assert!(matches!(bad_label, Err(QStateError::UnknownLabel { .. })));
        let bad_name =
            QState::init_register(vec![SubsystemSpec::qubit("q")], &labels(&[("q", "0"), ("r", "0")]));
        assert!(matches!(bad_name, Err(QStateError::UnknownSubsystem(_))));
        let missing = QState::init_register(vec![SubsystemSpec::qubit("q")], &BTreeMap::new());
        assert!(matches!(missing, Err(QStateError::MissingLabel(_))));
    }

    #[test]
    fn bit_flip_and_hadamard() {
        let s = QState::init_register(vec![SubsystemSpec::qubit("q")], &labels(&[("q", "0")])).unwrap();
        let flipped = s.apply_unitary(&["q"], &pauli_x()).unwrap();
        assert_eq!(flipped.amplitudes().as_slice(), &[c(0.0), c(1.0)]);
        let h = s.apply_unitary(&["q"], &hadamard()).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(h.amplitudes()[0].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!(h.amplitudes()[1].re, r, epsilon = 1e-15);
    }

    #[test]
    fn entangling_unitary_gives_bell_state() {
        let r = 1.0 / 2f64.sqrt();
        let expected = [r, 0.0, 0.0, r];
        for (z, e) in bell().amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(z.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn apply_unitary_errors() {
        let s = two_qubits();
        let not_unitary = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!(matches!(s.apply_unitary(&["a"], &not_unitary), Err(QStateError::NotUnitary(_))));
        assert!(matches!(s.apply_unitary(&["a"], &cnot()), Err(QStateError::DimensionMismatch { .. })));
        assert!(matches!(s.apply_unitary(&["z"], &pauli_x()), Err(QStateError::UnknownSubsystem(_))));
    }

    #[test]
    fn target_order_matters() {
        // CNOT with b as control flips a.
        let s = two_qubits().apply_unitary(&["b"], &pauli_x()).unwrap();
        let out = s.apply_unitary(&["b", "a"], &cnot()).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[3].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bell_measurement_in_z() {
        let outcomes = bell().measure(&["a"], &QubitBasis::z().labeled(), RemainderPolicy::Error).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert_eq!(outcomes[0].label, "+");
        assert_eq!(outcomes[1].label, "-");
        for o in &outcomes {
            assert_abs_diff_eq!(o.probability, 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(outcomes[0].state.amplitudes()[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(outcomes[1].state.amplitudes()[3].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eigenstate_measurement_is_certain() {
        let basis = QubitBasis::new(0.7);
        let reg = Arc::new(Register::new(vec![SubsystemSpec::qubit("q")]).unwrap());
        let s = QState::from_amplitudes(reg, basis.plus()).unwrap();
        let outcomes = s.measure(&["q"], &basis.labeled(), RemainderPolicy::Error).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].label, "+");
        assert_abs_diff_eq!(outcomes[0].probability, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(outcomes[0].state.inner(&s).norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn incomplete_basis_follows_policy() {
        let s = bell();
        let partial = vec![LabeledVector::new("00", basis_vector(4, 0))];
        assert!(matches!(
            s.measure(&["a", "b"], &partial, RemainderPolicy::Error),
            Err(QStateError::IncompleteBasis { .. })
        ));
        let outcomes = s.measure(&["a", "b"], &partial, RemainderPolicy::Collect).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert_eq!(outcomes[1].label, REMAINDER_LABEL);
        assert_abs_diff_eq!(outcomes[1].probability, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(outcomes[1].state.amplitudes()[3].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let skew = vec![
            LabeledVector::new("p", basis_vector(2, 0)),
            LabeledVector::new("q", QubitBasis::x().plus()),
        ];
        assert!(matches!(
            bell().measure(&["a"], &skew, RemainderPolicy::Error),
            Err(QStateError::NotOrthonormal(_))
        ));
    }

    #[test]
    fn reduced_density_of_product_and_bell() {
        let s = two_qubits().apply_unitary(&["b"], &hadamard()).unwrap();
        let rho = s.reduced_density(&["a"]).unwrap();
        assert!(rho.check().is_ok());
        assert_abs_diff_eq!(rho.entries()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-15);

        let rho = bell().reduced_density(&["b"]).unwrap();
        let half = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!((rho.entries() - half.entries()).norm(), 0.0, epsilon = 1e-15);
        assert!(matches!(bell().reduced_density(&["c"]), Err(QStateError::UnknownSubsystem(_))));
    }
}
