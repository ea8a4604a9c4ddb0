use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, CVector, QStateError, COMPLETION_RESIDUAL, ORTHO_TOL};

/// Standard basis vector `e_index` in dimension `dim`.
pub fn basis_vector(dim: usize, index: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[index] = C64::new(1.0, 0.0);
    v
}

/// Kronecker product of vectors, first factor most significant.
pub fn kron_vectors(factors: &[CVector]) -> CVector {
    let mut out = CVector::from_element(1, C64::new(1.0, 0.0));
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// `max |U†U − I|` over all entries.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let gram = u.adjoint() * u;
    max_identity_defect(&gram)
}

fn max_identity_defect(gram: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `max |⟨v_i|v_j⟩ − δ_ij|` over all pairs.
pub fn orthonormality_defect(vectors: &[CVector]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a.dotc(b) - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Extends orthonormal columns to an `n × n` unitary.
///
/// The given columns come first, unchanged. The remaining columns are
/// produced by orthogonalizing `e_0, e_1, …` in index order against
/// everything accepted so far (two Gram–Schmidt passes) and skipping any
/// residual with norm below `1e-8`, so the result is fully deterministic.
pub fn complete_isometry(columns: &[CVector], n: usize) -> Result<CMatrix, QStateError> {
    if columns.len() > n {
        return Err(QStateError::TooManyColumns {
            count: columns.len(),
            dimension: n,
        });
    }
    if let Some(bad) = columns.iter().find(|c| c.len() != n) {
        return Err(QStateError::DimensionMismatch {
            rows: bad.len(),
            cols: 1,
            expected: n,
        });
    }
    let defect = orthonormality_defect(columns);
    if defect > ORTHO_TOL {
        return Err(QStateError::NotOrthonormal(defect));
    }

    let mut basis: Vec<CVector> = columns.to_vec();
    for seed in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = basis_vector(n, seed);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm < COMPLETION_RESIDUAL {
            continue;
        }
        basis.push(v / C64::new(norm, 0.0));
    }
    debug_assert_eq!(basis.len(), n);
    Ok(CMatrix::from_columns(&basis))
}

/// Unitary sending each `inputs[k]` to `outputs[k]`, built as
/// `W_out · W_in†` from two completed isometries.
pub fn unitary_mapping(inputs: &[CVector], outputs: &[CVector], n: usize) -> Result<CMatrix, QStateError> {
    if inputs.len() != outputs.len() {
        return Err(QStateError::DimensionMismatch {
            rows: outputs.len(),
            cols: 1,
            expected: inputs.len(),
        });
    }
    let w_in = complete_isometry(inputs, n)?;
    let w_out = complete_isometry(outputs, n)?;
    Ok(w_out * w_in.adjoint())
}

/// Qubit measurement basis at polar angle `theta`:
/// `|+θ⟩ = cos(θ/2)|0⟩ + sin(θ/2)|1⟩`, `|−θ⟩ = −sin(θ/2)|0⟩ + cos(θ/2)|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitBasis {
    pub theta: f64,
}

pub const PLUS_LABEL: &str = "+";
pub const MINUS_LABEL: &str = "-";

impl QubitBasis {
    pub fn new(theta: f64) -> Self {
        QubitBasis { theta }
    }

    pub fn z() -> Self {
        QubitBasis { theta: 0.0 }
    }

    pub fn x() -> Self {
        QubitBasis { theta: FRAC_PI_2 }
    }

    pub fn plus(&self) -> CVector {
        let (s, c) = (self.theta / 2.0).sin_cos();
        CVector::from_vec(vec![C64::new(c, 0.0), C64::new(s, 0.0)])
    }

    pub fn minus(&self) -> CVector {
        let (s, c) = (self.theta / 2.0).sin_cos();
        CVector::from_vec(vec![C64::new(-s, 0.0), C64::new(c, 0.0)])
    }

    /// `[("+", |+θ⟩), ("-", |−θ⟩)]`.
    pub fn labeled(&self) -> Vec<super::LabeledVector> {
        vec![
            super::LabeledVector::new(PLUS_LABEL, self.plus()),
            super::LabeledVector::new(MINUS_LABEL, self.minus()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_column_completes_to_identity() {
        let u = complete_isometry(&[basis_vector(2, 0)], 2).unwrap();
        assert_abs_diff_eq!((u - CMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn swapped_columns_complete_to_flip() {
        let u = complete_isometry(&[basis_vector(2, 1), basis_vector(2, 0)], 2).unwrap();
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let flip = CMatrix::from_row_slice(2, 2, &[zero, one, one, zero]);
        assert_abs_diff_eq!((u - flip).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn completion_rejects_bad_input() {
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(matches!(complete_isometry(&[v], 2), Err(QStateError::NotOrthonormal(_))));
        let cols = vec![basis_vector(2, 0), basis_vector(2, 1), basis_vector(2, 0)];
        assert!(matches!(complete_isometry(&cols, 2), Err(QStateError::TooManyColumns { .. })));
    }

    #[test]
    fn completion_skips_dependent_seeds() {
        // e_0 lies in the span of the inputs, so completion starts at e_1.
        let h = 1.0 / 2f64.sqrt();
        let a = CVector::from_vec(vec![C64::new(h, 0.0), C64::new(h, 0.0), C64::new(0.0, 0.0)]);
        let b = CVector::from_vec(vec![C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, 0.0)]);
        let u = complete_isometry(&[a, b], 3).unwrap();
        assert!(unitarity_defect(&u) < 1e-12);
        assert_abs_diff_eq!(u[(2, 2)].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn qubit_basis_is_orthonormal() {
        for k in 0..64 {
            let b = QubitBasis::new(k as f64 * 0.1 - 3.0);
            assert!(orthonormality_defect(&[b.plus(), b.minus()]) < 1e-15);
        }
        let x = QubitBasis::x().plus();
        assert_abs_diff_eq!(x[0].re, x[1].re, epsilon = 1e-15);
    }

    #[test]
    fn mapping_sends_inputs_to_outputs() {
        let ins = [basis_vector(4, 0), basis_vector(4, 1)];
        let outs = [basis_vector(4, 3), basis_vector(4, 2)];
        let u = unitary_mapping(&ins, &outs, 4).unwrap();
        assert!(unitarity_defect(&u) < 1e-12);
        assert_abs_diff_eq!((&u * &ins[0] - &outs[0]).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((&u * &ins[1] - &outs[1]).norm(), 0.0, epsilon = 1e-12);
    }
}
