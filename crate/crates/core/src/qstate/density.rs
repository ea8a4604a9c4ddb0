use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;

use super::{CMatrix, CVector, LabeledVector, QStateError, NORM_TOL};

const PSD_TOL: f64 = 1e-8;

/// Reduced (or pure) density operator on one tensor factor.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    /// Checks hermiticity, unit trace and positivity before accepting.
    pub fn new(entries: CMatrix) -> Result<Self, QStateError> {
        if !entries.is_square() {
            return Err(QStateError::DimensionMismatch {
                rows: entries.nrows(),
                cols: entries.ncols(),
                expected: entries.nrows(),
            });
        }
        let rho = DensityMatrix { entries };
        rho.check()?;
        Ok(rho)
    }

    pub(crate) fn from_entries_unchecked(entries: CMatrix) -> Self {
        DensityMatrix { entries }
    }

    pub fn from_pure(v: &CVector) -> Self {
        DensityMatrix {
            entries: v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            entries: CMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        // tr(ρρ) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨v|ρ|v⟩`.
    pub fn fidelity_with(&self, v: &CVector) -> f64 {
        v.dotc(&(&self.entries * v)).re
    }

    /// `tr(ρσ)`, real part.
    pub fn overlap(&self, other: &DensityMatrix) -> f64 {
        (&self.entries * &other.entries).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let eig = SymmetricEigen::new(self.entries.clone());
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let diff = &self.entries - self.entries.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Restriction to the span of the given basis indices, `P ρ P`.
    /// The result is not renormalized.
    pub fn restricted(&self, indices: &[usize]) -> CMatrix {
        CMatrix::from_fn(indices.len(), indices.len(), |i, j| {
            self.entries[(indices[i], indices[j])]
        })
    }

    pub fn check(&self) -> Result<(), QStateError> {
        if self.entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QStateError::NonFinite);
        }
        let herm = self.hermiticity_defect();
        if herm > NORM_TOL {
            return Err(QStateError::InvalidDensity(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > NORM_TOL {
            return Err(QStateError::InvalidDensity(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(QStateError::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

/// Label of the first candidate `c` with `⟨c|ρ|c⟩ ≥ 1 − tol`, provided
/// `tr ρ² ≥ 1 − tol`. Candidates are tried in the given order.
pub fn match_pure_record(rho: &DensityMatrix, candidates: &[LabeledVector], tol: f64) -> Option<String> {
    if rho.purity() < 1.0 - tol {
        return None;
    }
    candidates
        .iter()
        .find(|c| rho.fidelity_with(&c.vector) >= 1.0 - tol)
        .map(|c| c.label.clone())
}
