use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::QStateError;

/// A named tensor factor with a labeled computational basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub name: String,
    pub dimension: usize,
    pub basis_labels: Vec<String>,
}

impl SubsystemSpec {
    pub fn new<S: Into<String>>(name: S, labels: &[&str]) -> Self {
        SubsystemSpec {
            name: name.into(),
            dimension: labels.len(),
            basis_labels: labels.iter().map(|l| l.to_string()).collect(),
        }
    }

    /// Qubit whose basis is labeled `"0"`, `"1"`.
    pub fn qubit<S: Into<String>>(name: S) -> Self {
        Self::new(name, &["0", "1"])
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.basis_labels.iter().position(|l| l == label)
    }

    fn check(&self) -> Result<(), QStateError> {
        if self.dimension == 0 {
            return Err(QStateError::ZeroDimension(self.name.clone()));
        }
        if self.basis_labels.len() != self.dimension {
            return Err(QStateError::LabelCount {
                name: self.name.clone(),
                labels: self.basis_labels.len(),
                dimension: self.dimension,
            });
        }
        let mut seen = HashSet::new();
        for label in &self.basis_labels {
            if !seen.insert(label.as_str()) {
                return Err(QStateError::DuplicateLabel {
                    name: self.name.clone(),
                    label: label.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Ordered list of subsystems. Amplitude indices are row-major over the
/// declared order: the first subsystem is the most significant digit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SubsystemSpec>", into = "Vec<SubsystemSpec>")]
pub struct Register {
    subsystems: Vec<SubsystemSpec>,
    strides: Vec<usize>,
    total: usize,
}

/// Index bookkeeping for one tensor factor (an ordered target list) of a
/// register.
#[derive(Clone, Debug)]
pub(crate) struct FactorLayout {
    /// Offset of each target configuration, row-major over the targets in
    /// the order they were requested.
    pub offsets: Vec<usize>,
    /// Full index of every complement configuration with all target digits
    /// at zero.
    pub bases: Vec<usize>,
}

impl FactorLayout {
    pub fn dimension(&self) -> usize {
        self.offsets.len()
    }
}

/// All sums `Σ digit_k * stride_k` over the mixed-radix digits, row-major.
fn digit_offsets(parts: &[(usize, usize)]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &(dim, stride) in parts {
        let mut next = Vec::with_capacity(out.len() * dim);
        for &base in &out {
            for d in 0..dim {
                next.push(base + d * stride);
            }
        }
        out = next;
    }
    out
}

impl Register {
    pub fn new(subsystems: Vec<SubsystemSpec>) -> Result<Self, QStateError> {
        let mut names = HashSet::new();
        for spec in &subsystems {
            spec.check()?;
            if !names.insert(spec.name.as_str()) {
                return Err(QStateError::DuplicateSubsystem(spec.name.clone()));
            }
        }
        let mut strides = vec![0; subsystems.len()];
        let mut acc = 1usize;
        for (i, spec) in subsystems.iter().enumerate().rev() {
            strides[i] = acc;
            acc *= spec.dimension;
        }
        Ok(Register {
            subsystems,
            strides,
            total: acc,
        })
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.subsystems
    }

    pub fn total_dimension(&self) -> usize {
        self.total
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.name == name)
    }

    pub fn subsystem(&self, name: &str) -> Option<&SubsystemSpec> {
        self.subsystems.iter().find(|s| s.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    /// Product of the dimensions of the named subsystems.
    pub fn factor_dimension<S: AsRef<str>>(&self, targets: &[S]) -> Result<usize, QStateError> {
        targets.iter().try_fold(1usize, |acc, t| {
            let name = t.as_ref();
            self.subsystem(name)
                .map(|s| acc * s.dimension)
                .ok_or_else(|| QStateError::UnknownSubsystem(name.to_string()))
        })
    }

    pub(crate) fn layout<S: AsRef<str>>(&self, targets: &[S]) -> Result<FactorLayout, QStateError> {
        if targets.is_empty() {
            return Err(QStateError::NoTargets);
        }
        let mut picked = vec![false; self.subsystems.len()];
        let mut target_parts = Vec::with_capacity(targets.len());
        for t in targets {
            let name = t.as_ref();
            let pos = self
                .position(name)
                .ok_or_else(|| QStateError::UnknownSubsystem(name.to_string()))?;
            if picked[pos] {
                return Err(QStateError::DuplicateTarget(name.to_string()));
            }
            picked[pos] = true;
            target_parts.push((self.subsystems[pos].dimension, self.strides[pos]));
        }
        let rest_parts: Vec<_> = (0..self.subsystems.len())
            .filter(|&i| !picked[i])
            .map(|i| (self.subsystems[i].dimension, self.strides[i]))
            .collect();
        Ok(FactorLayout {
            offsets: digit_offsets(&target_parts),
            bases: digit_offsets(&rest_parts),
        })
    }

    /// Full index of a configuration given one label per subsystem.
    pub fn index_of(&self, labels: &[&str]) -> Result<usize, QStateError> {
        if labels.len() != self.subsystems.len() {
            return Err(QStateError::DimensionMismatch {
                rows: labels.len(),
                cols: 1,
                expected: self.subsystems.len(),
            });
        }
        let mut index = 0;
        for ((spec, stride), label) in self.subsystems.iter().zip(&self.strides).zip(labels) {
            let digit = spec.label_index(label).ok_or_else(|| QStateError::UnknownLabel {
                name: spec.name.clone(),
                label: label.to_string(),
            })?;
            index += digit * stride;
        }
        Ok(index)
    }
}

impl TryFrom<Vec<SubsystemSpec>> for Register {
    type Error = QStateError;

    fn try_from(value: Vec<SubsystemSpec>) -> Result<Self, Self::Error> {
        Register::new(value)
    }
}

impl From<Register> for Vec<SubsystemSpec> {
    fn from(value: Register) -> Self {
        value.subsystems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_are_row_major() {
        let reg = Register::new(vec![
            SubsystemSpec::qubit("a"),
            SubsystemSpec::new("b", &["x", "y", "z"]),
            SubsystemSpec::qubit("c"),
        ])
        .unwrap();
        assert_eq!(reg.total_dimension(), 12);
        assert_eq!(reg.index_of(&["1", "y", "0"]).unwrap(), 6 + 2);
        assert_eq!(reg.index_of(&["0", "z", "1"]).unwrap(), 4 + 1);
    }

    #[test]
    fn layout_respects_requested_target_order() {
        let reg = Register::new(vec![SubsystemSpec::qubit("a"), SubsystemSpec::qubit("b")]).unwrap();
        let ab = reg.layout(&["a", "b"]).unwrap();
        let ba = reg.layout(&["b", "a"]).unwrap();
        assert_eq!(ab.offsets, vec![0, 1, 2, 3]);
        assert_eq!(ba.offsets, vec![0, 2, 1, 3]);
        assert_eq!(ab.bases, vec![0]);
        let a = reg.layout(&["a"]).unwrap();
        assert_eq!(a.offsets, vec![0, 2]);
        assert_eq!(a.bases, vec![0, 1]);
    }

    #[test]
    fn rejects_bad_specs() {
        let dup = Register::new(vec![SubsystemSpec::qubit("a"), SubsystemSpec::qubit("a")]);
        assert_eq!(dup, Err(QStateError::DuplicateSubsystem("a".into())));
        let labels = Register::new(vec![SubsystemSpec::new("a", &["0", "0"])]);
        assert!(matches!(labels, Err(QStateError::DuplicateLabel { .. })));
        let zero = Register::new(vec![SubsystemSpec::new("a", &[])]);
        assert!(matches!(zero, Err(QStateError::ZeroDimension(_))));
        let count = Register::new(vec![SubsystemSpec {
            name: "a".into(),
            dimension: 3,
            basis_labels: vec!["0".into()],
        }]);
        assert!(matches!(count, Err(QStateError::LabelCount { .. })));
    }

    #[test]
    fn duplicate_target_is_rejected() {
        let reg = Register::new(vec![SubsystemSpec::qubit("a"), SubsystemSpec::qubit("b")]).unwrap();
        assert!(matches!(reg.layout(&["a", "a"]), Err(QStateError::DuplicateTarget(_))));
        assert!(matches!(reg.layout::<&str>(&[]), Err(QStateError::NoTargets)));
        assert!(matches!(reg.layout(&["q"]), Err(QStateError::UnknownSubsystem(_))));
    }
}
