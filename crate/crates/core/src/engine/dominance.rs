use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Objective values of one solution, minimization orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(
            values.iter().all(|v| v.is_finite()),
            "objective values must be finite: {values:?}"
        );
        ObjectiveVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Pareto dominance without the length check; callers guarantee equal
    /// lengths.
    #[inline]
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        debug_assert_eq!(self.0.len(), other.0.len());
        let mut strictly_better = false;
        for (&a, &b) in self.0.iter().zip(&other.0) {
            if a > b {
                return false;
            }
            if a < b {
                strictly_better = true;
            }
        }
        strictly_better
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(values: Vec<f64>) -> Self {
        ObjectiveVector::new(values)
    }
}

impl std::ops::Index<usize> for ObjectiveVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `a` dominates `b`: no worse on every objective and strictly better on at
/// least one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "objective vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(a.dominates(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec())
    }

    #[test]
    fn weak_dominance_with_one_strict_component() {
        assert!(dominates(&ov(&[1.0, 2.0]), &ov(&[1.0, 3.0])).unwrap());
    }

    #[test]
    fn equal_vectors_do_not_dominate() {
        assert!(!dominates(&ov(&[1.0, 2.0]), &ov(&[1.0, 2.0])).unwrap());
    }

    #[test]
    fn incomparable_pair() {
        let a = ov(&[1.0, 5.0]);
        let b = ov(&[2.0, 3.0]);
        assert!(!dominates(&a, &b).unwrap());
        assert!(!dominates(&b, &a).unwrap());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let err = dominates(&ov(&[1.0]), &ov(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    fn vec3() -> impl Strategy<Value = ObjectiveVector> {
        prop::collection::vec(0i32..4, 3).prop_map(|v| ov(&v.iter().map(|&x| x as f64).collect::<Vec<_>>()))
    }

    proptest! {
        #[test]
        fn irreflexive(a in vec3()) {
            prop_assert!(!a.dominates(&a));
        }

        #[test]
        fn asymmetric(a in vec3(), b in vec3()) {
            prop_assert!(!(a.dominates(&b) && b.dominates(&a)));
        }

        #[test]
        fn transitive(a in vec3(), b in vec3(), c in vec3()) {
            if a.dominates(&b) && b.dominates(&c) {
                prop_assert!(a.dominates(&c));
            }
        }
    }
}
