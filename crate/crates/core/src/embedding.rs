use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `values` to unit Euclidean norm. Zero vectors are rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty embedding".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidArgument(
                "embedding has zero or non-finite norm".into(),
            ));
        }
        Ok(Embedding(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; equals the dot product for unit vectors.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `1 - cosine`, in `[0, 2]`.
    pub fn cosine_distance(&self, other: &Embedding) -> f64 {
        (1.0 - self.cosine(other)).clamp(0.0, 2.0)
    }
}

/// Checks that every vector has dimension `expected` (or the first one's).
pub fn check_dims<'a>(
    vectors: impl IntoIterator<Item = &'a Embedding>,
    expected: Option<usize>,
) -> Result<Option<usize>> {
    let mut dim = expected;
    for v in vectors {
        match dim {
            None => dim = Some(v.dim()),
            Some(d) if d != v.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: v.dim(),
                })
            }
            _ => {}
        }
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_zero_vector() {
        assert!(Embedding::new(vec![0.0, 0.0]).is_err());
        assert!(Embedding::new(vec![]).is_err());
    }

    #[test]
    fn dimension_check() {
        let a = Embedding::new(vec![1.0, 0.0]).unwrap();
        let b = Embedding::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            check_dims([&a, &b], None),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    proptest! {
        #[test]
        fn normalized_to_unit_norm(values in prop::collection::vec(-100.0f64..100.0, 1..64)) {
            prop_assume!(values.iter().any(|v| v.abs() > 1e-6));
            let e = Embedding::new(values).unwrap();
            prop_assert!((e.norm() - 1.0).abs() < 1e-6);
            prop_assert!((e.cosine(&e) - 1.0).abs() < 1e-9);
        }
    }
}
