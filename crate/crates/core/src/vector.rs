//! Dense embedding vectors and the cosine measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A fixed-dimension embedding. Entries are finite; the dimension is the
/// length of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding must have at least one dimension".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("embedding entry {i} is not finite")));
        }
        Ok(EmbeddingVector { values })
    }

    /// Scales to unit L2 norm.
    pub fn normalized(values: Vec<T>) -> Result<Self> {
        let mut v = Self::new(values)?;
        let n = v.norm();
        if n == T::zero() {
            return Err(Error::ZeroVector);
        }
        v.values.iter_mut().for_each(|x| *x = *x / n);
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn scaled(&self, c: T) -> Self {
        EmbeddingVector {
            values: self.values.iter().map(|&x| x * c).collect(),
        }
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] = acc[i] + x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &EmbeddingVector<T>, v: &EmbeddingVector<T>) -> Result<T> {
    cosine_slices(u.values(), v.values())
}

pub fn cosine_slices<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let nu2 = dot(u, u);
    let nv2 = dot(v, v);
    if nu2 == T::zero() || nv2 == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(unit_cosine(dot(u, v), nu2, nv2))
}

/// `dot / sqrt(|u|² |v|²)`; for `u == v` this is exactly 1.
#[inline]
pub(crate) fn unit_cosine<T: Scalar>(dot_uv: T, nu2: T, nv2: T) -> T {
    clamp_unit(dot_uv / (nu2 * nv2).sqrt())
}

#[inline]
fn clamp_unit<T: Scalar>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> EmbeddingVector<f64> {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let a = v(&[0.3, -1.7, 2.2]);
        assert_eq!(cosine(&a, &a).unwrap(), 1.0);
        let expected = 32.0 / (14.0f64 * 77.0).sqrt();
        let got = cosine(&v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.974_631_846_197_076_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine(&v(&[1.0, 2.0]), &v(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(matches!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])), Err(Error::ZeroVector)));
    }

    #[test]
    fn single_precision_works_too() {
        let a = EmbeddingVector::<f32>::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = EmbeddingVector::<f32>::new(vec![4.0, 5.0, 6.0]).unwrap();
        assert!((cosine(&a, &b).unwrap() - 0.974_631_8).abs() < 1e-6);
    }

    #[test]
    fn construction_rejects_bad_values() {
        assert!(EmbeddingVector::<f64>::new(vec![]).is_err());
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(matches!(EmbeddingVector::normalized(vec![0.0f64; 4]), Err(Error::ZeroVector)));
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_bounded(
            pair in (1usize..64).prop_flat_map(|d| (
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
            ))
        ) {
            let (a, b) = pair;
            prop_assume!(a.iter().any(|x| *x != 0.0) && b.iter().any(|x| *x != 0.0));
            let (a, b) = (v(&a), v(&b));
            let ab = cosine(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine(&b, &a).unwrap());
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn normalized_has_unit_norm(xs in proptest::collection::vec(-1e3f64..1e3, 1..400)) {
            prop_assume!(xs.iter().any(|x| x.abs() > 1e-9));
            let n = EmbeddingVector::normalized(xs).unwrap().norm();
            prop_assert!((n - 1.0).abs() <= 1e-9);
        }
    }
}
