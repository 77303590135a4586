//! Similarity and centroid arithmetic over embedding vectors.

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;
use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Dimensions { left: a, right: b })
    }
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    same_dim(a.len(), b.len())?;
    let (na2, nb2) = (dot(a, a), dot(b, b));
    if na2 == T::zero() || nb2 == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(cosine_with_sq_norms(a, na2, b, nb2))
}

/// Cosine similarity given precomputed nonzero squared norms.
#[inline]
pub(crate) fn cosine_with_sq_norms<T: Scalar>(a: &[T], na2: T, b: &[T], nb2: T) -> T {
    clamp_unit(dot(a, b) / (na2 * nb2).sqrt())
}

#[inline]
pub(crate) fn clamp_unit<T: Scalar>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

/// Component-wise arithmetic mean.
pub fn centroid<T: Scalar, V: AsRef<[T]>>(vectors: &[V]) -> Result<Vec<T>> {
    let first = vectors.first().ok_or(Error::EmptyInput)?.as_ref();
    let mut acc = vec![T::zero(); first.len()];
    for v in vectors {
        let v = v.as_ref();
        same_dim(first.len(), v.len())?;
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = T::count(vectors.len());
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// `(1/Z) * sum_i w_i v_i` with `Z` the number of vectors.
///
/// Weights must be non-negative and sum to one. The extra `1/Z` shrinks the
/// result but leaves every cosine against it unchanged.
pub fn weighted_centroid<T: Scalar, V: AsRef<[T]>>(vectors: &[V], weights: &[T]) -> Result<Vec<T>> {
    if vectors.len() != weights.len() {
        return Err(Error::Length(format!(
            "{} vectors, {} weights",
            vectors.len(),
            weights.len()
        )));
    }
    let first = vectors.first().ok_or(Error::EmptyInput)?.as_ref();
    let sum: T = weights.iter().copied().sum();
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
    if weights.iter().any(|w| *w < T::zero() || !w.is_finite()) || (sum - T::one()).abs() > tol {
        return Err(Error::WeightSum { sum: sum.as_f64() });
    }
    let mut acc = vec![T::zero(); first.len()];
    for (v, &w) in vectors.iter().zip(weights) {
        let v = v.as_ref();
        same_dim(first.len(), v.len())?;
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    let z = T::count(vectors.len());
    acc.iter_mut().for_each(|a| *a /= z);
    Ok(acc)
}

/// Mean embedding of all stopwords, the reference point for expressivity.
#[derive(Debug, Clone, PartialEq)]
pub struct StopwordCentroid<T>(Vec<T>);

impl<T: Scalar> StopwordCentroid<T> {
    pub fn from_vector(v: Vec<T>) -> Self {
        StopwordCentroid(v)
    }

    pub fn vector(&self) -> &[T] {
        &self.0
    }
}

pub fn stopword_centroid<T: Scalar>(stopwords: &EmbeddingSet<T>) -> Result<StopwordCentroid<T>> {
    if stopwords.is_empty() {
        return Err(Error::EmptyInput);
    }
    let rows: Vec<&[T]> = (0..stopwords.len()).map(|i| stopwords.vector(i)).collect();
    centroid(&rows).map(StopwordCentroid)
}
