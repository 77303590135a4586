//! Linear dimensionality reduction of document embeddings before clustering.
//!
//! [`Reducer`] is the extension point; [`Pca`] is the built-in
//! implementation. Only documents are reduced: word vectors and cluster
//! centroids stay in the original space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;
use crate::linalg::{symmetric_eigen, SquareMatrix};
use crate::scalar::Scalar;
use crate::vector::dot;

pub const DEFAULT_TARGET_DIM: usize = 5;

/// Anything that maps document embeddings into a lower-dimensional space.
pub trait Reducer<T: Scalar> {
    fn reduce(&self, docs: &EmbeddingSet<T>) -> Result<EmbeddingSet<T>>;
}

/// Principal component projection fitted on a document set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionModel<T> {
    mean: Vec<T>,
    basis: Vec<Vec<T>>,
    explained_variance_ratio: Vec<T>,
}

impl<T: Scalar> ReductionModel<T> {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Orthonormal principal axes, by decreasing variance.
    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    pub fn explained_variance_ratio(&self) -> &[T] {
        &self.explained_variance_ratio
    }

    pub fn project(&self, v: &[T]) -> Vec<T> {
        let centered: Vec<T> = v.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        self.basis.iter().map(|b| dot(b, &centered)).collect()
    }

    /// Maps reduced coordinates back into the input space.
    pub fn reconstruct(&self, coords: &[T]) -> Vec<T> {
        let mut out = self.mean.clone();
        for (c, b) in coords.iter().zip(&self.basis) {
            for (o, &x) in out.iter_mut().zip(b) {
                *o += *c * x;
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut entries = vec![LabelledVector {
            label: "mean".into(),
            vector: self.mean.iter().map(|v| v.as_f64()).collect(),
        }];
        entries.extend(self.basis.iter().enumerate().map(|(i, b)| LabelledVector {
            label: format!("component_{i}"),
            vector: b.iter().map(|v| v.as_f64()).collect(),
        }));
        let doc = ModelJson {
            dimension: self.input_dim(),
            entries,
            input_dimension: self.input_dim(),
            output_dimension: self.output_dim(),
            explained_variance_ratio: self
                .explained_variance_ratio
                .iter()
                .map(|v| v.as_f64())
                .collect(),
        };
        serde_json::to_string(&doc).map_err(|e| Error::Json(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelJson = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let mut it = doc.entries.iter();
        let mean = it
            .next()
            .filter(|e| e.label == "mean")
            .ok_or_else(|| Error::Json("first entry must be the mean".into()))?;
        let basis: Vec<Vec<T>> = it.map(|e| conv(&e.vector)).collect();
        if basis.len() != doc.output_dimension
            || doc.explained_variance_ratio.len() != doc.output_dimension
            || mean.vector.len() != doc.input_dimension
            || basis.iter().any(|b| b.len() != doc.input_dimension)
        {
            return Err(Error::Json("inconsistent reduction model".into()));
        }
        Ok(ReductionModel {
            mean: conv(&mean.vector),
            basis,
            explained_variance_ratio: conv(&doc.explained_variance_ratio),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LabelledVector {
    label: String,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    dimension: usize,
    entries: Vec<LabelledVector>,
    input_dimension: usize,
    output_dimension: usize,
    explained_variance_ratio: Vec<f64>,
}

/// Fits the top `target_dim` principal components of `docs`.
///
/// Each basis vector is signed so that its largest-magnitude component is
/// positive (first such component on ties).
pub fn fit_reduction<T: Scalar>(
    docs: &EmbeddingSet<T>,
    target_dim: usize,
) -> Result<ReductionModel<T>> {
    let m = docs.len();
    let l = docs.dimension();
    if m < 2 {
        return Err(Error::TooFewDocuments { needed: 2, got: m });
    }
    let limit = l.min(m);
    if target_dim == 0 || target_dim > limit {
        return Err(Error::TargetDimension {
            target: target_dim,
            limit,
        });
    }
    let rows: Vec<&[T]> = (0..m).map(|i| docs.vector(i)).collect();
    let mean = crate::vector::centroid(&rows)?;

    let mut cov = SquareMatrix::zeros(l);
    let mut centered = vec![T::zero(); l];
    for r in &rows {
        for (c, (&x, &mu)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
            *c = x - mu;
        }
        for i in 0..l {
            let ci = centered[i];
            if ci == T::zero() {
                continue;
            }
            for j in 0..=i {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = T::count(m - 1);
    for i in 0..l {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let total: T = (0..l).map(|i| cov[(i, i)]).sum();
    if total <= T::zero() || total.is_nan() {
        return Err(Error::ZeroVariance);
    }

    let (values, vectors) = symmetric_eigen(&cov);
    let mut basis = Vec::with_capacity(target_dim);
    let mut ratios = Vec::with_capacity(target_dim);
    for (val, mut v) in values.into_iter().zip(vectors).take(target_dim) {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[best].abs() {
                best = i;
            }
        }
        if v[best] < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        basis.push(v);
        ratios.push((val / total).max(T::zero()));
    }
    Ok(ReductionModel {
        mean,
        basis,
        explained_variance_ratio: ratios,
    })
}

/// Projects every vector in `vectors` onto the model's basis.
pub fn transform<T: Scalar>(
    model: &ReductionModel<T>,
    vectors: &EmbeddingSet<T>,
) -> Result<EmbeddingSet<T>> {
    if vectors.dimension() != model.input_dim() {
        return Err(Error::Dimensions {
            left: vectors.dimension(),
            right: model.input_dim(),
        });
    }
    vectors.map_vectors(model.output_dim(), |v| model.project(v))
}

/// PCA reducer to a fixed number of dimensions.
#[derive(Debug, Clone, Copy)]
pub struct Pca {
    pub target_dim: usize,
}

impl Default for Pca {
    fn default() -> Self {
        Pca {
            target_dim: DEFAULT_TARGET_DIM,
        }
    }
}

impl<T: Scalar> Reducer<T> for Pca {
    fn reduce(&self, docs: &EmbeddingSet<T>) -> Result<EmbeddingSet<T>> {
        let model = fit_reduction(docs, self.target_dim)?;
        transform(&model, docs)
    }
}
