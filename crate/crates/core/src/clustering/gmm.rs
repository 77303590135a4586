//! Full-covariance Gaussian mixture fitted by expectation maximisation.

use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use crate::error::{Error, Result};
use crate::io::EmbeddingSet;
use crate::linalg::{Cholesky, SquareMatrix};
use crate::scalar::Scalar;

/// EM settings. Defaults: tolerance 1e-4 on the per-document mean
/// log-likelihood, 1e-6 added to covariance diagonals, at most 100
/// iterations, K-Means initialisation with 10 restarts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub tol: f64,
    pub reg_covar: f64,
    pub max_iter: usize,
    pub kmeans_restarts: usize,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            tol: 1e-4,
            reg_covar: 1e-6,
            max_iter: 100,
            kmeans_restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GmmModel<T: Scalar> {
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub covariances: Vec<SquareMatrix<T>>,
    /// Total log-likelihood of the training documents under the final model.
    pub log_likelihood: T,
    /// Mean per-document log-likelihood at every E-step, final one last.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> GmmModel<T> {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Free parameters: weights, means and full covariances.
    pub fn parameter_count(&self) -> usize {
        parameter_count(self.k(), self.dim())
    }
}

pub fn parameter_count(k: usize, r: usize) -> usize {
    (k - 1) + k * r + k * r * (r + 1) / 2
}

/// Soft document-to-topic assignment; each row sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DocumentTopicMatrix<T: Scalar> {
    doc_ids: Vec<String>,
    k: usize,
    data: Vec<T>,
}

impl<T: Scalar> DocumentTopicMatrix<T> {
    pub fn new(doc_ids: Vec<String>, k: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != doc_ids.len() * k {
            return Err(Error::Length(format!(
                "{} values for {} x {k}",
                data.len(),
                doc_ids.len()
            )));
        }
        Ok(DocumentTopicMatrix { doc_ids, k, data })
    }

    pub fn rows(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    /// Index of the most responsible component per document.
    pub fn hard_assignments(&self) -> Vec<usize> {
        (0..self.rows())
            .map(|i| {
                let r = self.row(i);
                (0..self.k).fold(0, |b, j| if r[j] > r[b] { j } else { b })
            })
            .collect()
    }

    /// `doc_id,topic_0,...,topic_{K-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["doc_id".to_string()];
        header.extend((0..self.k).map(|j| format!("topic_{j}")));
        out.write_record(&header)?;
        for (i, id) in self.doc_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| v.as_f64().to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Params<T: Scalar> {
    weights: Vec<T>,
    means: Vec<Vec<T>>,
    covariances: Vec<SquareMatrix<T>>,
    factors: Vec<Cholesky<T>>,
}

fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

fn m_step<T: Scalar>(points: &[&[T]], resp: &[T], k: usize, reg: T) -> Result<Params<T>> {
    let n = points.len();
    let r = points[0].len();
    let tiny = T::epsilon() * T::lit(10.0);
    let mut nk = vec![tiny; k];
    for i in 0..n {
        for j in 0..k {
            nk[j] += resp[i * k + j];
        }
    }
    let mut means = vec![vec![T::zero(); r]; k];
    for (i, p) in points.iter().enumerate() {
        for j in 0..k {
            let w = resp[i * k + j];
            for (m, &x) in means[j].iter_mut().zip(p.iter()) {
                *m += w * x;
            }
        }
    }
    for j in 0..k {
        means[j].iter_mut().for_each(|m| *m /= nk[j]);
    }
    let mut covariances = Vec::with_capacity(k);
    let mut factors = Vec::with_capacity(k);
    let mut diff = vec![T::zero(); r];
    for j in 0..k {
        let mut cov = SquareMatrix::zeros(r);
        for (i, p) in points.iter().enumerate() {
            let w = resp[i * k + j];
            if w == T::zero() {
                continue;
            }
            for (d, (&x, &m)) in diff.iter_mut().zip(p.iter().zip(&means[j])) {
                *d = x - m;
            }
            for a in 0..r {
                let wa = w * diff[a];
                for b in 0..=a {
                    cov[(a, b)] += wa * diff[b];
                }
            }
        }
        for a in 0..r {
            for b in 0..=a {
                let v = cov[(a, b)] / nk[j];
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
            cov[(a, a)] += reg;
        }
        let f = Cholesky::new(&cov).ok_or(Error::SingularCovariance { component: j })?;
        covariances.push(cov);
        factors.push(f);
    }
    let total: T = nk.iter().copied().sum();
    let weights = nk.iter().map(|&v| v / total).collect();
    Ok(Params {
        weights,
        means,
        covariances,
        factors,
    })
}

/// Returns the mean log-likelihood and fills `resp` with posteriors.
fn e_step<T: Scalar>(points: &[&[T]], p: &Params<T>, resp: &mut [T]) -> T {
    let k = p.weights.len();
    let r = points[0].len();
    let log_2pi = T::lit((2.0 * std::f64::consts::PI).ln());
    let consts: Vec<T> = (0..k)
        .map(|j| p.weights[j].ln() - T::lit(0.5) * (T::count(r) * log_2pi + p.factors[j].log_det()))
        .collect();
    let mut scratch = Vec::with_capacity(r);
    let mut diff = vec![T::zero(); r];
    let mut row = vec![T::zero(); k];
    let mut total = T::zero();
    for (i, x) in points.iter().enumerate() {
        for j in 0..k {
            for (d, (&a, &m)) in diff.iter_mut().zip(x.iter().zip(&p.means[j])) {
                *d = a - m;
            }
            row[j] = consts[j] - T::lit(0.5) * p.factors[j].mahalanobis_sq(&diff, &mut scratch);
        }
        let norm = log_sum_exp(&row);
        total += norm;
        for j in 0..k {
            resp[i * k + j] = (row[j] - norm).exp();
        }
    }
    total / T::count(points.len())
}

/// Fits a `k`-component mixture with default [`GmmOptions`].
pub fn fit_gmm<T: Scalar>(
    reduced_docs: &EmbeddingSet<T>,
    k: usize,
    seed: u64,
) -> Result<(GmmModel<T>, DocumentTopicMatrix<T>)> {
    fit_gmm_with(reduced_docs, k, seed, &GmmOptions::default())
}

pub fn fit_gmm_with<T: Scalar>(
    reduced_docs: &EmbeddingSet<T>,
    k: usize,
    seed: u64,
    opts: &GmmOptions,
) -> Result<(GmmModel<T>, DocumentTopicMatrix<T>)> {
    let m = reduced_docs.len();
    if k == 0 {
        return Err(Error::Parameter("K must be positive".into()));
    }
    if k > m {
        return Err(Error::TooManyComponents { k, m });
    }
    let points: Vec<&[T]> = (0..m).map(|i| reduced_docs.vector(i)).collect();
    let reg = T::lit(opts.reg_covar);

    let init = kmeans(&points, k, seed, opts.kmeans_restarts);
    let mut resp = vec![T::zero(); m * k];
    for (i, &l) in init.labels.iter().enumerate() {
        resp[i * k + l] = T::one();
    }
    let mut params = m_step(&points, &resp, k, reg)?;

    let tol = T::lit(opts.tol);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut prev = T::neg_infinity();
    for it in 1..=opts.max_iter {
        let ll = e_step(&points, &params, &mut resp);
        trace.push(ll);
        params = m_step(&points, &resp, k, reg)?;
        iterations = it;
        if (ll - prev).abs() < tol {
            converged = true;
            break;
        }
        prev = ll;
    }
    let ll = e_step(&points, &params, &mut resp);
    trace.push(ll);

    let model = GmmModel {
        weights: params.weights,
        means: params.means,
        covariances: params.covariances,
        log_likelihood: ll * T::count(m),
        trace,
        iterations,
        converged,
    };
    let theta = DocumentTopicMatrix::new(reduced_docs.labels().to_vec(), k, resp)?;
    Ok((model, theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub log_likelihood: f64,
    pub parameters: usize,
    pub aic: f64,
    pub bic: f64,
}

impl KScore {
    pub fn value(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Aic => self.aic,
            Criterion::Bic => self.bic,
        }
    }
}

/// Fits every K in `k_range` (component seed `seed + K`) and returns the
/// criterion minimiser, smallest K on ties, with all scores.
pub fn select_k<T: Scalar>(
    reduced_docs: &EmbeddingSet<T>,
    k_range: RangeInclusive<usize>,
    criterion: Criterion,
    seed: u64,
) -> Result<(usize, Vec<KScore>)> {
    select_k_with(
        reduced_docs,
        k_range,
        criterion,
        seed,
        &GmmOptions::default(),
    )
}

pub fn select_k_with<T: Scalar>(
    reduced_docs: &EmbeddingSet<T>,
    k_range: RangeInclusive<usize>,
    criterion: Criterion,
    seed: u64,
    opts: &GmmOptions,
) -> Result<(usize, Vec<KScore>)> {
    let m = reduced_docs.len();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || lo > hi || hi > m {
        return Err(Error::Parameter(format!(
            "k range {lo}..={hi} not within [1, {m}]"
        )));
    }
    let r = reduced_docs.dimension();
    let scores: Vec<KScore> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let (model, _) = fit_gmm_with(reduced_docs, k, seed.wrapping_add(k as u64), opts)
                .map_err(|e| Error::SelectK {
                    k,
                    source: Box::new(e),
                })?;
            let ll = model.log_likelihood.as_f64();
            let p = parameter_count(k, r);
            Ok(KScore {
                k,
                log_likelihood: ll,
                parameters: p,
                aic: 2.0 * p as f64 - 2.0 * ll,
                bic: p as f64 * (m as f64).ln() - 2.0 * ll,
            })
        })
        .collect::<Result<_>>()?;
    let best = scores.iter().fold(&scores[0], |b, s| {
        if s.value(criterion) < b.value(criterion) {
            s
        } else {
            b
        }
    });
    Ok((best.k, scores))
}

/// Centroids in the original embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCentroids<T> {
    vectors: Vec<Vec<T>>,
}

impl<T: Scalar> ClusterCentroids<T> {
    pub fn new(vectors: Vec<Vec<T>>) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyInput)?;
        if vectors.iter().any(|v| v.len() != first.len()) {
            return Err(Error::Length("centroids differ in dimension".into()));
        }
        Ok(ClusterCentroids { vectors })
    }

    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn get(&self, k: usize) -> &[T] {
        &self.vectors[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.vectors.iter().map(Vec::as_slice)
    }

    pub fn to_embedding_set(&self) -> EmbeddingSet<T> {
        EmbeddingSet::from_entries(
            self.dim(),
            self.vectors
                .iter()
                .enumerate()
                .map(|(k, v)| (format!("topic_{k}"), v.clone())),
        )
        .expect("centroids are finite and uniquely labelled")
    }
}

/// Responsibility-weighted means of the original document vectors.
pub fn original_space_centroids<T: Scalar>(
    theta: &DocumentTopicMatrix<T>,
    original_docs: &EmbeddingSet<T>,
) -> Result<ClusterCentroids<T>> {
    if theta.rows() != original_docs.len() {
        return Err(Error::Length(format!(
            "theta has {} rows, {} documents given",
            theta.rows(),
            original_docs.len()
        )));
    }
    if let Some(i) = (0..theta.rows()).find(|&i| theta.doc_ids()[i] != original_docs.label(i)) {
        return Err(Error::Length(format!(
            "document order differs at row {i}: {:?} vs {:?}",
            theta.doc_ids()[i],
            original_docs.label(i)
        )));
    }
    let l = original_docs.dimension();
    let mut out = Vec::with_capacity(theta.k());
    for j in 0..theta.k() {
        let mut acc = vec![T::zero(); l];
        let mut mass = T::zero();
        for i in 0..theta.rows() {
            let w = theta.row(i)[j];
            mass += w;
            for (a, &x) in acc.iter_mut().zip(original_docs.vector(i)) {
                *a += w * x;
            }
        }
        if mass.as_f64() < 1e-12 {
            return Err(Error::EmptyComponent {
                component: j,
                mass: mass.as_f64(),
            });
        }
        acc.iter_mut().for_each(|a| *a /= mass);
        out.push(acc);
    }
    ClusterCentroids::new(out)
}
