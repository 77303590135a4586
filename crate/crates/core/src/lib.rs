//! Embedding-space topic modelling.
//!
//! Documents and words live in one embedding space. Document vectors are
//! reduced ([`reduction`]), softly clustered with a Gaussian mixture
//! ([`clustering`]), and each cluster's centroid in the original space is
//! described by its most similar candidate words ([`topics`]). The
//! [`metrics`] module scores topic sets and [`validation`] checks the
//! intruder metrics against annotated word-intrusion tasks.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for common use.

#![allow(clippy::needless_range_loop)]

pub mod clustering;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod reduction;
pub mod scalar;
pub mod topics;
pub mod validation;
pub mod vector;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type EmbeddingSet64 = io::EmbeddingSet<f64>;
pub type EmbeddingSet32 = io::EmbeddingSet<f32>;
pub type GmmModel64 = clustering::GmmModel<f64>;
pub type GmmModel32 = clustering::GmmModel<f32>;
pub type DocumentTopicMatrix64 = clustering::DocumentTopicMatrix<f64>;
pub type ClusterCentroids64 = clustering::ClusterCentroids<f64>;
pub type ReductionModel64 = reduction::ReductionModel<f64>;
pub type CandidateVocabulary64 = topics::CandidateVocabulary<f64>;
pub type Topic64 = topics::Topic<f64>;
pub type TopicSet64 = topics::TopicSet<f64>;
pub type TopicSet32 = topics::TopicSet<f32>;
pub type StopwordCentroid64 = vector::StopwordCentroid<f64>;
