//! Soft clustering of reduced document embeddings.

mod gmm;
mod kmeans;

pub use gmm::{
    fit_gmm, fit_gmm_with, original_space_centroids, parameter_count, select_k, select_k_with,
    ClusterCentroids, Criterion, DocumentTopicMatrix, GmmModel, GmmOptions, KScore,
};
pub use kmeans::{kmeans, KMeansResult};
