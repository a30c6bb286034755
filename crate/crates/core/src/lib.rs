//! Graph information-bottleneck classification of brain connectivity graphs.
//!
//! Per-subject correlation matrices become thresholded graphs
//! ([`graph_data`]). A subgraph generator ([`subgraph`]) assigns every node a
//! probability of belonging to the informative subgraph, a GIN encoder with
//! second-order pooling ([`gnn`]) embeds both the full graph and the
//! probability-masked subgraph, and training ([`training`]) minimizes
//! cross-entropy on the subgraph embedding plus a matrix-based Rényi
//! mutual-information penalty ([`renyi`]) between the two embeddings.
//! Node probabilities averaged over a cohort give a biomarker ranking, and
//! [`topology`] supplies graph metrics with group statistics.

pub mod autodiff;
pub mod checkpoint;
pub mod error;
pub mod gnn;
pub mod graph_data;
pub mod renyi;
pub mod subgraph;
pub mod topology;
pub mod training;

pub use autodiff::{Tape, Tensor, Var};
pub use error::{Error, Result};
pub use graph_data::{BrainGraph, ConnectivityMatrix, Dataset};
pub use subgraph::{NodeAssignment, RankedNode};
pub use training::{ModelParams, TrainingConfig};
