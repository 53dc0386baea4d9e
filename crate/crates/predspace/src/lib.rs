//! Classifiers as points in prediction space.
//!
//! A model evaluated on `N` fixed samples with `C` classes is a point in
//! the `N(C-1)`-dimensional product of probability simplices. This crate
//! measures intensive distances between such points, reindexes training
//! trajectories by geodesic progress, embeds distance matrices isometrically
//! into Minkowski space (InPCA and relatives), aggregates models through
//! centroids, clusters trajectories, and ships a small self-contained
//! teacher-student trainer that generates desk-scale trajectory corpora.
//!
//! Start with the runnable examples: each demonstrates one major capability
//! end to end on synthetic data (`cargo run --release --example
//! inpca_embedding`, `... geodesic_progress`, `... trajectory_clustering`,
//! and so on). The `predspace` binary wires the same pipeline together for
//! on-disk corpora.

pub mod corpus;
pub mod error;
pub mod model;

pub mod centroids;
pub mod cli;
pub mod cluster;
pub mod format;
pub mod metrics;
pub mod report;
pub mod synth;

pub mod embedding;
pub mod geometry;
pub mod trajectory;

pub use error::{Error, Result};
pub use metrics::{DistanceKind, DistanceMatrix};
pub use model::{
    ignorance, truth, Checkpoint, ConfigTag, LabelVector, PredictionTensor, SpecialPoint,
    Trajectory,
};
