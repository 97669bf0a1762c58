//! Spectral sparsification of magnetic (U(1)-connection) graph Laplacians.
//!
//! A connection graph carries a phase angle on every oriented edge, conjugated
//! under orientation flip. Its magnetic Laplacian is a Hermitian PSD matrix
//! whose least eigenvector solves a relaxation of angular synchronization.
//! This crate builds sparse spectral approximations of the (regularized)
//! magnetic Laplacian by sampling multi-type spanning forests (spanning
//! subgraphs whose components are trees or cycle-rooted trees) from a
//! determinantal point process over edges, using a cycle-popping random walk.
//!
//! The main pieces:
//!
//! * [`graph`]: connection graphs, edge-list I/O, holonomy of cycles.
//! * [`laplacian`]: magnetic/combinatorial Laplacian and incidence operators.
//! * [`generators`]: seeded random instances (ER, MUN, ERO, Barbell).
//! * [`sampler`]: cycle-popping, Wilson's algorithm, i.i.d. edge baseline.
//! * [`oracle`]: exact small-scale ground truth via kernels and enumeration.
//! * [`leverage`]: exact, uniform and Johnson-Lindenstrauss leverage scores.
//! * [`sparsifier`]: batch estimators, batch-size bound, sparse Cholesky.
//! * [`solvers`]: preconditioned CG, condition estimates, least eigenpairs.
//! * [`syncrank`]: ranking from pairwise comparisons.

pub mod demo;
pub mod dense;
pub mod error;
pub mod generators;
pub mod graph;
pub mod laplacian;
pub mod leverage;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod solvers;
pub mod sparsifier;
pub mod syncrank;

pub use error::{Error, Result};
pub use graph::ConnectionGraph;
pub use laplacian::{IncidenceOperator, MagneticLaplacian};
pub use sampler::{Mtsf, WalkStats};
