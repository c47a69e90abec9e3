//! Federated unsupervised node embeddings with differential privacy.
//!
//! Vertices live on separate devices that only know their own neighbor
//! lists. A coordinating server builds a hierarchy-context tree (HCT) from
//! noised per-bin degree vectors, devices then run sequence-encoded random
//! walks hop by hop with an occasional two-hop shortcut that trades walk
//! fidelity for fewer messages, and the uploaded encoded walks train a
//! SkipGram model exactly as in centralized DeepWalk.
//!
//! Modules mirror the pipeline stages:
//! - [`graph`]: edge-list loading, per-device views, label sets
//! - [`privacy`]: seeded randomness, Laplace noise, the exponential mechanism
//! - [`hct`]: degree vectors, DTW dissimilarity, agglomerative tree building
//! - [`walker`]: walk simulation, sequence encoder, two-hop predictor,
//!   message accounting and its closed-form expectation
//! - [`embedding`]: SkipGram with negative sampling
//! - [`eval`]: one-vs-rest logistic regression, micro/macro F1
//! - [`federation`]: the server/device protocols as explicit message
//!   exchanges, plus the end-to-end pipeline

pub mod embedding;
pub mod error;
pub mod eval;
pub mod federation;
pub mod graph;
pub mod hct;
pub mod privacy;
pub mod walker;

pub use error::{Error, Result};
pub use federation::{run_pipeline, PipelineReport, RunConfig};
pub use graph::{Graph, LabelSet};
