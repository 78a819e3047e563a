//! Sparsity-penalized feature selection and linear discriminant training.
//!
//! The crate centers on one optimization problem: fit a linear discriminant
//! `g(x) = w0 + w . x` to labelled samples by driving `Y a` towards a target
//! margin vector `b`, while keeping the weight vector `a = (w0, w)` sparse.
//! Three solver families attack the sparse fit (matching pursuit, orthogonal
//! matching pursuit, and an l1-penalized proximal descent), an exhaustive
//! enumeration oracle certifies them on small instances, and a sparse
//! Ho-Kashyap loop adapts the margins so that separable data ends up
//! separated.
//!
//! On top of the solvers sits a face-pair pipeline: Gabor magnitude features
//! extracted on a coarse grid, intra/extra-personal difference pairs, and
//! nearest-neighbour / modified-maximum / Fisher classifiers over the
//! selected components.
//!
//! Every run is deterministic: all randomness flows through [`rng::SplitMix64`]
//! with caller-supplied seeds, and artifacts are byte-identical across reruns.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release --example omp_vs_oracle
//! cargo run --release --example l1_regularization_path
//! cargo run --release --example shk_margins
//! cargo run --release --example fisher_equivalence
//! cargo run --release --example gabor_bank_info
//! cargo run --release --example face_pipeline
//! ```

pub mod classifiers;
pub mod cli;
pub mod error;
pub mod gabor;
mod linalg;
pub mod pairs;
pub mod pgm;
pub mod rng;
pub mod shk;
pub mod solvers;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AugmentedFeatureMatrix, AugmentedSample, FeatureVector, Label, MarginVector, SparseSolution,
    WeightVector,
};
