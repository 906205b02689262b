//! Core algorithms for sequence design on coarse-grained nucleic-acid backbones.
//!
//! Everything in this crate is pure computation over heap buffers: a small
//! reverse-mode autodiff engine with Adam ([`tensor`]), geometric graph
//! featurization of 3-bead backbones ([`featurize`]), a hypergraph
//! convolution encoder ([`hypergraph`]), attention-based feature embedding
//! ([`attention`]), an autoregressive geometric-vector-perceptron decoder
//! ([`decoder`]), training losses and cluster-based dataset splitting
//! ([`loss`], [`cluster`]), and structure/sequence quality metrics
//! ([`metrics`]).
//!
//! The crate is `no_std`-compatible (`alloc` required); enable the `libm`
//! feature when building without `std` so float transcendentals resolve.
//! File formats, the CLI and the training loop live in the companion
//! `hyperrna` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("hyperrna-core needs either the `std` or the `libm` feature for float math");

pub mod attention;
pub mod backbone;
pub mod cluster;
pub mod decoder;
pub mod featurize;
pub mod geom;
pub mod gradcheck;
pub mod hypergraph;
pub mod loss;
mod mathf;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tensor;




pub use backbone::{BackboneError, ChainKind, CoarseBackbone};
pub use cluster::{cluster_split, greedy_clusters, DatasetSplit};
pub use featurize::{FeatureConfig, FeatureError, GeometricGraph};
pub use metrics::{kabsch_align, lddt, perplexity, recovery, sequence_diversity};
pub use model::{ModelConfig, ModelError, ModelParams};
pub use rng::Xoshiro256StarStar;
pub use tensor::{AdamConfig, AdamState, Tape, Tensor, TensorError, Var};
