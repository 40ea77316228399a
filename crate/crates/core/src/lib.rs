//! Graph-based disentanglement at desk scale.
//!
//! Two branches feed one weighted attribute graph: a beta-VAE with a
//! density-ratio discriminator learns latent factors ([`vae`]), and an ordinal
//! scorer (a noisy oracle or a remote multimodal model) grades attributes so
//! that pairwise Somers' D statistics ([`relranker`]) can seed the directed
//! adjacency. A small GCN ([`disgraph`]) refines that adjacency during training
//! and the decoder consumes relation-aware latents `z (A + I)`.
//!
//! [`synthgen`] renders a synthetic corpus with known correlated factors and
//! [`pipeline`] wires the stages together behind the `gem` command line.

pub mod disgraph;
pub mod error;
pub mod imageio;
pub mod kv;
pub mod numcore;
pub mod pipeline;
pub mod relranker;
pub mod synthgen;
pub mod vae;

pub use error::{Error, Result};
pub use numcore::{AdamConfig, Matrix, ParameterSet, Rng, Tape, Var};
