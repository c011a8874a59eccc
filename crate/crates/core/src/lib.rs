//! Multi-hop fact verification over annotated evidence chains.
//!
//! The crate is organised around the pipeline stages:
//!
//! - [`corpus`]: canonical data model, dataset adapters, chain splitting, statistics.
//! - [`perturb`]: even-split and adversarial (named-entity overlap) dataset builders.
//! - [`baselines`]: random and TF-IDF + Naive Bayes reference systems.
//! - [`encoder`]: node construction and the transformer sentence encoder.
//! - [`reasoner`]: node heads, label aggregation, extra-hop graph attention, evidence selection.
//! - [`train`]: losses, Adam, staged training regimes and checkpointing.
//! - [`evaluate`]: label/evidence metrics, FEVER score, sweeps, buckets and analyses.
//! - [`manifest`]: run manifests written next to every artifact.

pub mod autograd;
pub mod baselines;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluate;
pub mod manifest;
pub mod perturb;
pub mod reasoner;
pub mod rng;
pub mod text;
pub mod train;

pub use error::{Error, Result};

/// Seed used by every command unless overridden.
pub const DEFAULT_SEED: u64 = 42;
