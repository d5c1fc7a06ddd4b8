//! Observability and real-time failure detection for LLM multi-agent
//! systems.
//!
//! A run is an ordered stream of structured events ([`event`]) that either
//! arrives over HTTP ([`service`]) or is read from JSONL corpora
//! ([`corpus`]). The [`sim`] module generates labeled corpora with seven
//! injectable failure modes. Detection extracts per-agent numeric features
//! and LLM output texts ([`features`], [`embed`]), feeds them to
//! hand-written LSTM and feed-forward autoencoders ([`nn`]), and flags runs
//! whose reconstruction error exceeds a threshold calibrated for F1
//! ([`detector`]). Flagged runs can be classified and root-caused through a
//! chat backend ([`explain`]) and everything is measured in [`metrics`].
//!
//! Every seeded path is deterministic: the same corpus, config, and seed
//! reproduce identical models, scores, and explanations, bit for bit.

pub mod corpus;
pub mod detector;
pub mod embed;
pub mod event;
pub mod explain;
pub mod features;
pub mod metrics;
pub mod nn;
pub mod service;
pub mod sim;
