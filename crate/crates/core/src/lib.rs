//! Engine for iterative business-model validation.
//!
//! A venture's business model is encoded against a layered design-choice
//! taxonomy ([`schema`]), grouped into archetypes with k-modes ([`cluster`]),
//! scored by tree ensembles and linear baselines ([`learn`]), judged by
//! mentors and crowds ([`judge`]) who are matched by expertise ([`assign`]),
//! and the machine and human predictions are fused by cross-validated
//! performance ([`fuse`]). [`qca`] implements fuzzy-set qualitative
//! comparative analysis for configurational studies.

pub mod assign;
pub mod cluster;
pub mod fuse;
pub mod judge;
pub mod learn;
pub mod pipeline;
pub mod qca;
pub mod schema;
pub mod seed;
pub mod synth;

pub use schema::{BusinessModel, FeatureRow, Taxonomy};
