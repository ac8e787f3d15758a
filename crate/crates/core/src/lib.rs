//! Use Case Map scenario specifications turned into hierarchical Markov usage
//! models, with importance analysis of scenarios, responsibilities, stubs,
//! plug-ins and components.
//!
//! The pipeline is: [`ingest`] the JSON files, [`model::validate_model`],
//! [`usage::convert`] and [`usage::flatten`], resolve scenarios with
//! [`scenario::resolve_scenario`], then compute an
//! [`importance::ImportanceReport`]. [`simulate`] provides seeded random
//! walks that estimate the same quantities.

pub mod cli;
pub mod fixtures;
pub mod format;
pub mod importance;
pub mod ingest;
pub mod model;
pub mod scenario;
pub mod simulate;
pub mod usage;
