//! Macroscopic mode hierarchy of a multimodal transit system, computed from
//! smart-card trip chains.
//!
//! Each transfer inside a chain is labelled ascending or descending by where
//! it falls relative to the chain's distance midpoint. Counting transfers per
//! ordered mode pair and phase yields directional rates, whose antisymmetric
//! parts score how strongly each mode sits "above" the others.
//!
//! Pipeline: [`ingest`] → [`model::classify_transfers`] →
//! [`hierarchy::PhaseCounts`] → [`hierarchy::analyze`]. [`zonal`] repeats the
//! analysis per origin→destination zone pair and [`synth`] generates corpora
//! with a planted hierarchy.

pub mod cli;
pub mod hierarchy;
pub mod ingest;
pub mod model;
pub mod synth;
pub mod zonal;

pub use hierarchy::{analyze, HierarchyConfig, HierarchyResult, PhaseCounts};
pub use model::{Leg, Mode, ModeId, ModeRegistry, Phase, Transfer, TripChain};
