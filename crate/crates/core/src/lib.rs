//! Governance engine for layered evidence-synthesis projects.
//!
//! A project bundle is one JSON document holding a three-layer registry of
//! laws and abstractions, child-layer projects with their evidential units
//! and routes, cross-layer flows, boundary contracts, the mandatory study
//! outputs and an append-only audit log. The engine parses bundles, computes
//! tiers, checks route coherence, scans for contamination, renders reports
//! and records every accepted mutation as an audit event.

pub mod audit;
pub mod bundle;
pub mod cli;
pub mod contamination;
pub mod diag;
pub mod id;
pub mod layers;
pub mod reporting;
pub mod routing;
pub mod samples;
pub mod tiering;

pub use bundle::{parse_bundle, serialize_bundle, ProjectBundle};
pub use diag::{Code, Diagnostic, Diagnostics, Severity};
pub use id::{Identifier, LayerId, Timestamp, Version};
