//! Network scale-up method (NSUM) toolkit.
//!
//! Estimates the prevalence of a hidden sub-population from aggregated
//! relational data (ARD): every surveyed node reports its in-degree `R_v`
//! and the number `C_v` of its in-neighbours that belong to the hidden set.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the shared domain types (instances, ARD, estimates, errors).
//! * [`degree`] and [`graphgen`] build random and adversarial instances.
//! * [`estimators`] draws samples and computes the MoR, RoS and FS estimates.
//! * [`bounds`] evaluates the closed-form tail bounds and sample-size rules.
//! * [`oracle`] enumerates tiny random-network models exactly.
//! * [`simulate`] runs seeded Monte-Carlo experiments and emits plot data.
//! * [`ingest`] loads the Gemsec-Deezer friendship datasets.

pub mod bounds;
pub mod degree;
pub mod error;
pub mod estimators;
pub mod graphgen;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod pmf;
pub mod seed;
pub mod simulate;

pub use error::{NsumError, Result};
pub use model::{
    compute_errors, ArdRecord, ArdSet, ErrorReport, Instance, Method, NodeId, Prevalence,
    PrevalenceEstimate,
};
