//! Membership-inference auditing with distilled multi-metric sequences.
//!
//! A target classifier is probed only through its posteriors. The auditor
//! trains a shadow model, distils both the target and the shadow while
//! snapshotting every epoch, evaluates five posterior metrics on every
//! snapshot to build a per-sample metric sequence, and feeds those
//! sequences to an attention RNN that predicts membership. Non-sequential
//! baselines and the usual ROC-based evaluation live alongside.

pub mod attacks;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod pipeline;
pub mod rng;
mod serde_float;
pub mod run;
pub mod signals;

pub use error::{Error, Result};
