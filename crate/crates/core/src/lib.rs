//! Reconstruction of moving reflecting obstacles from broken-ray travel times
//! in a medium whose sound speed varies in space.
//!
//! Phase 1 ([`reconstruct`], [`region`]) turns each measurement into candidate
//! reflection points by matching transmitter and receiver rays on travel time.
//! Phase 2 ([`filter`]) keeps only points reconstructed by enough distinct
//! transmitter/receiver pairs. [`simulate`] synthesizes measurements from a
//! known obstacle.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angles;
pub mod config;
pub mod dataset;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod medium;
pub mod pipeline;
pub mod ray;
pub mod reconstruct;
pub mod region;
pub mod seeded;
pub mod simulate;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{Domain, Point3};
pub use medium::SpeedField;
pub use ray::{RayPath, RayState, StepControl};
