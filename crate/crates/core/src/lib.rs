//! Voxel-based lesion-symptom mapping with permutation-based correction.
//!
//! The pipeline: lesion masks and deficit scores form a [`volume::Cohort`];
//! [`stats::voxelwise_t`] tests lesioned against intact subjects at every
//! voxel; [`permute::build_null`] shuffles scores to build cluster-size and
//! max-t null distributions; [`permute::derive_thresholds`] and
//! [`permute::apply_correction`] turn those into corrected maps.
//! [`synth`] generates cohorts whose true lesion-deficit region is known.

pub mod cluster;
pub mod error;
pub mod metrics;
pub mod nifti;
pub mod permute;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
