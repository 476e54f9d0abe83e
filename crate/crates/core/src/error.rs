use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// A NIfTI header field failed validation.
    #[error("invalid NIfTI header field `{field}`: {message}")]
    Nifti { field: &'static str, message: String },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Volume buffer length does not match the grid it claims to live on.
    #[error("volume has {actual} voxels but geometry requires {expected}")]
    VolumeLength { expected: usize, actual: usize },

    #[error("invalid cohort: {0}")]
    InvalidCohort(String),

    #[error("region of interest is empty")]
    EmptyRoi,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no permutations requested")]
    NoPermutations,

    #[error("no analyzable voxels (min_lesion = {min_lesion})")]
    NoAnalyzableVoxels { min_lesion: usize },

    #[error("cannot take a percentile of an empty sample")]
    EmptySamples,

    #[error("lesion of {target} voxels could not be grown after {restarts} restarts")]
    LesionUnreachable { target: usize, restarts: usize },
}

impl Error {
    pub(crate) fn nifti(field: &'static str, message: impl Into<String>) -> Self {
        Error::Nifti { field, message: message.into() }
    }
}
