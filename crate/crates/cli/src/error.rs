use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input data error: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl From<vlsm_core::Error> for CliError {
    fn from(err: vlsm_core::Error) -> Self {
        use vlsm_core::Error as E;
        let msg = err.to_string();
        match err {
            E::InvalidConfig(_) | E::LesionUnreachable { .. } => CliError::Config(msg),
            E::Io(_)
            | E::Nifti { .. }
            | E::GeometryMismatch(_)
            | E::InvalidGeometry(_)
            | E::VolumeLength { .. }
            | E::InvalidCohort(_)
            | E::EmptyRoi
            | E::NoAnalyzableVoxels { .. } => CliError::Input(msg),
            E::NoPermutations | E::EmptySamples => CliError::Numeric(msg),
        }
    }
}

/// Attaches a path to a core error while keeping its category.
pub fn at(path: &Path) -> impl FnOnce(vlsm_core::Error) -> CliError + '_ {
    move |err| match CliError::from(err) {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        CliError::Numeric(m) => CliError::Numeric(format!("{}: {m}", path.display())),
    }
}
