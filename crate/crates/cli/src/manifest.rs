use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::CliResult;
use crate::io::{FileDigest, OutDir, MANIFEST_FILE};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Default)]
pub struct Timings(Vec<StageTiming>);

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push(StageTiming { stage: stage.into(), seconds: start.elapsed().as_secs_f64() });
        out
    }
}

/// Everything needed to reproduce a `synth` or `run` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    /// Resolved configuration after command-line overrides.
    pub config: Config,
    pub input_dir: Option<String>,
    pub output_dir: String,
    pub threads: usize,
    pub timings: Vec<StageTiming>,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

pub struct ManifestInput<'a> {
    pub command: &'a str,
    pub config_path: &'a Path,
    pub config: &'a Config,
    pub input_dir: Option<&'a Path>,
    pub inputs: Vec<FileDigest>,
    pub timings: Timings,
}

pub fn write_manifest(out: &mut OutDir, input: ManifestInput<'_>) -> CliResult<RunManifest> {
    let manifest = RunManifest {
        tool: "vlsm".into(),
        tool_version: TOOL_VERSION.into(),
        command: input.command.into(),
        config_path: input.config_path.display().to_string(),
        config_sha256: crate::io::sha256_file(input.config_path)?,
        config: input.config.clone(),
        input_dir: input.input_dir.map(|d| d.display().to_string()),
        output_dir: out.root().display().to_string(),
        threads: rayon::current_num_threads(),
        timings: input.timings.0,
        inputs: input.inputs,
        artifacts: out.digests()?,
    };
    out.write_json(MANIFEST_FILE, &manifest)?;
    Ok(manifest)
}
