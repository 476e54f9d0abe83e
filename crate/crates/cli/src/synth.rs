//! `vlsm synth`: writes a synthetic cohort directory.

use std::path::PathBuf;

use vlsm_core::synth::generate_cohort;
use vlsm_core::volume::Cohort;

use crate::config::{base_dir, Config};
use crate::error::CliResult;
use crate::io::{write_cohort, OutDir};
use crate::manifest::{write_manifest, ManifestInput, RunManifest, Timings};

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<(Cohort, RunManifest)> {
    let mut config = Config::load(&args.config)?;
    let synth = config.synth.as_mut().ok_or_else(|| {
        crate::error::CliError::Config(format!("{}: no `synth` section in configuration", args.config.display()))
    })?;
    if let Some(seed) = args.seed {
        synth.seed = seed;
    }
    let synth = synth.clone();
    let spec = synth.to_spec(&base_dir(&args.config))?;

    let mut timings = Timings::default();
    let (cohort, truth) = timings.time("generate", || generate_cohort(&spec))?;
    let mut out = OutDir::create(&args.out)?;
    timings.time("write", || write_cohort(&mut out, &cohort, &truth, &spec.brain_mask, &synth))?;
    let manifest = write_manifest(
        &mut out,
        ManifestInput {
            command: "synth",
            config_path: &args.config,
            config: &config,
            input_dir: None,
            inputs: Vec::new(),
            timings,
        },
    )?;
    Ok((cohort, manifest))
}
