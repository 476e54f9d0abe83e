//! The single JSON configuration file shared by every subcommand.
//!
//! Every field except the synthetic grid and regions has a default; the
//! fully resolved configuration is echoed into each manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlsm_core::cluster::Connectivity;
use vlsm_core::nifti::read_mask;
use vlsm_core::permute::{NullMode, PermutationConfig, DEFAULT_P_THRESHOLDS};
use vlsm_core::stats::{Tail, DEFAULT_MIN_LESION};
use vlsm_core::synth::{box_mask, ellipsoid_mask, SyntheticCohortSpec};
use vlsm_core::volume::{BinaryMask, VolumeGeometry};

use crate::error::{at, CliError, CliResult};

pub const DEFAULT_MASTER_SEED: u64 = 0x5EED_0F_C1A5_7E55;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dims: [usize; 3],
    #[serde(default = "unit_spacing")]
    pub spacing: [f64; 3],
    #[serde(default)]
    pub origin: [f64; 3],
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

impl GridConfig {
    pub fn geometry(&self) -> CliResult<VolumeGeometry> {
        VolumeGeometry::new(self.dims, self.spacing, self.origin).map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

/// A region given by shape or by a mask file (relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// Voxel-coordinate ellipsoid.
    Ellipsoid { center: [f64; 3], radii: [f64; 3] },
    /// Inclusive `min`, exclusive `max` voxel corners.
    Box { min: [usize; 3], max: [usize; 3] },
    Nifti { path: PathBuf },
}

impl Region {
    pub fn to_mask(&self, geometry: VolumeGeometry, base_dir: &Path, name: &str) -> CliResult<BinaryMask> {
        match self {
            Region::Ellipsoid { center, radii } => {
                if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                    return Err(CliError::Config(format!("{name}: ellipsoid radii must be positive, got {radii:?}")));
                }
                Ok(ellipsoid_mask(geometry, *center, *radii))
            }
            Region::Box { min, max } => {
                if (0..3).any(|a| min[a] >= max[a] || max[a] > geometry.dims[a]) {
                    return Err(CliError::Config(format!(
                        "{name}: box {min:?}..{max:?} must be non-empty and inside dims {:?}",
                        geometry.dims
                    )));
                }
                Ok(box_mask(geometry, *min, *max))
            }
            Region::Nifti { path } => {
                let path = base_dir.join(path);
                let mask = read_mask(&path).map_err(at(&path))?;
                geometry.ensure_compatible(mask.geometry()).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
                Ok(mask)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub grid: GridConfig,
    pub brain: Region,
    pub roi: Region,
    #[serde(default = "default_subjects")]
    pub n_subjects: usize,
    /// Inclusive lesion size bounds in voxels.
    #[serde(default = "default_lesion_sizes")]
    pub lesion_size_range: [usize; 2],
    #[serde(default = "default_growth_bias")]
    pub growth_bias: f64,
    #[serde(default)]
    pub score_noise_sd: f64,
    #[serde(default = "default_synth_seed")]
    pub seed: u64,
}

fn default_subjects() -> usize {
    60
}
fn default_lesion_sizes() -> [usize; 2] {
    [50, 800]
}
fn default_growth_bias() -> f64 {
    1.0
}
fn default_synth_seed() -> u64 {
    1
}

impl SynthConfig {
    pub fn to_spec(&self, base_dir: &Path) -> CliResult<SyntheticCohortSpec> {
        let geometry = self.grid.geometry()?;
        let spec = SyntheticCohortSpec {
            geometry,
            brain_mask: self.brain.to_mask(geometry, base_dir, "brain")?,
            n_subjects: self.n_subjects,
            lesion_size_range: (self.lesion_size_range[0], self.lesion_size_range[1]),
            growth_bias: self.growth_bias,
            roi: self.roi.to_mask(geometry, base_dir, "roi")?,
            score_noise_sd: self.score_noise_sd,
            seed: self.seed,
        };
        spec.validate().map_err(|e| CliError::Config(format!("synth: {e}")))?;
        Ok(spec)
    }
}

/// Which nulls `run` builds and applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSelection {
    #[default]
    MaxCluster,
    /// Demonstration only: does not control the family-wise error rate.
    AllClusters,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<NullMode> {
        match self {
            ModeSelection::MaxCluster => vec![NullMode::MaxCluster],
            ModeSelection::AllClusters => vec![NullMode::AllClusters],
            ModeSelection::Both => vec![NullMode::MaxCluster, NullMode::AllClusters],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub n_permutations: usize,
    /// Fresh permutations used only to measure false-positive rates; 0 skips
    /// the audit.
    pub n_audit_permutations: usize,
    pub p_thresholds: Vec<f64>,
    pub alpha: f64,
    pub mode: ModeSelection,
    pub connectivity: Connectivity,
    pub tail: Tail,
    pub min_lesion: usize,
    pub master_seed: u64,
    /// Benjamini–Hochberg level for the optional FDR map.
    pub fdr_q: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            n_permutations: 1000,
            n_audit_permutations: 400,
            p_thresholds: DEFAULT_P_THRESHOLDS.to_vec(),
            alpha: 0.05,
            mode: ModeSelection::MaxCluster,
            connectivity: Connectivity::Corner26,
            tail: Tail::Greater,
            min_lesion: DEFAULT_MIN_LESION,
            master_seed: DEFAULT_MASTER_SEED,
            fdr_q: None,
        }
    }
}

impl AnalysisConfig {
    pub fn permutation_config(&self, mode: NullMode) -> PermutationConfig {
        PermutationConfig {
            n_permutations: self.n_permutations,
            p_thresholds: self.p_thresholds.clone(),
            alpha: self.alpha,
            mode,
            connectivity: self.connectivity,
            tail: self.tail,
            min_lesion: self.min_lesion,
            master_seed: self.master_seed,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n_permutations == 0 {
            return Err(CliError::Config("analysis: n_permutations must be at least 1".into()));
        }
        if let Some(q) = self.fdr_q {
            if !(q > 0.0 && q < 1.0) {
                return Err(CliError::Config(format!("analysis: fdr_q {q} is outside (0, 1)")));
            }
        }
        self.permutation_config(NullMode::MaxCluster)
            .validate()
            .map_err(|e| CliError::Config(format!("analysis: {e}")))
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let config: Config = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.analysis.validate()?;
        Ok(config)
    }

    pub fn synth(&self) -> CliResult<&SynthConfig> {
        self.synth.as_ref().ok_or_else(|| CliError::Config("no `synth` section in configuration".into()))
    }
}

/// Directory that relative paths in a config file are resolved against.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}
