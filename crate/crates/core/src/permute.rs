//! Permutation nulls for cluster-extent and max-statistic correction.
//!
//! Each permutation shuffles the scores against fixed lesion masks,
//! recomputes the t-map, thresholds it at every configured voxel-wise p and
//! records cluster sizes plus the maximum statistic. Two nulls can be built
//! from the same permutations:
//!
//! * **max-cluster**: one sample per permutation, the largest cluster (0 if
//!   nothing survives the voxel-wise threshold);
//! * **all-clusters**: every cluster of every permutation pooled together.
//!   This construction does not control the family-wise rate and is kept to
//!   demonstrate exactly that.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_sizes, label_components, ClusterLabeling, Connectivity};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{apply_p_threshold, t_to_p, StatMap, Tail, VoxelDesign, DEFAULT_MIN_LESION};
use crate::volume::{BinaryMask, Cohort, VolumeGeometry};

/// Default voxel-wise p thresholds, loosest first.
pub const DEFAULT_P_THRESHOLDS: [f64; 6] = [0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullMode {
    #[default]
    MaxCluster,
    AllClusters,
}

impl NullMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NullMode::MaxCluster => "max-cluster",
            NullMode::AllClusters => "all-clusters",
        }
    }
}

impl std::fmt::Display for NullMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermutationConfig {
    pub n_permutations: usize,
    /// Strictly decreasing voxel-wise p thresholds.
    pub p_thresholds: Vec<f64>,
    pub alpha: f64,
    pub mode: NullMode,
    pub connectivity: Connectivity,
    pub tail: Tail,
    pub min_lesion: usize,
    pub master_seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            n_permutations: 1000,
            p_thresholds: DEFAULT_P_THRESHOLDS.to_vec(),
            alpha: 0.05,
            mode: NullMode::MaxCluster,
            connectivity: Connectivity::Corner26,
            tail: Tail::Greater,
            min_lesion: DEFAULT_MIN_LESION,
            master_seed: 0x5EED_0F_C1A5_7E55,
        }
    }
}

impl PermutationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_thresholds.is_empty() {
            return Err(Error::InvalidConfig("p_thresholds must not be empty".into()));
        }
        if let Some(p) = self.p_thresholds.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidConfig(format!("p_threshold {p} is outside (0, 1)")));
        }
        if self.p_thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig(format!(
                "p_thresholds must be strictly decreasing, got {:?}",
                self.p_thresholds
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} is outside (0, 1)", self.alpha)));
        }
        if self.min_lesion == 0 {
            return Err(Error::InvalidConfig("min_lesion must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniform random rearrangement (Fisher–Yates).
pub fn permute_scores<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = scores.to_vec();
    for i in (1..out.len()).rev() {
        let j = rng::uniform_index(rng, i);
        out.swap(i, j);
    }
    out
}

/// What one permutation contributes to the nulls.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOutcome {
    pub index: u64,
    /// Cluster sizes in label order, one list per p threshold.
    pub cluster_sizes: Vec<Vec<usize>>,
    /// Maximum of the tail statistic over analyzable voxels.
    pub max_statistic: f64,
}

/// Runs the permutations with the given indices (stream ids) on the current
/// rayon pool. Output is ordered by index and independent of pool size.
pub fn run_permutations(
    design: &VoxelDesign,
    scores: &[f64],
    config: &PermutationConfig,
    indices: Range<u64>,
) -> Result<Vec<PermutationOutcome>> {
    config.validate()?;
    if design.voxels().is_empty() {
        return Err(Error::NoAnalyzableVoxels { min_lesion: design.min_lesion() });
    }
    // validates length and finiteness once for every permutation
    design.stat_map(scores)?;

    let geometry = *design.geometry();
    indices
        .into_par_iter()
        .map_init(
            || (Vec::new(), BinaryMask::empty(geometry)),
            |(t, mask), index| {
                let mut rng = rng::stream(config.master_seed, index);
                let permuted = permute_scores(scores, &mut rng);
                design.t_values_into(&permuted, t);
                single_outcome(design, config, index, t, mask)
            },
        )
        .collect()
}

fn single_outcome(
    design: &VoxelDesign,
    config: &PermutationConfig,
    index: u64,
    t: &[f64],
    mask: &mut BinaryMask,
) -> Result<PermutationOutcome> {
    let df = design.df();
    let mut max_statistic = f64::NEG_INFINITY;
    let p: Vec<f64> = t
        .iter()
        .map(|&tv| {
            if tv.is_nan() {
                return f64::NAN;
            }
            max_statistic = max_statistic.max(config.tail.statistic(tv));
            t_to_p(tv, df, config.tail)
        })
        .collect();
    if !max_statistic.is_finite() {
        return Err(Error::NoAnalyzableVoxels { min_lesion: design.min_lesion() });
    }

    let mut sizes = Vec::with_capacity(config.p_thresholds.len());
    for &threshold in &config.p_thresholds {
        for (&v, &pv) in design.voxels().iter().zip(&p) {
            mask.set(v, pv < threshold);
        }
        sizes.push(cluster_sizes(mask, config.connectivity));
    }
    Ok(PermutationOutcome { index, cluster_sizes: sizes, max_statistic })
}

/// Null cluster-size samples for one voxel-wise threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdNull {
    pub p_threshold: f64,
    /// Max-cluster: one value per permutation. All-clusters: every cluster,
    /// grouped by permutation.
    pub cluster_samples: Vec<usize>,
    /// All-clusters only: permutation `k` owns
    /// `cluster_samples[offsets[k]..offsets[k + 1]]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation_offsets: Option<Vec<usize>>,
}

impl ThresholdNull {
    /// Largest cluster of each permutation, whichever mode stored it.
    pub fn per_permutation_max(&self) -> Vec<usize> {
        match &self.permutation_offsets {
            None => self.cluster_samples.clone(),
            Some(offsets) => offsets
                .windows(2)
                .map(|w| self.cluster_samples[w[0]..w[1]].iter().copied().max().unwrap_or(0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub config: PermutationConfig,
    pub geometry: VolumeGeometry,
    /// Stream ids of the permutations, in sample order.
    pub permutation_indices: Range<u64>,
    pub thresholds: Vec<ThresholdNull>,
    pub max_t_samples: Vec<f64>,
}

impl NullDistribution {
    /// Assembles a null in `mode` from permutation outcomes.
    pub fn from_outcomes(
        outcomes: &[PermutationOutcome],
        config: &PermutationConfig,
        mode: NullMode,
        geometry: VolumeGeometry,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::NoPermutations);
        }
        let thresholds = config
            .p_thresholds
            .iter()
            .enumerate()
            .map(|(k, &p_threshold)| match mode {
                NullMode::MaxCluster => ThresholdNull {
                    p_threshold,
                    cluster_samples: outcomes
                        .iter()
                        .map(|o| o.cluster_sizes[k].iter().copied().max().unwrap_or(0))
                        .collect(),
                    permutation_offsets: None,
                },
                NullMode::AllClusters => {
                    let mut samples = Vec::new();
                    let mut offsets = vec![0];
                    for o in outcomes {
                        samples.extend_from_slice(&o.cluster_sizes[k]);
                        offsets.push(samples.len());
                    }
                    ThresholdNull { p_threshold, cluster_samples: samples, permutation_offsets: Some(offsets) }
                }
            })
            .collect();
        let first = outcomes[0].index;
        Ok(NullDistribution {
            config: PermutationConfig { mode, ..config.clone() },
            geometry,
            permutation_indices: first..first + outcomes.len() as u64,
            thresholds,
            max_t_samples: outcomes.iter().map(|o| o.max_statistic).collect(),
        })
    }

    pub fn mode(&self) -> NullMode {
        self.config.mode
    }

    pub fn n_permutations(&self) -> usize {
        self.max_t_samples.len()
    }
}

/// Builds the null from permutations `1..=config.n_permutations`.
pub fn build_null(cohort: &Cohort, config: &PermutationConfig) -> Result<NullDistribution> {
    build_null_range(cohort, config, 1..config.n_permutations as u64 + 1)
}

/// Null from fresh permutations that do not overlap those of [`build_null`].
pub fn audit_null(cohort: &Cohort, config: &PermutationConfig, n_audit: usize) -> Result<NullDistribution> {
    let start = config.n_permutations as u64 + 1;
    build_null_range(cohort, config, start..start + n_audit as u64)
}

pub fn build_null_range(
    cohort: &Cohort,
    config: &PermutationConfig,
    indices: Range<u64>,
) -> Result<NullDistribution> {
    if indices.is_empty() {
        return Err(Error::NoPermutations);
    }
    config.validate()?;
    let design = VoxelDesign::new(cohort, config.min_lesion)?;
    let outcomes = run_permutations(&design, cohort.scores(), config, indices)?;
    NullDistribution::from_outcomes(&outcomes, config, config.mode, *cohort.geometry())
}

/// Order statistic at 1-based rank `ceil((1 - alpha) n)`.
///
/// A candidate passes the correction only when strictly greater than the
/// returned value.
pub fn percentile_threshold<T: Copy + PartialOrd>(samples: &[T], alpha: f64) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples are totally ordered"));
    let n = sorted.len();
    // guard against 0.95 * 100 landing a hair above 95
    let rank = ((1.0 - alpha) * n as f64 - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n_samples: usize,
    pub mean: f64,
    pub max: f64,
}

impl SampleSummary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut max) = (0usize, 0.0, f64::NEG_INFINITY);
        for v in values {
            n += 1;
            sum += v;
            max = max.max(v);
        }
        SampleSummary { n_samples: n, mean: if n > 0 { sum / n as f64 } else { 0.0 }, max: if n > 0 { max } else { 0.0 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub p_threshold: f64,
    pub cluster_size_threshold: usize,
    pub null_summary: SampleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub mode: NullMode,
    pub alpha: f64,
    pub n_permutations: usize,
    pub master_seed: u64,
    pub geometry: VolumeGeometry,
    pub entries: Vec<ThresholdEntry>,
    pub fwer_t_threshold: f64,
    pub max_t_summary: SampleSummary,
}

/// Cluster-size thresholds per voxel-wise p and the max-statistic threshold.
///
/// An all-clusters null with no clusters at some threshold yields 0 there.
pub fn derive_thresholds(null: &NullDistribution, alpha: f64) -> Result<ThresholdTable> {
    let entries = null
        .thresholds
        .iter()
        .map(|t| {
            let cluster_size_threshold = match percentile_threshold(&t.cluster_samples, alpha) {
                Ok(v) => v,
                Err(Error::EmptySamples) => 0,
                Err(e) => return Err(e),
            };
            Ok(ThresholdEntry {
                p_threshold: t.p_threshold,
                cluster_size_threshold,
                null_summary: SampleSummary::of(t.cluster_samples.iter().map(|&s| s as f64)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThresholdTable {
        mode: null.mode(),
        alpha,
        n_permutations: null.n_permutations(),
        master_seed: null.config.master_seed,
        geometry: null.geometry,
        entries,
        fwer_t_threshold: percentile_threshold(&null.max_t_samples, alpha)?,
        max_t_summary: SampleSummary::of(null.max_t_samples.iter().copied()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedThreshold {
    pub p_threshold: f64,
    pub cluster_size_threshold: usize,
    pub suprathreshold_voxels: usize,
    /// Clusters at this voxel-wise threshold before size correction.
    pub n_clusters: usize,
    /// Clusters strictly larger than the size threshold.
    pub surviving: ClusterLabeling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: PermutationConfig,
    pub mode: NullMode,
    pub master_seed: u64,
    pub n_permutations: usize,
    pub max_t_summary: SampleSummary,
    pub cluster_null_summaries: Vec<SampleSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedResult {
    pub thresholds: Vec<CorrectedThreshold>,
    pub fwer_t_threshold: f64,
    pub fwer_mask: BinaryMask,
    pub provenance: Provenance,
}

/// Applies a threshold table to the unpermuted t-map.
pub fn apply_correction(
    map: &StatMap,
    table: &ThresholdTable,
    config: &PermutationConfig,
) -> Result<CorrectedResult> {
    map.geometry.ensure_compatible(&table.geometry)?;
    let thresholds = table
        .entries
        .iter()
        .map(|entry| {
            let sup = apply_p_threshold(map, entry.p_threshold, config.tail);
            let labeling = label_components(&sup.mask, config.connectivity);
            CorrectedThreshold {
                p_threshold: entry.p_threshold,
                cluster_size_threshold: entry.cluster_size_threshold,
                suprathreshold_voxels: sup.mask.size(),
                n_clusters: labeling.n_clusters(),
                surviving: labeling.retain(|size| size > entry.cluster_size_threshold),
            }
        })
        .collect();
    let fwer_mask = BinaryMask::new(
        map.geometry,
        map.t
            .iter()
            .map(|&t| !t.is_nan() && config.tail.statistic(t) > table.fwer_t_threshold)
            .collect(),
    )?;
    Ok(CorrectedResult {
        thresholds,
        fwer_t_threshold: table.fwer_t_threshold,
        fwer_mask,
        provenance: Provenance {
            config: config.clone(),
            mode: table.mode,
            master_seed: table.master_seed,
            n_permutations: table.n_permutations,
            max_t_summary: table.max_t_summary.clone(),
            cluster_null_summaries: table.entries.iter().map(|e| e.null_summary.clone()).collect(),
        },
    })
}

fn check_aligned(null: &NullDistribution, table: &ThresholdTable) -> Result<()> {
    let same = null.thresholds.len() == table.entries.len()
        && null.thresholds.iter().zip(&table.entries).all(|(n, e)| n.p_threshold == e.p_threshold);
    if same {
        Ok(())
    } else {
        Err(Error::InvalidConfig("null and threshold table use different p thresholds".into()))
    }
}

/// Fraction of the null's permutations with at least one cluster strictly
/// larger than the table's cluster-size threshold, per p threshold.
pub fn false_positive_rate(null: &NullDistribution, table: &ThresholdTable) -> Result<Vec<f64>> {
    check_aligned(null, table)?;
    let n = null.n_permutations() as f64;
    Ok(null
        .thresholds
        .iter()
        .zip(&table.entries)
        .map(|(t, e)| {
            let hits = t.per_permutation_max().iter().filter(|&&m| m > e.cluster_size_threshold).count();
            hits as f64 / n
        })
        .collect())
}

/// Fraction of the null's permutations whose maximum statistic exceeds the
/// table's FWER threshold.
pub fn fwer_false_positive_rate(null: &NullDistribution, table: &ThresholdTable) -> f64 {
    let hits = null.max_t_samples.iter().filter(|&&m| m > table.fwer_t_threshold).count();
    hits as f64 / null.n_permutations() as f64
}
