//! `vlsm run`: t-map, permutation nulls, corrected maps and the audit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlsm_core::nifti::VolumeData;
use vlsm_core::permute::{
    apply_correction, derive_thresholds, false_positive_rate, fwer_false_positive_rate, run_permutations,
    NullDistribution, NullMode, ThresholdTable,
};
use vlsm_core::stats::{fdr_bh, VoxelDesign};
use vlsm_core::volume::{overlap_map, BinaryMask};

use crate::config::{Config, ModeSelection};
use crate::error::{CliError, CliResult};
use crate::io::{cohort_inputs, digest, fmt_f64, label_volume, read_cohort, OutDir};
use crate::manifest::{write_manifest, ManifestInput, RunManifest, Timings};

pub const T_MAP_FILE: &str = "t_map.nii";
pub const OVERLAP_FILE: &str = "overlap.nii";
pub const ANALYZABLE_FILE: &str = "analyzable.nii";
pub const FWER_FILE: &str = "fwer_mask.nii";
pub const FDR_FILE: &str = "fdr_mask.nii";
pub const SUMMARY_FILE: &str = "run_summary.json";
pub const FP_RATES_FILE: &str = "fp_rates.json";

pub fn thresholds_file(mode: NullMode, ext: &str) -> String {
    format!("thresholds_{mode}.{ext}")
}

pub fn corrected_map_file(mode: NullMode, p_threshold: f64) -> String {
    format!("corrected/{mode}_p{}.nii", fmt_f64(p_threshold))
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub cohort: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub mode: Option<ModeSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedEntry {
    pub p_threshold: f64,
    pub cluster_size_threshold: usize,
    pub suprathreshold_voxels: usize,
    pub n_clusters: usize,
    /// Sizes of the clusters strictly larger than the threshold, by label.
    pub surviving_cluster_sizes: Vec<usize>,
    pub map: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: NullMode,
    pub thresholds: Vec<CorrectedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrSummary {
    pub q: f64,
    pub p_cutoff: Option<f64>,
    pub voxels: usize,
    pub map: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_subjects: usize,
    pub df: usize,
    pub min_lesion: usize,
    pub analyzable_voxels: usize,
    pub degenerate_voxels: usize,
    pub max_statistic: Option<f64>,
    pub n_permutations: usize,
    pub n_audit_permutations: usize,
    pub master_seed: u64,
    pub fwer_t_threshold: f64,
    pub fwer_voxels: usize,
    pub fdr: Option<FdrSummary>,
    pub modes: Vec<ModeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpRateEntry {
    pub p_threshold: f64,
    pub cluster_size_threshold: usize,
    pub fp_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFpRates {
    pub mode: NullMode,
    pub entries: Vec<FpRateEntry>,
}

/// False-positive rates of the build thresholds on the audit permutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpRateTable {
    pub n_audit_permutations: usize,
    /// Stream ids of the audit permutations (half-open).
    pub permutation_indices: [u64; 2],
    pub fwer_t_threshold: f64,
    pub fwer_fp_rate: f64,
    pub modes: Vec<ModeFpRates>,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub tables: Vec<ThresholdTable>,
    pub fp_rates: Option<FpRateTable>,
    pub manifest: RunManifest,
}

fn null_rows(null: &NullDistribution) -> Vec<Vec<String>> {
    let first = null.permutation_indices.start;
    let mut rows = Vec::new();
    for t in &null.thresholds {
        let p = fmt_f64(t.p_threshold);
        match &t.permutation_offsets {
            None => {
                for (k, &size) in t.cluster_samples.iter().enumerate() {
                    rows.push(vec![(first + k as u64).to_string(), p.clone(), size.to_string()]);
                }
            }
            Some(offsets) => {
                for (k, w) in offsets.windows(2).enumerate() {
                    for &size in &t.cluster_samples[w[0]..w[1]] {
                        rows.push(vec![(first + k as u64).to_string(), p.clone(), size.to_string()]);
                    }
                }
            }
        }
    }
    rows
}

fn threshold_rows(table: &ThresholdTable) -> Vec<Vec<String>> {
    table
        .entries
        .iter()
        .map(|e| {
            vec![
                fmt_f64(e.p_threshold),
                e.cluster_size_threshold.to_string(),
                e.null_summary.n_samples.to_string(),
                fmt_f64(e.null_summary.mean),
                fmt_f64(e.null_summary.max),
            ]
        })
        .collect()
}

pub fn cmd_run(args: &RunArgs) -> CliResult<RunOutput> {
    let mut config = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.analysis.master_seed = seed;
    }
    if let Some(mode) = args.mode {
        config.analysis.mode = mode;
    }
    let analysis = config.analysis.clone();
    let modes = analysis.mode.modes();
    let mut timings = Timings::default();

    // everything that can be wrong with the inputs is found before the
    // first permutation
    let cohort = timings.time("load", || read_cohort(&args.cohort))?;
    let inputs = cohort_inputs(&args.cohort)?
        .iter()
        .map(|rel| digest(&args.cohort, rel))
        .collect::<CliResult<Vec<_>>>()?;
    let base = analysis.permutation_config(modes[0]);
    let (design, map) = timings.time("t-map", || -> CliResult<_> {
        let design = VoxelDesign::new(&cohort, analysis.min_lesion)?;
        if design.voxels().is_empty() {
            return Err(vlsm_core::Error::NoAnalyzableVoxels { min_lesion: analysis.min_lesion }.into());
        }
        let map = design.stat_map(cohort.scores())?;
        Ok((design, map))
    })?;
    let overlap = overlap_map(&cohort)?;
    let geometry = map.geometry;

    let n_build = analysis.n_permutations as u64;
    let n_audit = analysis.n_audit_permutations as u64;
    let build = timings.time("build permutations", || run_permutations(&design, cohort.scores(), &base, 1..n_build + 1))?;
    let audit = if n_audit > 0 {
        Some(timings.time("audit permutations", || {
            run_permutations(&design, cohort.scores(), &base, n_build + 1..n_build + 1 + n_audit)
        })?)
    } else {
        None
    };

    let mut out = OutDir::create(&args.out)?;
    out.write_f32(T_MAP_FILE, &geometry, &map.t)?;
    out.write_volume(OVERLAP_FILE, &geometry, &VolumeData::from_counts(&overlap)?)?;
    out.write_mask(ANALYZABLE_FILE, &map.analyzable)?;

    let mut tables = Vec::new();
    let mut mode_summaries = Vec::new();
    let mut mode_fp = Vec::new();
    let mut fwer = None;
    for &mode in &modes {
        let pc = analysis.permutation_config(mode);
        let null = NullDistribution::from_outcomes(&build, &pc, mode, geometry)?;
        let table = derive_thresholds(&null, analysis.alpha)?;
        let corrected = timings.time(&format!("correction {mode}"), || apply_correction(&map, &table, &pc))?;

        out.write_json(&thresholds_file(mode, "json"), &table)?;
        out.write_csv(
            &thresholds_file(mode, "csv"),
            &["p_threshold", "cluster_size_threshold", "null_samples", "null_mean", "null_max"],
            &threshold_rows(&table),
        )?;
        out.write_csv(&format!("null_{mode}.csv"), &["permutation_index", "p_threshold", "cluster_size"], &null_rows(&null))?;

        let mut entries = Vec::new();
        for c in &corrected.thresholds {
            let file = corrected_map_file(mode, c.p_threshold);
            out.write_volume(&file, &geometry, &label_volume(&c.surviving.labels)?)?;
            entries.push(CorrectedEntry {
                p_threshold: c.p_threshold,
                cluster_size_threshold: c.cluster_size_threshold,
                suprathreshold_voxels: c.suprathreshold_voxels,
                n_clusters: c.n_clusters,
                surviving_cluster_sizes: c.surviving.sizes.clone(),
                map: file,
            });
        }
        mode_summaries.push(ModeSummary { mode, thresholds: entries });

        if let Some(audit) = &audit {
            let audit_null = NullDistribution::from_outcomes(audit, &pc, mode, geometry)?;
            let rates = false_positive_rate(&audit_null, &table)?;
            mode_fp.push(ModeFpRates {
                mode,
                entries: table
                    .entries
                    .iter()
                    .zip(rates)
                    .map(|(e, fp_rate)| FpRateEntry {
                        p_threshold: e.p_threshold,
                        cluster_size_threshold: e.cluster_size_threshold,
                        fp_rate,
                    })
                    .collect(),
            });
            if fwer.is_none() {
                fwer = Some(fwer_false_positive_rate(&audit_null, &table));
            }
        }
        if tables.is_empty() {
            out.write_mask(FWER_FILE, &corrected.fwer_mask)?;
            out.write_csv(
                "null_max_t.csv",
                &["permutation_index", "max_statistic"],
                &null.max_t_samples.iter().enumerate().map(|(k, &m)| vec![(1 + k).to_string(), fmt_f64(m)]).collect::<Vec<_>>(),
            )?;
        }
        tables.push(table);
    }
    let fwer_t_threshold = tables[0].fwer_t_threshold;
    let fwer_voxels = map.t.iter().filter(|&&t| !t.is_nan() && analysis.tail.statistic(t) > fwer_t_threshold).count();

    let fdr = match analysis.fdr_q {
        Some(q) => {
            let result = fdr_bh(&map.p_values(analysis.tail), q);
            let mask = BinaryMask::new(geometry, result.reject.clone())?;
            out.write_mask(FDR_FILE, &mask)?;
            Some(FdrSummary { q, p_cutoff: result.cutoff, voxels: mask.size(), map: FDR_FILE.into() })
        }
        None => None,
    };

    let fp_rates = audit.as_ref().map(|_| FpRateTable {
        n_audit_permutations: analysis.n_audit_permutations,
        permutation_indices: [n_build + 1, n_build + 1 + n_audit],
        fwer_t_threshold,
        fwer_fp_rate: fwer.expect("audit ran"),
        modes: mode_fp,
    });
    if let Some(fp) = &fp_rates {
        out.write_json(FP_RATES_FILE, fp)?;
        let mut rows = Vec::new();
        for m in &fp.modes {
            for e in &m.entries {
                rows.push(vec![
                    m.mode.to_string(),
                    fmt_f64(e.p_threshold),
                    e.cluster_size_threshold.to_string(),
                    fmt_f64(e.fp_rate),
                ]);
            }
        }
        rows.push(vec!["fwer".into(), String::new(), String::new(), fmt_f64(fp.fwer_fp_rate)]);
        out.write_csv("fp_rates.csv", &["method", "p_threshold", "cluster_size_threshold", "fp_rate"], &rows)?;
    }

    let summary = RunSummary {
        n_subjects: cohort.len(),
        df: map.df,
        min_lesion: analysis.min_lesion,
        analyzable_voxels: map.analyzable.size(),
        degenerate_voxels: map.degenerate,
        max_statistic: map.max_statistic(analysis.tail),
        n_permutations: analysis.n_permutations,
        n_audit_permutations: analysis.n_audit_permutations,
        master_seed: analysis.master_seed,
        fwer_t_threshold,
        fwer_voxels,
        fdr,
        modes: mode_summaries,
    };
    out.write_json(SUMMARY_FILE, &summary)?;

    let manifest = write_manifest(
        &mut out,
        ManifestInput {
            command: "run",
            config_path: &args.config,
            config: &config,
            input_dir: Some(&args.cohort),
            inputs,
            timings,
        },
    )?;
    Ok(RunOutput { summary, tables, fp_rates, manifest })
}

pub fn read_summary(run_dir: &Path) -> CliResult<RunSummary> {
    read_json(&run_dir.join(SUMMARY_FILE))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
