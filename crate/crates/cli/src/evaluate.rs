//! `vlsm evaluate`: null calibration and recovery of the true region.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlsm_core::metrics::{log_log_fit, LineFit, RecoveryMetrics};
use vlsm_core::nifti::{read_mask, read_nifti};
use vlsm_core::permute::NullMode;
use vlsm_core::volume::BinaryMask;

use crate::error::{at, CliError, CliResult};
use crate::io::{fmt_f64, read_ground_truth, OutDir};
use crate::run::{read_json, read_summary, FpRateTable, ANALYZABLE_FILE, FP_RATES_FILE, FWER_FILE};

pub const REPORT_FILE: &str = "evaluation.json";

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub run_dir: PathBuf,
    pub ground_truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub p_threshold: f64,
    pub cluster_size_threshold: usize,
    pub fp_rate: Option<f64>,
    pub surviving_cluster_sizes: Vec<usize>,
    pub recovery: Option<RecoveryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: NullMode,
    pub thresholds: Vec<ThresholdReport>,
    /// `ln(cluster threshold)` on `ln(p)`, over positive thresholds.
    pub log_log_fit: Option<LineFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwerReport {
    pub t_threshold: f64,
    pub fp_rate: Option<f64>,
    pub voxels: usize,
    pub recovery: Option<RecoveryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrReport {
    pub q: f64,
    pub voxels: usize,
    pub recovery: Option<RecoveryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub has_ground_truth: bool,
    /// Analyzable ROI voxels, the denominator of sensitivity and spill-over.
    pub truth_voxels: Option<usize>,
    pub n_audit_permutations: Option<usize>,
    pub modes: Vec<ModeReport>,
    pub fwer: FwerReport,
    pub fdr: Option<FdrReport>,
}

fn load_mask(path: &Path) -> CliResult<BinaryMask> {
    read_mask(path).map_err(at(path))
}

fn load_labels_as_mask(path: &Path) -> CliResult<BinaryMask> {
    let volume = read_nifti(path).map_err(at(path))?;
    volume.into_mask().map_err(at(path))
}

/// Builds the report from a run directory. Pure over its inputs.
pub fn evaluate(run_dir: &Path, ground_truth: Option<&Path>) -> CliResult<EvaluationReport> {
    let summary = read_summary(run_dir)?;
    let fp_path = run_dir.join(FP_RATES_FILE);
    let fp: Option<FpRateTable> = if fp_path.is_file() { Some(read_json(&fp_path)?) } else { None };

    let truth = match ground_truth {
        Some(gt) => {
            let (_, roi) = read_ground_truth(gt)?;
            let analyzable = load_mask(&run_dir.join(ANALYZABLE_FILE))?;
            let truth = roi
                .intersection(&analyzable)
                .map_err(|e| CliError::Input(format!("ground truth ROI vs run: {e}")))?;
            Some(truth)
        }
        None => None,
    };
    let recovery = |mask: &BinaryMask| -> CliResult<Option<RecoveryMetrics>> {
        truth.as_ref().map(|t| RecoveryMetrics::compute(mask, t).map_err(CliError::from)).transpose()
    };

    let mut modes = Vec::new();
    for m in &summary.modes {
        let rates = fp.as_ref().and_then(|f| f.modes.iter().find(|r| r.mode == m.mode));
        let mut thresholds = Vec::new();
        for (k, e) in m.thresholds.iter().enumerate() {
            let detected = load_labels_as_mask(&run_dir.join(&e.map))?;
            thresholds.push(ThresholdReport {
                p_threshold: e.p_threshold,
                cluster_size_threshold: e.cluster_size_threshold,
                fp_rate: rates.and_then(|r| r.entries.get(k)).map(|r| r.fp_rate),
                surviving_cluster_sizes: e.surviving_cluster_sizes.clone(),
                recovery: recovery(&detected)?,
            });
        }
        let curve: Vec<(f64, f64)> =
            thresholds.iter().map(|t| (t.p_threshold, t.cluster_size_threshold as f64)).collect();
        modes.push(ModeReport { mode: m.mode, log_log_fit: log_log_fit(&curve), thresholds });
    }

    let fwer_mask = load_mask(&run_dir.join(FWER_FILE))?;
    let fwer = FwerReport {
        t_threshold: summary.fwer_t_threshold,
        fp_rate: fp.as_ref().map(|f| f.fwer_fp_rate),
        voxels: fwer_mask.size(),
        recovery: recovery(&fwer_mask)?,
    };
    let fdr = match &summary.fdr {
        Some(f) => {
            let mask = load_mask(&run_dir.join(&f.map))?;
            Some(FdrReport { q: f.q, voxels: mask.size(), recovery: recovery(&mask)? })
        }
        None => None,
    };

    Ok(EvaluationReport {
        has_ground_truth: truth.is_some(),
        truth_voxels: truth.as_ref().map(BinaryMask::size),
        n_audit_permutations: fp.as_ref().map(|f| f.n_audit_permutations),
        modes,
        fwer,
        fdr,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn recovery_row(method: &str, p: Option<f64>, r: &RecoveryMetrics) -> Vec<String> {
    vec![
        method.into(),
        opt(p),
        r.detected_voxels.to_string(),
        r.truth_voxels.to_string(),
        r.overlap_voxels.to_string(),
        fmt_f64(r.sensitivity),
        fmt_f64(r.spill_over),
        fmt_f64(r.dice),
    ]
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<EvaluationReport> {
    let report = evaluate(&args.run_dir, args.ground_truth.as_deref())?;
    let mut out = OutDir::create(args.out.as_deref().unwrap_or(&args.run_dir))?;
    out.write_json(REPORT_FILE, &report)?;

    let mut fp_rows = Vec::new();
    let mut curve_rows = Vec::new();
    let mut recovery_rows = Vec::new();
    for m in &report.modes {
        for t in &m.thresholds {
            let mode = m.mode.to_string();
            fp_rows.push(vec![mode.clone(), fmt_f64(t.p_threshold), t.cluster_size_threshold.to_string(), opt(t.fp_rate)]);
            let log_t = (t.cluster_size_threshold > 0).then(|| (t.cluster_size_threshold as f64).ln());
            curve_rows.push(vec![
                mode.clone(),
                fmt_f64(t.p_threshold),
                fmt_f64(t.p_threshold.ln()),
                t.cluster_size_threshold.to_string(),
                opt(log_t),
            ]);
            if let Some(r) = &t.recovery {
                recovery_rows.push(recovery_row(&mode, Some(t.p_threshold), r));
            }
        }
    }
    fp_rows.push(vec!["fwer".into(), String::new(), String::new(), opt(report.fwer.fp_rate)]);
    if let Some(r) = &report.fwer.recovery {
        recovery_rows.push(recovery_row("fwer", None, r));
    }
    if let Some(r) = report.fdr.as_ref().and_then(|f| f.recovery.as_ref()) {
        recovery_rows.push(recovery_row("fdr", None, r));
    }

    out.write_csv("fp_rate_vs_p.csv", &["method", "p_threshold", "cluster_size_threshold", "fp_rate"], &fp_rows)?;
    out.write_csv(
        "threshold_curve.csv",
        &["method", "p_threshold", "log_p", "cluster_size_threshold", "log_threshold"],
        &curve_rows,
    )?;
    if report.has_ground_truth {
        out.write_csv(
            "recovery.csv",
            &["method", "p_threshold", "detected", "truth", "overlap", "sensitivity", "spill_over", "dice"],
            &recovery_rows,
        )?;
    }
    Ok(report)
}
