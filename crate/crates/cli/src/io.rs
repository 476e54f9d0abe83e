//! Cohort directories, output directories and checksums.
//!
//! A cohort directory holds `scores.csv` (`subject_id,score`), one mask per
//! subject at `masks/<subject_id>.nii` (or `.nii.gz`), and for synthetic
//! cohorts `roi.nii`, `brain_mask.nii` and `ground_truth.json`.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vlsm_core::nifti::{read_mask, write_f32_map, write_mask, write_nifti, VolumeData};
use vlsm_core::synth::GroundTruth;
use vlsm_core::volume::{BinaryMask, Cohort, Subject, VolumeGeometry};

use crate::config::SynthConfig;
use crate::error::{at, CliError, CliResult};

pub const SCORES_FILE: &str = "scores.csv";
pub const MASK_DIR: &str = "masks";
pub const ROI_FILE: &str = "roi.nii";
pub const BRAIN_FILE: &str = "brain_mask.nii";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub subject_id: String,
    pub true_damage: f64,
    pub lesion_size: usize,
}

/// `ground_truth.json`; region paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub roi: PathBuf,
    pub brain_mask: Option<PathBuf>,
    pub growth_bias: f64,
    pub score_noise_sd: f64,
    pub seed: u64,
    pub spec: Option<SynthConfig>,
    pub subjects: Vec<SubjectTruth>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest(root: &Path, relative: &str) -> CliResult<FileDigest> {
    let path = root.join(relative);
    let bytes = fs::metadata(&path).map_err(|e| CliError::io(&path, e))?.len();
    Ok(FileDigest { path: relative.to_string(), bytes, sha256: sha256_file(&path)? })
}

fn output_error(path: &Path, err: impl std::fmt::Display) -> CliError {
    // the destination is not input data, but an unwritable output is an
    // environment problem the user fixes like a bad input path
    CliError::Input(format!("cannot write {}: {err}", path.display()))
}

/// Output directory that remembers every artifact written to it, in order.
pub struct OutDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| output_error(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    fn prepare(&mut self, relative: &str) -> CliResult<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| output_error(parent, e))?;
        }
        self.artifacts.push(relative.to_string());
        Ok(path)
    }

    pub fn write_bytes(&mut self, relative: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.prepare(relative)?;
        fs::write(&path, bytes).map_err(|e| output_error(&path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        text.push(b'\n');
        self.write_bytes(relative, &text)
    }

    pub fn write_csv(&mut self, relative: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Numeric(e.to_string());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
        self.write_bytes(relative, &bytes)
    }

    pub fn write_mask(&mut self, relative: &str, mask: &BinaryMask) -> CliResult<()> {
        let path = self.prepare(relative)?;
        write_mask(mask, &path).map_err(|e| output_error(&path, e))
    }

    pub fn write_f32(&mut self, relative: &str, geometry: &VolumeGeometry, values: &[f64]) -> CliResult<()> {
        let path = self.prepare(relative)?;
        write_f32_map(geometry, values, &path).map_err(|e| output_error(&path, e))
    }

    pub fn write_volume(&mut self, relative: &str, geometry: &VolumeGeometry, data: &VolumeData) -> CliResult<()> {
        let path = self.prepare(relative)?;
        write_nifti(geometry, data, &path).map_err(|e| output_error(&path, e))
    }

    pub fn digests(&self) -> CliResult<Vec<FileDigest>> {
        self.artifacts.iter().map(|a| digest(&self.root, a)).collect()
    }
}

/// Labels as int16, 0 = background.
pub fn label_volume(labels: &[u32]) -> CliResult<VolumeData> {
    labels
        .iter()
        .map(|&l| i16::try_from(l).map_err(|_| CliError::Numeric(format!("label {l} exceeds the int16 range"))))
        .collect::<CliResult<Vec<i16>>>()
        .map(VolumeData::I16)
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_cohort(
    out: &mut OutDir,
    cohort: &Cohort,
    truth: &GroundTruth,
    brain: &BinaryMask,
    spec: &SynthConfig,
) -> CliResult<()> {
    let rows: Vec<Vec<String>> =
        cohort.subjects().iter().zip(cohort.scores()).map(|(s, &score)| vec![s.id.clone(), fmt_f64(score)]).collect();
    out.write_csv(SCORES_FILE, &["subject_id", "score"], &rows)?;
    for subject in cohort.subjects() {
        out.write_mask(&format!("{MASK_DIR}/{}.nii", subject.id), &subject.mask)?;
    }
    out.write_mask(ROI_FILE, &truth.roi)?;
    out.write_mask(BRAIN_FILE, brain)?;
    let record = GroundTruthRecord {
        roi: ROI_FILE.into(),
        brain_mask: Some(BRAIN_FILE.into()),
        growth_bias: truth.growth_bias,
        score_noise_sd: truth.score_noise_sd,
        seed: truth.seed,
        spec: Some(spec.clone()),
        subjects: cohort
            .subjects()
            .iter()
            .zip(truth.true_damage.iter().zip(&truth.lesion_sizes))
            .map(|(s, (&d, &n))| SubjectTruth { subject_id: s.id.clone(), true_damage: d, lesion_size: n })
            .collect(),
    };
    out.write_json(GROUND_TRUTH_FILE, &record)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    subject_id: String,
    score: f64,
}

/// Score rows in file order.
pub fn read_scores(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for (line, row) in reader.deserialize::<ScoreRow>().enumerate() {
        let row = row.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if !row.score.is_finite() {
            return Err(CliError::Input(format!(
                "{}: row {}: score for {} is not finite",
                path.display(),
                line + 2,
                row.subject_id
            )));
        }
        rows.push((row.subject_id, row.score));
    }
    Ok(rows)
}

/// Paths of the subject masks, in score order.
pub fn mask_paths(dir: &Path, ids: impl IntoIterator<Item = impl AsRef<str>>) -> CliResult<Vec<PathBuf>> {
    ids.into_iter()
        .map(|id| {
            let id = id.as_ref();
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(CliError::Input(format!("invalid subject id {id:?}")));
            }
            let plain = dir.join(MASK_DIR).join(format!("{id}.nii"));
            let gz = dir.join(MASK_DIR).join(format!("{id}.nii.gz"));
            if plain.is_file() {
                Ok(plain)
            } else if gz.is_file() {
                Ok(gz)
            } else {
                Err(CliError::Input(format!("missing mask for subject {id}: expected {}", plain.display())))
            }
        })
        .collect()
}

/// Reads and validates a whole cohort directory.
pub fn read_cohort(dir: &Path) -> CliResult<Cohort> {
    let scores_path = dir.join(SCORES_FILE);
    let rows = read_scores(&scores_path)?;
    let paths = mask_paths(dir, rows.iter().map(|(id, _)| id))?;
    let mut subjects = Vec::with_capacity(rows.len());
    let mut scores = Vec::with_capacity(rows.len());
    for ((id, score), path) in rows.into_iter().zip(&paths) {
        let mask = read_mask(path).map_err(at(path))?;
        subjects.push(Subject { id, mask });
        scores.push(score);
    }
    Cohort::new(subjects, scores).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

/// Input files of a cohort directory relative to it, for checksumming.
pub fn cohort_inputs(dir: &Path) -> CliResult<Vec<String>> {
    let rows = read_scores(&dir.join(SCORES_FILE))?;
    let mut files = vec![SCORES_FILE.to_string()];
    for path in mask_paths(dir, rows.iter().map(|(id, _)| id))? {
        let rel = path.strip_prefix(dir).expect("mask path under cohort dir");
        files.push(rel.to_string_lossy().replace('\\', "/"));
    }
    Ok(files)
}

pub fn read_ground_truth(path: &Path) -> CliResult<(GroundTruthRecord, BinaryMask)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let record: GroundTruthRecord =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let roi_path = path.parent().unwrap_or(Path::new("")).join(&record.roi);
    let roi = read_mask(&roi_path).map_err(at(&roi_path))?;
    Ok((record, roi))
}
