//! Voxel grids, binary masks, and cohort containers.
//!
//! Every volume is linearized x-fastest, matching the on-disk NIfTI order:
//! `index = x + nx * (y + ny * z)`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance (mm) used when comparing spacing and origin of two grids.
pub const GEOMETRY_TOLERANCE_MM: f64 = 1e-6;

/// Shared 3D grid descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeGeometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl VolumeGeometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let geometry = VolumeGeometry { dims, spacing, origin };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Unit-spaced grid anchored at the origin.
    pub fn with_dims(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGeometry(format!(
                "dims must be positive, got {:?}",
                self.dims
            )));
        }
        if self.dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none() {
            return Err(Error::InvalidGeometry("voxel count overflows".into()));
        }
        if self.spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be finite and strictly positive, got {:?}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry("origin must be finite".into()));
        }
        Ok(())
    }

    /// Number of voxels in the grid.
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Linear index of `(x, y, z) + offset`, or `None` when it leaves the grid.
    #[inline]
    pub fn offset_index(&self, coords: [usize; 3], offset: [i32; 3]) -> Option<usize> {
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let c = coords[axis] as i64 + offset[axis] as i64;
            if c < 0 || c >= self.dims[axis] as i64 {
                return None;
            }
            out[axis] = c as usize;
        }
        Some(self.index(out[0], out[1], out[2]))
    }

    /// Exact dims, spacing and origin within [`GEOMETRY_TOLERANCE_MM`].
    pub fn is_compatible(&self, other: &VolumeGeometry) -> bool {
        let close = |a: &[f64; 3], b: &[f64; 3]| {
            a.iter().zip(b).all(|(x, y)| (x - y).abs() <= GEOMETRY_TOLERANCE_MM)
        };
        self.dims == other.dims
            && close(&self.spacing, &other.spacing)
            && close(&self.origin, &other.origin)
    }

    pub fn ensure_compatible(&self, other: &VolumeGeometry) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "dims {:?} spacing {:?} origin {:?} vs dims {:?} spacing {:?} origin {:?}",
                self.dims, self.spacing, self.origin, other.dims, other.spacing, other.origin
            )))
        }
    }
}

/// Boolean field on a grid: a lesion, an ROI, or a thresholded map.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geometry: VolumeGeometry,
    voxels: Vec<bool>,
}

impl BinaryMask {
    pub fn new(geometry: VolumeGeometry, voxels: Vec<bool>) -> Result<Self> {
        if voxels.len() != geometry.len() {
            return Err(Error::VolumeLength { expected: geometry.len(), actual: voxels.len() });
        }
        Ok(BinaryMask { geometry, voxels })
    }

    pub fn empty(geometry: VolumeGeometry) -> Self {
        BinaryMask { geometry, voxels: vec![false; geometry.len()] }
    }

    pub fn full(geometry: VolumeGeometry) -> Self {
        BinaryMask { geometry, voxels: vec![true; geometry.len()] }
    }

    /// Builds a mask from a predicate on voxel coordinates.
    pub fn from_fn(geometry: VolumeGeometry, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let voxels = (0..geometry.len()).map(|i| f(geometry.coords(i))).collect();
        BinaryMask { geometry, voxels }
    }

    /// Mask of the given linear indices.
    pub fn from_indices(
        geometry: VolumeGeometry,
        indices: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut mask = BinaryMask::empty(geometry);
        for i in indices {
            if i >= mask.voxels.len() {
                return Err(Error::VolumeLength { expected: geometry.len(), actual: i + 1 });
            }
            mask.voxels[i] = true;
        }
        Ok(mask)
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn voxels(&self) -> &[bool] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<bool> {
        self.voxels
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        self.voxels[index]
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: bool) {
        self.voxels[index] = value;
    }

    /// Number of true voxels.
    pub fn size(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }

    /// Linear indices of true voxels in scan order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.voxels.iter().enumerate().filter_map(|(i, &v)| v.then_some(i))
    }

    pub fn intersection_size(&self, other: &BinaryMask) -> Result<usize> {
        self.geometry.ensure_compatible(&other.geometry)?;
        Ok(self.voxels.iter().zip(&other.voxels).filter(|(a, b)| **a && **b).count())
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool> {
        self.geometry.ensure_compatible(&other.geometry)?;
        Ok(self.voxels.iter().zip(&other.voxels).all(|(a, b)| !*a || *b))
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        self.geometry.ensure_compatible(&other.geometry)?;
        let voxels = self.voxels.iter().zip(&other.voxels).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask { geometry: self.geometry, voxels })
    }
}

/// Per-voxel non-negative counts, e.g. a lesion overlap map.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMap {
    pub geometry: VolumeGeometry,
    pub counts: Vec<u32>,
}

impl CountMap {
    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub mask: BinaryMask,
}

/// Lesion masks and deficit scores for a group of subjects, aligned by position.
#[derive(Debug, Clone)]
pub struct Cohort {
    subjects: Vec<Subject>,
    scores: Vec<f64>,
}

impl Cohort {
    pub fn new(subjects: Vec<Subject>, scores: Vec<f64>) -> Result<Self> {
        if subjects.len() < 2 {
            return Err(Error::InvalidCohort(format!(
                "need at least 2 subjects, got {}",
                subjects.len()
            )));
        }
        if scores.len() != subjects.len() {
            return Err(Error::InvalidCohort(format!(
                "{} subjects but {} scores",
                subjects.len(),
                scores.len()
            )));
        }
        let mut seen = HashSet::new();
        for subject in &subjects {
            if !seen.insert(subject.id.as_str()) {
                return Err(Error::InvalidCohort(format!("duplicate subject id `{}`", subject.id)));
            }
        }
        let geometry = *subjects[0].mask.geometry();
        for subject in &subjects[1..] {
            geometry.ensure_compatible(subject.mask.geometry()).map_err(|e| {
                Error::InvalidCohort(format!("subject `{}`: {e}", subject.id))
            })?;
        }
        Ok(Cohort { subjects, scores })
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        self.subjects[0].mask.geometry()
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn masks(&self) -> impl Iterator<Item = &BinaryMask> + '_ {
        self.subjects.iter().map(|s| &s.mask)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Same lesions, different scores.
    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Cohort> {
        Cohort::new(self.subjects.clone(), scores)
    }
}

/// Number of subjects lesioned at each voxel.
pub fn overlap_map(cohort: &Cohort) -> Result<CountMap> {
    let geometry = *cohort.geometry();
    let mut counts = vec![0u32; geometry.len()];
    for mask in cohort.masks() {
        geometry.ensure_compatible(mask.geometry())?;
        for i in mask.indices() {
            counts[i] += 1;
        }
    }
    Ok(CountMap { geometry, counts })
}

/// Fraction of `roi` covered by `mask`.
pub fn percent_damage(mask: &BinaryMask, roi: &BinaryMask) -> Result<f64> {
    let roi_size = roi.size();
    if roi_size == 0 {
        return Err(Error::EmptyRoi);
    }
    Ok(mask.intersection_size(roi)? as f64 / roi_size as f64)
}
