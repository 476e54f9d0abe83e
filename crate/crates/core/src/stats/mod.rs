//! Mass-univariate voxel statistics.

mod fdr;
mod tdist;

pub use fdr::{fdr_bh, FdrResult};
pub use tdist::{inc_beta, ln_gamma, t_to_p, Tail};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Cohort, VolumeGeometry};

pub const DEFAULT_MIN_LESION: usize = 2;

/// Per-voxel pooled-variance t statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StatMap {
    pub geometry: VolumeGeometry,
    /// `NaN` outside `analyzable`.
    pub t: Vec<f64>,
    pub df: usize,
    pub analyzable: BinaryMask,
    /// Voxels that met the lesion-count criterion but had zero pooled
    /// variance with unequal group means.
    pub degenerate: usize,
}

impl StatMap {
    /// One-tailed or two-tailed p per voxel, `NaN` outside `analyzable`.
    pub fn p_values(&self, tail: Tail) -> Vec<f64> {
        self.t.iter().map(|&t| if t.is_nan() { f64::NAN } else { t_to_p(t, self.df, tail) }).collect()
    }

    /// Largest statistic over analyzable voxels, or `None` if there are none.
    pub fn max_statistic(&self, tail: Tail) -> Option<f64> {
        self.t
            .iter()
            .filter(|t| !t.is_nan())
            .map(|&t| tail.statistic(t))
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
    }
}

/// Voxels passing the voxel-wise p threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SuprathresholdMask {
    pub mask: BinaryMask,
    pub p_threshold: f64,
    pub tail: Tail,
}

/// Lesion layout of a cohort, precomputed once and reused for any score vector.
///
/// Holds the voxels meeting the lesion-count criterion and, for each, the
/// ascending indices of the subjects lesioned there.
#[derive(Debug, Clone)]
pub struct VoxelDesign {
    geometry: VolumeGeometry,
    n_subjects: usize,
    min_lesion: usize,
    voxels: Vec<usize>,
    offsets: Vec<usize>,
    lesioned: Vec<u32>,
}

impl VoxelDesign {
    pub fn new(cohort: &Cohort, min_lesion: usize) -> Result<Self> {
        let n = cohort.len();
        if n < 4 {
            return Err(Error::InvalidCohort(format!("voxel-wise t needs at least 4 subjects, got {n}")));
        }
        if min_lesion == 0 {
            return Err(Error::InvalidConfig("min_lesion must be at least 1".into()));
        }
        let geometry = *cohort.geometry();
        let mut per_voxel: Vec<Vec<u32>> = vec![Vec::new(); geometry.len()];
        for (s, mask) in cohort.masks().enumerate() {
            geometry.ensure_compatible(mask.geometry())?;
            for v in mask.indices() {
                per_voxel[v].push(s as u32);
            }
        }
        let mut voxels = Vec::new();
        let mut offsets = vec![0];
        let mut lesioned = Vec::new();
        for (v, subjects) in per_voxel.into_iter().enumerate() {
            let n1 = subjects.len();
            if n1 >= min_lesion && n - n1 >= min_lesion {
                voxels.push(v);
                lesioned.extend(subjects);
                offsets.push(lesioned.len());
            }
        }
        Ok(VoxelDesign { geometry, n_subjects: n, min_lesion, voxels, offsets, lesioned })
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn min_lesion(&self) -> usize {
        self.min_lesion
    }

    pub fn df(&self) -> usize {
        self.n_subjects - 2
    }

    /// Linear indices of voxels meeting the lesion-count criterion.
    pub fn voxels(&self) -> &[usize] {
        &self.voxels
    }

    /// Mask of voxels meeting the lesion-count criterion.
    pub fn candidate_mask(&self) -> BinaryMask {
        BinaryMask::from_indices(self.geometry, self.voxels.iter().copied())
            .expect("design voxels lie inside the grid")
    }

    fn check_scores(&self, scores: &[f64]) -> Result<()> {
        if scores.len() != self.n_subjects {
            return Err(Error::InvalidCohort(format!(
                "{} scores for {} subjects",
                scores.len(),
                self.n_subjects
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidCohort(format!("score {i} is not finite")));
        }
        Ok(())
    }

    /// t for each design voxel in `voxels()` order; `NaN` marks degenerate voxels.
    ///
    /// `scores` must already be validated.
    pub fn t_values_into(&self, scores: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.voxels.len()).map(|k| {
            pooled_t(scores, &self.lesioned[self.offsets[k]..self.offsets[k + 1]])
        }));
    }

    pub fn stat_map(&self, scores: &[f64]) -> Result<StatMap> {
        self.check_scores(scores)?;
        let mut values = Vec::with_capacity(self.voxels.len());
        self.t_values_into(scores, &mut values);
        let mut t = vec![f64::NAN; self.geometry.len()];
        let mut analyzable = BinaryMask::empty(self.geometry);
        let mut degenerate = 0;
        for (&v, &tv) in self.voxels.iter().zip(&values) {
            if tv.is_nan() {
                degenerate += 1;
            } else {
                t[v] = tv;
                analyzable.set(v, true);
            }
        }
        Ok(StatMap { geometry: self.geometry, t, df: self.df(), analyzable, degenerate })
    }
}

struct GroupAcc {
    n: usize,
    sum: f64,
    min: f64,
    max: f64,
}

impl GroupAcc {
    fn new() -> Self {
        GroupAcc { n: 0, sum: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn is_constant(&self) -> bool {
        self.min == self.max
    }
}

/// Visits every subject in order, flagging membership in the sorted `lesioned` list.
#[inline]
fn for_each_split(scores: &[f64], lesioned: &[u32], mut f: impl FnMut(bool, f64)) {
    let mut k = 0;
    for (s, &x) in scores.iter().enumerate() {
        let hit = k < lesioned.len() && lesioned[k] as usize == s;
        k += hit as usize;
        f(hit, x);
    }
}

/// Pooled-variance t of lesioned minus intact, or `NaN` when the pooled
/// variance is zero but the group means differ.
fn pooled_t(scores: &[f64], lesioned: &[u32]) -> f64 {
    let mut g1 = GroupAcc::new();
    let mut g0 = GroupAcc::new();
    for_each_split(scores, lesioned, |hit, x| if hit { g1.push(x) } else { g0.push(x) });
    debug_assert!(g1.n >= 1 && g0.n >= 1);

    if g1.is_constant() && g0.is_constant() {
        return if g1.min == g0.min { 0.0 } else { f64::NAN };
    }

    let m1 = g1.sum / g1.n as f64;
    let m0 = g0.sum / g0.n as f64;
    let (mut ss1, mut ss0) = (0.0, 0.0);
    for_each_split(scores, lesioned, |hit, x| {
        if hit {
            ss1 += (x - m1) * (x - m1);
        } else {
            ss0 += (x - m0) * (x - m0);
        }
    });
    let n = scores.len() as f64;
    let (n1, n0) = (g1.n as f64, g0.n as f64);
    let pooled = (ss1 + ss0) / (n - 2.0);
    (m1 - m0) / (pooled * (1.0 / n1 + 1.0 / n0)).sqrt()
}

/// Pooled-variance t-map of lesioned vs. intact subjects at every voxel with
/// at least `min_lesion` subjects in each group.
pub fn voxelwise_t(cohort: &Cohort, min_lesion: usize) -> Result<StatMap> {
    VoxelDesign::new(cohort, min_lesion)?.stat_map(cohort.scores())
}

pub fn apply_p_threshold(map: &StatMap, p_threshold: f64, tail: Tail) -> SuprathresholdMask {
    let p = map.p_values(tail);
    SuprathresholdMask { mask: threshold_p_values(&map.geometry, &p, p_threshold), p_threshold, tail }
}

/// Mask of voxels whose (non-NaN) p is strictly below `p_threshold`.
pub fn threshold_p_values(geometry: &VolumeGeometry, p: &[f64], p_threshold: f64) -> BinaryMask {
    let voxels = p.iter().map(|&pv| pv < p_threshold).collect();
    BinaryMask::new(*geometry, voxels).expect("p-value map matches its geometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Subject;

    /// One voxel per subject-pattern column; `lesioned[s]` says whether
    /// subject `s` is lesioned at voxel 0.
    fn single_voxel_cohort(lesioned: &[bool], scores: &[f64]) -> Cohort {
        let g = VolumeGeometry::with_dims([1, 1, 1]).unwrap();
        let subjects = lesioned
            .iter()
            .enumerate()
            .map(|(i, &l)| Subject {
                id: format!("s{i}"),
                mask: BinaryMask::new(g, vec![l]).unwrap(),
            })
            .collect();
        Cohort::new(subjects, scores.to_vec()).unwrap()
    }

    #[test]
    fn hand_computed_t() {
        let cohort = single_voxel_cohort(
            &[true, true, true, false, false, false],
            &[3.0, 4.0, 5.0, 1.0, 2.0, 3.0],
        );
        let map = voxelwise_t(&cohort, 2).unwrap();
        assert_eq!(map.df, 4);
        let expected = 2.0 / (2.0f64 / 3.0).sqrt();
        assert!((map.t[0] - expected).abs() < 1e-12);
        assert!((map.t[0] - 2.449).abs() < 1e-3);
    }

    #[test]
    fn fully_lesioned_voxel_not_analyzable() {
        let cohort = single_voxel_cohort(&[true; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let map = voxelwise_t(&cohort, 1).unwrap();
        assert!(!map.analyzable.get(0));
        assert!(map.t[0].is_nan());
    }

    #[test]
    fn min_lesion_is_symmetric() {
        let l = [true, false, false, false, false];
        let cohort = single_voxel_cohort(&l, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(voxelwise_t(&cohort, 1).unwrap().analyzable.get(0));
        assert!(!voxelwise_t(&cohort, 2).unwrap().analyzable.get(0));
        let inv: Vec<bool> = l.iter().map(|b| !b).collect();
        let cohort = single_voxel_cohort(&inv, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(!voxelwise_t(&cohort, 2).unwrap().analyzable.get(0));
    }

    #[test]
    fn constant_scores_give_zero() {
        let cohort = single_voxel_cohort(&[true, true, false, false], &[0.1; 4]);
        let map = voxelwise_t(&cohort, 2).unwrap();
        assert_eq!(map.t[0], 0.0);
        assert!(map.analyzable.get(0));
    }

    #[test]
    fn zero_variance_unequal_means_is_degenerate() {
        let cohort = single_voxel_cohort(&[true, true, false, false], &[1.0, 1.0, 0.0, 0.0]);
        let map = voxelwise_t(&cohort, 2).unwrap();
        assert!(!map.analyzable.get(0));
        assert_eq!(map.degenerate, 1);
    }

    #[test]
    fn errors() {
        let cohort = single_voxel_cohort(&[true, false, true], &[1.0, 2.0, 3.0]);
        assert!(voxelwise_t(&cohort, 1).is_err());
        let cohort = single_voxel_cohort(&[true, false, true, false], &[1.0, f64::NAN, 3.0, 0.0]);
        assert!(voxelwise_t(&cohort, 1).is_err());
        let cohort = single_voxel_cohort(&[true, false, true, false], &[1.0, 2.0, 3.0, 0.0]);
        assert!(voxelwise_t(&cohort, 0).is_err());
    }

    #[test]
    fn threshold_extremes() {
        let cohort = single_voxel_cohort(
            &[true, true, true, false, false, false],
            &[3.0, 4.0, 5.0, 1.0, 2.0, 3.0],
        );
        let map = voxelwise_t(&cohort, 2).unwrap();
        assert!(apply_p_threshold(&map, 1e-300, Tail::Greater).mask.size() == 0);
        let all = apply_p_threshold(&map, 1.0 - 1e-12, Tail::Greater);
        assert_eq!(all.mask, map.analyzable);
    }
}
