//! Synthetic lesion cohorts with a known ground-truth region.
//!
//! Lesions are grown voxel by voxel from a random seed inside a support
//! mask. Each step picks a frontier voxel (face-adjacent to the lesion) with
//! weight `exp(growth_bias * occupied_face_neighbors)`, so larger biases give
//! compact blobs and 0 gives Eden-like growth.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cluster::Connectivity;
use crate::error::{Error, Result};
use crate::rng;
use crate::volume::{percent_damage, BinaryMask, Cohort, Subject, VolumeGeometry};

pub const MAX_RESTARTS: usize = 100;

#[derive(Debug, Clone)]
pub struct SyntheticCohortSpec {
    pub geometry: VolumeGeometry,
    pub brain_mask: BinaryMask,
    pub n_subjects: usize,
    /// Inclusive `(min, max)` lesion size in voxels.
    pub lesion_size_range: (usize, usize),
    pub growth_bias: f64,
    pub roi: BinaryMask,
    pub score_noise_sd: f64,
    pub seed: u64,
}

impl SyntheticCohortSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.geometry.ensure_compatible(self.brain_mask.geometry())?;
        self.geometry.ensure_compatible(self.roi.geometry())?;
        if self.n_subjects < 2 {
            return bad(format!("n_subjects must be at least 2, got {}", self.n_subjects));
        }
        let (lo, hi) = self.lesion_size_range;
        if lo < 1 || lo > hi {
            return bad(format!("lesion_size_range ({lo}, {hi}) must satisfy 1 <= min <= max"));
        }
        let brain = self.brain_mask.size();
        if hi > brain {
            return bad(format!("max lesion size {hi} exceeds brain mask size {brain}"));
        }
        if self.roi.size() == 0 {
            return bad("roi is empty".into());
        }
        if !self.roi.is_subset_of(&self.brain_mask)? {
            return bad("roi must lie within brain_mask".into());
        }
        if !(self.growth_bias >= 0.0 && self.growth_bias.is_finite()) {
            return bad(format!("growth_bias must be finite and >= 0, got {}", self.growth_bias));
        }
        if !(self.score_noise_sd >= 0.0 && self.score_noise_sd.is_finite()) {
            return bad(format!("score_noise_sd must be finite and >= 0, got {}", self.score_noise_sd));
        }
        Ok(())
    }
}

/// What the generator knows that the analysis must rediscover.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub roi: BinaryMask,
    pub true_damage: Vec<f64>,
    pub lesion_sizes: Vec<usize>,
    pub growth_bias: f64,
    pub score_noise_sd: f64,
    pub seed: u64,
}

/// Ellipsoid `sum(((c - center) / radius)^2) <= 1` in voxel coordinates.
pub fn ellipsoid_mask(geometry: VolumeGeometry, center: [f64; 3], radii: [f64; 3]) -> BinaryMask {
    BinaryMask::from_fn(geometry, |c| {
        (0..3).map(|a| ((c[a] as f64 - center[a]) / radii[a]).powi(2)).sum::<f64>() <= 1.0
    })
}

/// Box with inclusive `min` and exclusive `max` voxel corners.
pub fn box_mask(geometry: VolumeGeometry, min: [usize; 3], max: [usize; 3]) -> BinaryMask {
    BinaryMask::from_fn(geometry, |c| (0..3).all(|a| c[a] >= min[a] && c[a] < max[a]))
}

struct Frontier {
    members: Vec<usize>,
    slot: Vec<usize>,
    occupied_neighbors: Vec<u8>,
}

impl Frontier {
    const ABSENT: usize = usize::MAX;

    fn new(n: usize) -> Self {
        Frontier { members: Vec::new(), slot: vec![Self::ABSENT; n], occupied_neighbors: vec![0; n] }
    }

    fn touch(&mut self, v: usize) {
        self.occupied_neighbors[v] += 1;
        if self.slot[v] == Self::ABSENT {
            self.slot[v] = self.members.len();
            self.members.push(v);
        }
    }

    fn remove_at(&mut self, k: usize) -> usize {
        let v = self.members.swap_remove(k);
        self.slot[v] = Self::ABSENT;
        if let Some(&moved) = self.members.get(k) {
            self.slot[moved] = k;
        }
        v
    }
}

/// Grows one face-connected lesion of exactly `target_size` voxels inside
/// `brain_mask`, restarting from a new seed when growth stalls.
pub fn grow_lesion<R: Rng + ?Sized>(
    brain_mask: &BinaryMask,
    target_size: usize,
    growth_bias: f64,
    rng: &mut R,
) -> Result<BinaryMask> {
    let geometry = *brain_mask.geometry();
    let brain: Vec<usize> = brain_mask.indices().collect();
    if target_size == 0 || target_size > brain.len() {
        return Err(Error::LesionUnreachable { target: target_size, restarts: 0 });
    }
    let weights: Vec<f64> = (0..=6).map(|k| (growth_bias * k as f64).exp()).collect();
    let offsets = Connectivity::Face6.offsets();

    for _attempt in 0..=MAX_RESTARTS {
        let mut lesion = BinaryMask::empty(geometry);
        let mut frontier = Frontier::new(geometry.len());
        let add = |v: usize, lesion: &mut BinaryMask, frontier: &mut Frontier| {
            lesion.set(v, true);
            let c = geometry.coords(v);
            for &off in &offsets {
                if let Some(u) = geometry.offset_index(c, off) {
                    if brain_mask.get(u) && !lesion.get(u) {
                        frontier.touch(u);
                    }
                }
            }
        };

        let seed = brain[rng::uniform_index(rng, brain.len() - 1)];
        add(seed, &mut lesion, &mut frontier);
        let mut size = 1;
        while size < target_size && !frontier.members.is_empty() {
            let total: f64 =
                frontier.members.iter().map(|&v| weights[frontier.occupied_neighbors[v] as usize]).sum();
            let mut r = rng.gen::<f64>() * total;
            let mut pick = frontier.members.len() - 1;
            for (k, &v) in frontier.members.iter().enumerate() {
                r -= weights[frontier.occupied_neighbors[v] as usize];
                if r < 0.0 {
                    pick = k;
                    break;
                }
            }
            let v = frontier.remove_at(pick);
            add(v, &mut lesion, &mut frontier);
            size += 1;
        }
        if size == target_size {
            return Ok(lesion);
        }
    }
    Err(Error::LesionUnreachable { target: target_size, restarts: MAX_RESTARTS })
}

pub fn subject_id(index: usize) -> String {
    format!("sub-{:03}", index + 1)
}

/// Generates lesions, percent-damage scores (plus optional Gaussian noise)
/// and the ground-truth record. Subject `i` draws from stream `(seed, i)`.
pub fn generate_cohort(spec: &SyntheticCohortSpec) -> Result<(Cohort, GroundTruth)> {
    spec.validate()?;
    let noise = (spec.score_noise_sd > 0.0)
        .then(|| Normal::new(0.0, spec.score_noise_sd).expect("validated sd"));
    let (lo, hi) = spec.lesion_size_range;

    let mut subjects = Vec::with_capacity(spec.n_subjects);
    let mut scores = Vec::with_capacity(spec.n_subjects);
    let mut true_damage = Vec::with_capacity(spec.n_subjects);
    let mut lesion_sizes = Vec::with_capacity(spec.n_subjects);
    for i in 0..spec.n_subjects {
        let mut rng = rng::stream(spec.seed, i as u64);
        let size = lo + rng::uniform_index(&mut rng, hi - lo);
        let mask = grow_lesion(&spec.brain_mask, size, spec.growth_bias, &mut rng)?;
        let damage = percent_damage(&mask, &spec.roi)?;
        let score = damage + noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        subjects.push(Subject { id: subject_id(i), mask });
        scores.push(score);
        true_damage.push(damage);
        lesion_sizes.push(size);
    }
    let cohort = Cohort::new(subjects, scores)?;
    let truth = GroundTruth {
        roi: spec.roi.clone(),
        true_damage,
        lesion_sizes,
        growth_bias: spec.growth_bias,
        score_noise_sd: spec.score_noise_sd,
        seed: spec.seed,
    };
    Ok((cohort, truth))
}
