//! Oracle-equivalence suites. Each returns a one-line summary on success
//! and the first discrepancy on failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlsm_core::cluster::{label_components, Connectivity};
use vlsm_core::permute::percentile_threshold;
use vlsm_core::stats::{fdr_bh, t_to_p, Tail, VoxelDesign};
use vlsm_core::volume::{Cohort, Subject, VolumeGeometry};

use super::{bh_by_counting, direct_t, flood_fill, percentile_by_scan, random_mask, upper_tail_by_quadrature};

const CONNECTIVITIES: [Connectivity; 3] = [Connectivity::Face6, Connectivity::Edge18, Connectivity::Corner26];

pub fn check_components() -> Result<String, String> {
    let g = VolumeGeometry::with_dims([8, 8, 8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let density = [0.1, 0.25, 0.4, 0.6][trial % 4];
        let mask = random_mask(g, density, &mut rng);
        for conn in CONNECTIVITIES {
            let got = label_components(&mask, conn);
            let (labels, sizes) = flood_fill(&mask, conn);
            if got.labels != labels || got.sizes != sizes {
                return Err(format!("mask {trial}, {conn}: labeling differs from flood fill"));
            }
        }
    }
    Ok("100 random 8^3 masks x 3 connectivities identical to flood fill".into())
}

pub fn check_t_values() -> Result<String, String> {
    let g = VolumeGeometry::with_dims([6, 5, 4]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for trial in 0..20 {
        let n = 8 + trial;
        let subjects: Vec<Subject> = (0..n)
            .map(|i| Subject { id: format!("s{i}"), mask: random_mask(g, 0.35, &mut rng) })
            .collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..150.0)).collect();
        let cohort = Cohort::new(subjects, scores.clone()).unwrap();
        for min_lesion in [1, 2, 3] {
            let map = VoxelDesign::new(&cohort, min_lesion).unwrap().stat_map(&scores).unwrap();
            for v in 0..g.len() {
                let (mut les, mut int) = (Vec::new(), Vec::new());
                for (s, &x) in cohort.subjects().iter().zip(&scores) {
                    if s.mask.get(v) { les.push(x) } else { int.push(x) }
                }
                if les.len() < min_lesion || int.len() < min_lesion {
                    if !map.t[v].is_nan() {
                        return Err(format!("voxel {v} should not be analyzable"));
                    }
                    continue;
                }
                let diff = (map.t[v] - direct_t(&les, &int)).abs();
                if !(diff <= 1e-10) {
                    return Err(format!("voxel {v}: |dt| = {diff:e}"));
                }
                worst = worst.max(diff);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} voxels, max |dt| = {worst:.1e} (tol 1e-10)"))
}

pub fn check_t_to_p() -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut n = 0;
    for df in [1, 2, 3, 5, 10, 30, 58, 122] {
        for t in [-6.0, -2.5, -0.7, 0.0, 0.3, 1.0, 1.96, 2.5, 4.0, 8.0, 15.0] {
            let upper = upper_tail_by_quadrature(t, df);
            let two = (2.0 * upper.min(1.0 - upper)).min(1.0);
            for (tail, want) in [(Tail::Greater, upper), (Tail::TwoSided, two)] {
                let diff = (t_to_p(t, df, tail) - want).abs();
                if !(diff <= 1e-8) {
                    return Err(format!("df {df}, t {t}, {tail:?}: |dp| = {diff:e}"));
                }
                worst = worst.max(diff);
                n += 1;
            }
        }
    }
    Ok(format!("{n} (t, df, tail) points, max |dp| = {worst:.1e} (tol 1e-8)"))
}

pub fn check_fdr() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..300 {
        let n = 1 + trial % 40;
        let p: Vec<f64> = (0..n)
            .map(|_| match rng.gen_range(0..10) {
                0 => f64::NAN,
                1 => rng.gen_range(0.0..0.001),
                2 => (rng.gen_range(1..20) as f64) / 400.0,
                _ => rng.gen_range(0.0..1.0),
            })
            .collect();
        for q in [0.01, 0.05, 0.2] {
            if fdr_bh(&p, q).reject != bh_by_counting(&p, q) {
                return Err(format!("vector {trial}, q {q}: rejections differ"));
            }
        }
    }
    Ok("300 p-vectors x 3 levels identical to the step-up definition".into())
}

pub fn check_percentile() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..300 {
        let n = 1 + trial % 120;
        let samples: Vec<usize> =
            (0..n).map(|_| if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..60) }).collect();
        for permille in [1, 10, 50, 100, 250, 500] {
            let got = percentile_threshold(&samples, permille as f64 / 1000.0).unwrap();
            let want = percentile_by_scan(&samples, permille);
            if got != want {
                return Err(format!("sample {trial}, alpha {permille}/1000: {got} vs {want}"));
            }
        }
    }
    Ok("300 samples x 6 alphas identical to the sorted scan".into())
}
