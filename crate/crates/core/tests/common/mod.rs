//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vlsm_core::cluster::Connectivity;
use vlsm_core::volume::{BinaryMask, Cohort, Subject, VolumeGeometry};

pub mod suites;

pub fn random_mask(g: VolumeGeometry, density: f64, rng: &mut ChaCha8Rng) -> BinaryMask {
    BinaryMask::new(g, (0..g.len()).map(|_| rng.gen_bool(density)).collect()).unwrap()
}

pub fn random_cohort(g: VolumeGeometry, n: usize, density: f64, rng: &mut ChaCha8Rng) -> Cohort {
    let subjects = (0..n).map(|i| Subject { id: format!("s{i:02}"), mask: random_mask(g, density, rng) }).collect();
    let scores = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
    Cohort::new(subjects, scores).unwrap()
}

/// Breadth-first flood fill, seeding new labels in scan order.
pub fn flood_fill(mask: &BinaryMask, conn: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let g = *mask.geometry();
    let [nx, ny, nz] = g.dims.map(|d| d as i64);
    let max_nonzero = match conn {
        Connectivity::Face6 => 1,
        Connectivity::Edge18 => 2,
        Connectivity::Corner26 => 3,
    };
    let mut labels = vec![0u32; g.len()];
    let mut sizes = Vec::new();
    for start in 0..g.len() {
        if !mask.get(start) || labels[start] != 0 {
            continue;
        }
        sizes.push(0);
        let label = sizes.len() as u32;
        labels[start] = label;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            sizes[label as usize - 1] += 1;
            let (x, y, z) = ((v as i64) % nx, (v as i64 / nx) % ny, v as i64 / (nx * ny));
            for dz in -1..=1i64 {
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let nonzero = (dx != 0) as i32 + (dy != 0) as i32 + (dz != 0) as i32;
                        if nonzero == 0 || nonzero > max_nonzero {
                            continue;
                        }
                        let (a, b, c) = (x + dx, y + dy, z + dz);
                        if a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz {
                            continue;
                        }
                        let w = (a + nx * (b + ny * c)) as usize;
                        if mask.get(w) && labels[w] == 0 {
                            labels[w] = label;
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
    }
    (labels, sizes)
}

/// Textbook two-sample t with pooled variance, from scratch.
pub fn direct_t(lesioned: &[f64], intact: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let (n1, n0) = (lesioned.len() as f64, intact.len() as f64);
    let s1 = if lesioned.len() > 1 { var(lesioned) } else { 0.0 };
    let s0 = if intact.len() > 1 { var(intact) } else { 0.0 };
    let sp2 = ((n1 - 1.0) * s1 + (n0 - 1.0) * s0) / (n1 + n0 - 2.0);
    (mean(lesioned) - mean(intact)) / (sp2 * (1.0 / n1 + 1.0 / n0)).sqrt()
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// Upper tail of Student's t via the substitution t = sqrt(df) tan(theta),
/// which turns the density into cos^(df - 1)(theta) on (-pi/2, pi/2).
pub fn upper_tail_by_quadrature(t: f64, df: usize) -> f64 {
    let k = df as f64 - 1.0;
    let f = move |theta: f64| theta.cos().max(0.0).powf(k);
    let half = std::f64::consts::FRAC_PI_2;
    let theta0 = (t / (df as f64).sqrt()).atan();
    let total = simpson(&f, -half, half, 1e-14);
    simpson(&f, theta0, half, 1e-14) / total
}

/// Step-up by the counting definition: k* is the largest k with at least k
/// p-values at or below k q / m.
pub fn bh_by_counting(p: &[f64], q: f64) -> Vec<bool> {
    let valid: Vec<f64> = p.iter().copied().filter(|x| !x.is_nan()).collect();
    let m = valid.len();
    let k_star = (1..=m).filter(|&k| valid.iter().filter(|&&x| x <= k as f64 * q / m as f64).count() >= k).max();
    match k_star {
        Some(k) => p.iter().map(|&x| !x.is_nan() && x <= k as f64 * q / m as f64).collect(),
        None => vec![false; p.len()],
    }
}

/// Smallest sample value with at least ceil((1000 - a) n / 1000) samples at
/// or below it, in integer arithmetic.
pub fn percentile_by_scan(samples: &[usize], alpha_permille: usize) -> usize {
    let n = samples.len();
    let rank = (((1000 - alpha_permille) * n + 999) / 1000).max(1);
    *samples.iter().filter(|&&v| samples.iter().filter(|&&s| s <= v).count() >= rank).min().unwrap()
}
