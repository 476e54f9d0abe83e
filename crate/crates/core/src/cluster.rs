//! 3D connected-component labeling.

use serde::{Deserialize, Serialize};

use crate::volume::{BinaryMask, VolumeGeometry};

/// Neighborhood used to decide whether two voxels touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    /// Shared face.
    #[serde(rename = "face-6")]
    Face6,
    /// Shared face or edge.
    #[serde(rename = "edge-18")]
    Edge18,
    /// Any contact, including a single corner.
    #[default]
    #[serde(rename = "corner-26")]
    Corner26,
}

impl Connectivity {
    pub fn neighbor_count(self) -> usize {
        match self {
            Connectivity::Face6 => 6,
            Connectivity::Edge18 => 18,
            Connectivity::Corner26 => 26,
        }
    }

    /// All offsets at Chebyshev distance 1 admitted by this connectivity.
    pub fn offsets(self) -> Vec<[i32; 3]> {
        let max_nonzero = match self {
            Connectivity::Face6 => 1,
            Connectivity::Edge18 => 2,
            Connectivity::Corner26 => 3,
        };
        let mut out = Vec::with_capacity(self.neighbor_count());
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    if nonzero >= 1 && nonzero <= max_nonzero {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Offsets pointing to voxels earlier in x-fastest scan order.
    fn backward_offsets(self) -> Vec<[i32; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Connectivity::Face6 => "face-6",
            Connectivity::Edge18 => "edge-18",
            Connectivity::Corner26 => "corner-26",
        })
    }
}

/// Component labels (0 = background, clusters numbered 1..=K in order of
/// their first voxel in scan order) and per-cluster sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabeling {
    pub geometry: VolumeGeometry,
    pub labels: Vec<u32>,
    /// `sizes[k - 1]` is the voxel count of cluster `k`.
    pub sizes: Vec<usize>,
    pub connectivity: Connectivity,
}

impl ClusterLabeling {
    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    /// Keeps clusters whose size satisfies `keep`, renumbering survivors
    /// 1..=K' in their original order.
    pub fn retain(&self, mut keep: impl FnMut(usize) -> bool) -> ClusterLabeling {
        let mut remap = vec![0u32; self.sizes.len() + 1];
        let mut sizes = Vec::new();
        for (k, &size) in self.sizes.iter().enumerate() {
            if keep(size) {
                sizes.push(size);
                remap[k + 1] = sizes.len() as u32;
            }
        }
        let labels = self.labels.iter().map(|&l| remap[l as usize]).collect();
        ClusterLabeling { geometry: self.geometry, labels, sizes, connectivity: self.connectivity }
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::new(self.geometry, self.labels.iter().map(|&l| l != 0).collect())
            .expect("labels match geometry")
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Labels the connected components of `mask`.
///
/// Single forward scan with union-find over backward neighbors; roots are
/// always the smallest linear index of their set, so label numbering follows
/// the scan order of each cluster's first voxel.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> ClusterLabeling {
    let geometry = *mask.geometry();
    let n = geometry.len();
    let backward = connectivity.backward_offsets();
    let voxels = mask.voxels();

    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if !voxels[i] {
            continue;
        }
        let c = geometry.coords(i);
        for &off in &backward {
            let Some(j) = geometry.offset_index(c, off) else { continue };
            if !voxels[j] {
                continue;
            }
            let ri = find(&mut parent, i);
            let rj = find(&mut parent, j);
            if ri != rj {
                let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                parent[hi] = lo;
            }
        }
    }

    let mut labels = vec![0u32; n];
    let mut sizes: Vec<usize> = Vec::new();
    for i in 0..n {
        if !voxels[i] {
            continue;
        }
        let root = find(&mut parent, i);
        if root == i {
            sizes.push(0);
            labels[i] = sizes.len() as u32;
        } else {
            // roots precede their members in scan order
            labels[i] = labels[root];
        }
        sizes[labels[i] as usize - 1] += 1;
    }

    ClusterLabeling { geometry, labels, sizes, connectivity }
}

/// Cluster sizes only, in label order.
pub fn cluster_sizes(mask: &BinaryMask, connectivity: Connectivity) -> Vec<usize> {
    label_components(mask, connectivity).sizes
}

/// Largest cluster, or 0 for an empty labeling.
pub fn max_cluster_size(labeling: &ClusterLabeling) -> usize {
    labeling.sizes.iter().copied().max().unwrap_or(0)
}
