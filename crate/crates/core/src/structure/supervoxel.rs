//! Geometry-only supervoxel clustering.
//!
//! Seeds sit on a regular grid of spacing `2r` (snapped to the nearest cloud
//! point, dropped when no point lies within `r`). Clusters grow best-first
//! over a symmetric k-NN graph, so every cluster is connected, using the
//! distance `λs·|p − c|/r + λn·(1 − |nₚ·n_c|)`. Seeds are then moved to their
//! cluster centroids and the growth is repeated.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{mean_point, Point3, PointCloud};
use crate::spatial::SpatialIndex;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervoxelParams {
    pub spatial_weight: f64,
    pub normal_weight: f64,
    /// Neighbourhood size of the growth graph.
    pub connectivity_k: usize,
    /// Neighbourhood size of the local plane fit.
    pub normal_k: usize,
    pub refine_iterations: usize,
}

impl Default for SupervoxelParams {
    fn default() -> Self {
        Self { spatial_weight: 1.0, normal_weight: 4.0, connectivity_k: 8, normal_k: 15, refine_iterations: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperVoxel {
    /// Sorted indices into the parent cloud.
    pub member_indices: Vec<usize>,
    pub centroid: Point3,
    /// Grid seed point this cluster started from.
    pub seed_index: usize,
}

pub const MIN_SEGMENT_POINTS: usize = 10;

/// Unit normal of the least-squares plane through `points`.
pub(crate) fn plane_normal(points: impl Iterator<Item = Point3> + Clone) -> Vector3<f64> {
    let pts: Vec<Point3> = points.collect();
    let c = mean_point(&pts);
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let n = eig.eigenvectors.column(k).into_owned();
    let norm = n.norm();
    if norm > 0.0 && norm.is_finite() {
        n / norm
    } else {
        Vector3::z()
    }
}

pub(crate) fn point_normals(index: &SpatialIndex, k: usize) -> Vec<Vector3<f64>> {
    let pts = index.points();
    pts.iter()
        .map(|p| {
            let nn = index.knn(p, k.max(3));
            plane_normal(nn.iter().map(|&(i, _)| pts[i]))
        })
        .collect()
}

/// `k` nearest neighbours of every point, excluding the point itself.
pub(crate) fn knn_lists(index: &SpatialIndex, k: usize) -> Vec<Vec<usize>> {
    index
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| index.knn(p, k + 1).into_iter().map(|c| c.0).filter(|&j| j != i).take(k).collect())
        .collect()
}

fn symmetric_graph(knn: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = knn.to_vec();
    for (i, list) in knn.iter().enumerate() {
        for &j in list {
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

#[derive(Debug, Clone, Copy)]
struct Seed {
    position: Point3,
    normal: Vector3<f64>,
    point: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    seed: usize,
    point: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.seed.cmp(&other.seed)).then(self.point.cmp(&other.point))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Grower<'a> {
    points: &'a [Point3],
    normals: &'a [Vector3<f64>],
    graph: &'a [Vec<usize>],
    radius: f64,
    params: &'a SupervoxelParams,
}

impl Grower<'_> {
    fn cost(&self, i: usize, seed: &Seed) -> f64 {
        self.params.spatial_weight * (self.points[i] - seed.position).norm() / self.radius
            + self.params.normal_weight * (1.0 - self.normals[i].dot(&seed.normal).abs())
    }

    /// Labels every point; seeds are extended with new ones for components no
    /// seed reaches.
    fn grow(&self, seeds: &mut Vec<Seed>) -> Vec<usize> {
        let n = self.points.len();
        let mut label = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        for (s, seed) in seeds.iter().enumerate() {
            heap.push(Reverse(Frontier { cost: self.cost(seed.point, seed), seed: s, point: seed.point }));
        }
        let mut next_unlabeled = 0;
        loop {
            while let Some(Reverse(f)) = heap.pop() {
                if label[f.point] != usize::MAX {
                    continue;
                }
                label[f.point] = f.seed;
                let seed = seeds[f.seed];
                for &nb in &self.graph[f.point] {
                    if label[nb] == usize::MAX {
                        heap.push(Reverse(Frontier { cost: self.cost(nb, &seed), seed: f.seed, point: nb }));
                    }
                }
            }
            while next_unlabeled < n && label[next_unlabeled] != usize::MAX {
                next_unlabeled += 1;
            }
            if next_unlabeled == n {
                return label;
            }
            let seed = Seed { position: self.points[next_unlabeled], normal: self.normals[next_unlabeled], point: next_unlabeled };
            seeds.push(seed);
            heap.push(Reverse(Frontier { cost: 0.0, seed: seeds.len() - 1, point: next_unlabeled }));
        }
    }
}

fn grid_seeds(points: &[Point3], index: &SpatialIndex, radius: f64) -> Vec<usize> {
    let lo = points.iter().fold(points[0], |acc, p| acc.inf(p));
    let spacing = 2.0 * radius;
    let mut cells: Vec<[i64; 3]> = points
        .iter()
        .map(|p| {
            let v = (p - lo) / spacing;
            [v.x.floor() as i64, v.y.floor() as i64, v.z.floor() as i64]
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let mut seeds = Vec::new();
    for c in cells {
        let center = lo + Vector3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * spacing;
        if let Some((i, d)) = index.nearest(&center) {
            if d <= radius && !seeds.contains(&i) {
                seeds.push(i);
            }
        }
    }
    seeds
}

/// Partitions `cloud` into spatially connected supervoxels of roughly
/// `voxel_radius`.
pub fn segment_supervoxels(cloud: &PointCloud, voxel_radius: f64, params: &SupervoxelParams) -> Result<Vec<SuperVoxel>> {
    cloud.require_len(MIN_SEGMENT_POINTS)?;
    if !(voxel_radius > 0.0) || !voxel_radius.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("voxel radius must be positive, got {voxel_radius}")));
    }
    let points = &cloud.points;
    let index = SpatialIndex::new(points);
    let normals = point_normals(&index, params.normal_k);
    let graph = symmetric_graph(&knn_lists(&index, params.connectivity_k));
    let grower = Grower { points, normals: &normals, graph: &graph, radius: voxel_radius, params };

    let origins = grid_seeds(points, &index, voxel_radius);
    let mut seed_origin: Vec<usize> = origins.clone();
    let mut seeds: Vec<Seed> =
        origins.iter().map(|&i| Seed { position: points[i], normal: normals[i], point: i }).collect();
    let mut label = grower.grow(&mut seeds);
    seed_origin.extend(seeds[seed_origin.len()..].iter().map(|s| s.point));

    for _ in 0..params.refine_iterations {
        let members = group(&label, seeds.len());
        let mut next = Vec::with_capacity(seeds.len());
        let mut next_origin = Vec::with_capacity(seeds.len());
        for (s, m) in members.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let c = mean_point(&m.iter().map(|&i| points[i]).collect::<Vec<_>>());
            let anchor = m
                .iter()
                .copied()
                .min_by(|&a, &b| (points[a] - c).norm_squared().total_cmp(&(points[b] - c).norm_squared()).then(a.cmp(&b)))
                .expect("non-empty cluster");
            next.push(Seed { position: c, normal: normals[anchor], point: anchor });
            next_origin.push(seed_origin[s]);
        }
        seeds = next;
        let before = seeds.len();
        label = grower.grow(&mut seeds);
        next_origin.extend(seeds[before..].iter().map(|s| s.point));
        seed_origin = next_origin;
    }

    Ok(group(&label, seeds.len())
        .into_iter()
        .zip(seed_origin)
        .filter(|(m, _)| !m.is_empty())
        .map(|(member_indices, seed_index)| {
            let centroid = mean_point(&member_indices.iter().map(|&i| points[i]).collect::<Vec<_>>());
            SuperVoxel { member_indices, centroid, seed_index }
        })
        .collect())
}

fn group(label: &[usize], count: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); count];
    for (i, &l) in label.iter().enumerate() {
        members[l].push(i);
    }
    members
}

/// Per-point voxel id for a partition.
pub fn point_labels(n_points: usize, voxels: &[SuperVoxel]) -> Vec<usize> {
    let mut label = vec![usize::MAX; n_points];
    for (v, voxel) in voxels.iter().enumerate() {
        for &i in &voxel.member_indices {
            label[i] = v;
        }
    }
    label
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_cloud(rng: &mut ChaCha8Rng, corner: Vector3<f64>, n: usize) -> Vec<Point3> {
        (0..n).map(|_| Point3::from(corner + Vector3::new(rng.random(), rng.random(), rng.random()))).collect()
    }

    fn assert_partition(n: usize, voxels: &[SuperVoxel]) {
        let mut seen = vec![0u32; n];
        for v in voxels {
            assert!(!v.member_indices.is_empty());
            for &i in &v.member_indices {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn two_separated_cubes_give_two_voxels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = cube_cloud(&mut rng, Vector3::zeros(), 300);
        pts.extend(cube_cloud(&mut rng, Vector3::new(10.0, 10.0, 10.0), 300));
        let cloud = PointCloud::new("cubes", pts);
        let voxels = segment_supervoxels(&cloud, 1.0, &SupervoxelParams::default()).unwrap();
        assert_eq!(voxels.len(), 2);
        assert_partition(600, &voxels);
        let mut sets: Vec<Vec<usize>> = voxels.iter().map(|v| v.member_indices.clone()).collect();
        sets.sort();
        assert_eq!(sets[0], (0..300).collect::<Vec<_>>());
        assert_eq!(sets[1], (300..600).collect::<Vec<_>>());
    }

    #[test]
    fn planar_grid_centroids_stay_on_plane() {
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                let (x, y) = (i as f64 * 0.05, j as f64 * 0.05);
                pts.push(Point3::new(x, y, 0.3 * x - 0.2 * y + 1.0));
            }
        }
        let cloud = PointCloud::new("plane", pts);
        let voxels = segment_supervoxels(&cloud, 0.2, &SupervoxelParams::default()).unwrap();
        assert!(voxels.len() > 4);
        assert_partition(cloud.len(), &voxels);
        for v in &voxels {
            let c = v.centroid;
            assert!((c.z - (0.3 * c.x - 0.2 * c.y + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn tiny_clouds_are_rejected() {
        let cloud = PointCloud::new("tiny", (0..9).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect());
        assert!(matches!(segment_supervoxels(&cloud, 1.0, &SupervoxelParams::default()), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn centroids_are_member_means_and_clusters_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point3> = (0..1500)
            .map(|_| {
                let (u, v): (f64, f64) = (rng.random_range(0.0..6.28), rng.random_range(-1.0..1.0));
                let r = (1.0 - v * v).sqrt();
                Point3::new(r * u.cos(), r * u.sin(), v)
            })
            .collect();
        let cloud = PointCloud::new("sphere", pts);
        let voxels = segment_supervoxels(&cloud, 0.15, &SupervoxelParams::default()).unwrap();
        assert_partition(cloud.len(), &voxels);
        for v in &voxels {
            let mean = mean_point(&v.member_indices.iter().map(|&i| cloud.points[i]).collect::<Vec<_>>());
            assert!((mean - v.centroid).norm() < 1e-12);
        }
        assert_eq!(voxels, segment_supervoxels(&cloud, 0.15, &SupervoxelParams::default()).unwrap());
    }
}
