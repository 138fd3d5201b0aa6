//! Macro and micro structure of a cloud: supervoxels, their directed
//! adjacency graph, and a shape descriptor per supervoxel.

pub mod esf;
pub mod supervoxel;

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::affinity::{edge_descriptor, EdgeDescriptor};
use crate::geometry::{cloud_radius, Point3, PointCloud, SimilarityTransform};
use crate::spatial::SpatialIndex;
use crate::{Error, Result};

pub use esf::{esf_of_points, EsfDescriptor};
pub use supervoxel::{point_labels, segment_supervoxels, SuperVoxel, SupervoxelParams};

/// Fraction of the cloud radius used as supervoxel radius in the original
/// experiments.
pub const ORIGINAL_VOXEL_RADIUS_FRACTION: f64 = 0.01;

/// Directed attributed graph over supervoxel centroids.
///
/// Edge `c = (i, j)` goes from node `i` to node `j`; in incidence form
/// `G[i][c] = H[j][c] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureGraph {
    pub centroids: Vec<Point3>,
    /// One per node, or empty before descriptors are computed.
    pub descriptors: Vec<EsfDescriptor>,
    /// Sorted, without self-loops or duplicates.
    pub edges: Vec<(usize, usize)>,
    /// One per edge, or empty.
    pub edge_descriptors: Vec<EdgeDescriptor>,
    /// Length unit for edge lengths (the radius of the source cloud).
    pub scale: f64,
    /// Supervoxel each node was built from, when known.
    pub node_voxel: Vec<usize>,
}

impl StructureGraph {
    /// Builds a graph and derives edge descriptors from the centroids.
    pub fn new(
        centroids: Vec<Point3>,
        descriptors: Vec<EsfDescriptor>,
        mut edges: Vec<(usize, usize)>,
        scale: f64,
    ) -> Result<Self> {
        let n = centroids.len();
        if !descriptors.is_empty() && descriptors.len() != n {
            return Err(Error::Dimension("descriptor count must match node count".to_string()));
        }
        if edges.iter().any(|&(i, j)| i >= n || j >= n || i == j) {
            return Err(Error::DegenerateGraph("edge endpoints out of range or self-loop".to_string()));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter("graph scale must be positive".to_string()));
        }
        edges.sort_unstable();
        edges.dedup();
        let edge_descriptors =
            edges.iter().map(|&(i, j)| edge_descriptor(&centroids[i], &centroids[j])).collect::<Result<Vec<_>>>()?;
        Ok(Self { node_voxel: (0..n).collect(), centroids, descriptors, edges, edge_descriptors, scale })
    }

    pub fn node_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `G`: node × edge, 1 at the tail of each edge.
    pub fn incidence_g(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.node_count(), self.edge_count());
        for (c, &(i, _)) in self.edges.iter().enumerate() {
            g[(i, c)] = 1.0;
        }
        g
    }

    /// `H`: node × edge, 1 at the head of each edge.
    pub fn incidence_h(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.node_count(), self.edge_count());
        for (c, &(_, j)) in self.edges.iter().enumerate() {
            h[(j, c)] = 1.0;
        }
        h
    }

    /// Heads of the edges leaving `i`.
    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.edges.partition_point(|&(a, _)| a < i);
        self.edges[start..].iter().take_while(move |&&(a, _)| a == i).map(|&(_, b)| b)
    }

    /// Same graph with centroids moved by `t`; descriptors are recomputed
    /// and the length unit follows the transform's scale.
    pub fn transformed(&self, t: &SimilarityTransform) -> Result<Self> {
        let mut g = StructureGraph::new(
            self.centroids.iter().map(|p| t.apply(p)).collect(),
            self.descriptors.clone(),
            self.edges.clone(),
            self.scale * t.scale,
        )?;
        g.node_voxel = self.node_voxel.clone();
        Ok(g)
    }
}

/// Directed voxel adjacency: `i → j` when a point of voxel `i` has a point of
/// voxel `j` among its `k` nearest neighbours. The relation is not
/// symmetrized.
pub fn build_adjacency(cloud: &PointCloud, voxels: &[SuperVoxel], k: usize) -> Result<Vec<(usize, usize)>> {
    let label = point_labels(cloud.len(), voxels);
    if label.iter().any(|&l| l == usize::MAX) {
        return Err(Error::InvalidParameter("voxels do not cover the cloud".to_string()));
    }
    let index = SpatialIndex::new(&cloud.points);
    let knn = supervoxel::knn_lists(&index, k);
    let mut edges = Vec::new();
    for (i, list) in knn.iter().enumerate() {
        for &j in list {
            if label[i] != label[j] {
                edges.push((label[i], label[j]));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionParams {
    pub voxel_radius_fraction: f64,
    pub supervoxel: SupervoxelParams,
    pub esf_samples: usize,
    /// Supervoxels with fewer members do not become graph nodes.
    pub min_node_points: usize,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            voxel_radius_fraction: ORIGINAL_VOXEL_RADIUS_FRACTION,
            supervoxel: SupervoxelParams::default(),
            esf_samples: esf::DEFAULT_SAMPLES,
            min_node_points: 3,
        }
    }
}

/// Everything produced while extracting a cloud's structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub graph: StructureGraph,
    pub voxels: Vec<SuperVoxel>,
    pub voxel_radius: f64,
}

fn voxel_seed(seed: u64, voxel: usize) -> u64 {
    seed ^ (voxel as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Segment → adjacency → per-voxel ESF → per-edge descriptor.
pub fn extract(cloud: &PointCloud, params: &ExtractionParams, seed: u64) -> Result<Extraction> {
    cloud.require_len(supervoxel::MIN_SEGMENT_POINTS)?;
    let radius = cloud_radius(cloud)?;
    if !(radius > 0.0) {
        return Err(Error::DegenerateCloud { cloud: cloud.id.clone() });
    }
    let voxel_radius = params.voxel_radius_fraction * radius;
    let voxels = segment_supervoxels(cloud, voxel_radius, &params.supervoxel)?;
    let edges = build_adjacency(cloud, &voxels, params.supervoxel.connectivity_k)?;

    let keep: Vec<usize> = (0..voxels.len()).filter(|&v| voxels[v].member_indices.len() >= params.min_node_points.max(3)).collect();
    let mut remap = vec![usize::MAX; voxels.len()];
    for (node, &v) in keep.iter().enumerate() {
        remap[v] = node;
    }
    let mut descriptors = Vec::with_capacity(keep.len());
    for &v in &keep {
        let pts: Vec<Point3> = voxels[v].member_indices.iter().map(|&i| cloud.points[i]).collect();
        descriptors.push(esf_of_points(&pts, params.esf_samples, voxel_seed(seed, v))?);
    }
    let centroids: Vec<Point3> = keep.iter().map(|&v| voxels[v].centroid).collect();
    let edges: Vec<(usize, usize)> = edges
        .into_iter()
        .filter_map(|(a, b)| {
            let (a, b) = (remap[a], remap[b]);
            (a != usize::MAX && b != usize::MAX && (centroids[a] - centroids[b]).norm() > 1e-12).then_some((a, b))
        })
        .collect();
    let mut graph = StructureGraph::new(centroids, descriptors, edges, radius)?;
    graph.node_voxel = keep;
    Ok(Extraction { graph, voxels, voxel_radius })
}

/// The structure graph of `cloud` with supervoxel radius
/// `voxel_radius_fraction · cloud_radius`.
pub fn extract_structure(cloud: &PointCloud, voxel_radius_fraction: f64, seed: u64) -> Result<StructureGraph> {
    let params = ExtractionParams { voxel_radius_fraction, ..ExtractionParams::default() };
    extract(cloud, &params, seed).map(|e| e.graph)
}
