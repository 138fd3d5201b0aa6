//! Node and edge affinities between two structure graphs.
//!
//! Both affinities start from a matrix of descriptor distances normalized by
//! its global maximum, `D̄ = D / max D`. The optimizer maximizes total
//! affinity, so the default orientation is the similarity `1 − D̄`;
//! [`AffinityMode::PaperLiteral`] keeps `D̄` itself for ablations.

use alloc::string::ToString;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::Point3;
use crate::structure::StructureGraph;
use crate::{Error, Result};

/// Below this, `sin(z_angle)` is treated as zero and the edge as parallel to z.
pub const SINGULAR_SIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AffinityMode {
    #[default]
    Similarity,
    PaperLiteral,
}

/// Direction angles and length of a directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeDescriptor {
    pub x_angle: f64,
    pub y_angle: f64,
    pub z_angle: f64,
    pub d: f64,
}

impl EdgeDescriptor {
    /// `[x_angle, y_angle, z_angle, d / length_scale]`.
    pub fn features(&self, length_scale: f64) -> [f64; 4] {
        [self.x_angle, self.y_angle, self.z_angle, self.d / length_scale]
    }
}

pub fn edge_descriptor(from: &Point3, to: &Point3) -> Result<EdgeDescriptor> {
    let delta = to - from;
    let d = delta.norm();
    if !(d > 1e-12) {
        return Err(Error::ZeroLengthEdge);
    }
    let z_angle = (delta.z / d).clamp(-1.0, 1.0).acos();
    let s = z_angle.sin();
    let (x_angle, y_angle) = if s > SINGULAR_SIN {
        ((delta.x / (d * s)).clamp(-1.0, 1.0).acos(), (delta.y / (d * s)).clamp(-1.0, 1.0).acos())
    } else {
        (0.0, 0.0)
    };
    Ok(EdgeDescriptor { x_angle, y_angle, z_angle, d })
}

/// Turns a raw distance matrix into an affinity in `[0, 1]`.
pub fn normalize_distances(mut d: DMatrix<f64>, mode: AffinityMode) -> DMatrix<f64> {
    let max = d.iter().copied().fold(0.0, f64::max);
    match (mode, max > 0.0) {
        (AffinityMode::Similarity, true) => d.apply(|v| *v = 1.0 - *v / max),
        (AffinityMode::Similarity, false) => d.fill(1.0),
        (AffinityMode::PaperLiteral, true) => d.apply(|v| *v /= max),
        (AffinityMode::PaperLiteral, false) => d.fill(0.0),
    }
    d
}

/// `Kp[i][j]` from the L2 distance of the ESF descriptors.
pub fn node_affinity(g1: &StructureGraph, g2: &StructureGraph, mode: AffinityMode) -> Result<DMatrix<f64>> {
    if g1.node_count() == 0 || g2.node_count() == 0 {
        return Err(Error::DegenerateGraph("node affinity needs at least one node per graph".to_string()));
    }
    if g1.descriptors.len() != g1.node_count() || g2.descriptors.len() != g2.node_count() {
        return Err(Error::Dimension("every node needs a descriptor".to_string()));
    }
    let d = DMatrix::from_fn(g1.node_count(), g2.node_count(), |i, j| g1.descriptors[i].distance(&g2.descriptors[j]));
    Ok(normalize_distances(d, mode))
}

/// `Kq[c1][c2]` from the L2 distance of the edge 4-vectors, lengths divided
/// by each graph's scale.
pub fn edge_affinity(g1: &StructureGraph, g2: &StructureGraph, mode: AffinityMode) -> Result<DMatrix<f64>> {
    for (g, name) in [(g1, "first"), (g2, "second")] {
        if g.edges.is_empty() {
            return Err(Error::NoEdges { graph: name.to_string() });
        }
        if g.edge_descriptors.len() != g.edges.len() {
            return Err(Error::Dimension("every edge needs a descriptor".to_string()));
        }
    }
    let f1: alloc::vec::Vec<[f64; 4]> = g1.edge_descriptors.iter().map(|e| e.features(g1.scale)).collect();
    let f2: alloc::vec::Vec<[f64; 4]> = g2.edge_descriptors.iter().map(|e| e.features(g2.scale)).collect();
    let d = DMatrix::from_fn(f1.len(), f2.len(), |a, b| {
        f1[a].iter().zip(&f2[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    });
    Ok(normalize_distances(d, mode))
}

/// Both affinity matrices of a graph pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityPair {
    pub kp: DMatrix<f64>,
    pub kq: DMatrix<f64>,
}

impl AffinityPair {
    pub fn compute(g1: &StructureGraph, g2: &StructureGraph, mode: AffinityMode) -> Result<Self> {
        Ok(Self { kp: node_affinity(g1, g2, mode)?, kq: edge_affinity(g1, g2, mode)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_rotation, SimilarityTransform};
    use crate::structure::esf::{EsfDescriptor, ESF_LEN};
    use alloc::vec;
    use alloc::vec::Vec;
    use approx::assert_relative_eq;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    use nalgebra::Vector3;

    fn graph(points: &[[f64; 3]], edges: &[(usize, usize)], desc: Vec<EsfDescriptor>) -> StructureGraph {
        let centroids = points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
        StructureGraph::new(centroids, desc, edges.to_vec(), 1.0).unwrap()
    }

    fn unit_desc(k: usize) -> EsfDescriptor {
        let mut d = EsfDescriptor { bins: vec![0.0; ESF_LEN] };
        d.bins[k] = 1.0;
        d
    }

    #[test]
    fn edge_descriptor_examples() {
        let e = edge_descriptor(&Point3::origin(), &Point3::new(1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(e.d, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(e.z_angle, FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(e.x_angle, FRAC_PI_4, epsilon = 1e-12);
        assert_relative_eq!(e.y_angle, FRAC_PI_4, epsilon = 1e-12);

        let e = edge_descriptor(&Point3::origin(), &Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((e.d, e.z_angle, e.x_angle, e.y_angle), (1.0, 0.0, 0.0, 0.0));

        let e = edge_descriptor(&Point3::origin(), &Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(e.d, 1.0);
        assert_relative_eq!(e.z_angle, FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(e.x_angle, 0.0);
        assert_relative_eq!(e.y_angle, FRAC_PI_2, epsilon = 1e-15);

        assert_eq!(edge_descriptor(&Point3::new(1.0, 2.0, 3.0), &Point3::new(1.0, 2.0, 3.0)), Err(Error::ZeroLengthEdge));
    }

    fn sample_graphs() -> (StructureGraph, StructureGraph) {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.2, 0.0], [0.3, 1.1, 0.4], [0.9, 0.8, -0.7]];
        let edges = [(0, 1), (1, 0), (1, 2), (2, 3), (3, 0), (0, 2)];
        let descs: Vec<EsfDescriptor> = (0..4).map(|k| {
            let mut d = unit_desc(k);
            d.bins[10 + k] = 0.5 * k as f64;
            d
        }).collect();
        let g = graph(&pts, &edges, descs);
        (g.clone(), g)
    }

    #[test]
    fn identical_graphs_have_unit_diagonals() {
        let (g1, g2) = sample_graphs();
        let a = AffinityPair::compute(&g1, &g2, AffinityMode::Similarity).unwrap();
        for i in 0..g1.node_count() {
            assert_eq!(a.kp[(i, i)], 1.0);
        }
        for c in 0..g1.edges.len() {
            assert_eq!(a.kq[(c, c)], 1.0);
        }
        for m in [&a.kp, &a.kq] {
            assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(m.iter().any(|&v| v == 0.0) && m.iter().any(|&v| v == 1.0));
        }
    }

    #[test]
    fn translation_leaves_affinities_unchanged() {
        let (g1, g2) = sample_graphs();
        let moved = g2.transformed(&SimilarityTransform::from_translation(Vector3::new(10.0, -3.0, 7.0))).unwrap();
        let a = AffinityPair::compute(&g1, &g2, AffinityMode::Similarity).unwrap();
        let b = AffinityPair::compute(&g1, &moved, AffinityMode::Similarity).unwrap();
        assert_eq!(a.kp, b.kp);
        for c in 0..g1.edges.len() {
            assert!((b.kq[(c, c)] - 1.0).abs() < 1e-12);
        }
        for (x, y) in a.kq.iter().zip(b.kq.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_changes_edge_affinity() {
        let (g1, g2) = sample_graphs();
        let rotated = g2.transformed(&SimilarityTransform::rigid(axis_rotation(2, FRAC_PI_2), Vector3::zeros())).unwrap();
        let a = edge_affinity(&g1, &g2, AffinityMode::Similarity).unwrap();
        let b = edge_affinity(&g1, &rotated, AffinityMode::Similarity).unwrap();
        assert!(a.iter().zip(b.iter()).any(|(x, y)| (x - y).abs() > 0.1));
    }

    #[test]
    fn permuted_descriptors_are_recovered_by_row_argmax() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let g1 = graph(&pts, &[(0, 1)], (0..3).map(unit_desc).collect());
        let perm = [2usize, 0, 1];
        let g2 = graph(&pts, &[(0, 1)], perm.iter().map(|&k| unit_desc(k)).collect());
        let kp = node_affinity(&g1, &g2, AffinityMode::Similarity).unwrap();
        for i in 0..3 {
            let j = (0..3).max_by(|&a, &b| kp[(i, a)].total_cmp(&kp[(i, b)])).unwrap();
            assert_eq!(perm[j], i);
        }
    }

    #[test]
    fn literal_mode_is_the_flipped_matrix() {
        let (g1, g2) = sample_graphs();
        let s = node_affinity(&g1, &g2, AffinityMode::Similarity).unwrap();
        let l = node_affinity(&g1, &g2, AffinityMode::PaperLiteral).unwrap();
        for (a, b) in s.iter().zip(l.iter()) {
            assert!((a + b - 1.0).abs() < 1e-15);
        }
        let same = normalize_distances(DMatrix::zeros(2, 2), AffinityMode::Similarity);
        assert!(same.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn larger_distance_never_raises_affinity() {
        let base = DMatrix::from_row_slice(2, 2, &[0.1, 0.5, 0.9, 0.3]);
        let mut bumped = base.clone();
        bumped[(0, 0)] = 0.4;
        let a = normalize_distances(base, AffinityMode::Similarity);
        let b = normalize_distances(bumped, AffinityMode::Similarity);
        assert!(b[(0, 0)] <= a[(0, 0)]);
    }

    #[test]
    fn graphs_without_edges_are_rejected() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let g = graph(&pts, &[], (0..2).map(unit_desc).collect());
        assert!(matches!(edge_affinity(&g, &g, AffinityMode::Similarity), Err(Error::NoEdges { .. })));
    }
}
