//! Colored PLY and CSV dumps for inspecting a registration.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;
use xsreg_core::matching::AlphaTrace;
use xsreg_core::preprocess::downsample_uniform;
use xsreg_core::structure::{point_labels, Extraction, StructureGraph};
use xsreg_core::{apply_transform, PointCloud, RegistrationConfig, RegistrationOutput};

use crate::formats::write_colored_ply;

const GRAY: [u8; 3] = [160, 160, 160];
const ORANGE: [u8; 3] = [240, 120, 20];

/// A well-spread color for label `k`.
pub fn label_color(k: usize) -> [u8; 3] {
    let h = (k as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let c = |v: f64| (40.0 + 215.0 * v) as u8;
    [c(r), c(g), c(b)]
}

/// Colors each point by its supervoxel; unassigned points are black.
pub fn supervoxel_colors(cloud: &PointCloud, extraction: &Extraction) -> Vec<[u8; 3]> {
    point_labels(cloud.len(), &extraction.voxels).into_iter().map(|l| if l == usize::MAX { [0, 0, 0] } else { label_color(l) }).collect()
}

/// Target in gray and the registered source in orange, as one cloud.
pub fn overlay(target: &PointCloud, registered: &PointCloud) -> (PointCloud, Vec<[u8; 3]>) {
    let mut points = target.points.clone();
    points.extend_from_slice(&registered.points);
    let mut colors = vec![GRAY; target.len()];
    colors.extend(std::iter::repeat_n(ORANGE, registered.len()));
    (PointCloud::new("overlay", points), colors)
}

/// `{"nodes": [[x, y, z], ...], "edges": [[from, to], ...]}`.
pub fn graph_json(graph: &StructureGraph) -> String {
    let nodes: Vec<[f64; 3]> = graph.centroids.iter().map(|c| [c.x, c.y, c.z]).collect();
    json!({ "nodes": nodes, "edges": graph.edges }).to_string()
}

/// One entry per α stage: best objective, Frank–Wolfe iterations and the
/// score of the rounded iterate.
pub fn trace_json(trace: &[AlphaTrace]) -> String {
    let stages: Vec<_> = trace
        .iter()
        .map(|t| {
            json!({
                "alpha": t.alpha,
                "best_objective": t.objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "iterations": t.iterations,
                "candidate_score": t.candidate_score,
            })
        })
        .collect();
    serde_json::Value::from(stages).to_string()
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `target_supervoxels.ply`, `source_supervoxels.ply`,
/// `overlay.ply`, `matches.csv`, `target_graph.json`, `source_graph.json`
/// and `match_trace.json` into `dir`.
pub fn export_debug(dir: &Path, target: &PointCloud, source: &PointCloud, config: &RegistrationConfig, out: &RegistrationOutput) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let t_down = downsample_uniform(target, config.structure_points);
    let s_down = downsample_uniform(&apply_transform(source, &out.scale_transform), config.structure_points);
    write_colored_ply(&dir.join("target_supervoxels.ply"), &t_down, &supervoxel_colors(&t_down, &out.target_structure))?;
    write_colored_ply(&dir.join("source_supervoxels.ply"), &s_down, &supervoxel_colors(&s_down, &out.source_structure))?;
    let (cloud, colors) = overlay(&downsample_uniform(target, config.icp_points), &apply_transform(&downsample_uniform(source, config.icp_points), &out.transform));
    write_colored_ply(&dir.join("overlay.ply"), &cloud, &colors)?;

    let path = dir.join("matches.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["target_node", "source_node", "target_x", "target_y", "target_z", "source_x", "source_y", "source_z", "inlier"])?;
    let (gt, gs) = (&out.target_structure.graph, &out.source_structure.graph);
    for (&(t, s), &inlier) in out.matches.iter().zip(&out.inlier_mask) {
        let (a, b) = (gt.centroids[t], gs.centroids[s]);
        w.write_record([t.to_string(), s.to_string(), a.x.to_string(), a.y.to_string(), a.z.to_string(), b.x.to_string(), b.y.to_string(), b.z.to_string(), inlier.to_string()])?;
    }
    w.flush()?;

    write(&dir.join("target_graph.json"), graph_json(gt))?;
    write(&dir.join("source_graph.json"), graph_json(gs))?;
    write(&dir.join("match_trace.json"), trace_json(&out.diagnostics.match_trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_dump_layout() {
        use xsreg_core::structure::esf::EsfDescriptor;
        use xsreg_core::Point3;
        let g = StructureGraph::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 2.0, 0.0)],
            vec![EsfDescriptor::zeros(); 3],
            vec![(0, 1), (1, 2)],
            1.0,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&graph_json(&g)).unwrap();
        assert_eq!(v["nodes"][2], json!([0.0, 2.0, 0.0]));
        assert_eq!(v["edges"], json!([[0, 1], [1, 2]]));
    }

    #[test]
    fn colors_are_distinct_for_nearby_labels() {
        let c: Vec<[u8; 3]> = (0..12).map(label_color).collect();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                assert_ne!(c[i], c[j]);
            }
        }
    }
}
