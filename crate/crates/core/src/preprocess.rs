//! Scale normalization between two clouds and density-controlling decimation.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{apply_transform, mean_point, Point3, PointCloud, SimilarityTransform};
use crate::{Error, Result};

/// How the size of a cloud is measured before taking the scale ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusMode {
    /// Largest distance to the centroid.
    #[default]
    Max,
    /// 95th percentile of the distances to the centroid; tolerates a few
    /// far-away outliers.
    Percentile95,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEstimate {
    pub scale: f64,
    pub source_radius: f64,
    pub target_radius: f64,
}

pub fn radius_with(cloud: &PointCloud, mode: RadiusMode) -> Result<f64> {
    cloud.require_len(1)?;
    let c = mean_point(&cloud.points);
    let mut d: Vec<f64> = cloud.points.iter().map(|p| (p - c).norm()).collect();
    Ok(match mode {
        RadiusMode::Max => d.iter().copied().fold(0.0, f64::max),
        RadiusMode::Percentile95 => {
            d.sort_unstable_by(f64::total_cmp);
            let rank = ((0.95 * d.len() as f64).ceil() as usize).clamp(1, d.len());
            d[rank - 1]
        }
    })
}

/// `scale = radius(p) / radius(q)`.
pub fn estimate_scale(p: &PointCloud, q: &PointCloud, mode: RadiusMode) -> Result<ScaleEstimate> {
    p.require_len(2)?;
    q.require_len(2)?;
    let source_radius = radius_with(p, mode)?;
    let target_radius = radius_with(q, mode)?;
    for (r, cloud) in [(source_radius, p), (target_radius, q)] {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::DegenerateCloud { cloud: cloud.id.clone() });
        }
    }
    Ok(ScaleEstimate { scale: source_radius / target_radius, source_radius, target_radius })
}

/// Rescales `q` about its own centroid so that its radius matches `p`'s.
///
/// `p` is never modified. The returned transform maps the original `q` onto
/// the rescaled copy.
pub fn normalize_scale(
    p: &PointCloud,
    q: &PointCloud,
    mode: RadiusMode,
) -> Result<(PointCloud, ScaleEstimate, SimilarityTransform)> {
    let est = estimate_scale(p, q, mode)?;
    let t = SimilarityTransform::scaling_about(est.scale, &mean_point(&q.points));
    Ok((apply_transform(q, &t), est, t))
}

fn cell_keys(points: &[Point3], origin: &Point3, edge: f64) -> Vec<[i64; 3]> {
    points
        .iter()
        .map(|p| {
            let v = (p - origin) / edge;
            [v.x.floor() as i64, v.y.floor() as i64, v.z.floor() as i64]
        })
        .collect()
}

fn occupied_cells(points: &[Point3], origin: &Point3, edge: f64) -> usize {
    let mut keys = cell_keys(points, origin, edge);
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Voxel-grid decimation to roughly `target_count` points.
///
/// The cell edge is found by bisection (at most 32 steps) until the number of
/// occupied cells is within ±10% of the target. Each occupied cell keeps the
/// member closest to the cell's mean (lowest index on ties); survivors keep
/// their original order. Clouds already at or below the band are returned
/// unchanged.
pub fn downsample_uniform(cloud: &PointCloud, target_count: usize) -> PointCloud {
    let target = target_count.max(1);
    let n = cloud.points.len();
    let upper = (target as f64 * 1.1).floor() as usize;
    let lower = (target as f64 * 0.9).ceil() as usize;
    if n <= upper {
        let mut out = cloud.clone();
        out.faces = None;
        return out;
    }
    let (lo_corner, hi_corner) = cloud.bounding_box().expect("non-empty");
    let extent = (hi_corner - lo_corner).max();
    let mut hi = if extent > 0.0 { extent * (1.0 + 1e-9) } else { 1.0 };
    let mut best = (hi, 1usize);
    let in_band = |c: usize| c >= lower && c <= upper;
    let closer = |c: usize, best: usize| c.abs_diff(target) < best.abs_diff(target);

    if !in_band(1) {
        let mut lo = hi * 1e-7;
        let c_lo = occupied_cells(&cloud.points, &lo_corner, lo);
        if closer(c_lo, best.1) {
            best = (lo, c_lo);
        }
        if !in_band(c_lo) && c_lo > upper {
            for _ in 0..32 {
                let mid = (lo * hi).sqrt();
                let c = occupied_cells(&cloud.points, &lo_corner, mid);
                if closer(c, best.1) || in_band(c) {
                    best = (mid, c);
                }
                if in_band(c) {
                    break;
                }
                if c > upper {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    let edge = best.0;

    let keys = cell_keys(&cloud.points, &lo_corner, edge);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    let mut keep = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && keys[order[end]] == keys[order[start]] {
            end += 1;
        }
        let members = &order[start..end];
        let mean = mean_point(&members.iter().map(|&i| cloud.points[i]).collect::<Vec<_>>());
        let rep = members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                (cloud.points[a] - mean)
                    .norm_squared()
                    .total_cmp(&(cloud.points[b] - mean).norm_squared())
                    .then(a.cmp(&b))
            })
            .expect("non-empty cell");
        keep.push(rep);
        start = end;
    }
    keep.sort_unstable();
    cloud.select(&keep)
}
