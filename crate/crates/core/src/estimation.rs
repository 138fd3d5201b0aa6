//! Rigid transform estimation from correspondences and by ICP.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{mean_point, Point3, PointCloud, SimilarityTransform};
use crate::spatial::SpatialIndex;
use crate::{Error, Result};

/// Source and target points paired by index, with an optional inlier mask.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(Point3, Point3)>,
    pub inlier_mask: Option<Vec<bool>>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<(Point3, Point3)>) -> Self {
        Self { pairs, inlier_mask: None }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs selected by the mask, or all of them.
    pub fn active(&self) -> Vec<(Point3, Point3)> {
        match &self.inlier_mask {
            Some(mask) => self.pairs.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect(),
            None => self.pairs.clone(),
        }
    }
}

/// Least-squares rigid (or similarity) transform mapping sources onto targets.
pub fn fit_rigid(set: &CorrespondenceSet, with_scale: bool) -> Result<SimilarityTransform> {
    fit_pairs(&set.active(), with_scale)
}

fn fit_pairs(pairs: &[(Point3, Point3)], with_scale: bool) -> Result<SimilarityTransform> {
    if pairs.len() < 3 {
        return Err(Error::TooFewPoints { cloud: "correspondences".to_string(), needed: 3, got: pairs.len() });
    }
    let n = pairs.len() as f64;
    let src: Vec<Point3> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point3> = pairs.iter().map(|p| p.1).collect();
    let (ms, md) = (mean_point(&src), mean_point(&dst));
    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(&dst) {
        let (a, b) = (s - ms, d - md);
        cov += b * a.transpose();
        scatter += a * a.transpose();
        var_s += a.norm_squared();
    }
    cov /= n;
    var_s /= n;
    let spread = scatter.symmetric_eigenvalues();
    let (lo, hi) = spread.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let second = spread.sum() - lo - hi;
    if !(hi > 0.0) || second <= 1e-18 * hi {
        return Err(Error::Collinear);
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.ok_or(Error::Collinear)?, svd.v_t.ok_or(Error::Collinear)?);
    let sign = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rotation = u * fix * v_t;
    let scale = if with_scale {
        let d = svd.singular_values;
        (d[0] + d[1] + sign * d[2]) / var_s
    } else {
        1.0
    };
    let translation = md.coords - scale * (rotation * ms.coords);
    Ok(SimilarityTransform { scale, rotation, translation })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Residual below which a pair counts as an inlier.
    pub threshold: f64,
    pub max_iters: usize,
    /// Success probability used for the adaptive iteration bound; 1 disables
    /// early exit.
    pub confidence: f64,
    pub seed: u64,
}

impl RansacParams {
    pub fn new(threshold: f64, seed: u64) -> Self {
        Self { threshold, max_iters: 2000, confidence: 0.999, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub transform: SimilarityTransform,
    pub inlier_mask: Vec<bool>,
    /// Inliers of the best minimal-sample model, before refitting.
    pub consensus: usize,
    pub iterations: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&m| m).count()
    }
}

fn inliers(pairs: &[(Point3, Point3)], t: &SimilarityTransform, threshold: f64) -> Vec<bool> {
    pairs.iter().map(|(s, d)| (t.apply(s) - d).norm() < threshold).collect()
}

fn masked(pairs: &[(Point3, Point3)], mask: &[bool]) -> Vec<(Point3, Point3)> {
    pairs.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect()
}

/// Rigid RANSAC over three-pair samples followed by a refit on the consensus set.
pub fn ransac_rigid(set: &CorrespondenceSet, params: &RansacParams) -> Result<RansacResult> {
    let pairs = &set.pairs;
    let n = pairs.len();
    if n < 3 {
        return Err(Error::TooFewPoints { cloud: "correspondences".to_string(), needed: 3, got: n });
    }
    if !(params.threshold > 0.0) {
        return Err(Error::InvalidParameter("RANSAC threshold must be positive".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Vec<bool>)> = None;
    let mut needed = params.max_iters as f64;
    let mut iterations = 0;
    while iterations < params.max_iters && (iterations as f64) < needed {
        iterations += 1;
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut c = rng.random_range(0..n - 2);
        for lo in [a.min(b), a.max(b)] {
            if c >= lo {
                c += 1;
            }
        }
        let Ok(model) = fit_pairs(&[pairs[a], pairs[b], pairs[c]], false) else {
            continue;
        };
        let mask = inliers(pairs, &model, params.threshold);
        let count = mask.iter().filter(|&&m| m).count();
        if best.as_ref().is_none_or(|(k, _)| count > *k) {
            best = Some((count, mask));
            let w = count as f64 / n as f64;
            let miss = 1.0 - w * w * w;
            needed = if params.confidence >= 1.0 || miss >= 1.0 {
                f64::INFINITY
            } else if miss <= 0.0 {
                0.0
            } else {
                (1.0 - params.confidence).ln() / miss.ln()
            };
        }
    }
    let (consensus, mut mask) = best.unwrap_or((0, vec![false; n]));
    if consensus < 3 {
        return Err(Error::InsufficientConsensus { inliers: consensus });
    }
    let mut transform = fit_pairs(&masked(pairs, &mask), false)?;
    let refit_mask = inliers(pairs, &transform, params.threshold);
    if refit_mask.iter().filter(|&&m| m).count() >= consensus && refit_mask != mask {
        if let Ok(t) = fit_pairs(&masked(pairs, &refit_mask), false) {
            transform = t;
            mask = refit_mask;
        }
    }
    Ok(RansacResult { transform, inlier_mask: mask, consensus, iterations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub transform: SimilarityTransform,
    pub iterations: usize,
    /// RMS nearest-neighbour distance over all source points under `transform`.
    pub final_rmse: f64,
    pub converged: bool,
    /// RMS over matches that pass the rejection gate, one entry per accepted
    /// estimate starting with `init`.
    pub rmse_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iters: usize,
    pub tol: f64,
    /// Matches farther than this multiple of the median match distance are dropped.
    pub gate: f64,
    /// Also refine a uniform scale at every step.
    pub with_scale: bool,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self { max_iters: 50, tol: 1e-6, gate: 3.0, with_scale: false }
    }
}

struct Matches {
    gated_rmse: f64,
    full_rmse: f64,
    pairs: Vec<(Point3, Point3)>,
}

fn match_against(index: &SpatialIndex, source: &[Point3], t: &SimilarityTransform, gate: f64) -> Matches {
    let moved: Vec<Point3> = source.iter().map(|p| t.apply(p)).collect();
    let nearest: Vec<(usize, f64)> = moved.iter().map(|p| index.nearest(p).expect("target is not empty")).collect();
    let mut d: Vec<f64> = nearest.iter().map(|n| n.1).collect();
    d.sort_unstable_by(f64::total_cmp);
    let median = d[d.len() / 2];
    let limit = gate * median;
    let full_rmse = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
    let pairs: Vec<(Point3, Point3)> = moved
        .iter()
        .zip(&nearest)
        .filter(|(_, n)| n.1 <= limit)
        .map(|(p, n)| (*p, index.points()[n.0]))
        .collect();
    let gated_rmse = if pairs.is_empty() {
        0.0
    } else {
        (pairs.iter().map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / pairs.len() as f64).sqrt()
    };
    Matches { gated_rmse, full_rmse, pairs }
}

/// Point-to-point ICP with a median-based rejection gate. A step that would
/// raise the gated RMSE is rejected and ends the iteration.
pub fn icp_refine(source: &PointCloud, target: &PointCloud, init: &SimilarityTransform, params: &IcpParams) -> Result<IcpResult> {
    source.require_len(1)?;
    target.require_len(1)?;
    let index = SpatialIndex::new(&target.points);
    let mut current = *init;
    let mut m = match_against(&index, &source.points, &current, params.gate);
    let mut trace = vec![m.gated_rmse];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iters {
        iterations += 1;
        let Ok(delta) = fit_pairs(&m.pairs, params.with_scale) else {
            break;
        };
        let candidate = delta.compose(&current);
        let next = match_against(&index, &source.points, &candidate, params.gate);
        if next.gated_rmse > m.gated_rmse {
            converged = true;
            break;
        }
        let improvement = m.gated_rmse - next.gated_rmse;
        current = candidate;
        m = next;
        trace.push(m.gated_rmse);
        if improvement < params.tol {
            converged = true;
            break;
        }
    }
    Ok(IcpResult { transform: current, iterations, final_rmse: m.full_rmse, converged, rmse_trace: trace })
}
