//! End-to-end registration of a source cloud onto a target cloud.

use alloc::vec::Vec;

use crate::affinity::AffinityMode;
use crate::estimation::{icp_refine, ransac_rigid, CorrespondenceSet, IcpParams, RansacParams};
use crate::geometry::{PointCloud, SimilarityTransform};
use crate::matching::{match_graphs, AlphaTrace, MatchConfig};
use crate::preprocess::{downsample_uniform, normalize_scale, RadiusMode, ScaleEstimate};
use crate::structure::{extract, Extraction, ExtractionParams};
use crate::{Error, Result};

/// Supervoxel radius as a fraction of the cloud radius used by
/// [`RegistrationConfig::default`].
pub const DEFAULT_VOXEL_RADIUS_FRACTION: f64 = 0.2;

/// Source of wall-clock time for the stage timings, in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationConfig {
    pub seed: u64,
    pub radius_mode: RadiusMode,
    /// Both clouds are decimated to about this many points before
    /// supervoxel extraction.
    pub structure_points: usize,
    pub extraction: ExtractionParams,
    pub affinity: AffinityMode,
    pub matching: MatchConfig,
    /// RANSAC inlier threshold in units of the supervoxel radius.
    pub ransac_threshold_factor: f64,
    pub ransac_max_iters: usize,
    pub ransac_confidence: f64,
    /// ICP runs on clouds decimated to at most this many points.
    pub icp_points: usize,
    pub icp: IcpParams,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            radius_mode: RadiusMode::Max,
            structure_points: 2000,
            extraction: ExtractionParams { voxel_radius_fraction: DEFAULT_VOXEL_RADIUS_FRACTION, esf_samples: 3000, ..ExtractionParams::default() },
            affinity: AffinityMode::Similarity,
            matching: MatchConfig::default(),
            ransac_threshold_factor: 0.5,
            ransac_max_iters: 2000,
            ransac_confidence: 0.999,
            icp_points: 20_000,
            icp: IcpParams::default(),
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let checks = [
            (self.structure_points >= 10, "structure point count must be at least 10"),
            (positive(self.extraction.voxel_radius_fraction), "voxel radius fraction must be positive"),
            (positive(self.ransac_threshold_factor), "RANSAC threshold factor must be positive"),
            (self.ransac_max_iters >= 1, "RANSAC needs at least one iteration"),
            (self.icp_points >= 3, "ICP point count must be at least 3"),
            (self.matching.alpha_steps >= 1, "alpha steps must be at least 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidParameter((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub scale: ScaleEstimate,
    pub voxel_radius: f64,
    /// Node counts of the target and source graphs.
    pub nodes: (usize, usize),
    pub edges: (usize, usize),
    pub match_score: f64,
    pub match_smooth: f64,
    /// Objective values and iteration counts of every α stage.
    pub match_trace: Vec<AlphaTrace>,
    pub correspondences: usize,
    pub ransac_inliers: usize,
    pub ransac_iterations: usize,
    pub icp_iterations: usize,
    pub icp_rmse: f64,
    pub icp_converged: bool,
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationOutput {
    /// Maps the source cloud onto the target cloud.
    pub transform: SimilarityTransform,
    /// Scale normalization followed by the RANSAC estimate, before ICP.
    pub coarse: SimilarityTransform,
    /// Maps the source cloud into the frame the graphs were built in.
    pub scale_transform: SimilarityTransform,
    pub target_structure: Extraction,
    /// Extracted from the scale-normalized source.
    pub source_structure: Extraction,
    /// Matched `(target node, source node)` pairs.
    pub matches: Vec<(usize, usize)>,
    /// RANSAC verdict for each entry of `matches`.
    pub inlier_mask: Vec<bool>,
    pub diagnostics: Diagnostics,
}

fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Stopwatch<'a, C: Clock + ?Sized> {
    clock: &'a C,
    last: f64,
    timings: Vec<StageTiming>,
}

impl<C: Clock + ?Sized> Stopwatch<'_, C> {
    fn lap(&mut self, stage: &'static str) {
        let now = self.clock.now();
        self.timings.push(StageTiming { stage, seconds: now - self.last });
        self.last = now;
    }
}

/// [`register_with_clock`] without timings.
pub fn register(target: &PointCloud, source: &PointCloud, config: &RegistrationConfig) -> Result<RegistrationOutput> {
    register_with_clock(target, source, config, &NoClock)
}

/// Estimates the similarity transform that maps `source` onto `target`.
///
/// Stages: scale normalization, supervoxel structure extraction on both
/// clouds, graph matching, RANSAC on the matched supervoxel centroids and
/// ICP on the decimated clouds. Errors carry the name of the failing stage.
pub fn register_with_clock<C: Clock + ?Sized>(
    target: &PointCloud,
    source: &PointCloud,
    config: &RegistrationConfig,
    clock: &C,
) -> Result<RegistrationOutput> {
    let mut watch = Stopwatch { clock, last: clock.now(), timings: Vec::new() };

    config.validate().map_err(|e| e.in_stage("configuration"))?;
    let (scaled, scale, scale_transform) = (|| {
        for cloud in [target, source] {
            cloud.validate()?;
            cloud.require_len(10)?;
        }
        normalize_scale(target, source, config.radius_mode)
    })()
    .map_err(|e| e.in_stage("preprocessing"))?;
    watch.lap("preprocessing");

    let (target_structure, source_structure) = (|| {
        let t = extract(&downsample_uniform(target, config.structure_points), &config.extraction, sub_seed(config.seed, 1))?;
        let s = extract(&downsample_uniform(&scaled, config.structure_points), &config.extraction, sub_seed(config.seed, 2))?;
        Ok::<_, Error>((t, s))
    })()
    .map_err(|e| e.in_stage("structure extraction"))?;
    watch.lap("structure extraction");

    let (g_t, g_s) = (&target_structure.graph, &source_structure.graph);
    let matched = match_graphs(g_t, g_s, config.affinity, &config.matching).map_err(|e| e.in_stage("graph matching"))?;
    let matches: Vec<(usize, usize)> = matched.assignment.pairs().collect();
    watch.lap("graph matching");

    let voxel_radius = target_structure.voxel_radius;
    let set = CorrespondenceSet::new(matches.iter().map(|&(t, s)| (g_s.centroids[s], g_t.centroids[t])).collect());
    let params = RansacParams {
        threshold: config.ransac_threshold_factor * voxel_radius,
        max_iters: config.ransac_max_iters,
        confidence: config.ransac_confidence,
        seed: sub_seed(config.seed, 3),
    };
    let ransac = ransac_rigid(&set, &params).map_err(|e| e.in_stage("RANSAC"))?;
    watch.lap("RANSAC");

    let icp = (|| {
        let src = downsample_uniform(&scaled, config.icp_points);
        let dst = downsample_uniform(target, config.icp_points);
        icp_refine(&src, &dst, &ransac.transform, &config.icp)
    })()
    .map_err(|e| e.in_stage("ICP"))?;
    watch.lap("ICP");

    let diagnostics = Diagnostics {
        scale,
        voxel_radius,
        nodes: (g_t.node_count(), g_s.node_count()),
        edges: (g_t.edge_count(), g_s.edge_count()),
        match_score: matched.score,
        match_smooth: matched.smooth,
        match_trace: matched.state.trace,
        correspondences: matches.len(),
        ransac_inliers: ransac.inlier_count(),
        ransac_iterations: ransac.iterations,
        icp_iterations: icp.iterations,
        icp_rmse: icp.final_rmse,
        icp_converged: icp.converged,
        timings: watch.timings,
    };
    Ok(RegistrationOutput {
        transform: icp.transform.compose(&scale_transform),
        coarse: ransac.transform.compose(&scale_transform),
        scale_transform,
        target_structure,
        source_structure,
        matches,
        inlier_mask: ransac.inlier_mask,
        diagnostics,
    })
}

/// Identity-initialized ICP after scale normalization.
pub fn register_icp_only(target: &PointCloud, source: &PointCloud, config: &RegistrationConfig) -> Result<SimilarityTransform> {
    config.validate().map_err(|e| e.in_stage("configuration"))?;
    let (scaled, _, scale_transform) = (|| {
        for cloud in [target, source] {
            cloud.validate()?;
            cloud.require_len(10)?;
        }
        normalize_scale(target, source, config.radius_mode)
    })()
    .map_err(|e| e.in_stage("preprocessing"))?;
    let src = downsample_uniform(&scaled, config.icp_points);
    let dst = downsample_uniform(target, config.icp_points);
    let icp = icp_refine(&src, &dst, &SimilarityTransform::identity(), &config.icp).map_err(|e| e.in_stage("ICP"))?;
    Ok(icp.transform.compose(&scale_transform))
}
