//! Synthetic cross-source pairs from a mesh: a dense half view, and a
//! sparser, rotated, partial, rescaled, noisy view with outliers.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{apply_transform, axis_rotation, cloud_radius, mean_point, rotation_zyx, Point3, PointCloud, SimilarityTransform};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub rng_seed: u64,
    pub scale_range: (f64, f64),
    /// Each of the z, y and x angles is drawn from this range, in degrees.
    pub rotation_range_deg: (f64, f64),
    /// z translation as a fraction of twice the transformed view's radius.
    pub translation_z_fraction_range: (f64, f64),
    /// Gaussian noise level; `None` adds no noise.
    pub snr_db: Option<f64>,
    /// Outlier count as a fraction of the second view's size.
    pub outlier_fraction: f64,
    /// Largest per-axis outlier offset as a fraction of twice the view radius.
    pub outlier_offset_fraction: f64,
    pub missing_parts: usize,
    /// Radius of each removed region as a fraction of the view radius.
    pub missing_radius_fraction: f64,
    /// Rotation about y that produces the second viewpoint, in degrees.
    pub view_rotation_deg: f64,
    /// The second view keeps every `density_stride`-th point.
    pub density_stride: usize,
}

impl SynthesisConfig {
    /// Full cross-source corruption.
    pub fn database_c(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            scale_range: (3.0, 5.0),
            rotation_range_deg: (30.0, 60.0),
            translation_z_fraction_range: (0.0, 0.5),
            snr_db: Some(40.0),
            outlier_fraction: 0.3,
            outlier_offset_fraction: 0.01,
            missing_parts: 10,
            missing_radius_fraction: 0.05,
            view_rotation_deg: 60.0,
            density_stride: 3,
        }
    }

    /// Same geometry and transform ranges as [`Self::database_c`] without
    /// noise, outliers or missing regions.
    pub fn clean(rng_seed: u64) -> Self {
        Self { snr_db: None, outlier_fraction: 0.0, missing_parts: 0, ..Self::database_c(rng_seed) }
    }

    /// Every corruption and motion turned off: the second cloud is the
    /// strided, cropped mesh in the mesh's own frame.
    pub fn identity(rng_seed: u64) -> Self {
        Self {
            scale_range: (1.0, 1.0),
            rotation_range_deg: (0.0, 0.0),
            translation_z_fraction_range: (0.0, 0.0),
            view_rotation_deg: 0.0,
            ..Self::clean(rng_seed)
        }
    }

    /// Two partial views at equal density and scale, 30° per axis apart,
    /// 10 dB noise and 20% outliers.
    pub fn same_source(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            scale_range: (1.0, 1.0),
            rotation_range_deg: (30.0, 30.0),
            translation_z_fraction_range: (0.0, 0.5),
            snr_db: Some(10.0),
            outlier_fraction: 0.2,
            outlier_offset_fraction: 0.01,
            missing_parts: 0,
            missing_radius_fraction: 0.05,
            view_rotation_deg: 60.0,
            density_stride: 1,
        }
    }

    pub fn preset(name: &str, rng_seed: u64) -> Option<Self> {
        match name {
            "database-c" => Some(Self::database_c(rng_seed)),
            "clean" => Some(Self::clean(rng_seed)),
            "identity" => Some(Self::identity(rng_seed)),
            "same-source" => Some(Self::same_source(rng_seed)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let checks = [
            (ordered(self.scale_range) && self.scale_range.0 > 0.0, "scale range must be positive and ordered"),
            (ordered(self.rotation_range_deg), "rotation range must be ordered"),
            (ordered(self.translation_z_fraction_range), "translation range must be ordered"),
            (unit(self.outlier_fraction), "outlier fraction must lie in [0, 1]"),
            (unit(self.outlier_offset_fraction), "outlier offset fraction must lie in [0, 1]"),
            (unit(self.missing_radius_fraction), "missing radius fraction must lie in [0, 1]"),
            (self.density_stride >= 1, "density stride must be at least 1"),
            (self.snr_db.is_none_or(|s| s.is_finite()), "SNR must be finite"),
            (self.view_rotation_deg.is_finite(), "view rotation must be finite"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidParameter((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub s1: PointCloud,
    /// Noisy second view followed by `outlier_count` outliers.
    pub s2: PointCloud,
    /// The second view after motion and region removal, before noise; its
    /// points are the first points of `s2`, in order.
    pub s2_clean: PointCloud,
    pub outlier_count: usize,
    /// Maps the second view's frame onto the first view's frame.
    pub ground_truth: SimilarityTransform,
    pub config: SynthesisConfig,
}

/// Adds each triangle's centroid to the vertex list and drops the faces.
pub fn upsample_mesh(mesh: &PointCloud) -> Result<PointCloud> {
    mesh.validate()?;
    let faces = mesh.faces.as_ref().ok_or(Error::MissingFaces)?;
    let mut points = mesh.points.clone();
    points.extend(faces.iter().map(|f| Point3::from((mesh.points[f[0]].coords + mesh.points[f[1]].coords + mesh.points[f[2]].coords) / 3.0)));
    Ok(PointCloud::new(mesh.id.clone(), points))
}

fn crop_upper(points: impl IntoIterator<Item = Point3>) -> Vec<Point3> {
    points.into_iter().filter(|p| p.z >= 0.0).collect()
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn synthesize_pair(mesh: &PointCloud, config: &SynthesisConfig) -> Result<SyntheticPair> {
    config.validate()?;
    let dense = upsample_mesh(mesh)?;
    dense.require_len(100)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let s1 = PointCloud::new(format!("{}-s1", mesh.id), crop_upper(dense.points.iter().copied()));
    let view = SimilarityTransform::rigid(axis_rotation(1, config.view_rotation_deg.to_radians()), Vector3::zeros());
    let view2 = crop_upper(dense.points.iter().step_by(config.density_stride).map(|p| view.apply(p)));
    let view2_cloud = PointCloud::new("view2", view2.clone());
    let radius = cloud_radius(&view2_cloud)?;

    let hole = config.missing_radius_fraction * radius;
    let centers: Vec<Point3> = (0..config.missing_parts).map(|_| view2[rng.random_range(0..view2.len())]).collect();
    let kept: Vec<Point3> = view2.iter().copied().filter(|p| centers.iter().all(|c| (p - c).norm() > hole)).collect();

    let scale = uniform(&mut rng, config.scale_range);
    let angles = [(); 3].map(|_| uniform(&mut rng, config.rotation_range_deg).to_radians());
    let extent = 2.0 * radius * scale;
    let tz = uniform(&mut rng, config.translation_z_fraction_range) * extent;
    let motion = SimilarityTransform::new(scale, rotation_zyx(angles[0], angles[1], angles[2]), Vector3::new(0.0, 0.0, tz));
    let ground_truth = motion.compose(&view).inverse();

    let s2_clean = apply_transform(&PointCloud::new(format!("{}-s2-clean", mesh.id), kept), &motion);
    for cloud in [&s1, &s2_clean] {
        cloud.require_len(10)?;
    }
    let mut s2_points = s2_clean.points.clone();
    if let Some(snr) = config.snr_db {
        let c = mean_point(&s2_points);
        let signal = s2_points.iter().map(|p| (p - c).norm_squared()).sum::<f64>() / (3.0 * s2_points.len() as f64);
        let sigma = (signal / 10f64.powf(snr / 10.0)).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|_| Error::InvalidParameter("noise level".into()))?;
        for p in &mut s2_points {
            *p += Vector3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }

    let outlier_count = (config.outlier_fraction * view2.len() as f64).floor() as usize;
    let offset = config.outlier_offset_fraction * extent;
    for k in 0..outlier_count {
        let base = motion.apply(&view2[k * view2.len() / outlier_count]);
        let jitter = Vector3::new(
            uniform(&mut rng, (-offset, offset)),
            uniform(&mut rng, (-offset, offset)),
            uniform(&mut rng, (-offset, offset)),
        );
        s2_points.push(base + jitter);
    }

    Ok(SyntheticPair {
        s1,
        s2: PointCloud::new(format!("{}-s2", mesh.id), s2_points),
        s2_clean,
        outlier_count,
        ground_truth,
        config: *config,
    })
}
